use std::path::PathBuf;

use cyverify::arith::{rat, Rational};
use cyverify::corpus::{inventory, load_corpus, parse_corpus};
use cyverify::dsl::parse;
use cyverify::eval::{eval_range, eval_sequence, EvalOptions};
use cyverify::harness::{verify_all, Filter, Ranges, Verdict};
use cyverify::laurent::{ct_sequence, parse_laurent, CtSpec};
use cyverify::theta::{check_twisted, parse_theta, Twist, TwistMode};

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/paper.cyid")
}

#[test]
fn bundled_corpus_inventory() {
    let groups = load_corpus(bundled()).unwrap();
    assert!(groups.len() >= 90, "{} groups", groups.len());
    let count = |tag: &str| {
        inventory(&groups)
            .into_iter()
            .find(|(t, _)| *t == tag)
            .map_or(0, |(_, c)| c)
    };
    assert!(count("ct") >= 28);
    assert!(count("closed") >= 130);
    assert!(count("conditional") >= 11);
    assert_eq!(count("rec"), 4);
    let mut ids: Vec<&str> = groups.iter().map(|g| g.item_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), groups.len(), "item ids are unique");
}

#[test]
fn bundled_corpus_has_no_unexpected_failures() {
    let groups = load_corpus(bundled()).unwrap();
    let report = verify_all(&groups, &Ranges::uniform(5), &Filter::default());
    let unexpected: Vec<String> = report.unexpected().map(|r| r.label.clone()).collect();
    assert!(unexpected.is_empty(), "{unexpected:?}");
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn constant_term_matches_binomial_sum() {
    // ct((x + 1/x + y + 1/y)^(2n)) = binom(2n,n)^2
    let spec = CtSpec::new(parse_laurent("x + 1/x + y + 1/y").unwrap(), 2);
    let ct = ct_sequence(&spec, 5);
    let sum = parse("sum(k=0..n, fact(2*n)/(fact(k)^2*fact(n-k)^2))").unwrap();
    let values = eval_sequence(&sum, 5).unwrap();
    for n in 0..=5 {
        assert_eq!(Rational::from_integer(ct[n].clone()), values[n]);
    }
}

#[test]
fn apery_numbers_satisfy_their_operator() {
    let e = parse("sum(k=0..n, binom(n,k)^2*binom(n+k,k)^2)").unwrap();
    let seq = eval_sequence(&e, 15).unwrap();
    let op = parse_theta("T^3 - z*(2*T + 1)*(17*T^2 + 17*T + 5) + z^2*(T + 1)^3").unwrap();
    let (t, report) = check_twisted(&op.to_recurrence(), &seq, TwistMode::Auto);
    assert!(report.passed());
    assert_eq!(t, Twist::Plain);
    let alt = parse_theta("T^3 + z*(2*T + 1)*(17*T^2 + 17*T + 5) + z^2*(T + 1)^3").unwrap();
    let (t, report) = check_twisted(&alt.to_recurrence(), &seq, TwistMode::Auto);
    assert!(report.passed());
    assert_eq!(t, Twist::Alternating);
}

#[test]
fn family_and_condition_records_round_trip_through_harness() {
    let groups = parse_corpus(
        "item f\n\
         closed f.1 family:k=1,2,3 :: sum(j=0..n, binom(n,j)*k^(j)) == (k+1)^(n)\n\
         closed f.2 :: sum(j=0..n, (-1)^(j)*binom(n,j)^2) == (-1)^(idiv(n,2))*binom(n,idiv(n,2)) when n % 2 == 0 else 0\n",
    )
    .unwrap();
    let report = verify_all(&groups, &Ranges::default(), &Filter::default());
    let labels: Vec<&str> = report.results.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["f.1[k=1]", "f.1[k=2]", "f.1[k=3]", "f.2"]);
    assert!(report.results[..3]
        .iter()
        .all(|r| r.verdict == Verdict::ClosedFormConfirmed));
    assert_eq!(report.results[3].verdict, Verdict::ConditionConfirmed);
}

#[test]
fn generalized_binomial_with_negative_top() {
    let e = parse("binom(-(1/2), n)*(-4)^(n)").unwrap();
    let got = eval_range(&e, 0, 6, EvalOptions::default()).unwrap();
    let want: Vec<Rational> = [1, 2, 6, 20, 70, 252, 924]
        .iter()
        .map(|&v| rat(v))
        .collect();
    assert_eq!(got, want);
}
