//! Running a corpus: group equality, closed forms, conditionals, ghost zeros,
//! constant-term cross-checks and recurrences, with per-record verdicts.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::arith::{format_rational, Rational};
use crate::corpus::{Condition, FormulaRecord, GhostKind, IdentityGroup, RecordKind};
use crate::dsl::Expr;
use crate::eval::{eval_range, harmonic_cy_coefficients, EvalOptions};
use crate::laurent::{ct_power_with, ct_sequence, CtSpec};
use crate::theta::{apply_twist, check_twisted, Twist, TwistMode};

/// Largest `n` tested per record type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ranges {
    pub single: i64,
    pub double: i64,
    pub triple: i64,
    pub closed: i64,
    /// Closed forms whose sums are single.
    pub closed_single: i64,
    pub conditional: i64,
    pub ghost: i64,
    pub ct: i64,
    /// Constant terms with power multiplier at least `ct_high_multiplier`.
    pub ct_high: i64,
    pub ct_high_multiplier: u32,
    pub rec: i64,
    /// Upper bound applied after per-record `nmax` overrides.
    pub cap: Option<i64>,
}

impl Default for Ranges {
    fn default() -> Self {
        Ranges {
            single: 16,
            double: 10,
            triple: 8,
            closed: 8,
            closed_single: 10,
            conditional: 12,
            ghost: 12,
            ct: 4,
            ct_high: 3,
            ct_high_multiplier: 3,
            rec: 20,
            cap: None,
        }
    }
}

impl Ranges {
    /// Every maximum replaced by `n`.
    pub fn uniform(n: i64) -> Self {
        Ranges {
            single: n,
            double: n,
            triple: n,
            closed: n,
            closed_single: n,
            conditional: n,
            ghost: n,
            ct: n,
            ct_high: n,
            ct_high_multiplier: 3,
            rec: n,
            cap: Some(n),
        }
    }

    pub fn for_arity(&self, arity: usize) -> i64 {
        match arity {
            0 | 1 => self.single,
            2 => self.double,
            _ => self.triple,
        }
    }

    pub fn for_ct(&self, spec: &CtSpec) -> i64 {
        if spec.multiplier >= self.ct_high_multiplier {
            self.ct_high
        } else {
            self.ct
        }
    }
}

/// Which records to run. `None` means no restriction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    pub items: Option<BTreeSet<String>>,
    /// Record kind tags: member, ghost, ct, closed, conditional, rec.
    pub kinds: Option<BTreeSet<String>>,
}

impl Filter {
    fn item(&self, id: &str) -> bool {
        self.items.as_ref().is_none_or(|s| s.contains(id))
    }

    fn kind(&self, tag: &str) -> bool {
        self.kinds.as_ref().is_none_or(|s| s.contains(tag))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Agree {
        twist: Twist,
    },
    Mismatch {
        first_n: i64,
        lhs: Rational,
        rhs: Rational,
    },
    ZeroConfirmed,
    ClosedFormConfirmed,
    ConditionConfirmed,
    RecurrenceSatisfied(Twist),
    SkippedDivergent,
    /// Evaluated with nothing to compare against; the leading values.
    Reported(Vec<Rational>),
    /// Constant term with no binomial member: normalization and pruning checks hold.
    CtConsistent,
    Error(String),
}

impl Verdict {
    pub fn bucket(&self) -> &'static str {
        match self {
            Verdict::Agree { .. } => "agree",
            Verdict::Mismatch { .. } => "mismatch",
            Verdict::ZeroConfirmed => "zero-confirmed",
            Verdict::ClosedFormConfirmed => "closed-form-confirmed",
            Verdict::ConditionConfirmed => "condition-confirmed",
            Verdict::RecurrenceSatisfied(_) => "recurrence-satisfied",
            Verdict::SkippedDivergent => "skipped-divergent",
            Verdict::Reported(_) => "reported",
            Verdict::CtConsistent => "ct-consistent",
            Verdict::Error(_) => "error",
        }
    }

    pub const BUCKETS: [&'static str; 10] = [
        "agree",
        "mismatch",
        "zero-confirmed",
        "closed-form-confirmed",
        "condition-confirmed",
        "recurrence-satisfied",
        "skipped-divergent",
        "reported",
        "ct-consistent",
        "error",
    ];

    pub fn is_mismatch(&self) -> bool {
        matches!(self, Verdict::Mismatch { .. })
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Verdict::Error(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Agree {
                twist: Twist::Plain,
            } => f.write_str("agree"),
            Verdict::Agree { twist } => write!(f, "agree (twist {twist})"),
            Verdict::Mismatch { first_n, lhs, rhs } => write!(
                f,
                "mismatch at n={first_n}: {} vs {}",
                format_rational(lhs),
                format_rational(rhs)
            ),
            Verdict::RecurrenceSatisfied(t) => write!(f, "recurrence-satisfied (twist {t})"),
            Verdict::Reported(values) => {
                let shown: Vec<String> = values.iter().take(6).map(format_rational).collect();
                write!(f, "reported [{}]", shown.join(", "))
            }
            Verdict::Error(e) => write!(f, "error: {e}"),
            other => f.write_str(other.bucket()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordResult {
    pub item_id: String,
    pub label: String,
    pub line: usize,
    pub tag: &'static str,
    pub verdict: Verdict,
    pub typo_suspect: bool,
    /// Inclusive range of `n` that was evaluated.
    pub n_range: Option<(i64, i64)>,
    pub advisories: Vec<String>,
    pub elapsed: Duration,
}

impl RecordResult {
    /// Mismatch or error on a record not flagged as a suspected typo.
    pub fn is_unexpected(&self) -> bool {
        !self.typo_suspect && (self.verdict.is_mismatch() || self.verdict.is_error())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub results: Vec<RecordResult>,
}

impl Report {
    /// `(bucket, count)` for every bucket, in a fixed order.
    pub fn totals(&self) -> Vec<(&'static str, usize)> {
        Verdict::BUCKETS
            .iter()
            .map(|b| {
                (
                    *b,
                    self.results
                        .iter()
                        .filter(|r| r.verdict.bucket() == *b)
                        .count(),
                )
            })
            .collect()
    }

    pub fn unexpected(&self) -> impl Iterator<Item = &RecordResult> {
        self.results.iter().filter(|r| r.is_unexpected())
    }

    /// 0 when clean, 1 on an unexpected mismatch, 2 on an unexpected error.
    pub fn exit_code(&self) -> i32 {
        if self.unexpected().any(|r| r.verdict.is_error()) {
            2
        } else if self.unexpected().next().is_some() {
            1
        } else {
            0
        }
    }

    pub fn to_tsv(&self, timing: bool) -> String {
        let mut out = String::from("item\tlabel\tkind\tverdict\tdetail\tn_range\tflags");
        if timing {
            out.push_str("\tms");
        }
        out.push('\n');
        for r in &self.results {
            let detail = match &r.verdict {
                Verdict::Agree { twist } => format!("twist={twist}"),
                Verdict::RecurrenceSatisfied(t) => format!("twist={t}"),
                Verdict::Mismatch { first_n, lhs, rhs } => format!(
                    "n={first_n} lhs={} rhs={}",
                    format_rational(lhs),
                    format_rational(rhs)
                ),
                Verdict::Reported(v) => v
                    .iter()
                    .take(6)
                    .map(format_rational)
                    .collect::<Vec<_>>()
                    .join(","),
                Verdict::Error(e) => e.clone(),
                _ => String::new(),
            };
            let range = r
                .n_range
                .map(|(a, b)| format!("{a}..{b}"))
                .unwrap_or_default();
            let mut flags = Vec::new();
            if r.typo_suspect {
                flags.push("typo-suspect".to_string());
            }
            flags.extend(r.advisories.iter().cloned());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.item_id,
                r.label,
                r.tag,
                r.verdict.bucket(),
                detail,
                range,
                flags.join(";")
            ));
            if timing {
                out.push_str(&format!("\t{}", r.elapsed.as_millis()));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for r in &self.results {
            if current != Some(r.item_id.as_str()) {
                out.push_str(&format!("item {}\n", r.item_id));
                current = Some(r.item_id.as_str());
            }
            let range = r
                .n_range
                .map(|(a, b)| format!("n={a}..{b}"))
                .unwrap_or_default();
            let mut notes = Vec::new();
            if r.typo_suspect {
                notes.push("typo-suspect".to_string());
            }
            notes.extend(r.advisories.iter().cloned());
            let notes = if notes.is_empty() {
                String::new()
            } else {
                format!("  [{}]", notes.join("; "))
            };
            out.push_str(&format!(
                "  {:<16} {:<12} {:<10} {}{}  ({} ms)\n",
                r.label,
                r.tag,
                range,
                r.verdict,
                notes,
                r.elapsed.as_millis()
            ));
        }
        out.push_str("totals:");
        for (b, c) in self.totals() {
            if c > 0 {
                out.push_str(&format!(" {b}={c}"));
            }
        }
        let typo = self
            .results
            .iter()
            .filter(|r| r.typo_suspect && (r.verdict.is_mismatch() || r.verdict.is_error()))
            .count();
        let unexpected = self.unexpected().count();
        out.push_str(&format!(
            "\nunexpected: {unexpected}; typo-suspect failures: {typo}\n"
        ));
        out
    }
}

fn result(g: &IdentityGroup, r: &FormulaRecord, verdict: Verdict) -> RecordResult {
    let mut advisories = Vec::new();
    if let Some(d) = &r.duplicate_of {
        advisories.push(format!("duplicate of {d}"));
    }
    RecordResult {
        item_id: g.item_id.clone(),
        label: r.label.clone(),
        line: r.line,
        tag: r.kind.tag(),
        verdict,
        typo_suspect: r.flags.typo_suspect,
        n_range: None,
        advisories,
        elapsed: Duration::ZERO,
    }
}

fn opts(r: &FormulaRecord) -> EvalOptions {
    EvalOptions {
        skip_singular: r.flags.skip_singular,
    }
}

fn non_integral(values: &[Rational]) -> bool {
    values.iter().any(|v| !v.is_integer())
}

/// A record's own `nmax` replaces the default; `ranges.cap` bounds both.
fn range_for(r: &FormulaRecord, default_max: i64, ranges: &Ranges) -> (i64, i64) {
    let hi = r.n_max.unwrap_or(default_max);
    (r.n_min.unwrap_or(0), ranges.cap.map_or(hi, |c| hi.min(c)))
}

/// Values of `e` on `lo..=hi`, or an error verdict.
#[allow(clippy::result_large_err)]
fn sequence(e: &Expr, lo: i64, hi: i64, r: &FormulaRecord) -> Result<Vec<Rational>, Verdict> {
    eval_range(e, lo, hi, opts(r)).map_err(|err| Verdict::Error(err.to_string()))
}

/// Compare `got` with `want` on their common `n`, both starting at their own `lo`.
fn compare_twisted(got: &Series, want: &Series) -> Verdict {
    let lo = got.lo.max(want.lo);
    let hi = got.hi().min(want.hi());
    let plain = (lo..=hi).find(|&n| at(got, n) != at(want, n));
    let Some(first_n) = plain else {
        return Verdict::Agree {
            twist: Twist::Plain,
        };
    };
    let twisted = (lo..=hi).all(|n| {
        if n % 2 == 0 {
            at(got, n) == at(want, n)
        } else {
            *at(got, n) == -at(want, n)
        }
    });
    if twisted {
        Verdict::Agree {
            twist: Twist::Alternating,
        }
    } else {
        Verdict::Mismatch {
            first_n,
            lhs: at(got, first_n).clone(),
            rhs: at(want, first_n).clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Series {
    lo: i64,
    values: Vec<Rational>,
}

fn at(s: &Series, n: i64) -> &Rational {
    &s.values[(n - s.lo) as usize]
}

impl Series {
    fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }
}

/// Verify one group: members against a reference member, ghosts, CT
/// cross-checks, closed forms and recurrences, in corpus order.
pub fn verify_group(g: &IdentityGroup, ranges: &Ranges, filter: &Filter) -> Vec<RecordResult> {
    if !filter.item(&g.item_id) {
        return Vec::new();
    }
    let wanted = |r: &FormulaRecord| filter.kind(r.kind.tag());
    let need_members = g
        .records
        .iter()
        .any(|r| wanted(r) && matches!(r.kind, RecordKind::Member(_) | RecordKind::Ct(_)));
    // Member sequences, evaluated in parallel.
    let member_runs: Vec<Option<(Result<Series, Verdict>, Duration)>> = g
        .records
        .par_iter()
        .map(|r| match &r.kind {
            RecordKind::Member(e) if need_members => {
                let start = Instant::now();
                let (lo, hi) = range_for(r, ranges.for_arity(e.arity()), ranges);
                let s = sequence(e, lo, hi, r).map(|values| Series { lo, values });
                Some((s, start.elapsed()))
            }
            _ => None,
        })
        .collect();
    let ok_members: Vec<(usize, &Series)> = member_runs
        .iter()
        .enumerate()
        .filter_map(|(i, m)| match m {
            Some((Ok(s), _)) => Some((i, s)),
            _ => None,
        })
        .collect();
    // Reference: the member most others agree with (up to sign, then exactly),
    // then the longest-running, then the first. Typo-suspect members only count when nothing else ran.
    let pick = |allow_typo: bool| {
        let candidates: Vec<(usize, &Series)> = ok_members
            .iter()
            .filter(|(i, _)| allow_typo || !g.records[*i].flags.typo_suspect)
            .map(|&(i, s)| (i, s))
            .collect();
        candidates
            .iter()
            .map(|&(i, s)| {
                let verdicts: Vec<Verdict> = candidates
                    .iter()
                    .map(|(_, t)| compare_twisted(t, s))
                    .collect();
                let votes = verdicts
                    .iter()
                    .filter(|v| matches!(v, Verdict::Agree { .. }))
                    .count();
                let plain = verdicts
                    .iter()
                    .filter(|v| {
                        matches!(
                            v,
                            Verdict::Agree {
                                twist: Twist::Plain
                            }
                        )
                    })
                    .count();
                ((votes, plain), s.hi(), i, s)
            })
            .fold(
                None,
                |best: Option<((usize, usize), i64, usize, &Series)>, c| match best {
                    Some(b) if (b.0, b.1) >= (c.0, c.1) => Some(b),
                    _ => Some(c),
                },
            )
            .map(|(_, _, i, s)| (i, s))
    };
    let reference = pick(false).or_else(|| pick(true));
    // First evaluatable binomial member, used for CT cross-checks.
    let first_member = ok_members
        .iter()
        .find(|(i, _)| !g.records[*i].flags.typo_suspect)
        .or_else(|| ok_members.first())
        .copied();
    let claim = ok_members.len() >= 2;

    let mut out = Vec::new();
    for (i, r) in g.records.iter().enumerate() {
        if !wanted(r) {
            continue;
        }
        let start = Instant::now();
        let mut res = match &r.kind {
            RecordKind::Member(_) => {
                let (run, took) = member_runs[i].as_ref().expect("member evaluated");
                let mut res = match run {
                    Err(v) => result(g, r, v.clone()),
                    Ok(s) => {
                        let verdict = match reference {
                            Some((ri, rs)) if claim && ri != i => compare_twisted(s, rs),
                            Some((ri, _)) if claim && ri == i => Verdict::Agree {
                                twist: Twist::Plain,
                            },
                            _ => Verdict::Reported(s.values.clone()),
                        };
                        let mut res = result(g, r, verdict);
                        res.n_range = Some((s.lo, s.hi()));
                        if non_integral(&s.values) {
                            res.advisories.push("non-integral".into());
                        }
                        if claim && reference.is_some_and(|(ri, _)| ri == i) {
                            res.advisories.push("reference".into());
                        }
                        res
                    }
                };
                res.elapsed = *took;
                out.push(res);
                continue;
            }
            RecordKind::Ghost { kind, expr } => verify_ghost(g, r, *kind, expr.as_ref(), ranges),
            RecordKind::Ct(spec) => verify_ct(g, r, spec, first_member.map(|(_, s)| s), ranges),
            RecordKind::Closed { .. } => verify_closed_in(g, r, ranges),
            RecordKind::Rec {
                operator,
                b,
                c,
                twist,
            } => {
                let mut res = result(g, r, Verdict::Error(String::new()));
                res.verdict = match harmonic_cy_coefficients(*b, *c, ranges.rec) {
                    Err(e) => Verdict::Error(e.to_string()),
                    Ok(seq) => {
                        let rec = operator.to_recurrence();
                        let (t, report) = check_twisted(&rec, &seq, *twist);
                        match report.failures.first() {
                            None => Verdict::RecurrenceSatisfied(t),
                            Some((m, residual)) => Verdict::Mismatch {
                                first_n: *m as i64,
                                lhs: residual.clone(),
                                rhs: Rational::zero(),
                            },
                        }
                    }
                };
                res.n_range = Some((0, ranges.rec));
                res
            }
        };
        res.elapsed = start.elapsed();
        out.push(res);
    }
    out
}

fn verify_ghost(
    g: &IdentityGroup,
    r: &FormulaRecord,
    kind: GhostKind,
    expr: Option<&Expr>,
    ranges: &Ranges,
) -> RecordResult {
    let e = match (kind, expr) {
        (GhostKind::Divergent, _) => return result(g, r, Verdict::SkippedDivergent),
        (_, Some(e)) => e,
        (_, None) => return result(g, r, Verdict::Error("ghost has no expression".into())),
    };
    let (lo, hi) = range_for(r, ranges.ghost, ranges);
    let values = match sequence(e, lo, hi, r) {
        Ok(v) => v,
        Err(v) => return result(g, r, v),
    };
    let verdict = match kind {
        GhostKind::ZeroExpected => match values.iter().position(|v| !v.is_zero()) {
            None => Verdict::ZeroConfirmed,
            Some(p) => Verdict::Mismatch {
                first_n: lo + p as i64,
                lhs: values[p].clone(),
                rhs: Rational::zero(),
            },
        },
        _ => Verdict::Reported(values),
    };
    let mut res = result(g, r, verdict);
    res.n_range = Some((lo, hi));
    res
}

fn verify_ct(
    g: &IdentityGroup,
    r: &FormulaRecord,
    spec: &CtSpec,
    member: Option<&Series>,
    ranges: &Ranges,
) -> RecordResult {
    let (lo, hi) = range_for(r, ranges.for_ct(spec), ranges);
    let hi = member.map_or(hi, |m| hi.min(m.hi()));
    if hi < 0 {
        return result(g, r, Verdict::Error("empty range".into()));
    }
    let values: Vec<Rational> = ct_sequence(spec, hi as u32)
        .into_iter()
        .skip(lo.max(0) as usize)
        .map(Rational::from_integer)
        .collect();
    let got = Series { lo, values };
    let verdict = match member {
        Some(m) => compare_twisted(&got, m),
        None => {
            let normalized = lo > 0 || got.values.first().is_some_and(|v| v.is_one());
            let pruning = (0..=hi.min(2) as u32)
                .all(|n| ct_power_with(spec, n, true) == ct_power_with(spec, n, false));
            // A constant term that vanishes for every n >= 1 cannot be a series
            // of the kind the corpus describes.
            let degenerate = hi >= 1
                && got
                    .values
                    .iter()
                    .zip(lo..)
                    .all(|(v, n)| n < 1 || v.is_zero());
            if !normalized {
                Verdict::Mismatch {
                    first_n: 0,
                    lhs: got.values[0].clone(),
                    rhs: Rational::one(),
                }
            } else if degenerate {
                Verdict::Error("constant term vanishes for every n >= 1".into())
            } else if !pruning {
                Verdict::Error("pruned and unpruned constant terms differ".into())
            } else {
                Verdict::CtConsistent
            }
        }
    };
    let mut res = result(g, r, verdict);
    res.n_range = Some((lo, hi));
    res
}

fn verify_closed_in(g: &IdentityGroup, r: &FormulaRecord, ranges: &Ranges) -> RecordResult {
    let mut res = verify_closed_form(r, ranges);
    res.item_id = g.item_id.clone();
    res
}

/// Check `lhs == rhs` on the record's range; with a condition, `lhs` must
/// equal the stated alternative where the condition fails.
pub fn verify_closed_form(r: &FormulaRecord, ranges: &Ranges) -> RecordResult {
    let start = Instant::now();
    let mut res = RecordResult {
        item_id: String::new(),
        label: r.label.clone(),
        line: r.line,
        tag: r.kind.tag(),
        verdict: Verdict::Error("not a closed form".into()),
        typo_suspect: r.flags.typo_suspect,
        n_range: None,
        advisories: r
            .duplicate_of
            .iter()
            .map(|d| format!("duplicate of {d}"))
            .collect(),
        elapsed: Duration::ZERO,
    };
    let RecordKind::Closed {
        lhs,
        rhs,
        condition,
    } = &r.kind
    else {
        return res;
    };
    let default_max = match condition {
        Some(_) => ranges.conditional,
        None if lhs.arity().max(rhs.arity()) <= 1 => ranges.closed_single,
        None => ranges.closed,
    };
    let (lo, hi) = range_for(r, default_max, ranges);
    res.n_range = Some((lo, hi));
    res.verdict = match closed_values(lhs, rhs, condition.as_ref(), lo, hi, r) {
        Err(v) => v,
        Ok((l, want)) => {
            if non_integral(&l) || non_integral(&want) {
                res.advisories.push("non-integral".into());
            }
            match (0..l.len()).find(|&p| l[p] != want[p]) {
                Some(p) => Verdict::Mismatch {
                    first_n: lo + p as i64,
                    lhs: l[p].clone(),
                    rhs: want[p].clone(),
                },
                None if condition.is_some() => Verdict::ConditionConfirmed,
                None => Verdict::ClosedFormConfirmed,
            }
        }
    };
    res.elapsed = start.elapsed();
    res
}

/// Left side and expected values on `lo..=hi`. The right side is only
/// evaluated where the condition holds.
#[allow(clippy::result_large_err)]
fn closed_values(
    lhs: &Expr,
    rhs: &Expr,
    condition: Option<&Condition>,
    lo: i64,
    hi: i64,
    r: &FormulaRecord,
) -> Result<(Vec<Rational>, Vec<Rational>), Verdict> {
    let l = sequence(lhs, lo, hi, r)?;
    let want = match condition {
        None => sequence(rhs, lo, hi, r)?,
        Some(c) => (lo..=hi)
            .into_par_iter()
            .map(|n| {
                let e = if c.holds(n) { rhs } else { &c.otherwise };
                sequence(e, n, n, r).map(|mut v| v.remove(0))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok((l, want))
}

/// Run every group through [`verify_group`]; results come back in corpus order.
pub fn verify_all(groups: &[IdentityGroup], ranges: &Ranges, filter: &Filter) -> Report {
    let results: Vec<Vec<RecordResult>> = groups
        .par_iter()
        .map(|g| verify_group(g, ranges, filter))
        .collect();
    Report {
        results: results.into_iter().flatten().collect(),
    }
}

/// The sequence a twist maps `values` to; exposed for reports and tests.
pub fn twisted(values: &[Rational], twist: Twist) -> Vec<Rational> {
    apply_twist(values, twist)
}

/// Twist mode override for every recurrence record.
pub fn with_twist(groups: &mut [IdentityGroup], mode: TwistMode) {
    for g in groups {
        for r in &mut g.records {
            if let RecordKind::Rec { twist, .. } = &mut r.kind {
                *twist = mode;
            }
        }
    }
}
