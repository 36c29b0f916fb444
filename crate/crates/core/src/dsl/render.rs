use num_traits::Signed;

use super::Expr;

const EXPR: u8 = 0;
const TERM: u8 = 1;
const FACTOR: u8 = 2;
const ATOM: u8 = 3;

/// Print an expression in the concrete syntax, with only the parentheses
/// needed for it to parse back to the same tree.
pub fn render(e: &Expr) -> String {
    let mut out = String::new();
    write(e, EXPR, &mut out);
    out
}

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => EXPR,
        Expr::Mul(..) | Expr::Div(..) => TERM,
        Expr::Neg(_) | Expr::Pow(..) => FACTOR,
        _ => ATOM,
    }
}

fn write(e: &Expr, ctx: u8, out: &mut String) {
    if level(e) < ctx {
        out.push('(');
        write(e, EXPR, out);
        out.push(')');
        return;
    }
    match e {
        Expr::Int(v) if v.is_negative() => {
            out.push_str(&format!("({v})"));
        }
        Expr::Int(v) => out.push_str(&v.to_string()),
        Expr::Var(n) => out.push(n.as_char()),
        Expr::Add(a, b) => binary(a, " + ", b, EXPR, TERM, out),
        Expr::Sub(a, b) => binary(a, " - ", b, EXPR, TERM, out),
        Expr::Mul(a, b) => binary(a, "*", b, TERM, FACTOR, out),
        Expr::Div(a, b) => binary(a, "/", b, TERM, FACTOR, out),
        Expr::Neg(inner) => {
            out.push('-');
            match inner.as_ref() {
                // "-3" would read back as a literal
                Expr::Int(v) if !v.is_negative() => out.push_str(&format!("({v})")),
                Expr::Pow(..) => write(inner, FACTOR, out),
                _ => write(inner, ATOM, out),
            }
        }
        Expr::Pow(base, exp) => {
            write(base, ATOM, out);
            out.push('^');
            match exp.as_ref() {
                Expr::Int(v) => out.push_str(&v.to_string()),
                other => {
                    out.push('(');
                    write(other, EXPR, out);
                    out.push(')');
                }
            }
        }
        Expr::Fact(a) => call("fact", &[a], out),
        Expr::Harmonic(a) => call("H", &[a], out),
        Expr::Binom(a, b) => call("binom", &[a, b], out),
        Expr::IDiv(a, b) => call("idiv", &[a, b], out),
        Expr::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            out.push_str(&format!("sum({index}="));
            write(lo, EXPR, out);
            out.push_str("..");
            write(hi, EXPR, out);
            out.push_str(", ");
            write(body, EXPR, out);
            out.push(')');
        }
        Expr::SumC {
            indices,
            total,
            body,
        } => {
            let names: Vec<String> = indices.iter().map(|n| n.to_string()).collect();
            out.push_str(&format!("sumc({}=", names.join("+")));
            write(total, EXPR, out);
            out.push_str(", ");
            write(body, EXPR, out);
            out.push(')');
        }
    }
}

fn binary(a: &Expr, op: &str, b: &Expr, left: u8, right: u8, out: &mut String) {
    write(a, left, out);
    out.push_str(op);
    write(b, right, out);
}

fn call(name: &str, args: &[&Expr], out: &mut String) {
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write(a, EXPR, out);
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Name};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_parentheses() {
        for src in [
            "sum(k=0..n, binom(n, k)^2*binom(n + k, k))",
            "fact(3*n)/fact(n)^3",
            "a - (b - c)",
            "a/(b*c)",
            "(-3)^2",
            "-3^2",
            "-(3)",
            "2^-3",
            "(a + b)^(n - 1)",
            "(a^2)^3",
            "a*-b",
            "sumc(i+j=n, H(i) - H(j))",
        ] {
            let e = parse(src).unwrap();
            assert_eq!(render(&e), src);
        }
    }

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (-20i64..60).prop_map(Expr::int),
            prop::sample::select(vec!['n', 'k', 'j', 'i', 'x']).prop_map(Expr::var),
        ]
    }

    fn combine(inner: BoxedStrategy<Expr>, exps: BoxedStrategy<Expr>) -> BoxedStrategy<Expr> {
        let b = Box::new;
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Add(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Sub(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Mul(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Div(b(x), b(y))),
            (inner.clone(), exps).prop_map(move |(x, y)| Expr::Pow(b(x), b(y))),
            inner.clone().prop_map(move |x| Expr::Fact(b(x))),
            inner.clone().prop_map(move |x| Expr::Harmonic(b(x))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Binom(b(x), b(y))),
            (inner.clone(), inner).prop_map(move |(x, y)| Expr::IDiv(b(x), b(y))),
        ]
        .boxed()
    }

    fn plain() -> BoxedStrategy<Expr> {
        leaf()
            .prop_recursive(4, 24, 2, |inner| {
                let inner = inner.boxed();
                combine(inner.clone(), inner)
            })
            .boxed()
    }

    fn full() -> BoxedStrategy<Expr> {
        leaf()
            .prop_recursive(5, 40, 2, |inner| {
                let inner = inner.boxed();
                let idx = prop::sample::select(vec!['i', 'j', 'k']);
                prop_oneof![
                    3 => combine(inner.clone(), plain()),
                    1 => (idx.clone(), plain(), plain(), inner.clone()).prop_map(|(c, lo, hi, body)| {
                        Expr::Sum {
                            index: Name::new(c).unwrap(),
                            lo: Box::new(lo),
                            hi: Box::new(hi),
                            body: Box::new(body),
                        }
                    }),
                    1 => (plain(), inner).prop_map(|(total, body)| Expr::SumC {
                        indices: vec![Name::new('p').unwrap(), Name::new('q').unwrap()],
                        total: Box::new(total),
                        body: Box::new(body),
                    }),
                ]
            })
            .boxed()
    }

    /// Rename any index that shadows an enclosing one to a fresh letter.
    fn freshen(e: &Expr, scope: &mut Vec<Name>, next: &mut u8) -> Expr {
        let mut fresh = |scope: &Vec<Name>| loop {
            let c = Name::new(char::from(b'a' + *next % 26)).unwrap();
            *next += 1;
            if !scope.contains(&c) && !matches!(c.as_char(), 'n' | 'x') {
                return c;
            }
        };
        match e {
            Expr::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let mut index = *index;
                let mut body = body.as_ref().clone();
                if scope.contains(&index) {
                    let c = fresh(scope);
                    body = body.substitute(index, &Expr::Var(c));
                    index = c;
                }
                scope.push(index);
                let body = freshen(&body, scope, next);
                scope.pop();
                Expr::Sum {
                    index,
                    lo: lo.clone(),
                    hi: hi.clone(),
                    body: Box::new(body),
                }
            }
            Expr::SumC {
                indices,
                total,
                body,
            } => {
                let mut body = body.as_ref().clone();
                let mut names = Vec::new();
                for &ix in indices {
                    let mut ix = ix;
                    if scope.contains(&ix) || names.contains(&ix) {
                        let mut all = scope.clone();
                        all.extend(names.iter().copied());
                        let c = fresh(&all);
                        body = body.substitute(ix, &Expr::Var(c));
                        ix = c;
                    }
                    names.push(ix);
                }
                let depth = scope.len();
                scope.extend(names.iter().copied());
                let body = freshen(&body, scope, next);
                scope.truncate(depth);
                Expr::SumC {
                    indices: names,
                    total: total.clone(),
                    body: Box::new(body),
                }
            }
            Expr::Neg(a) => Expr::Neg(Box::new(freshen(a, scope, next))),
            Expr::Fact(a) => Expr::Fact(Box::new(freshen(a, scope, next))),
            Expr::Harmonic(a) => Expr::Harmonic(Box::new(freshen(a, scope, next))),
            Expr::Add(a, b) => Expr::Add(
                Box::new(freshen(a, scope, next)),
                Box::new(freshen(b, scope, next)),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(freshen(a, scope, next)),
                Box::new(freshen(b, scope, next)),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(freshen(a, scope, next)),
                Box::new(freshen(b, scope, next)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(freshen(a, scope, next)),
                Box::new(freshen(b, scope, next)),
            ),
            Expr::Pow(a, b) => Expr::Pow(Box::new(freshen(a, scope, next)), b.clone()),
            Expr::Binom(a, b) => Expr::Binom(
                Box::new(freshen(a, scope, next)),
                Box::new(freshen(b, scope, next)),
            ),
            Expr::IDiv(a, b) => Expr::IDiv(
                Box::new(freshen(a, scope, next)),
                Box::new(freshen(b, scope, next)),
            ),
            Expr::Int(_) | Expr::Var(_) => e.clone(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]
        #[test]
        fn round_trip(e in full()) {
            let e = freshen(&e, &mut Vec::new(), &mut 0);
            let text = render(&e);
            let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert_eq!(back, e, "rendered as {}", text);
        }
    }
}
