//! Formula language: AST, parser and printer.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := '-'? atom ('^' exponent)?
//! exponent := signed-integer | '(' expr ')'
//! atom     := integer | name | '(' expr ')'
//!           | 'binom(' expr ',' expr ')' | 'fact(' expr ')' | 'H(' expr ')'
//!           | 'idiv(' expr ',' expr ')'
//!           | 'sum(' name '=' expr '..' expr ',' expr ')'
//!           | 'sumc(' name ('+' name)+ '=' expr ',' expr ')'
//! ```
//!
//! A `-` written directly in front of an integer literal that is not raised
//! to a power is folded into a negative literal, so `(-3)` parses to
//! `Int(-3)` while `-3^2` stays `Neg(Pow(3, 2))`.

mod parse;
mod render;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

pub use parse::{parse, ParseError, ParseErrorKind};
pub use render::render;

/// A variable name: one lowercase ASCII letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(char);

impl Name {
    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_lowercase().then_some(Name(c))
    }

    pub fn as_char(self) -> char {
        self.0
    }

    pub(crate) fn slot(self) -> usize {
        (self.0 as u8 - b'a') as usize
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(BigInt),
    Var(Name),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Fact(Box<Expr>),
    Binom(Box<Expr>, Box<Expr>),
    Harmonic(Box<Expr>),
    /// Floor division of integers.
    IDiv(Box<Expr>, Box<Expr>),
    Sum {
        index: Name,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
    /// Sum over all compositions `indices[0] + ... = total` into nonnegative parts.
    SumC {
        indices: Vec<Name>,
        total: Box<Expr>,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn int(v: i64) -> Self {
        Expr::Int(BigInt::from(v))
    }

    pub fn var(c: char) -> Self {
        Expr::Var(Name::new(c).expect("lowercase variable name"))
    }

    /// Unbound variable names.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    /// Summation depth: a plain sum adds one level, a composition sum over
    /// `d` indices adds `d - 1`, sibling sums take the maximum.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Var(_) => 0,
            Expr::Neg(e) | Expr::Fact(e) | Expr::Harmonic(e) => e.arity(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Binom(a, b)
            | Expr::IDiv(a, b) => a.arity().max(b.arity()),
            Expr::Sum { body, .. } => 1 + body.arity(),
            Expr::SumC { indices, body, .. } => indices.len().saturating_sub(1) + body.arity(),
        }
    }

    pub(crate) fn contains_sum(&self) -> bool {
        match self {
            Expr::Sum { .. } | Expr::SumC { .. } => true,
            Expr::Int(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Fact(e) | Expr::Harmonic(e) => e.contains_sum(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Binom(a, b)
            | Expr::IDiv(a, b) => a.contains_sum() || b.contains_sum(),
        }
    }

    /// Replace every free occurrence of `name` by `value`.
    pub fn substitute(&self, name: Name, value: &Expr) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(name, value));
        match self {
            Expr::Var(v) if *v == name => value.clone(),
            Expr::Int(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(sub(e)),
            Expr::Fact(e) => Expr::Fact(sub(e)),
            Expr::Harmonic(e) => Expr::Harmonic(sub(e)),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
            Expr::Pow(a, b) => Expr::Pow(sub(a), sub(b)),
            Expr::Binom(a, b) => Expr::Binom(sub(a), sub(b)),
            Expr::IDiv(a, b) => Expr::IDiv(sub(a), sub(b)),
            Expr::Sum {
                index,
                lo,
                hi,
                body,
            } => Expr::Sum {
                index: *index,
                lo: sub(lo),
                hi: sub(hi),
                body: if *index == name {
                    body.clone()
                } else {
                    sub(body)
                },
            },
            Expr::SumC {
                indices,
                total,
                body,
            } => Expr::SumC {
                indices: indices.clone(),
                total: sub(total),
                body: if indices.contains(&name) {
                    body.clone()
                } else {
                    sub(body)
                },
            },
        }
    }
}

fn collect_free(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Int(_) => {}
        Expr::Var(v) => {
            if !bound.contains(v) {
                out.insert(*v);
            }
        }
        Expr::Neg(a) | Expr::Fact(a) | Expr::Harmonic(a) => collect_free(a, bound, out),
        Expr::Add(a, b)
        | Expr::Sub(a, b)
        | Expr::Mul(a, b)
        | Expr::Div(a, b)
        | Expr::Pow(a, b)
        | Expr::Binom(a, b)
        | Expr::IDiv(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Expr::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            collect_free(lo, bound, out);
            collect_free(hi, bound, out);
            bound.push(*index);
            collect_free(body, bound, out);
            bound.pop();
        }
        Expr::SumC {
            indices,
            total,
            body,
        } => {
            collect_free(total, bound, out);
            let depth = bound.len();
            bound.extend(indices.iter().copied());
            collect_free(body, bound, out);
            bound.truncate(depth);
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &str) -> BTreeSet<Name> {
        s.chars().map(|c| Name::new(c).unwrap()).collect()
    }

    #[test]
    fn free_variables() {
        assert_eq!(
            parse("sum(k=0..n, binom(n,k))").unwrap().free_vars(),
            names("n")
        );
        assert_eq!(parse("binom(n,k)").unwrap().free_vars(), names("kn"));
        assert!(parse("7").unwrap().free_vars().is_empty());
        assert_eq!(
            parse("sumc(i+j=n, binom(i,j)*m)").unwrap().free_vars(),
            names("mn")
        );
    }

    #[test]
    fn arity_counts_nesting() {
        assert_eq!(parse("binom(2*n,n)").unwrap().arity(), 0);
        assert_eq!(parse("sum(k=0..n, binom(n,k))").unwrap().arity(), 1);
        assert_eq!(
            parse("sum(i=0..n, sum(j=0..n, binom(i,j)))")
                .unwrap()
                .arity(),
            2
        );
        assert_eq!(parse("sum(i=0..n, 1)*sum(j=0..n, 1)").unwrap().arity(), 1);
        assert_eq!(parse("sumc(i+j+k+l=n, 1)").unwrap().arity(), 3);
    }

    #[test]
    fn substitution_respects_binding() {
        let e = parse("k + sum(k=0..n, k)").unwrap();
        let s = e.substitute(Name::new('k').unwrap(), &Expr::int(2));
        assert_eq!(s, parse("2 + sum(k=0..n, k)").unwrap());
    }
}
