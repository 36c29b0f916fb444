//! Exact evaluation of formula trees.
//!
//! Integer-valued positions (summation bounds, factorial and harmonic
//! arguments, binomial bottoms, exponents) go through a small `i64` path
//! first and only fall back to full rational evaluation when an operand
//! leaves that path.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::arith::{self, ArithError, Rational};
use crate::dsl::{parse, Expr, Name};

/// Integer bindings for variables `a..z`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    slots: [Option<i64>; 26],
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    /// Environment binding only `n`.
    pub fn with_n(n: i64) -> Self {
        let mut env = Self::new();
        env.set(Name::new('n').expect("n"), n);
        env
    }

    pub fn set(&mut self, name: Name, value: i64) {
        self.slots[name.slot()] = Some(value);
    }

    pub fn unset(&mut self, name: Name) {
        self.slots[name.slot()] = None;
    }

    pub fn get(&self, name: Name) -> Option<i64> {
        self.slots[name.slot()]
    }

    fn bindings(&self) -> Vec<(Name, i64)> {
        (b'a'..=b'z')
            .filter_map(|c| {
                let name = Name::new(char::from(c))?;
                self.get(name).map(|v| (name, v))
            })
            .collect()
    }
}

/// Variable assignment at the point an error was raised, printed as `k=2, n=5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<(Name, i64)>);

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("singular term ({reason}) at {at}")]
    SingularTerm { reason: String, at: Assignment },
    #[error("{position} must be an integer, got {value} at {at}")]
    NonIntegerArgument {
        position: &'static str,
        value: String,
        at: Assignment,
    },
    #[error("unbound variable {0}")]
    UnboundVariable(Name),
    #[error("{0}")]
    Domain(String),
}

/// An evaluation error tagged with the `n` it occurred at.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("n={n}: {error}")]
pub struct SequenceError {
    pub n: i64,
    pub error: EvalError,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Drop singular summands from the innermost enclosing sum instead of failing.
    pub skip_singular: bool,
}

pub fn eval(e: &Expr, env: &Env) -> Result<Rational, EvalError> {
    eval_with(e, env, EvalOptions::default())
}

pub fn eval_with(e: &Expr, env: &Env, opts: EvalOptions) -> Result<Rational, EvalError> {
    let mut ev = Evaluator {
        env: env.clone(),
        opts,
    };
    ev.value(e)
}

/// `[e(0), e(1), ..., e(n_max)]`.
pub fn eval_sequence(e: &Expr, n_max: i64) -> Result<Vec<Rational>, SequenceError> {
    eval_range(e, 0, n_max, EvalOptions::default())
}

/// `[e(n_min), ..., e(n_max)]`, computed in parallel and returned in order.
/// On failure the error for the smallest failing `n` is reported.
pub fn eval_range(
    e: &Expr,
    n_min: i64,
    n_max: i64,
    opts: EvalOptions,
) -> Result<Vec<Rational>, SequenceError> {
    let results: Vec<_> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| eval_with(e, &Env::with_n(n), opts).map_err(|error| SequenceError { n, error }))
        .collect();
    results.into_iter().collect()
}

/// Source text of the harmonic-number coefficient formula with exponents `b`, `c`.
pub fn harmonic_cy_formula(b: i64, c: i64) -> String {
    format!(
        "(fact(3*n)/fact(n)^3)^{b}*sum(k=0..n, binom(n,k)^{c}*binom(3*n,n+k)^(-{b})\
         *(1 + k*(-{c}*H(k) + {c}*H(n-k) + {b}*H(n+k) - {b}*H(2*n-k))))"
    )
}

pub fn harmonic_cy_coefficients(
    b: i64,
    c: i64,
    n_max: i64,
) -> Result<Vec<Rational>, SequenceError> {
    let e = parse(&harmonic_cy_formula(b, c)).expect("well-formed built-in formula");
    eval_sequence(&e, n_max)
}

struct Evaluator {
    env: Env,
    opts: EvalOptions,
}

impl Evaluator {
    fn singular(&self, reason: impl Into<String>) -> EvalError {
        EvalError::SingularTerm {
            reason: reason.into(),
            at: Assignment(self.env.bindings()),
        }
    }

    fn var(&self, name: Name) -> Result<i64, EvalError> {
        self.env.get(name).ok_or(EvalError::UnboundVariable(name))
    }

    /// Fast path for index arithmetic; `None` means "use the general path".
    fn small(&self, e: &Expr) -> Option<i64> {
        match e {
            Expr::Int(v) => v.to_i64(),
            Expr::Var(n) => self.env.get(*n),
            Expr::Neg(a) => self.small(a)?.checked_neg(),
            Expr::Add(a, b) => self.small(a)?.checked_add(self.small(b)?),
            Expr::Sub(a, b) => self.small(a)?.checked_sub(self.small(b)?),
            Expr::Mul(a, b) => self.small(a)?.checked_mul(self.small(b)?),
            Expr::IDiv(a, b) => {
                let d = self.small(b)?;
                (d != 0).then(|| self.small(a).map(|x| Integer::div_floor(&x, &d)))?
            }
            _ => None,
        }
    }

    fn integer(&mut self, e: &Expr, position: &'static str) -> Result<i64, EvalError> {
        if let Some(v) = self.small(e) {
            return Ok(v);
        }
        let v = self.value(e)?;
        if !v.is_integer() {
            return Err(EvalError::NonIntegerArgument {
                position,
                value: arith::format_rational(&v),
                at: Assignment(self.env.bindings()),
            });
        }
        v.numer()
            .to_i64()
            .ok_or_else(|| EvalError::Domain(format!("{position} {} out of range", v.numer())))
    }

    fn value(&mut self, e: &Expr) -> Result<Rational, EvalError> {
        match e {
            Expr::Int(v) => Ok(Rational::from_integer(v.clone())),
            Expr::Var(n) => Ok(arith::rat(self.var(*n)?)),
            Expr::Neg(a) => Ok(-self.value(a)?),
            Expr::Add(a, b) => Ok(self.value(a)? + self.value(b)?),
            Expr::Sub(a, b) => Ok(self.value(a)? - self.value(b)?),
            Expr::Mul(a, b) => Ok(self.value(a)? * self.value(b)?),
            Expr::Div(a, b) => {
                let num = self.value(a)?;
                let den = self.value(b)?;
                if den.is_zero() {
                    return Err(self.singular("division by zero"));
                }
                Ok(num / den)
            }
            Expr::Pow(base, exp) => {
                let k = self.integer(exp, "exponent")?;
                let x = self.value(base)?;
                arith::ipow(&x, k).map_err(|err| match err {
                    ArithError::ZeroToNegativePower(_) => self.singular(format!("0^{k}")),
                    other => EvalError::Domain(other.to_string()),
                })
            }
            Expr::Fact(a) => {
                let m = self.integer(a, "factorial argument")?;
                arith::factorial(m)
                    .map(Rational::from_integer)
                    .map_err(|err| {
                        EvalError::Domain(format!("{err} at {}", Assignment(self.env.bindings())))
                    })
            }
            Expr::Harmonic(a) => {
                let m = self.integer(a, "harmonic argument")?;
                Ok(arith::harmonic(m))
            }
            Expr::Binom(top, bottom) => {
                let k = self.integer(bottom, "binomial bottom")?;
                if let Some(t) = self.small(top) {
                    return Ok(Rational::from_integer(arith::binom_int(t, k)));
                }
                let t = self.value(top)?;
                Ok(arith::binom(&t, k))
            }
            Expr::IDiv(a, b) => {
                let x = self.integer(a, "floor-division operand")?;
                let d = self.integer(b, "floor-division operand")?;
                if d == 0 {
                    return Err(self.singular("floor division by zero"));
                }
                Ok(arith::rat(Integer::div_floor(&x, &d)))
            }
            Expr::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let lo = self.integer(lo, "summation bound")?;
                let hi = self.integer(hi, "summation bound")?;
                let saved = self.env.get(*index);
                let mut acc = Rational::zero();
                let mut result = Ok(());
                for v in lo..=hi {
                    self.env.set(*index, v);
                    match self.summand(body) {
                        Ok(Some(x)) => acc += x,
                        Ok(None) => {}
                        Err(err) => {
                            result = Err(err);
                            break;
                        }
                    }
                }
                self.restore(*index, saved);
                result.map(|_| acc)
            }
            Expr::SumC {
                indices,
                total,
                body,
            } => {
                let total = self.integer(total, "composition total")?;
                let saved: Vec<_> = indices.iter().map(|&ix| self.env.get(ix)).collect();
                let result = self.compositions(indices, total, body);
                for (&ix, old) in indices.iter().zip(saved) {
                    self.restore(ix, old);
                }
                result
            }
        }
    }

    fn restore(&mut self, name: Name, old: Option<i64>) {
        match old {
            Some(v) => self.env.set(name, v),
            None => self.env.unset(name),
        }
    }

    /// One summand; `None` when it was singular and skipping is enabled.
    fn summand(&mut self, body: &Expr) -> Result<Option<Rational>, EvalError> {
        match self.value(body) {
            Ok(v) => Ok(Some(v)),
            Err(EvalError::SingularTerm { .. }) if self.opts.skip_singular => Ok(None),
            Err(err) => Err(err),
        }
    }

    /// Lexicographic walk over part vectors with the given total.
    fn compositions(
        &mut self,
        indices: &[Name],
        total: i64,
        body: &Expr,
    ) -> Result<Rational, EvalError> {
        let mut acc = Rational::zero();
        if total < 0 {
            return Ok(acc);
        }
        let d = indices.len();
        let mut parts = vec![0i64; d];
        parts[d - 1] = total;
        loop {
            for (&ix, &p) in indices.iter().zip(&parts) {
                self.env.set(ix, p);
            }
            if let Some(x) = self.summand(body)? {
                acc += x;
            }
            // advance: bump the rightmost free part that still has room
            let mut pos = None;
            for i in (0..d - 1).rev() {
                let prefix: i64 = parts[..=i].iter().sum();
                if prefix < total {
                    pos = Some(i);
                    break;
                }
            }
            let Some(i) = pos else { break };
            parts[i] += 1;
            for p in parts.iter_mut().take(d - 1).skip(i + 1) {
                *p = 0;
            }
            let prefix: i64 = parts[..d - 1].iter().sum();
            parts[d - 1] = total - prefix;
        }
        Ok(acc)
    }
}

/// Convenience: exact value of `text` with `n` bound.
pub fn eval_str(text: &str, n: i64) -> Result<Rational, String> {
    let e = parse(text).map_err(|err| err.to_string())?;
    eval(&e, &Env::with_n(n)).map_err(|err| err.to_string())
}

/// Integer value if the rational is integral.
pub fn as_integer(r: &Rational) -> Option<BigInt> {
    r.is_integer().then(|| r.numer().clone())
}
