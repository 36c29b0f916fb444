//! Sparse Laurent polynomials in `x, y, z, t` and constant terms of their powers.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

pub const VARIABLES: [char; 4] = ['x', 'y', 'z', 't'];

/// Exponents of `x, y, z, t`.
pub type ExponentVector = [i32; 4];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentPoly {
    terms: HashMap<ExponentVector, BigInt>,
    min: ExponentVector,
    max: ExponentVector,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::from_terms(HashMap::new())
    }

    pub fn one() -> Self {
        Self::monomial([0; 4], BigInt::one())
    }

    pub fn monomial(e: ExponentVector, c: BigInt) -> Self {
        let mut terms = HashMap::new();
        terms.insert(e, c);
        Self::from_terms(terms)
    }

    fn from_terms(mut terms: HashMap<ExponentVector, BigInt>) -> Self {
        terms.retain(|_, c| !c.is_zero());
        let mut min = [0; 4];
        let mut max = [0; 4];
        for (i, (lo, hi)) in min.iter_mut().zip(max.iter_mut()).enumerate() {
            *lo = terms.keys().map(|e| e[i]).min().unwrap_or(0);
            *hi = terms.keys().map(|e| e[i]).max().unwrap_or(0);
        }
        Self { terms, min, max }
    }

    pub fn terms(&self) -> &HashMap<ExponentVector, BigInt> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_exponents(&self) -> ExponentVector {
        self.min
    }

    pub fn max_exponents(&self) -> ExponentVector {
        self.max
    }

    pub fn coefficient(&self, e: &ExponentVector) -> BigInt {
        self.terms.get(e).cloned().unwrap_or_default()
    }

    pub fn constant_term(&self) -> BigInt {
        self.coefficient(&[0; 4])
    }

    pub fn add(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            *terms.entry(*e).or_default() += c;
        }
        Self::from_terms(terms)
    }

    pub fn neg(&self) -> LaurentPoly {
        Self::from_terms(self.terms.iter().map(|(e, c)| (*e, -c)).collect())
    }

    pub fn mul(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut terms: HashMap<ExponentVector, BigInt> = HashMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                *terms.entry(add_exp(e1, e2)).or_default() += c1 * c2;
            }
        }
        Self::from_terms(terms)
    }

    pub fn pow(&self, k: u32) -> LaurentPoly {
        (0..k).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Terms sorted by exponent vector, for stable output.
    pub fn sorted_terms(&self) -> Vec<(ExponentVector, BigInt)> {
        let mut v: Vec<_> = self.terms.iter().map(|(e, c)| (*e, c.clone())).collect();
        v.sort();
        v
    }
}

fn add_exp(a: &ExponentVector, b: &ExponentVector) -> ExponentVector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.sorted_terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (e, c)) in terms.iter().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mag = c.abs();
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || e.iter().all(|&p| p == 0) {
                factors.push(mag.to_string());
            }
            for (v, &p) in VARIABLES.iter().zip(e) {
                match p {
                    0 => {}
                    1 => factors.push(v.to_string()),
                    p => factors.push(format!("{v}^{p}")),
                }
            }
            f.write_str(&factors.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LaurentError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("variable {0:?} is not one of x, y, z, t")]
    UnknownVariable(char),
    #[error("can only divide by a monomial with coefficient 1 or -1")]
    NonMonomialDivisor,
}

/// Parse a Laurent polynomial.
///
/// Accepted: integer coefficients, the variables `x y z t` with optional
/// signed integer exponents, products by `*` or juxtaposition, parenthesized
/// sub-polynomials (multiplied out), and division by a monomial. After `/`
/// the divisor is either a parenthesized monomial or the longest run of
/// juxtaposed variables, so `1/xyz(x+y)` is `(x+y)/(x*y*z)`.
pub fn parse_laurent(text: &str) -> Result<LaurentPoly, LaurentError> {
    let mut p = LParser {
        chars: text.chars().filter(|c| !c.is_whitespace()).collect(),
        pos: 0,
    };
    if p.chars.is_empty() {
        return Err(p.err("empty polynomial"));
    }
    let poly = p.poly()?;
    if p.pos < p.chars.len() {
        return Err(p.err(&format!("unexpected {:?}", p.chars[p.pos])));
    }
    Ok(poly)
}

struct LParser {
    chars: Vec<char>,
    pos: usize,
}

impl LParser {
    fn err(&self, message: &str) -> LaurentError {
        LaurentError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn poly(&mut self) -> Result<LaurentPoly, LaurentError> {
        let mut negative = false;
        if self.eat('-') {
            negative = true;
        } else {
            self.eat('+');
        }
        let mut acc = LaurentPoly::zero();
        loop {
            let t = self.term()?;
            acc = acc.add(&if negative { t.neg() } else { t });
            if self.eat('+') {
                negative = false;
            } else if self.eat('-') {
                negative = true;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<LaurentPoly, LaurentError> {
        let mut acc = self.unit()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unit()?);
                }
                Some('/') => {
                    self.pos += 1;
                    let d = self.divisor()?;
                    acc = acc.mul(&d);
                }
                Some('(') => acc = acc.mul(&self.unit()?),
                Some(c) if c.is_ascii_alphabetic() => acc = acc.mul(&self.unit()?),
                _ => return Ok(acc),
            }
        }
    }

    fn integer(&mut self) -> Result<i64, LaurentError> {
        let start = self.pos;
        let negative = self.eat('-');
        let digits_start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.err("expected integer"));
        }
        let s: String = self.chars[digits_start..self.pos].iter().collect();
        let v: i64 = s.parse().map_err(|_| self.err("integer too large"))?;
        Ok(if negative { -v } else { v })
    }

    fn exponent(&mut self) -> Result<i32, LaurentError> {
        if !self.eat('^') {
            return Ok(1);
        }
        let v = if self.eat('(') {
            let v = self.integer()?;
            if !self.eat(')') {
                return Err(self.err("expected ')'"));
            }
            v
        } else {
            self.integer()?
        };
        i32::try_from(v).map_err(|_| self.err("exponent too large"))
    }

    fn variable(&mut self) -> Result<usize, LaurentError> {
        let c = self.peek().ok_or_else(|| self.err("expected variable"))?;
        let slot = VARIABLES
            .iter()
            .position(|&v| v == c)
            .ok_or(LaurentError::UnknownVariable(c))?;
        self.pos += 1;
        Ok(slot)
    }

    fn unit(&mut self) -> Result<LaurentPoly, LaurentError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let v = self.integer()?;
                Ok(LaurentPoly::monomial([0; 4], BigInt::from(v)))
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.poly()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                let k = self.exponent()?;
                if k < 0 {
                    return Err(self.err("negative power of a parenthesized polynomial"));
                }
                Ok(inner.pow(k as u32))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let slot = self.variable()?;
                let mut e = [0; 4];
                e[slot] = self.exponent()?;
                Ok(LaurentPoly::monomial(e, BigInt::one()))
            }
            Some(c) => Err(self.err(&format!("unexpected {c:?}"))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    /// Reciprocal of the divisor following a `/`.
    fn divisor(&mut self) -> Result<LaurentPoly, LaurentError> {
        let d = match self.peek() {
            Some('(') => self.unit()?,
            Some(c) if c.is_ascii_alphabetic() => {
                let mut e = [0; 4];
                while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                    let slot = self.variable()?;
                    e[slot] += self.exponent()?;
                }
                LaurentPoly::monomial(e, BigInt::one())
            }
            Some(c) if c.is_ascii_digit() => self.unit()?,
            _ => return Err(self.err("expected divisor")),
        };
        let (e, c) = match d.sorted_terms().as_slice() {
            [(e, c)] if c.abs().is_one() => (*e, c.clone()),
            _ => return Err(LaurentError::NonMonomialDivisor),
        };
        Ok(LaurentPoly::monomial([-e[0], -e[1], -e[2], -e[3]], c))
    }
}

/// Constant term of `poly^(multiplier * n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtSpec {
    pub poly: LaurentPoly,
    pub multiplier: u32,
}

impl CtSpec {
    pub fn new(poly: LaurentPoly, multiplier: u32) -> Self {
        Self { poly, multiplier }
    }
}

pub fn ct_power(spec: &CtSpec, n: u32) -> BigInt {
    ct_power_with(spec, n, true)
}

/// Constant term of `spec.poly^(M n)` by repeated multiplication. With
/// `prune`, monomials that can no longer reach exponent 0 in the remaining
/// factors are dropped after every step.
pub fn ct_power_with(spec: &CtSpec, n: u32, prune: bool) -> BigInt {
    let total = spec.multiplier as i64 * n as i64;
    if total == 0 {
        return BigInt::one();
    }
    let base = spec.poly.sorted_terms();
    let (lo, hi) = (spec.poly.min, spec.poly.max);
    let mut acc: HashMap<ExponentVector, BigInt> = HashMap::new();
    acc.insert([0; 4], BigInt::one());
    for step in 1..total {
        let remaining = total - step;
        let mut next: HashMap<ExponentVector, BigInt> = HashMap::with_capacity(acc.len() * 2);
        for (e1, c1) in &acc {
            for (e2, c2) in &base {
                let e = add_exp(e1, e2);
                if prune && !reachable(&e, remaining, &lo, &hi) {
                    continue;
                }
                *next.entry(e).or_default() += c1 * c2;
            }
        }
        next.retain(|_, c| !c.is_zero());
        acc = next;
    }
    // the last factor only has to hit the constant monomial
    base.iter()
        .filter_map(|(e, c)| acc.get(&[-e[0], -e[1], -e[2], -e[3]]).map(|a| a * c))
        .sum()
}

fn reachable(e: &ExponentVector, remaining: i64, lo: &ExponentVector, hi: &ExponentVector) -> bool {
    (0..4).all(|v| {
        let ev = e[v] as i64;
        ev + remaining * lo[v] as i64 <= 0 && ev + remaining * hi[v] as i64 >= 0
    })
}

/// `[ct_power(spec, 0), ..., ct_power(spec, n_max)]`.
pub fn ct_sequence(spec: &CtSpec, n_max: u32) -> Vec<BigInt> {
    (0..=n_max)
        .into_par_iter()
        .map(|n| ct_power(spec, n))
        .collect()
}
