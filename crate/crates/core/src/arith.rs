//! Exact integer and rational arithmetic plus the combinatorial primitives
//! used by every formula: factorials, generalized binomials, harmonic
//! numbers, integer powers and multinomials.
//!
//! Factorials and harmonic numbers are memoized in process-wide caches that
//! only ever grow. Readers take a shared lock; a miss upgrades to a write
//! lock and extends the table.

use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational number in canonical form (positive denominator, reduced).
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("factorial of negative integer {0}")]
    NegativeFactorial(i64),
    #[error("zero raised to negative power {0}")]
    ZeroToNegativePower(i64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("multinomial parts {parts:?} do not form a composition of {n}")]
    BadComposition { n: i64, parts: Vec<i64> },
}

/// Memo table of `m!`; `table[m] = m · table[m-1]`, never shrinks.
#[derive(Debug)]
pub struct FactorialCache {
    table: RwLock<Vec<Arc<BigInt>>>,
}

impl FactorialCache {
    pub fn new() -> Self {
        Self {
            table: RwLock::new(vec![Arc::new(BigInt::one())]),
        }
    }

    /// Highest `m` currently stored.
    pub fn high_water(&self) -> usize {
        self.table.read().expect("factorial cache poisoned").len() - 1
    }

    pub fn get(&self, m: usize) -> Arc<BigInt> {
        {
            let table = self.table.read().expect("factorial cache poisoned");
            if let Some(v) = table.get(m) {
                return Arc::clone(v);
            }
        }
        let mut table = self.table.write().expect("factorial cache poisoned");
        while table.len() <= m {
            let next = table.len();
            let value = table[next - 1].as_ref() * BigInt::from(next);
            table.push(Arc::new(value));
        }
        Arc::clone(&table[m])
    }
}

impl Default for FactorialCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Prefix sums `H_0 = 0, H_k = H_{k-1} + 1/k`.
#[derive(Debug)]
struct HarmonicCache {
    table: RwLock<Vec<Arc<Rational>>>,
}

impl HarmonicCache {
    fn new() -> Self {
        Self {
            table: RwLock::new(vec![Arc::new(Rational::zero())]),
        }
    }

    fn get(&self, k: usize) -> Arc<Rational> {
        {
            let table = self.table.read().expect("harmonic cache poisoned");
            if let Some(v) = table.get(k) {
                return Arc::clone(v);
            }
        }
        let mut table = self.table.write().expect("harmonic cache poisoned");
        while table.len() <= k {
            let j = table.len();
            let value = table[j - 1].as_ref() + Rational::new(BigInt::one(), BigInt::from(j));
            table.push(Arc::new(value));
        }
        Arc::clone(&table[k])
    }
}

fn factorials() -> &'static FactorialCache {
    static CACHE: std::sync::OnceLock<FactorialCache> = std::sync::OnceLock::new();
    CACHE.get_or_init(FactorialCache::new)
}

fn harmonics() -> &'static HarmonicCache {
    static CACHE: std::sync::OnceLock<HarmonicCache> = std::sync::OnceLock::new();
    CACHE.get_or_init(HarmonicCache::new)
}

pub fn factorial(m: i64) -> Result<BigInt, ArithError> {
    if m < 0 {
        return Err(ArithError::NegativeFactorial(m));
    }
    Ok(factorials().get(m as usize).as_ref().clone())
}

/// Integer binomial with the falling-factorial convention, so negative tops
/// are allowed: `binom(a, k) = (-1)^k binom(k - a - 1, k)` for `a < 0`.
pub fn binom_int(a: i64, k: i64) -> BigInt {
    if k < 0 {
        return BigInt::zero();
    }
    if a >= 0 {
        if k > a {
            return BigInt::zero();
        }
        let cache = factorials();
        let num = cache.get(a as usize);
        let d1 = cache.get(k as usize);
        let d2 = cache.get((a - k) as usize);
        return num.as_ref() / (d1.as_ref() * d2.as_ref());
    }
    let magnitude = binom_int(k - a - 1, k);
    if k.is_odd() {
        -magnitude
    } else {
        magnitude
    }
}

/// Generalized binomial `a(a-1)...(a-k+1)/k!`; zero for `k < 0`.
pub fn binom(a: &Rational, k: i64) -> Rational {
    if k < 0 {
        return Rational::zero();
    }
    if a.is_integer() {
        if let Some(top) = a.numer().to_i64() {
            return Rational::from_integer(binom_int(top, k));
        }
    }
    let mut acc = Rational::one();
    let mut term = a.clone();
    for _ in 0..k {
        acc *= &term;
        term -= Rational::one();
    }
    acc / Rational::from_integer(factorials().get(k as usize).as_ref().clone())
}

/// `H_k = 1 + 1/2 + ... + 1/k`, and `H_k = 0` for `k <= 0`.
pub fn harmonic(k: i64) -> Rational {
    if k <= 0 {
        return Rational::zero();
    }
    harmonics().get(k as usize).as_ref().clone()
}

pub fn ipow(base: &Rational, e: i64) -> Result<Rational, ArithError> {
    if e < 0 {
        if base.is_zero() {
            return Err(ArithError::ZeroToNegativePower(e));
        }
        return Ok(ipow_nonneg(&base.recip(), e.unsigned_abs()));
    }
    Ok(ipow_nonneg(base, e as u64))
}

fn ipow_nonneg(base: &Rational, mut e: u64) -> Rational {
    // (-1)^e shows up in nearly every summand
    if base.is_integer() && base.numer().abs().is_one() {
        return if base.is_negative() && e % 2 == 1 {
            -Rational::one()
        } else {
            Rational::one()
        };
    }
    let mut result = Rational::one();
    let mut square = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            result *= &square;
        }
        e >>= 1;
        if e > 0 {
            square = &square * &square;
        }
    }
    result
}

/// `n! / (p_1! p_2! ...)` for a composition `parts` of `n`.
pub fn multinomial(n: i64, parts: &[i64]) -> Result<BigInt, ArithError> {
    if parts.iter().any(|&p| p < 0) || parts.iter().sum::<i64>() != n {
        return Err(ArithError::BadComposition {
            n,
            parts: parts.to_vec(),
        });
    }
    let cache = factorials();
    let mut denom = BigInt::one();
    for &p in parts {
        denom *= cache.get(p as usize).as_ref();
    }
    Ok(cache.get(n as usize).as_ref() / denom)
}

/// Render a rational as `p/q`, or bare `p` when integral.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}
