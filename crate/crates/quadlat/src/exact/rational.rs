//! Rationals viewed p-locally. The underlying type is an arbitrary-precision
//! reduced fraction; the prime is a context parameter of each query, never
//! part of the value.

use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

pub type Rat = BigRational;

/// p-adic valuation. Zero gets a distinguished top element rather than a
/// numeric sentinel so that comparisons do the right thing.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Valuation::*;
        match (self, other) {
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
            (Infinite, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Infinite) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl std::fmt::Display for Valuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }
}

pub fn int_valuation(n: &BigInt, p: u64) -> Valuation {
    if n.is_zero() {
        return Valuation::Infinite;
    }
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0i64;
    loop {
        let (q, r) = num_integer::Integer::div_rem(&n, &p);
        if r.is_zero() {
            v += 1;
            n = q;
        } else {
            return Valuation::Finite(v);
        }
    }
}

/// nu_p of a reduced fraction; the fraction is reduced, so at most one of
/// numerator and denominator carries p-content.
pub fn valuation(x: &Rat, p: u64) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinite;
    }
    match (int_valuation(x.numer(), p), int_valuation(x.denom(), p)) {
        (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a - b),
        _ => unreachable!("nonzero rational has finite valuations"),
    }
}

pub fn is_p_integral(x: &Rat, p: u64) -> bool {
    valuation(x, p) >= Valuation::Finite(0)
}

pub fn is_p_unit(x: &Rat, p: u64) -> bool {
    valuation(x, p) == Valuation::Finite(0)
}

/// Splits nonzero x as p^e * u with u a p-unit.
pub fn p_primary_split(x: &Rat, p: u64) -> Option<(i64, Rat)> {
    let e = valuation(x, p).finite()?;
    let pe = Rat::from(BigInt::from(p)).pow(e as i32);
    Some((e, x / pe))
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Parses "a/b" or "a" with optional sign. This is the only accepted wire
/// format for rationals; floats are rejected by construction.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::parse(format!("invalid rational literal {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    match s.split_once('/') {
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rat::from(n))
        }
        Some((a, b)) => {
            let n: BigInt = a.trim().parse().map_err(|_| bad())?;
            let d: BigInt = b.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::parse(format!("zero denominator in {s:?}")));
            }
            Ok(Rat::new(n, d))
        }
    }
}

pub fn format_rat(x: &Rat) -> String {
    if x.denom() == &BigInt::from(1) {
        x.numer().to_string()
    } else if x.denom().is_negative() {
        // Ratio keeps denominators positive after reduction, but be safe.
        format!("{}/{}", -x.numer(), -x.denom())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
