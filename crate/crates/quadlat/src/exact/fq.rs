//! The fields F_p and F_{p^2} for odd p, with F_{p^2} presented as
//! F_p[w]/(w^2 - c) for the smallest positive quadratic non-residue c mod p.
//! Elements are plain machine words; every operation checks field agreement.

use crate::{Error, Result};

use super::rational::Rat;

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Smallest positive quadratic non-residue mod an odd prime.
pub(crate) fn smallest_nonresidue(p: u64) -> u64 {
    (2..p)
        .find(|&n| pow_mod(n, (p - 1) / 2, p) == p - 1)
        .expect("odd prime has a non-residue")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct FqField {
    pub p: u64,
    /// Extension degree, 1 or 2.
    pub d: u8,
    /// For d = 2, the modulus is w^2 - c. Zero when d = 1.
    pub c: u64,
}

impl FqField {
    pub fn prime(p: u64) -> Result<Self> {
        if p < 3 || p % 2 == 0 || !is_prime(p) || p >= (1 << 31) {
            return Err(Error::precondition(format!("p = {p} is not a small odd prime")));
        }
        Ok(FqField { p, d: 1, c: 0 })
    }

    pub fn quadratic(p: u64) -> Result<Self> {
        let base = Self::prime(p)?;
        Ok(FqField { p, d: 2, c: smallest_nonresidue(base.p) })
    }

    pub fn order(&self) -> u64 {
        if self.d == 1 {
            self.p
        } else {
            self.p * self.p
        }
    }

    pub fn zero(&self) -> FqElem {
        FqElem { field: *self, a: 0, b: 0 }
    }

    pub fn one(&self) -> FqElem {
        FqElem { field: *self, a: 1, b: 0 }
    }

    pub fn from_u64(&self, n: u64) -> FqElem {
        FqElem { field: *self, a: n % self.p, b: 0 }
    }

    pub fn from_i64(&self, n: i64) -> FqElem {
        let p = self.p as i64;
        FqElem { field: *self, a: (n.rem_euclid(p)) as u64, b: 0 }
    }

    /// Element a + b*w. For d = 1 requires b = 0.
    pub fn elem(&self, a: u64, b: u64) -> FqElem {
        assert!(self.d == 2 || b % self.p == 0, "no w component in a prime field");
        FqElem { field: *self, a: a % self.p, b: b % self.p }
    }

    /// Reduces a p-integral rational mod p.
    pub fn from_rat(&self, x: &Rat) -> Result<FqElem> {
        let p = num_bigint::BigInt::from(self.p);
        let n = num_integer::Integer::mod_floor(x.numer(), &p);
        let d = num_integer::Integer::mod_floor(x.denom(), &p);
        let n: u64 = n.try_into().expect("mod_floor fits");
        let d: u64 = d.try_into().expect("mod_floor fits");
        if d == 0 {
            return Err(Error::precondition(format!(
                "{} is not {}-integral",
                x,
                self.p
            )));
        }
        Ok(self.from_u64(n).mul(&self.from_u64(d).inv().expect("unit denominator")))
    }

    /// All field elements in lexicographic (a, b) order.
    pub fn elements(&self) -> Vec<FqElem> {
        let mut out = Vec::with_capacity(self.order() as usize);
        let bmax = if self.d == 2 { self.p } else { 1 };
        for a in 0..self.p {
            for b in 0..bmax {
                out.push(FqElem { field: *self, a, b });
            }
        }
        // elements() enumerates a-major; callers that want lexicographic
        // (a, b) get exactly that.
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct FqElem {
    pub field: FqField,
    pub a: u64,
    pub b: u64,
}

impl FqElem {
    fn check(&self, rhs: &FqElem) {
        assert_eq!(self.field, rhs.field, "mixed finite fields");
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn add(&self, rhs: &FqElem) -> FqElem {
        self.check(rhs);
        let p = self.field.p;
        FqElem { field: self.field, a: (self.a + rhs.a) % p, b: (self.b + rhs.b) % p }
    }

    pub fn neg(&self) -> FqElem {
        let p = self.field.p;
        FqElem { field: self.field, a: (p - self.a) % p, b: (p - self.b) % p }
    }

    pub fn sub(&self, rhs: &FqElem) -> FqElem {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &FqElem) -> FqElem {
        self.check(rhs);
        let p = self.field.p as u128;
        let (a1, b1, a2, b2) =
            (self.a as u128, self.b as u128, rhs.a as u128, rhs.b as u128);
        // (a1 + b1 w)(a2 + b2 w) with w^2 = c.
        let c = self.field.c as u128;
        let a = (a1 * a2 + b1 * b2 % p * c) % p;
        let b = (a1 * b2 + b1 * a2) % p;
        FqElem { field: self.field, a: a as u64, b: b as u64 }
    }

    pub fn pow(&self, mut e: u64) -> FqElem {
        let mut base = *self;
        let mut acc = self.field.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self) -> Option<FqElem> {
        if self.is_zero() {
            return None;
        }
        Some(self.pow(self.field.order() - 2))
    }

    /// The p-power Frobenius. For d = 2 this is a + bw -> a - bw, since w^p =
    /// -w for a non-residue modulus.
    pub fn frobenius(&self) -> FqElem {
        if self.field.d == 1 {
            *self
        } else {
            let p = self.field.p;
            FqElem { field: self.field, a: self.a, b: (p - self.b) % p }
        }
    }

    pub fn is_square(&self) -> bool {
        self.is_zero() || self.pow((self.field.order() - 1) / 2) == self.field.one()
    }

    /// Lexicographically least square root, if one exists. Searches the whole
    /// field, so it is capped.
    pub fn sqrt(&self) -> Result<Option<FqElem>> {
        if self.field.order() > 1_000_000 {
            return Err(Error::resource(format!(
                "square-root search over {} elements exceeds the cap",
                self.field.order()
            )));
        }
        if self.is_zero() {
            return Ok(Some(self.field.zero()));
        }
        Ok(self.field.elements().into_iter().find(|s| s.mul(s) == *self))
    }
}

impl std::fmt::Display for FqElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.a, self.b) {
            (_, 0) => write!(f, "{}", self.a),
            (0, _) => write!(f, "{}*w", self.b),
            _ => write!(f, "{}+{}*w", self.a, self.b),
        }
    }
}
