//! Truncated Witt vectors of F_{p^2}: the ring (Z/p^k)[w]/(w^2 - c) with c
//! the lift of the smallest positive non-residue mod p. This is W(F_{p^2})
//! known to p-adic precision k. Division by p is precision-lossy and returns
//! an element of the ring at level k - 1; the two levels never mix silently.

use crate::{Error, Result};

use super::fq::{smallest_nonresidue, FqElem, FqField};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct WittRing {
    pub p: u64,
    pub k: u32,
    /// Lift of the residue-field modulus constant: w^2 = c.
    pub c: u64,
    /// p^k.
    pub modulus: u64,
}

impl WittRing {
    pub fn new(p: u64, k: u32) -> Result<Self> {
        let field = FqField::prime(p)?;
        if k == 0 {
            return Err(Error::precondition("truncation level must be at least 1"));
        }
        let mut modulus: u64 = 1;
        for _ in 0..k {
            modulus = modulus
                .checked_mul(p)
                .filter(|&m| m < (1 << 62))
                .ok_or_else(|| {
                    Error::resource(format!("p^k = {p}^{k} exceeds the word-size cap"))
                })?;
        }
        Ok(WittRing { p: field.p, k, c: smallest_nonresidue(p), modulus })
    }

    pub fn residue_field(&self) -> FqField {
        FqField { p: self.p, d: 2, c: self.c }
    }

    pub fn zero(&self) -> WittElem {
        WittElem { ring: *self, a: 0, b: 0 }
    }

    pub fn one(&self) -> WittElem {
        WittElem { ring: *self, a: 1, b: 0 }
    }

    pub fn omega(&self) -> WittElem {
        WittElem { ring: *self, a: 0, b: 1 }
    }

    pub fn p_elem(&self) -> WittElem {
        self.from_i64(self.p as i64)
    }

    pub fn from_i64(&self, n: i64) -> WittElem {
        let m = self.modulus as i64;
        WittElem { ring: *self, a: n.rem_euclid(m) as u64, b: 0 }
    }

    /// Element a + b*w with both digits reduced mod p^k.
    pub fn elem(&self, a: u64, b: u64) -> WittElem {
        WittElem { ring: *self, a: a % self.modulus, b: b % self.modulus }
    }

    /// Coefficient-wise lift of a residue-field element.
    pub fn lift(&self, x: &FqElem) -> WittElem {
        assert_eq!(x.field, self.residue_field(), "lift from the wrong field");
        WittElem { ring: *self, a: x.a, b: x.b }
    }

    /// Reduces a p-integral rational into the ring.
    pub fn from_rat(&self, x: &super::rational::Rat) -> Result<WittElem> {
        let m = num_bigint::BigInt::from(self.modulus);
        let n = num_integer::Integer::mod_floor(x.numer(), &m);
        let d = num_integer::Integer::mod_floor(x.denom(), &m);
        let n: u64 = n.try_into().expect("fits");
        let d: u64 = d.try_into().expect("fits");
        let d = self.elem(d, 0);
        let inv = d.inv().ok_or_else(|| {
            Error::precondition(format!("{x} is not {}-integral", self.p))
        })?;
        Ok(self.elem(n, 0).mul(&inv))
    }

    /// All ring elements, for exhaustive oracles on tiny parameters.
    pub fn elements(&self) -> Result<Vec<WittElem>> {
        let total = (self.modulus as u128) * (self.modulus as u128);
        if total > 1_000_000 {
            return Err(Error::resource(format!(
                "enumerating {total} Witt elements exceeds the cap"
            )));
        }
        let mut out = Vec::with_capacity(total as usize);
        for a in 0..self.modulus {
            for b in 0..self.modulus {
                out.push(WittElem { ring: *self, a, b });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct WittElem {
    pub ring: WittRing,
    pub a: u64,
    pub b: u64,
}

fn mod_inv(x: u64, m: u64) -> Option<u64> {
    // Extended Euclid on i128.
    let (mut r0, mut r1) = (m as i128, (x % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(m as i128) as u64)
}

impl WittElem {
    fn check(&self, rhs: &WittElem) {
        assert_eq!(self.ring, rhs.ring, "mixed Witt rings or truncation levels");
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn add(&self, rhs: &WittElem) -> WittElem {
        self.check(rhs);
        let m = self.ring.modulus;
        WittElem { ring: self.ring, a: (self.a + rhs.a) % m, b: (self.b + rhs.b) % m }
    }

    pub fn neg(&self) -> WittElem {
        let m = self.ring.modulus;
        WittElem { ring: self.ring, a: (m - self.a) % m, b: (m - self.b) % m }
    }

    pub fn sub(&self, rhs: &WittElem) -> WittElem {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &WittElem) -> WittElem {
        self.check(rhs);
        let m = self.ring.modulus as u128;
        let (a1, b1, a2, b2) =
            (self.a as u128, self.b as u128, rhs.a as u128, rhs.b as u128);
        let c = self.ring.c as u128;
        let a = (a1 * a2 % m + b1 * b2 % m * c) % m;
        let b = (a1 * b2 + b1 * a2) % m;
        WittElem { ring: self.ring, a: a as u64, b: b as u64 }
    }

    pub fn reduce(&self) -> FqElem {
        let f = self.ring.residue_field();
        f.elem(self.a % self.ring.p, self.b % self.ring.p)
    }

    pub fn is_unit(&self) -> bool {
        !self.reduce().is_zero()
    }

    /// Galois conjugation a + bw -> a - bw, the lift of Frobenius.
    pub fn conj(&self) -> WittElem {
        let m = self.ring.modulus;
        WittElem { ring: self.ring, a: self.a, b: (m - self.b) % m }
    }

    pub fn inv(&self) -> Option<WittElem> {
        // (a + bw)^{-1} = (a - bw) / (a^2 - c b^2); the norm is a unit
        // exactly when the element is.
        let m = self.ring.modulus;
        let norm = self.mul(&self.conj());
        debug_assert_eq!(norm.b, 0);
        let n_inv = mod_inv(norm.a, m)?;
        Some(self.conj().mul(&WittElem { ring: self.ring, a: n_inv, b: 0 }))
    }

    pub fn pow(&self, mut e: u64) -> WittElem {
        let mut base = *self;
        let mut acc = self.ring.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// min(v_p(a), v_p(b)), or None for the zero element (valuation >= k).
    pub fn valuation(&self) -> Option<u32> {
        if self.is_zero() {
            return None;
        }
        let vp = |mut x: u64| -> u32 {
            let mut v = 0;
            if x == 0 {
                return self.ring.k;
            }
            while x % self.ring.p == 0 {
                x /= self.ring.p;
                v += 1;
            }
            v
        };
        Some(vp(self.a).min(vp(self.b)))
    }

    /// Exact division by p, landing in the ring at truncation k - 1.
    pub fn div_p(&self) -> Result<WittElem> {
        if self.ring.k < 2 {
            return Err(Error::precondition("cannot divide by p at truncation 1"));
        }
        if self.a % self.ring.p != 0 || self.b % self.ring.p != 0 {
            return Err(Error::precondition("element is not divisible by p"));
        }
        let ring = WittRing::new(self.ring.p, self.ring.k - 1)?;
        Ok(ring.elem(self.a / self.ring.p, self.b / self.ring.p))
    }

    /// Forgets precision down to level k'.
    pub fn reduce_to(&self, k: u32) -> Result<WittElem> {
        if k > self.ring.k {
            return Err(Error::precondition("cannot gain precision"));
        }
        let ring = WittRing::new(self.ring.p, k)?;
        Ok(ring.elem(self.a % ring.modulus, self.b % ring.modulus))
    }
}

impl std::fmt::Display for WittElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.a, self.b) {
            (_, 0) => write!(f, "{}", self.a),
            (0, _) => write!(f, "{}*w", self.b),
            _ => write!(f, "{}+{}*w", self.a, self.b),
        }
    }
}

/// Newton lift of a square root: for a unit u whose reduction is a square in
/// F_{p^2}, returns the root s with s mod p the lexicographically least field
/// root. Non-units are rejected; quadratic non-residues are rejected.
pub fn hensel_sqrt(u: &WittElem) -> Result<WittElem> {
    if !u.is_unit() {
        return Err(Error::precondition("hensel_sqrt requires a unit"));
    }
    let r0 = u
        .reduce()
        .sqrt()?
        .ok_or_else(|| Error::precondition("not a square in the residue field"))?;
    let ring = u.ring;
    let mut s = ring.lift(&r0);
    // Each Newton step doubles the attained precision; k <= 62 so the loop is
    // at most 6 iterations.
    let mut prec = 1u64;
    let two_inv = ring.from_i64(2).inv().expect("2 is a unit for odd p");
    while prec < ring.k as u64 {
        let s_inv = s.inv().expect("iterate stays a unit");
        s = s.sub(&s.mul(&s).sub(u).mul(&two_inv).mul(&s_inv));
        prec *= 2;
    }
    debug_assert_eq!(s.mul(&s), *u);
    debug_assert_eq!(s.reduce(), r0);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn construction_and_caps() {
        let w = WittRing::new(3, 6).unwrap();
        assert_eq!(w.modulus, 729);
        assert_eq!(w.c, 2);
        assert!(WittRing::new(3, 0).is_err());
        assert!(matches!(WittRing::new(1_000_003, 7), Err(Error::Resource(_))));
    }

    #[test]
    fn ring_axioms_sampled() {
        let ring = WittRing::new(3, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rand_elem = |rng: &mut rand_chacha::ChaCha8Rng| {
            ring.elem(rng.gen_range(0..ring.modulus), rng.gen_range(0..ring.modulus))
        };
        for _ in 0..500 {
            let (x, y, z) = (rand_elem(&mut rng), rand_elem(&mut rng), rand_elem(&mut rng));
            assert_eq!(x.mul(&y), y.mul(&x));
            assert_eq!(x.mul(&y.mul(&z)), x.mul(&y).mul(&z));
            assert_eq!(x.mul(&y.add(&z)), x.mul(&y).add(&x.mul(&z)));
            assert_eq!(x.add(&x.neg()), ring.zero());
        }
    }

    #[test]
    fn units_and_inverses() {
        let ring = WittRing::new(3, 4).unwrap();
        for x in [ring.elem(1, 0), ring.elem(2, 3), ring.omega(), ring.elem(40, 13)] {
            assert!(x.is_unit());
            assert_eq!(x.mul(&x.inv().unwrap()), ring.one());
        }
        assert!(!ring.p_elem().is_unit());
        assert!(ring.p_elem().inv().is_none());
        assert_eq!(ring.elem(9, 27).valuation(), Some(2));
        assert_eq!(ring.zero().valuation(), None);
    }

    #[test]
    fn division_by_p_drops_precision() {
        let ring = WittRing::new(3, 4).unwrap();
        let x = ring.elem(18, 9);
        let y = x.div_p().unwrap();
        assert_eq!(y.ring.k, 3);
        assert_eq!((y.a, y.b), (6, 3));
        assert!(ring.elem(1, 3).div_p().is_err());
    }

    // Exhaustive oracle: hensel_sqrt of -1 at p = 3, k = 2 must agree with a
    // search over all 81 ring elements, and must pick the root reducing to
    // the lex-least field root.
    #[test]
    fn hensel_sqrt_matches_exhaustive_search() {
        let ring = WittRing::new(3, 2).unwrap();
        let minus_one = ring.from_i64(-1);
        let roots: Vec<WittElem> = ring
            .elements()
            .unwrap()
            .into_iter()
            .filter(|s| s.mul(s) == minus_one)
            .collect();
        assert_eq!(roots.len(), 2);
        let got = hensel_sqrt(&minus_one).unwrap();
        assert!(roots.contains(&got));
        // -1 = 2 mod 3 and the lex-least root of 2 in F_9 is w.
        assert_eq!((got.reduce().a, got.reduce().b), (0, 1));
    }

    #[test]
    fn hensel_sqrt_trivial_and_errors() {
        let ring = WittRing::new(3, 6).unwrap();
        assert_eq!(hensel_sqrt(&ring.one()).unwrap(), ring.one());
        assert!(matches!(hensel_sqrt(&ring.p_elem()), Err(Error::Precondition(_))));
    }

    // 200 random units: hensel_sqrt(u^2) is +-u.
    #[test]
    fn hensel_sqrt_of_squares() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for p in [3u64, 5, 7] {
            let ring = WittRing::new(p, 6).unwrap();
            let mut done = 0;
            while done < 200 {
                let u = ring.elem(
                    rng.gen_range(0..ring.modulus),
                    rng.gen_range(0..ring.modulus),
                );
                if !u.is_unit() {
                    continue;
                }
                done += 1;
                let s = hensel_sqrt(&u.mul(&u)).unwrap();
                assert!(s == u || s == u.neg(), "sqrt(u^2) must be +-u");
            }
        }
    }

    #[test]
    fn conjugation_is_ring_automorphism_lifting_frobenius() {
        let ring = WittRing::new(5, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = ring.elem(rng.gen_range(0..ring.modulus), rng.gen_range(0..ring.modulus));
            let y = ring.elem(rng.gen_range(0..ring.modulus), rng.gen_range(0..ring.modulus));
            assert_eq!(x.conj().mul(&y.conj()), x.mul(&y).conj());
            assert_eq!(x.conj().add(&y.conj()), x.add(&y).conj());
            assert_eq!(x.conj().reduce(), x.reduce().frobenius());
        }
    }
}
