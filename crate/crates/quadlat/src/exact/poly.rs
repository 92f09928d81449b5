//! Sparse multivariate polynomials over a truncated Witt ring. Exponent
//! vectors have fixed length; coefficients are always nonzero. Used for
//! chart relations and the symbolic regularity classifier.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::exact::witt::{WittElem, WittRing};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WittPoly {
    pub ring: WittRing,
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, WittElem>,
}

/// Graded reverse lexicographic comparison of exponent vectors.
pub fn grevlex(a: &[u32], b: &[u32]) -> Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    match da.cmp(&db) {
        Ordering::Equal => {}
        o => return o,
    }
    for i in (0..a.len()).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => {}
            // Larger exponent late in the order means a smaller monomial.
            Ordering::Less => return Ordering::Greater,
            Ordering::Greater => return Ordering::Less,
        }
    }
    Ordering::Equal
}

impl WittPoly {
    pub fn zero(ring: WittRing, nvars: usize) -> Self {
        WittPoly { ring, nvars, terms: BTreeMap::new() }
    }

    pub fn constant(ring: WittRing, nvars: usize, c: &WittElem) -> Self {
        let mut p = Self::zero(ring, nvars);
        p.insert_term(vec![0; nvars], c.clone());
        p
    }

    pub fn var(ring: WittRing, nvars: usize, i: usize) -> Self {
        assert!(i < nvars);
        let mut e = vec![0u32; nvars];
        e[i] = 1;
        let mut p = Self::zero(ring, nvars);
        p.insert_term(e, ring.one());
        p
    }

    pub fn monomial(ring: WittRing, expo: Vec<u32>, c: WittElem) -> Self {
        let nvars = expo.len();
        let mut p = Self::zero(ring, nvars);
        p.insert_term(expo, c);
        p
    }

    fn insert_term(&mut self, expo: Vec<u32>, c: WittElem) {
        assert_eq!(expo.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&expo) {
            Some(old) => {
                let s = old.add(&c);
                if s.is_zero() {
                    self.terms.remove(&expo);
                } else {
                    *old = s;
                }
            }
            None => {
                self.terms.insert(expo, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, rhs: &WittPoly) -> WittPoly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.insert_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> WittPoly {
        let mut out = Self::zero(self.ring, self.nvars);
        for (e, c) in &self.terms {
            out.insert_term(e.clone(), c.neg());
        }
        out
    }

    pub fn sub(&self, rhs: &WittPoly) -> WittPoly {
        self.add(&rhs.neg())
    }

    pub fn scale(&self, c: &WittElem) -> WittPoly {
        let mut out = Self::zero(self.ring, self.nvars);
        for (e, co) in &self.terms {
            out.insert_term(e.clone(), co.mul(c));
        }
        out
    }

    pub fn mul(&self, rhs: &WittPoly) -> WittPoly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Self::zero(self.ring, self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.insert_term(e, ca.mul(cb));
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> WittPoly {
        let mut out = Self::constant(self.ring, self.nvars, &self.ring.one());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn constant_term(&self) -> WittElem {
        self.terms
            .get(&vec![0u32; self.nvars])
            .cloned()
            .unwrap_or_else(|| self.ring.zero())
    }

    /// Formal partial derivative with respect to variable i.
    pub fn partial(&self, i: usize) -> WittPoly {
        let mut out = Self::zero(self.ring, self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne[i] -= 1;
            out.insert_term(ne, c.mul(&self.ring.from_i64(e[i] as i64)));
        }
        out
    }

    /// Coefficient of the pure degree-one monomial in variable i.
    pub fn linear_coeff(&self, i: usize) -> WittElem {
        let mut e = vec![0u32; self.nvars];
        e[i] = 1;
        self.terms.get(&e).cloned().unwrap_or_else(|| self.ring.zero())
    }

    pub fn eval(&self, point: &[WittElem]) -> WittElem {
        assert_eq!(point.len(), self.nvars);
        let mut acc = self.ring.zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    t = t.mul(&point[i]);
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    /// Substitutes a polynomial for variable i.
    pub fn subst(&self, i: usize, value: &WittPoly) -> WittPoly {
        assert_eq!(self.nvars, value.nvars);
        let mut out = Self::zero(self.ring, self.nvars);
        for (e, c) in &self.terms {
            let mut rest = e.clone();
            let exp = rest[i];
            rest[i] = 0;
            let base = Self::monomial(self.ring, rest, c.clone());
            out = out.add(&base.mul(&value.pow(exp)));
        }
        out
    }

    pub fn truncate_above(&self, maxdeg: u32) -> WittPoly {
        let mut out = Self::zero(self.ring, self.nvars);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() <= maxdeg {
                out.insert_term(e.clone(), c.clone());
            }
        }
        out
    }

    pub fn vars_present(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nvars];
        for e in self.terms.keys() {
            for (i, &x) in e.iter().enumerate() {
                if x > 0 {
                    seen[i] = true;
                }
            }
        }
        (0..self.nvars).filter(|&i| seen[i]).collect()
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(&WittElem) -> WittElem) -> WittPoly {
        let first = self.terms.values().next().map(|c| f(c));
        let ring = first.as_ref().map(|c| c.ring).unwrap_or(self.ring);
        let mut out = Self::zero(ring, self.nvars);
        for (e, c) in &self.terms {
            out.insert_term(e.clone(), f(c));
        }
        out
    }

    pub fn leading_term(&self) -> Option<(&Vec<u32>, &WittElem)> {
        self.terms.iter().max_by(|a, b| grevlex(a.0, b.0))
    }

    /// Remainder of division by a list of divisors whose leading
    /// coefficients are units. Only used to discard redundant generators,
    /// so a zero remainder is the interesting outcome.
    pub fn reduce_modulo(&self, divisors: &[&WittPoly]) -> WittPoly {
        let mut rem = Self::zero(self.ring, self.nvars);
        let mut cur = self.clone();
        'outer: while let Some((lt_e, lt_c)) = cur.leading_term() {
            let lt_e = lt_e.clone();
            let lt_c = lt_c.clone();
            for d in divisors {
                let Some((de, dc)) = d.leading_term() else { continue };
                if !dc.is_unit() {
                    continue;
                }
                if lt_e.iter().zip(de.iter()).all(|(a, b)| a >= b) {
                    let qe: Vec<u32> = lt_e.iter().zip(de.iter()).map(|(a, b)| a - b).collect();
                    let qc = lt_c.mul(&dc.inv().expect("unit leading coefficient"));
                    let q = Self::monomial(self.ring, qe, qc);
                    cur = cur.sub(&q.mul(d));
                    continue 'outer;
                }
            }
            // Leading term irreducible: move it to the remainder.
            cur.terms.remove(&lt_e);
            rem.insert_term(lt_e, lt_c);
        }
        rem
    }

    /// Renders with the given variable names, deterministic term order.
    pub fn display_with(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.nvars);
        if self.is_zero() {
            return "0".to_string();
        }
        let mut terms: Vec<(&Vec<u32>, &WittElem)> = self.terms.iter().collect();
        terms.sort_by(|a, b| grevlex(b.0, a.0));
        let mut out = String::new();
        for (idx, (e, c)) in terms.iter().enumerate() {
            if idx > 0 {
                out.push_str(" + ");
            }
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0)
                .map(|(i, &x)| if x == 1 { names[i].clone() } else { format!("{}^{}", names[i], x) })
                .collect();
            if mono.is_empty() {
                out.push_str(&format!("{c}"));
            } else if *c == &self.ring.one() {
                out.push_str(&mono.join("*"));
            } else {
                out.push_str(&format!("({c})*{}", mono.join("*")));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring() -> WittRing {
        WittRing::new(3, 6).unwrap()
    }

    #[test]
    fn arithmetic_and_eval() {
        let r = ring();
        let x = WittPoly::var(r, 2, 0);
        let y = WittPoly::var(r, 2, 1);
        let p = x.mul(&x).add(&y.scale(&r.from_i64(3))).add(&WittPoly::constant(r, 2, &r.from_i64(5)));
        // x^2 + 3y + 5 at (2, 7) = 4 + 21 + 5 = 30
        let v = p.eval(&[r.from_i64(2), r.from_i64(7)]);
        assert_eq!(v, r.from_i64(30));
        assert_eq!(p.constant_term(), r.from_i64(5));
        assert_eq!(p.linear_coeff(1), r.from_i64(3));
        assert_eq!(p.linear_coeff(0), r.zero());
    }

    #[test]
    fn substitution_is_composition() {
        let r = ring();
        let x = WittPoly::var(r, 2, 0);
        let y = WittPoly::var(r, 2, 1);
        // f = x^2 + y; substitute x := y + 1, then f = y^2 + 3y + 1.
        let f = x.mul(&x).add(&y);
        let sub = y.add(&WittPoly::constant(r, 2, &r.one()));
        let g = f.subst(0, &sub);
        for a in 0..5 {
            let ya = r.from_i64(a);
            let direct = f.eval(&[ya.add(&r.one()), ya.clone()]);
            assert_eq!(g.eval(&[r.zero(), ya]), direct);
        }
    }

    #[test]
    fn grevlex_total_degree_first() {
        assert_eq!(grevlex(&[2, 0], &[0, 1]), Ordering::Greater);
        assert_eq!(grevlex(&[1, 1], &[2, 0]), Ordering::Less);
        assert_eq!(grevlex(&[1, 1], &[1, 1]), Ordering::Equal);
    }

    #[test]
    fn reduce_modulo_detects_multiples() {
        let r = ring();
        let x = WittPoly::var(r, 3, 0);
        let y = WittPoly::var(r, 3, 1);
        let z = WittPoly::var(r, 3, 2);
        let d1 = x.mul(&x).add(&y); // x^2 + y
        let d2 = z.mul(&x).sub(&WittPoly::constant(r, 3, &r.from_i64(3))); // xz - 3
        // x^2*(x^2+y) + z*(xz-3) reduces to zero modulo {d1, d2}.
        let combo = x.mul(&x).mul(&d1).add(&z.mul(&d2));
        assert!(combo.reduce_modulo(&[&d1, &d2]).is_zero());
        // x^2 + y + 1 does not.
        let not = d1.add(&WittPoly::constant(r, 3, &r.one()));
        assert!(!not.reduce_modulo(&[&d1, &d2]).is_zero());
    }

    #[test]
    fn truncation_and_vars() {
        let r = ring();
        let x = WittPoly::var(r, 2, 0);
        let f = x.pow(4).add(&x).add(&WittPoly::constant(r, 2, &r.one()));
        let t = f.truncate_above(2);
        assert_eq!(t.terms.len(), 2);
        assert_eq!(f.vars_present(), vec![0]);
    }

    #[test]
    fn display_is_deterministic() {
        let r = ring();
        let x = WittPoly::var(r, 2, 0);
        let y = WittPoly::var(r, 2, 1);
        let f = y.mul(&y).add(&x.scale(&r.from_i64(2))).add(&WittPoly::constant(r, 2, &r.from_i64(3)));
        let names = vec!["u".to_string(), "v".to_string()];
        assert_eq!(f.display_with(&names), "v^2 + (2)*u + 3");
    }
}
