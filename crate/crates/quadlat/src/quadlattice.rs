//! Quadratic lattices over the p-local integers: Gram data, diagonalization,
//! discriminant forms, maximality with explicit witnesses, and the
//! orthogonal-Lie-algebra extension and Witt extension algorithms over
//! fields.
//!
//! Conventions: `gram` is the matrix of the bilinear pairing [x,y], so
//! Q(v) = vᵀ·gram·v / 2 and the diagonal lattice with Q-values (d_i) has
//! gram 2·diag(d_i).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::fq::{FqElem, FqField};
use crate::exact::matrix::{FieldScalar, Mat};
use crate::exact::rational::{is_p_integral, is_p_unit, rat_int, valuation, Rat, Valuation};
use crate::exact::snf::smith_normal_form;

const ENUM_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadLattice {
    pub p: u64,
    pub gram: Mat<Rat>,
}

#[derive(Clone, Debug)]
pub struct RadicalData {
    /// Dimension of the radical of the form mod p.
    pub t: usize,
    /// rank - t - 1; negative exactly when the reduction is identically zero.
    pub s: i64,
    /// Basis of the radical over F_p, in reduced echelon shape.
    pub n_basis: Vec<Vec<FqElem>>,
}

/// The p-part of L∨/L with its ℚ/ℤ-valued quadratic form. Generators are
/// rational coordinate vectors in the lattice basis; generator i has order
/// p^{a_i} with the exponents ascending.
#[derive(Clone, Debug)]
pub struct FiniteQuadModule {
    pub p: u64,
    pub orders: Vec<BigInt>,
    pub gens: Vec<Vec<Rat>>,
    /// q̄ on each generator, as the canonical representative in [0,1) with
    /// p-power denominator.
    pub qbar_gens: Vec<Rat>,
    gram: Mat<Rat>,
}

#[derive(Clone, Debug)]
pub enum MaximalityWitness {
    /// disc(L) has a cyclic factor of order p^a with a ≥ 2; adjoining
    /// `overlattice_vector` (which is p^{a-1} times a generator of that
    /// factor) gives a strictly larger integral lattice.
    NonElementaryDivisor { divisor_valuation: u32, overlattice_vector: Vec<Rat> },
    /// disc(L) is elementary but carries an isotropic class; its lift
    /// `overlattice_vector` has integral Q-value.
    IsotropicDiscElement { class_coefficients: Vec<u64>, overlattice_vector: Vec<Rat> },
}

#[derive(Clone, Debug)]
pub struct MaximalityReport {
    pub maximal: bool,
    pub witness: Option<MaximalityWitness>,
}

/// Representative in [0,1) with p-power denominator of the class of x in
/// ℚ_p/ℤ_p (equivalently, the p-primary part of x mod ℤ).
pub fn mod_one_p_part(x: &Rat, p: u64) -> Rat {
    match valuation(x, p) {
        Valuation::Infinite => Rat::zero(),
        Valuation::Finite(v) if v >= 0 => Rat::zero(),
        Valuation::Finite(v) => {
            let e = (-v) as u32;
            let pe = BigInt::from(p).pow(e);
            let den = x.denom();
            let mut u = den.clone();
            for _ in 0..e {
                u /= p;
            }
            // r/p^e ≡ num/(p^e·u) mod ℤ_(p)  ⇔  r ≡ num·u⁻¹ mod p^e.
            let gcd = u.extended_gcd(&pe);
            debug_assert!(gcd.gcd.is_one());
            let u_inv = gcd.x.mod_floor(&pe);
            let r = (x.numer() * u_inv).mod_floor(&pe);
            Rat::new(r, pe)
        }
    }
}

fn rat_mat_p_integral(m: &Mat<Rat>, p: u64) -> bool {
    (0..m.rows).all(|i| (0..m.cols).all(|j| is_p_integral(m.at(i, j), p)))
}

fn rat_mat_p_unimodular(m: &Mat<Rat>, p: u64) -> bool {
    if m.rows != m.cols || !rat_mat_p_integral(m, p) {
        return false;
    }
    match m.det() {
        Some(d) => is_p_unit(&d, p),
        None => false,
    }
}

/// Scale v by the positive prime-to-p rational that makes it an integer
/// vector whose content is a p-power, with the first nonzero entry positive.
fn primitive_p_vector(v: &[Rat], p: u64) -> Vec<Rat> {
    let mut l = BigInt::one();
    for x in v {
        l = l.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * &l).to_integer()).collect();
    let mut content = BigInt::zero();
    for n in &ints {
        content = content.gcd(n);
    }
    if content.is_zero() {
        return v.to_vec();
    }
    // Strip only the prime-to-p part of the content; dividing out a shared
    // factor of p would scale the vector out of the current sublattice.
    let mut divisor = content.clone();
    let pb = BigInt::from(p);
    while (&divisor % &pb).is_zero() {
        divisor /= &pb;
    }
    let mut out: Vec<Rat> = ints.iter().map(|n| Rat::new(n.clone(), divisor.clone())).collect();
    if let Some(first) = out.iter().find(|x| !x.is_zero()) {
        if first.numer().is_negative() {
            for x in out.iter_mut() {
                *x = -x.clone();
            }
        }
    }
    out
}

impl QuadLattice {
    pub fn new(p: u64, gram: Mat<Rat>) -> Result<Self> {
        FqField::prime(p)?;
        if gram.rows != gram.cols || gram.rows == 0 {
            return Err(Error::precondition("Gram matrix must be square and nonempty"));
        }
        if !gram.is_symmetric() {
            return Err(Error::precondition("Gram matrix must be symmetric"));
        }
        if !rat_mat_p_integral(&gram, p) {
            return Err(Error::precondition("Gram entries must be p-integral"));
        }
        match gram.det() {
            Some(d) if !d.is_zero() => {}
            _ => return Err(Error::precondition("Gram matrix must be nondegenerate")),
        }
        Ok(QuadLattice { p, gram })
    }

    /// Diagonal lattice with the given Q-values.
    pub fn from_diag(p: u64, qvals: &[Rat]) -> Result<Self> {
        let n = qvals.len();
        let gram = Mat::from_fn(n, n, |i, j| {
            if i == j {
                &qvals[i] * rat_int(2)
            } else {
                Rat::zero()
            }
        });
        QuadLattice::new(p, gram)
    }

    pub fn rank(&self) -> usize {
        self.gram.rows
    }

    pub fn pairing(&self, u: &[Rat], v: &[Rat]) -> Rat {
        let gv = self.gram.mul_vec(v);
        u.iter().zip(&gv).map(|(a, b)| a * b).sum()
    }

    pub fn qform(&self, v: &[Rat]) -> Rat {
        self.pairing(v, v) / rat_int(2)
    }

    pub fn det_gram(&self) -> Rat {
        self.gram.det().expect("validated nondegenerate")
    }

    /// ν_p of det(gram); also log_p of the discriminant group order.
    pub fn disc_valuation(&self) -> i64 {
        match valuation(&self.det_gram(), self.p) {
            Valuation::Finite(v) => v,
            Valuation::Infinite => unreachable!("validated nondegenerate"),
        }
    }

    /// Integer matrix with the same elementary-divisor p-valuations as gram:
    /// gram times the (prime-to-p) lcm of its denominators.
    fn scaled_integer_gram(&self) -> Mat<BigInt> {
        let mut l = BigInt::one();
        for i in 0..self.gram.rows {
            for j in 0..self.gram.cols {
                l = l.lcm(self.gram.at(i, j).denom());
            }
        }
        debug_assert!(!(&l % self.p).is_zero());
        self.gram.map(|x| (x * &l).to_integer())
    }

    /// Orthogonal basis: columns of the returned matrix U satisfy
    /// Uᵀ·gram·U = 2·diag(d) with U p-unimodular. Repeatedly splits off the
    /// vector of smallest ν_p(Q) among the current basis and pairwise sums.
    pub fn diagonalize(&self) -> Result<(Mat<Rat>, Vec<Rat>)> {
        let n = self.rank();
        let already_diag = (0..n).all(|i| (0..n).all(|j| i == j || self.gram.at(i, j).is_zero()));
        if already_diag {
            let diag = (0..n).map(|i| self.gram.at(i, i) / rat_int(2)).collect();
            return Ok((Mat::identity(n, &Rat::one()), diag));
        }
        let mut remaining: Vec<Vec<Rat>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect())
            .collect();
        let mut cols: Vec<Vec<Rat>> = Vec::new();
        let mut diag: Vec<Rat> = Vec::new();
        while !remaining.is_empty() {
            let m = remaining.len();
            // Scan order: basis vectors first, then pairwise sums; keep the
            // first strict minimum of ν_p(Q).
            let mut candidates: Vec<(usize, usize)> = (0..m).map(|i| (i, i)).collect();
            for i in 0..m {
                for j in i + 1..m {
                    candidates.push((i, j));
                }
            }
            let mut best: Option<(Valuation, usize, usize)> = None;
            for &(i, j) in &candidates {
                let v: Vec<Rat> = if i == j {
                    remaining[i].clone()
                } else {
                    remaining[i].iter().zip(&remaining[j]).map(|(a, b)| a + b).collect()
                };
                let val = valuation(&self.qform(&v), self.p);
                if best.as_ref().map_or(true, |(bv, _, _)| val < *bv) {
                    best = Some((val, i, j));
                }
            }
            let (val, bi, bj) = best.expect("nonempty candidate list");
            if val == Valuation::Infinite {
                return Err(Error::invariant(
                    "all Q-values vanish on a block of a supposedly nondegenerate lattice",
                ));
            }
            let v: Vec<Rat> = if bi == bj {
                remaining[bi].clone()
            } else {
                remaining[bi].iter().zip(&remaining[bj]).map(|(a, b)| a + b).collect()
            };
            let v = primitive_p_vector(&v, self.p);
            let qv = self.qform(&v);
            let drop_idx = bj;
            let mut next: Vec<Vec<Rat>> = Vec::with_capacity(m - 1);
            for (idx, w) in remaining.iter().enumerate() {
                if idx == drop_idx {
                    continue;
                }
                let c = self.pairing(w, &v) / (&qv * rat_int(2));
                debug_assert!(is_p_integral(&c, self.p), "projection coefficient stays p-integral");
                let w_new: Vec<Rat> = w.iter().zip(&v).map(|(a, b)| a - &c * b).collect();
                next.push(primitive_p_vector(&w_new, self.p));
            }
            cols.push(v);
            diag.push(qv);
            remaining = next;
        }
        let u = Mat::from_cols(cols);
        let transported = u.transpose().mul(&self.gram).mul(&u);
        let expect = Mat::from_fn(n, n, |i, j| {
            if i == j {
                &diag[i] * rat_int(2)
            } else {
                Rat::zero()
            }
        });
        if transported != expect {
            return Err(Error::invariant("diagonalization did not orthogonalize the form"));
        }
        if !rat_mat_p_unimodular(&u, self.p) {
            return Err(Error::invariant("diagonalizing basis change is not p-unimodular"));
        }
        Ok((u, diag))
    }

    /// Counts of positive and negative Q-values in an exact diagonalization.
    pub fn signature(&self) -> Result<(usize, usize)> {
        let (_, diag) = self.diagonalize()?;
        let plus = diag.iter().filter(|d| d.numer().is_positive()).count();
        Ok((plus, diag.len() - plus))
    }

    /// Radical of the reduction mod p, with t = dim and s = rank - t - 1.
    pub fn radical_mod_p(&self) -> Result<RadicalData> {
        let f = FqField::prime(self.p)?;
        let gram_p = self.reduce_gram(&f)?;
        let n_basis = gram_p.kernel_basis();
        let t = n_basis.len();
        Ok(RadicalData { t, s: self.rank() as i64 - t as i64 - 1, n_basis })
    }

    /// Gram matrix reduced into the given field (F_p or F_{p^2}).
    pub fn reduce_gram(&self, f: &FqField) -> Result<Mat<FqElem>> {
        let mut out = Mat::zeros(self.rank(), self.rank(), f.zero());
        for i in 0..self.rank() {
            for j in 0..self.rank() {
                out.set(i, j, f.from_rat(self.gram.at(i, j))?);
            }
        }
        Ok(out)
    }

    /// The p-part of L∨/L. Generators come from the Smith normal form of the
    /// integer Gram matrix: if U·G·V = D with d_i = p^{a_i}·(unit), the class
    /// of (column i of V)/p^{a_i} generates a cyclic factor of order p^{a_i}.
    pub fn discriminant_form(&self) -> FiniteQuadModule {
        let g_int = self.scaled_integer_gram();
        let s = smith_normal_form(&g_int);
        let n = self.rank();
        let mut orders = Vec::new();
        let mut gens = Vec::new();
        let mut qbar_gens = Vec::new();
        for i in 0..n {
            let d = s.d.at(i, i);
            let mut a = 0u32;
            let mut rest = d.clone();
            let pb = BigInt::from(self.p);
            while (&rest % &pb).is_zero() {
                a += 1;
                rest /= &pb;
            }
            if a == 0 {
                continue;
            }
            let pe = pb.pow(a);
            let gen: Vec<Rat> = (0..n).map(|r| Rat::new(s.v.at(r, i).clone(), pe.clone())).collect();
            let q = mod_one_p_part(&self.qform(&gen), self.p);
            orders.push(pe);
            gens.push(gen);
            qbar_gens.push(q);
        }
        FiniteQuadModule { p: self.p, orders, gens, qbar_gens, gram: self.gram.clone() }
    }

    /// Maximality among p-integral lattices in the same quadratic space:
    /// true exactly when disc(L) is elementary and q̄ is anisotropic. A
    /// failure always comes with a vector generating a strictly larger
    /// integral lattice.
    pub fn is_maximal(&self) -> Result<MaximalityReport> {
        let disc = self.discriminant_form();
        if disc.orders.is_empty() {
            return Ok(MaximalityReport { maximal: true, witness: None });
        }
        // A cyclic factor of order p^a, a >= 2: p^{a-1}·gen is a nonzero
        // class with integral Q (its q̄-denominator divides p^a and gains
        // p^{2a-2}).
        if let Some(i) = (0..disc.orders.len()).rev().find(|&i| {
            let mut a = 0u32;
            let mut rest = disc.orders[i].clone();
            while (&rest % self.p).is_zero() {
                a += 1;
                rest /= self.p;
            }
            a >= 2
        }) {
            let a = disc.valuation_of_order(i);
            let scale = Rat::from_integer(BigInt::from(self.p).pow(a - 1));
            let y: Vec<Rat> = disc.gens[i].iter().map(|c| c * &scale).collect();
            debug_assert!(is_p_integral(&self.qform(&y), self.p));
            debug_assert!(!y.iter().all(|c| is_p_integral(c, self.p)));
            return Ok(MaximalityReport {
                maximal: false,
                witness: Some(MaximalityWitness::NonElementaryDivisor {
                    divisor_valuation: a,
                    overlattice_vector: y,
                }),
            });
        }
        // Elementary: search q̄ for an isotropic class.
        match disc.isotropic_class()? {
            None => Ok(MaximalityReport { maximal: true, witness: None }),
            Some(coeffs) => {
                let y = disc.lift(&coeffs);
                debug_assert!(is_p_integral(&self.qform(&y), self.p));
                Ok(MaximalityReport {
                    maximal: false,
                    witness: Some(MaximalityWitness::IsotropicDiscElement {
                        class_coefficients: coeffs,
                        overlattice_vector: y,
                    }),
                })
            }
        }
    }

    /// True when (g - 1)·L∨ ⊆ L for an isometry g preserving the lattice.
    pub fn acts_trivially_on_disc(&self, g: &Mat<Rat>) -> Result<bool> {
        if g.rows != self.rank() || g.cols != self.rank() {
            return Err(Error::precondition("matrix size must match the lattice rank"));
        }
        if g.transpose().mul(&self.gram).mul(g) != self.gram {
            return Err(Error::precondition("matrix does not preserve the form"));
        }
        if !rat_mat_p_unimodular(g, self.p) {
            return Err(Error::precondition("matrix does not preserve the lattice"));
        }
        let disc = self.discriminant_form();
        for gen in &disc.gens {
            let moved = g.mul_vec(gen);
            let diff: Vec<Rat> = moved.iter().zip(gen).map(|(a, b)| a - b).collect();
            if !diff.iter().all(|c| is_p_integral(c, self.p)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Block-orthogonal sum.
    pub fn orthogonal_sum(&self, other: &QuadLattice) -> Result<QuadLattice> {
        if self.p != other.p {
            return Err(Error::precondition("lattices live over different primes"));
        }
        let (n, m) = (self.rank(), other.rank());
        let gram = Mat::from_fn(n + m, n + m, |i, j| {
            if i < n && j < n {
                self.gram.at(i, j).clone()
            } else if i >= n && j >= n {
                other.gram.at(i - n, j - n).clone()
            } else {
                Rat::zero()
            }
        });
        QuadLattice::new(self.p, gram)
    }
}

impl FiniteQuadModule {
    pub fn order(&self) -> BigInt {
        self.orders.iter().fold(BigInt::one(), |acc, d| acc * d)
    }

    pub fn is_trivial(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn is_elementary(&self) -> bool {
        self.orders.iter().all(|d| *d == BigInt::from(self.p))
    }

    fn valuation_of_order(&self, i: usize) -> u32 {
        let mut a = 0u32;
        let mut rest = self.orders[i].clone();
        while (&rest % self.p).is_zero() {
            a += 1;
            rest /= self.p;
        }
        a
    }

    /// Rational lift of the class with the given generator coefficients.
    pub fn lift(&self, coeffs: &[u64]) -> Vec<Rat> {
        assert_eq!(coeffs.len(), self.gens.len());
        let n = self.gram.rows;
        let mut v = vec![Rat::zero(); n];
        for (c, gen) in coeffs.iter().zip(&self.gens) {
            let c = rat_int(*c as i64);
            for (acc, x) in v.iter_mut().zip(gen) {
                *acc += &c * x;
            }
        }
        v
    }

    /// q̄ of a class, as the canonical representative in [0,1).
    pub fn qbar(&self, coeffs: &[u64]) -> Rat {
        let v = self.lift(coeffs);
        let gv = self.gram.mul_vec(&v);
        let q: Rat = v.iter().zip(&gv).map(|(a, b)| a * b).sum::<Rat>() / rat_int(2);
        mod_one_p_part(&q, self.p)
    }

    /// Polarization b̄(x,y) = q̄(x+y) − q̄(x) − q̄(y) in [0,1).
    pub fn bbar(&self, x: &[u64], y: &[u64]) -> Rat {
        let sum: Vec<u64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        let raw = self.qbar(&sum) - self.qbar(x) - self.qbar(y);
        mod_one_p_part(&raw, self.p)
    }

    fn total_size(&self) -> std::result::Result<u128, ()> {
        let mut total: u128 = 1;
        for d in &self.orders {
            let d: u128 = u128::try_from(d).map_err(|_| ())?;
            total = total.checked_mul(d).ok_or(())?;
            if total > ENUM_CAP {
                return Err(());
            }
        }
        Ok(total)
    }

    /// First nonzero class with q̄ = 0, in odometer order, if any.
    pub fn isotropic_class(&self) -> Result<Option<Vec<u64>>> {
        if self.total_size().is_err() {
            return Err(Error::resource(format!(
                "discriminant group too large to exhaust (cap {ENUM_CAP})"
            )));
        }
        let radices: Vec<u64> = self
            .orders
            .iter()
            .map(|d| u64::try_from(d).expect("bounded by enumeration cap"))
            .collect();
        let mut coeffs = vec![0u64; radices.len()];
        loop {
            // Advance odometer; the all-zero class is skipped by advancing first.
            let mut k = 0;
            loop {
                if k == radices.len() {
                    return Ok(None);
                }
                coeffs[k] += 1;
                if coeffs[k] < radices[k] {
                    break;
                }
                coeffs[k] = 0;
                k += 1;
            }
            if self.qbar(&coeffs).is_zero() {
                return Ok(Some(coeffs.clone()));
            }
        }
    }

    /// No nonzero isotropic class. Only meaningful when elementary, where q̄
    /// is an honest quadratic form over F_p.
    pub fn is_anisotropic(&self) -> Result<bool> {
        Ok(self.isotropic_class()?.is_none())
    }
}

/// Exhaustive anisotropy check for the quadratic space over a finite field
/// with the given bilinear Gram matrix (q(v) = vᵀ·gram·v / 2).
pub fn is_anisotropic(gram: &Mat<FqElem>) -> Result<bool> {
    if gram.rows != gram.cols {
        return Err(Error::precondition("Gram matrix must be square"));
    }
    let n = gram.rows;
    if n == 0 {
        return Ok(true);
    }
    let field = gram.at(0, 0).field;
    let q = field.order() as u128;
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.checked_mul(q).unwrap_or(u128::MAX);
        if total > ENUM_CAP {
            return Err(Error::resource(format!(
                "quadratic space too large to exhaust (cap {ENUM_CAP})"
            )));
        }
    }
    let elems = field.elements();
    let two_inv = field.from_u64(2).inv().expect("odd characteristic");
    let mut idx = vec![0usize; n];
    loop {
        let mut k = 0;
        loop {
            if k == n {
                return Ok(true);
            }
            idx[k] += 1;
            if idx[k] < elems.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        let v: Vec<FqElem> = idx.iter().map(|&i| elems[i]).collect();
        let gv = gram.mul_vec(&v);
        let mut acc = field.zero();
        for (a, b) in v.iter().zip(&gv) {
            acc = acc.add(&a.mul(b));
        }
        if acc.mul(&two_inv).is_zero() {
            return Ok(false);
        }
    }
}

fn pair<T: FieldScalar>(gram: &Mat<T>, u: &[T], v: &[T]) -> T {
    let gv = gram.mul_vec(v);
    let mut acc = gram.at(0, 0).zero_like();
    for (a, b) in u.iter().zip(&gv) {
        acc = acc.add_s(&a.mul_s(b));
    }
    acc
}

fn qval<T: FieldScalar>(gram: &Mat<T>, v: &[T]) -> T {
    let two_inv = gram
        .at(0, 0)
        .one_like()
        .add_s(&gram.at(0, 0).one_like())
        .inv_s()
        .expect("2 must be invertible");
    pair(gram, v, v).mul_s(&two_inv)
}

fn mat_from_cols_or_empty<T: FieldScalar>(rows: usize, cols: Vec<Vec<T>>, proto: &T) -> Mat<T> {
    if cols.is_empty() {
        Mat::zeros(rows, 0, proto.zero_like())
    } else {
        Mat::from_cols(cols)
    }
}

/// Basis of the orthogonal complement of the column span.
fn perp_basis<T: FieldScalar>(gram: &Mat<T>, cols: &Mat<T>) -> Mat<T> {
    let proto = gram.at(0, 0);
    if cols.cols == 0 {
        return Mat::identity(gram.rows, proto);
    }
    let a = cols.transpose().mul(gram);
    mat_from_cols_or_empty(gram.rows, a.kernel_basis(), proto)
}

/// For independent totally isotropic columns n_i, columns n'_i with
/// [n_i, n'_j] = δ_ij and [n'_i, n'_j] = 0.
fn hyperbolic_dual<T: FieldScalar>(gram: &Mat<T>, n: &Mat<T>) -> Result<Mat<T>> {
    let a = n.transpose().mul(gram);
    let proto = gram.at(0, 0);
    let id = Mat::identity(n.cols, proto);
    let y = a
        .solve(&id)
        .ok_or_else(|| Error::precondition("columns do not pair freely with the ambient space"))?;
    // Kill the mutual pairings: y_j - Σ_k ([y_j,y_k]/2)·n_k stays dual to N.
    let two_inv = proto.one_like().add_s(&proto.one_like()).inv_s().expect("odd characteristic");
    let c = y.transpose().mul(gram).mul(&y).scale(&two_inv);
    let out = y.sub(&n.mul(&c));
    debug_assert!(n.transpose().mul(gram).mul(&out) == id);
    debug_assert!(out.transpose().mul(gram).mul(&out).is_zero());
    Ok(out)
}

/// Greedily extend the columns of `current` by columns of `pool` to a basis
/// of the joint span; returns the indices of the adopted pool columns.
fn extend_basis<T: FieldScalar>(current: &Mat<T>, pool: &Mat<T>) -> Vec<usize> {
    let mut acc = current.clone();
    let mut taken = Vec::new();
    for j in 0..pool.cols {
        let cand = acc.hstack(&Mat::from_cols(vec![pool.col(j)]));
        if cand.rank() > acc.rank() {
            acc = cand;
            taken.push(j);
        }
    }
    taken
}

fn skew_defect<T: FieldScalar>(gram: &Mat<T>, x: &Mat<T>) -> Mat<T> {
    x.transpose().mul(gram).add(&gram.mul(x))
}

/// N nondegenerate: extend by η on N^⊥, where [η(c), n] = −[c, f(n)].
fn extend_case_nondeg<T: FieldScalar>(gram: &Mat<T>, n: &Mat<T>, f: &Mat<T>) -> Result<Mat<T>> {
    let c = perp_basis(gram, n);
    let gn = n.transpose().mul(gram).mul(n);
    // Solve gn·β_j = rhs_j where rhs_ij = −[c_j, f(n_i)].
    let rhs = f.transpose().mul(gram).mul(&c).neg();
    let beta = gn
        .solve(&rhs)
        .ok_or_else(|| Error::invariant("restricted form was not invertible in the nondegenerate case"))?;
    let eta = n.mul(&beta);
    let basis = n.hstack(&c);
    let images = f.hstack(&eta);
    let basis_inv = basis
        .inverse()
        .ok_or_else(|| Error::invariant("N together with its complement must span"))?;
    Ok(images.mul(&basis_inv))
}

/// N totally isotropic: split M = N ⊕ W ⊕ N' and use the dual maps.
fn extend_case_isotropic<T: FieldScalar>(gram: &Mat<T>, n: &Mat<T>, f: &Mat<T>) -> Result<Mat<T>> {
    let nprime = hyperbolic_dual(gram, n)?;
    let w = perp_basis(gram, &n.hstack(&nprime));
    // X(w_j) = −Σ_i [w_j, f(n_i)]·n'_i and X(n'_j) = −Σ_i [n'_j, f(n_i)]·n'_i.
    let w_pairs = f.transpose().mul(gram).mul(&w).neg();
    let img_w = nprime.mul(&w_pairs);
    let np_pairs = f.transpose().mul(gram).mul(&nprime).neg();
    let img_np = nprime.mul(&np_pairs);
    let basis = n.hstack(&w).hstack(&nprime);
    let images = f.hstack(&img_w).hstack(&img_np);
    let basis_inv = basis
        .inverse()
        .ok_or_else(|| Error::invariant("hyperbolic splitting must span"))?;
    Ok(images.mul(&basis_inv))
}

/// N ⊇ N^⊥ with im f ⊆ N^⊥: split N = N^⊥ ⊕ K against a dual N' of N^⊥.
fn extend_case_coisotropic<T: FieldScalar>(gram: &Mat<T>, n: &Mat<T>, f: &Mat<T>) -> Result<Mat<T>> {
    let r = perp_basis(gram, n);
    if r.cols == 0 {
        // N is all of M; with im f ⊆ N^⊥ = 0 the extension is zero.
        return Ok(Mat::zeros(gram.rows, gram.rows, gram.at(0, 0).zero_like()));
    }
    let nprime = hyperbolic_dual(gram, &r)?;
    let k = perp_basis(gram, &r.hstack(&nprime));
    let eval = |v: Vec<T>| -> Result<Vec<T>> {
        let coords = n
            .solve(&Mat::from_cols(vec![v]))
            .ok_or_else(|| Error::invariant("vector expected inside the coisotropic subspace"))?;
        Ok(f.mul(&coords).col(0))
    };
    let mut img_r = Vec::new();
    for j in 0..r.cols {
        img_r.push(eval(r.col(j))?);
    }
    let mut img_k = Vec::new();
    for j in 0..k.cols {
        img_k.push(eval(k.col(j))?);
    }
    // X(n'_j) = u_j + z_j with u_j ∈ K killing the K-pairings and z_j ∈ N'
    // killing the R-pairings.
    let gk = k.transpose().mul(gram).mul(&k);
    let proto = gram.at(0, 0);
    let mut img_np = Vec::new();
    for j in 0..nprime.cols {
        let npj = nprime.col(j);
        let rhs_k = Mat::from_fn(k.cols, 1, |i, _| pair(gram, &npj, &img_k[i]).neg_s());
        let u = if k.cols > 0 {
            let alpha = gk
                .solve(&rhs_k)
                .ok_or_else(|| Error::invariant("form on K must be nondegenerate"))?;
            k.mul(&alpha).col(0)
        } else {
            vec![proto.zero_like(); gram.rows]
        };
        let beta = Mat::from_fn(r.cols, 1, |i, _| pair(gram, &npj, &img_r[i]).neg_s());
        let z = nprime.mul(&beta).col(0);
        img_np.push(u.iter().zip(&z).map(|(a, b)| a.add_s(b)).collect::<Vec<T>>());
    }
    let basis = r.hstack(&k).hstack(&nprime);
    let images = mat_from_cols_or_empty(gram.rows, img_r, proto)
        .hstack(&mat_from_cols_or_empty(gram.rows, img_k, proto))
        .hstack(&mat_from_cols_or_empty(gram.rows, img_np, proto));
    let basis_inv = basis
        .inverse()
        .ok_or_else(|| Error::invariant("coisotropic splitting must span"))?;
    Ok(images.mul(&basis_inv))
}

/// Extends f: N → M with [f(v),w] + [v,f(w)] = 0 on N to a form-skew
/// endomorphism X of the whole nondegenerate space: X satisfies
/// [Xv,w] + [v,Xw] = 0 everywhere and X restricted to N is f. Follows the
/// three special cases (N nondegenerate, N totally isotropic, N containing
/// its own perp) and reduces the general case along the radical of N.
pub fn extend_to_so<T: FieldScalar>(gram: &Mat<T>, n_basis: &Mat<T>, f: &Mat<T>) -> Result<Mat<T>> {
    let m = gram.rows;
    if gram.cols != m || m == 0 {
        return Err(Error::precondition("ambient Gram matrix must be square and nonempty"));
    }
    if !gram.is_symmetric() {
        return Err(Error::precondition("ambient Gram matrix must be symmetric"));
    }
    if gram.rank() != m {
        return Err(Error::precondition("ambient quadratic space must be nondegenerate"));
    }
    if n_basis.rows != m || f.rows != m || f.cols != n_basis.cols {
        return Err(Error::precondition("subspace and image matrices must be m×t"));
    }
    let t = n_basis.cols;
    if t > 0 && n_basis.rank() != t {
        return Err(Error::precondition("subspace basis must be independent"));
    }
    for i in 0..t {
        for j in i..t {
            let lhs = pair(gram, &f.col(i), &n_basis.col(j));
            let rhs = pair(gram, &n_basis.col(i), &f.col(j));
            if !lhs.add_s(&rhs).is_zero_elem() {
                return Err(Error::precondition(
                    "map is not compatible with the form: [f(v),w] + [v,f(w)] must vanish on N",
                ));
            }
        }
    }
    let proto = gram.at(0, 0);
    let x = if t == 0 {
        Mat::zeros(m, m, proto.zero_like())
    } else {
        let gn = n_basis.transpose().mul(gram).mul(n_basis);
        let rad_coeffs = mat_from_cols_or_empty(t, gn.kernel_basis(), proto);
        let t0 = rad_coeffs.cols;
        if t0 == 0 {
            extend_case_nondeg(gram, n_basis, f)?
        } else if t0 == t {
            extend_case_isotropic(gram, n_basis, f)?
        } else {
            // Step 1: kill f on the radical R = N·rad_coeffs.
            let r = n_basis.mul(&rad_coeffs);
            let f_r = f.mul(&rad_coeffs);
            let x1 = extend_case_isotropic(gram, &r, &f_r)?;
            let f2 = f.sub(&x1.mul(n_basis));
            // Step 2: match the nondegenerate quotient part inside
            // W = (R ⊕ R')^⊥ and subtract it off.
            let rprime = hyperbolic_dual(gram, &r)?;
            let w = perp_basis(gram, &r.hstack(&rprime));
            let b = r.hstack(&w).hstack(&rprime);
            let b_inv = b
                .inverse()
                .ok_or_else(|| Error::invariant("radical splitting must span"))?;
            let p_w = Mat::from_fn(w.cols, m, |i, j| b_inv.at(t0 + i, j).clone());
            let keep = extend_basis(&r, n_basis);
            let k_n = mat_from_cols_or_empty(m, keep.iter().map(|&j| n_basis.col(j)).collect(), proto);
            let f2_k = mat_from_cols_or_empty(m, keep.iter().map(|&j| f2.col(j)).collect(), proto);
            let gram_w = w.transpose().mul(gram).mul(&w);
            let n_bar = p_w.mul(&k_n);
            let f_bar = p_w.mul(&f2_k);
            let x2_bar = extend_case_nondeg(&gram_w, &n_bar, &f_bar)?;
            let x2 = w.mul(&x2_bar).mul(&p_w);
            let f3 = f2.sub(&x2.mul(n_basis));
            // Step 3: the residue maps N into R; spread it over R^⊥ = R ⊕ W
            // and finish with the coisotropic case.
            let f3_k = mat_from_cols_or_empty(m, keep.iter().map(|&j| f3.col(j)).collect(), proto);
            // Solve images on the W-basis from images on K: f̃_W·(P_W·K) = f3_K.
            let bmat = n_bar.clone();
            let ft_w_t = bmat
                .transpose()
                .solve(&f3_k.transpose())
                .ok_or_else(|| Error::invariant("extension of the residual map must exist"))?;
            let ft_w = ft_w_t.transpose();
            let nt = r.hstack(&w);
            let zero_r = Mat::zeros(m, t0, proto.zero_like());
            let ft = zero_r.hstack(&ft_w);
            let x3 = extend_case_coisotropic(gram, &nt, &ft)?;
            x1.add(&x2).add(&x3)
        }
    };
    debug_assert!(skew_defect(gram, &x).is_zero(), "extension must be skew for the form");
    debug_assert!(x.mul(n_basis) == *f, "extension must restrict to the given map");
    Ok(x)
}

fn reflection<T: FieldScalar>(gram: &Mat<T>, v: &[T]) -> Result<Mat<T>> {
    let q = qval(gram, v);
    let qinv = q
        .inv_s()
        .ok_or_else(|| Error::precondition("reflection vector must be non-isotropic"))?;
    let m = gram.rows;
    let vm = Mat::from_cols(vec![v.to_vec()]);
    let outer = vm.mul(&vm.transpose().mul(gram)).scale(&qinv);
    Ok(Mat::identity(m, gram.at(0, 0)).sub(&outer))
}

fn witt_extend_rec<T: FieldScalar>(
    gram: &Mat<T>,
    xs: Vec<Vec<T>>,
    ys: Vec<Vec<T>>,
) -> Result<Mat<T>> {
    let m = gram.rows;
    let proto = gram.at(0, 0);
    if xs.is_empty() {
        return Ok(Mat::identity(m, proto));
    }
    let mut xs = xs;
    let mut ys = ys;
    // Prefer a vector with Q ≠ 0; manufacture one if the set is not totally
    // isotropic, and adjoin hyperbolic partners if it is.
    let mut pivot = xs.iter().position(|x| !qval(gram, x).is_zero_elem());
    if pivot.is_none() {
        let mut fixed = false;
        'outer: for i in 0..xs.len() {
            for j in 0..xs.len() {
                if i != j && !pair(gram, &xs[i], &xs[j]).is_zero_elem() {
                    // Q(x_i + x_j) = [x_i, x_j] ≠ 0; same change on both sides.
                    xs[i] = xs[i].iter().zip(&xs[j]).map(|(a, b)| a.add_s(b)).collect();
                    ys[i] = ys[i].iter().zip(&ys[j]).map(|(a, b)| a.add_s(b)).collect();
                    pivot = Some(i);
                    fixed = true;
                    break 'outer;
                }
            }
        }
        if !fixed {
            // Totally isotropic on both sides: extend each by a hyperbolic
            // dual set; the enlarged systems still share their Gram matrix.
            let xmat = Mat::from_cols(xs.clone());
            let ymat = Mat::from_cols(ys.clone());
            let xd = hyperbolic_dual(gram, &xmat)?;
            let yd = hyperbolic_dual(gram, &ymat)?;
            for j in 0..xd.cols {
                xs.push(xd.col(j));
                ys.push(yd.col(j));
            }
            return witt_extend_rec(gram, xs, ys);
        }
    }
    let i = pivot.expect("pivot arranged above");
    let x = xs[i].clone();
    let y = ys[i].clone();
    let qx = qval(gram, &x);
    // Send x to y by one or two reflections.
    let diff: Vec<T> = x.iter().zip(&y).map(|(a, b)| a.sub_s(b)).collect();
    let h = if !qval(gram, &diff).is_zero_elem() {
        reflection(gram, &diff)?
    } else {
        let sum: Vec<T> = x.iter().zip(&y).map(|(a, b)| a.add_s(b)).collect();
        reflection(gram, &y)?.mul(&reflection(gram, &sum)?)
    };
    debug_assert!(h.mul_vec(&x) == y);
    if xs.len() == 1 {
        return Ok(h);
    }
    let h_inv = h.inverse().ok_or_else(|| Error::invariant("reflections are invertible"))?;
    // Transport the remaining pairs into x^⊥ and recurse there.
    let comp = perp_basis(gram, &Mat::from_cols(vec![x.clone()]));
    let gram_c = comp.transpose().mul(gram).mul(&comp);
    let denom = qx.add_s(&qx);
    let denom_inv = denom.inv_s().expect("pivot has nonzero Q");
    let mut xs_next = Vec::new();
    let mut ys_next = Vec::new();
    for j in 0..xs.len() {
        if j == i {
            continue;
        }
        let z = h_inv.mul_vec(&ys[j]);
        let cx = pair(gram, &xs[j], &x).mul_s(&denom_inv);
        let cz = pair(gram, &z, &x).mul_s(&denom_inv);
        debug_assert!(cx == cz);
        let xp: Vec<T> = xs[j].iter().zip(&x).map(|(a, b)| a.sub_s(&cx.mul_s(b))).collect();
        let zp: Vec<T> = z.iter().zip(&x).map(|(a, b)| a.sub_s(&cz.mul_s(b))).collect();
        let to_coords = |v: Vec<T>| -> Result<Vec<T>> {
            Ok(comp
                .solve(&Mat::from_cols(vec![v]))
                .ok_or_else(|| Error::invariant("projected vector must lie in the complement"))?
                .col(0))
        };
        xs_next.push(to_coords(xp)?);
        ys_next.push(to_coords(zp)?);
    }
    let g_sub = witt_extend_rec(&gram_c, xs_next, ys_next)?;
    // Assemble: fix x, act by g_sub on x^⊥, then push through h.
    let basis = Mat::from_cols(vec![x.clone()]).hstack(&comp);
    let mut block = Mat::zeros(m, m, proto.zero_like());
    block.set(0, 0, proto.one_like());
    for a in 0..g_sub.rows {
        for b in 0..g_sub.cols {
            block.set(1 + a, 1 + b, g_sub.at(a, b).clone());
        }
    }
    let basis_inv = basis.inverse().ok_or_else(|| Error::invariant("x with x^⊥ spans"))?;
    let ghat = basis.mul(&block).mul(&basis_inv);
    Ok(h.mul(&ghat))
}

/// Witt extension: an isometry g of the full space with g·iota0 = iota,
/// given two isometric embeddings of the same source (columns are the images
/// of the source basis and must have equal Gram matrices).
pub fn witt_extend<T: FieldScalar>(
    gram: &Mat<T>,
    iota0: &Mat<T>,
    iota: &Mat<T>,
) -> Result<Mat<T>> {
    let m = gram.rows;
    if gram.cols != m || m == 0 || !gram.is_symmetric() {
        return Err(Error::precondition("ambient Gram matrix must be square, nonempty, symmetric"));
    }
    if gram.rank() != m {
        return Err(Error::precondition("ambient quadratic space must be nondegenerate"));
    }
    if iota0.rows != m || iota.rows != m || iota0.cols != iota.cols {
        return Err(Error::precondition("embeddings must be m×s matrices of equal shape"));
    }
    let s = iota0.cols;
    if iota0.rank() != s || iota.rank() != s {
        return Err(Error::precondition("embeddings must be injective"));
    }
    if iota0.transpose().mul(gram).mul(iota0) != iota.transpose().mul(gram).mul(iota) {
        return Err(Error::precondition("embeddings are not isometric to each other"));
    }
    let xs: Vec<Vec<T>> = (0..s).map(|j| iota0.col(j)).collect();
    let ys: Vec<Vec<T>> = (0..s).map(|j| iota.col(j)).collect();
    let g = witt_extend_rec(gram, xs, ys)?;
    debug_assert!(g.transpose().mul(gram).mul(&g) == *gram);
    debug_assert!(g.mul(iota0) == *iota);
    Ok(g)
}
