//! Clifford algebras of quadratic lattices: the even/odd grading, the
//! reversal anti-involution, spinor norms, GSpin membership with the induced
//! special-orthogonal action, the canonical projector onto degree one, the
//! symplectic forms ψ_δ, parabolic filtrations from isotropic flags, and the
//! p-adic left-multiplication lattice comparison used by the refined charts.
//!
//! Basis monomials are indexed by subset bitmasks: bit i set means the
//! generator e_i occurs, and the monomial is the product in increasing index
//! order. Coefficients live in any exact scalar with division (rationals,
//! finite fields, truncated Witt rings).

use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::fq::FqElem;
use crate::exact::matrix::{FieldScalar, Mat, Scalar};
use crate::exact::rational::{is_p_integral, is_p_unit, Rat};
use crate::exact::snf::zq_module_canonical;
use crate::exact::witt::{WittElem, WittRing};
use crate::quadlattice::QuadLattice;

/// Scalars with a notion of p-integrality and p-units. For residue fields
/// and truncated Witt rings every element is integral; for rationals the
/// valuation decides.
pub trait PAdicScalar: FieldScalar {
    fn is_integral_at(&self, p: u64) -> bool;
    fn is_unit_at(&self, p: u64) -> bool;
}

impl PAdicScalar for Rat {
    fn is_integral_at(&self, p: u64) -> bool {
        is_p_integral(self, p)
    }
    fn is_unit_at(&self, p: u64) -> bool {
        is_p_unit(self, p)
    }
}

impl PAdicScalar for FqElem {
    fn is_integral_at(&self, _p: u64) -> bool {
        true
    }
    fn is_unit_at(&self, _p: u64) -> bool {
        !self.is_zero()
    }
}

impl PAdicScalar for WittElem {
    fn is_integral_at(&self, _p: u64) -> bool {
        true
    }
    fn is_unit_at(&self, _p: u64) -> bool {
        self.is_unit()
    }
}

const MAX_RANK: usize = 8;

/// The Clifford algebra of a rank-m quadratic module, with multiplication
/// realized by the rewriting relations e_i e_j = −e_j e_i + [e_i,e_j] for
/// i ≠ j and e_i² = Q(e_i) = [e_i,e_i]/2.
#[derive(Debug)]
pub struct CliffordAlgebra<T: FieldScalar> {
    pub p: u64,
    gram: Mat<T>,
    m: usize,
    dim: usize,
    qdiag: Vec<T>,
    proto: T,
    // Tr(left multiplication by e_U) per basis monomial U; filled on first
    // use. OnceLock keeps concurrent readers safe without locking fast paths.
    trace_table: OnceLock<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct CliffordElement<T: FieldScalar> {
    pub alg: Arc<CliffordAlgebra<T>>,
    pub coeffs: Vec<T>,
}

impl<T: FieldScalar> PartialEq for CliffordAlgebra<T> {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.gram == other.gram
    }
}

impl<T: FieldScalar> PartialEq for CliffordElement<T> {
    fn eq(&self, other: &Self) -> bool {
        *self.alg == *other.alg && self.coeffs == other.coeffs
    }
}

fn same_algebra<T: FieldScalar>(a: &CliffordElement<T>, b: &CliffordElement<T>) -> bool {
    Arc::ptr_eq(&a.alg, &b.alg) || *a.alg == *b.alg
}

impl<T: FieldScalar> CliffordAlgebra<T> {
    pub fn new(p: u64, gram: Mat<T>) -> Result<Arc<Self>> {
        let m = gram.rows;
        if gram.cols != m || m == 0 {
            return Err(Error::precondition("Gram matrix must be square and nonempty"));
        }
        if !gram.is_symmetric() {
            return Err(Error::precondition("Gram matrix must be symmetric"));
        }
        if m > MAX_RANK {
            return Err(Error::resource(format!(
                "rank {m} exceeds the full-algebra cap of {MAX_RANK} (dimension 2^{m})"
            )));
        }
        let proto = gram.at(0, 0).clone();
        let two = proto.one_like().add_s(&proto.one_like());
        let two_inv = two
            .inv_s()
            .ok_or_else(|| Error::precondition("2 must be invertible in the coefficient ring"))?;
        let qdiag: Vec<T> = (0..m).map(|i| gram.at(i, i).mul_s(&two_inv)).collect();
        Ok(Arc::new(CliffordAlgebra {
            p,
            gram,
            m,
            dim: 1 << m,
            qdiag,
            proto,
            trace_table: OnceLock::new(),
        }))
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> &Mat<T> {
        &self.gram
    }

    pub fn gen_q(&self, i: usize) -> &T {
        &self.qdiag[i]
    }

    fn two_pow_inv(&self, e: u32) -> T {
        let mut x = self.proto.one_like();
        let two = self.proto.one_like().add_s(&self.proto.one_like());
        for _ in 0..e {
            x = x.mul_s(&two);
        }
        x.inv_s().expect("powers of 2 are units here")
    }

    /// e_mask · e_j as a sparse combination. Peels the largest generator of
    /// mask: for i > j, e_i e_j = −e_j e_i + [e_i,e_j].
    fn mono_times_gen(&self, mask: usize, j: usize) -> Vec<(usize, T)> {
        if mask == 0 || (mask >> (j + 1)) == 0 {
            if mask & (1 << j) == 0 {
                return vec![(mask | (1 << j), self.proto.one_like())];
            }
            // mask's top bit is exactly j: e_{rest} e_j e_j = Q(e_j) e_{rest}.
            return vec![(mask & !(1 << j), self.qdiag[j].clone())];
        }
        let i = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut out: Vec<(usize, T)> = self
            .mono_times_gen(rest, j)
            .into_iter()
            .map(|(v, c)| (v | (1 << i), c.neg_s()))
            .collect();
        let b = self.gram.at(i, j);
        if !b.is_zero_elem() {
            out.push((rest, b.clone()));
        }
        out
    }

    /// e_s · e_t as a dense coefficient vector.
    fn mono_mul(&self, s: usize, t: usize) -> Vec<T> {
        let mut acc: Vec<(usize, T)> = vec![(s, self.proto.one_like())];
        for j in 0..self.m {
            if t & (1 << j) == 0 {
                continue;
            }
            let mut next: Vec<(usize, T)> = Vec::with_capacity(acc.len() * 2);
            for (mask, c) in &acc {
                for (v, d) in self.mono_times_gen(*mask, j) {
                    next.push((v, c.mul_s(&d)));
                }
            }
            acc = next;
        }
        let mut dense = vec![self.proto.zero_like(); self.dim];
        for (mask, c) in acc {
            dense[mask] = dense[mask].add_s(&c);
        }
        dense
    }

    fn trace_functional(&self) -> &Vec<T> {
        self.trace_table.get_or_init(|| {
            (0..self.dim)
                .map(|u| {
                    let mut tr = self.proto.zero_like();
                    for t in 0..self.dim {
                        tr = tr.add_s(&self.mono_mul(u, t)[t]);
                    }
                    tr
                })
                .collect()
        })
    }

    pub fn zero(self: &Arc<Self>) -> CliffordElement<T> {
        CliffordElement { alg: Arc::clone(self), coeffs: vec![self.proto.zero_like(); self.dim] }
    }

    pub fn scalar(self: &Arc<Self>, c: T) -> CliffordElement<T> {
        let mut x = self.zero();
        x.coeffs[0] = c;
        x
    }

    pub fn one(self: &Arc<Self>) -> CliffordElement<T> {
        self.scalar(self.proto.one_like())
    }

    pub fn monomial(self: &Arc<Self>, mask: usize, c: T) -> CliffordElement<T> {
        assert!(mask < self.dim, "monomial index out of range");
        let mut x = self.zero();
        x.coeffs[mask] = c;
        x
    }

    pub fn generator(self: &Arc<Self>, i: usize) -> CliffordElement<T> {
        assert!(i < self.m, "generator index out of range");
        self.monomial(1 << i, self.proto.one_like())
    }

    /// Degree-one element Σ v_i e_i.
    pub fn vector(self: &Arc<Self>, v: &[T]) -> CliffordElement<T> {
        assert_eq!(v.len(), self.m, "vector length must equal the rank");
        let mut x = self.zero();
        for (i, c) in v.iter().enumerate() {
            x.coeffs[1 << i] = c.clone();
        }
        x
    }

    pub fn element(self: &Arc<Self>, coeffs: Vec<T>) -> CliffordElement<T> {
        assert_eq!(coeffs.len(), self.dim, "coefficient vector must have length 2^m");
        CliffordElement { alg: Arc::clone(self), coeffs }
    }
}

impl<T: FieldScalar> CliffordElement<T> {
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero_elem())
    }

    pub fn coeff(&self, mask: usize) -> &T {
        &self.coeffs[mask]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len()).filter(|&i| !self.coeffs[i].is_zero_elem()).collect()
    }

    /// Lies in the even part C⁺.
    pub fn is_even(&self) -> bool {
        self.support().iter().all(|s| s.count_ones() % 2 == 0)
    }

    pub fn is_odd(&self) -> bool {
        self.support().iter().all(|s| s.count_ones() % 2 == 1)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(same_algebra(self, other), "elements of different algebras");
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add_s(b)).collect();
        CliffordElement { alg: Arc::clone(&self.alg), coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert!(same_algebra(self, other), "elements of different algebras");
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub_s(b)).collect();
        CliffordElement { alg: Arc::clone(&self.alg), coeffs }
    }

    pub fn neg(&self) -> Self {
        CliffordElement {
            alg: Arc::clone(&self.alg),
            coeffs: self.coeffs.iter().map(|a| a.neg_s()).collect(),
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        CliffordElement {
            alg: Arc::clone(&self.alg),
            coeffs: self.coeffs.iter().map(|a| a.mul_s(c)).collect(),
        }
    }

    pub fn cl_mul(&self, other: &Self) -> Result<Self> {
        if !same_algebra(self, other) {
            return Err(Error::precondition("cannot multiply elements of different algebras"));
        }
        let alg = &self.alg;
        let mut out = vec![alg.proto.zero_like(); alg.dim];
        for s in 0..alg.dim {
            if self.coeffs[s].is_zero_elem() {
                continue;
            }
            for t in 0..alg.dim {
                if other.coeffs[t].is_zero_elem() {
                    continue;
                }
                let c = self.coeffs[s].mul_s(&other.coeffs[t]);
                for (mask, d) in alg.mono_mul(s, t).into_iter().enumerate() {
                    if !d.is_zero_elem() {
                        out[mask] = out[mask].add_s(&c.mul_s(&d));
                    }
                }
            }
        }
        Ok(CliffordElement { alg: Arc::clone(alg), coeffs: out })
    }

    /// The anti-automorphism fixing every e_i: reverses each basis monomial
    /// and re-sorts it through the rewriting relations.
    pub fn star(&self) -> Self {
        let alg = &self.alg;
        let mut out = vec![alg.proto.zero_like(); alg.dim];
        for s in 0..alg.dim {
            if self.coeffs[s].is_zero_elem() {
                continue;
            }
            // Multiply the generators of s in decreasing order.
            let mut acc: Vec<(usize, T)> = vec![(0, alg.proto.one_like())];
            for j in (0..alg.m).rev() {
                if s & (1 << j) == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(acc.len() * 2);
                for (mask, c) in &acc {
                    for (v, d) in alg.mono_times_gen(*mask, j) {
                        next.push((v, c.mul_s(&d)));
                    }
                }
                acc = next;
            }
            for (mask, c) in acc {
                out[mask] = out[mask].add_s(&self.coeffs[s].mul_s(&c));
            }
        }
        CliffordElement { alg: Arc::clone(alg), coeffs: out }
    }

    /// Matrix of left multiplication in the monomial basis.
    pub fn left_mul_matrix(&self) -> Mat<T> {
        let alg = &self.alg;
        let mut out = Mat::zeros(alg.dim, alg.dim, alg.proto.zero_like());
        for t in 0..alg.dim {
            for s in 0..alg.dim {
                if self.coeffs[s].is_zero_elem() {
                    continue;
                }
                for (mask, d) in alg.mono_mul(s, t).into_iter().enumerate() {
                    if !d.is_zero_elem() {
                        let v = out.at(mask, t).add_s(&self.coeffs[s].mul_s(&d));
                        out.set(mask, t, v);
                    }
                }
            }
        }
        out
    }

    /// Reduced trace: the regular trace of left multiplication, scaled so
    /// that Trd(1) = 2^{⌈m/2⌉}. On an orthogonal basis this is
    /// 2^{⌈m/2⌉}·(coefficient of 1); unlike the bare coefficient it stays
    /// tracial for every Gram matrix, which the similitude identities need.
    pub fn trd(&self) -> T {
        let alg = &self.alg;
        let tau = alg.trace_functional();
        let mut tr = alg.proto.zero_like();
        for (c, t) in self.coeffs.iter().zip(tau) {
            tr = tr.add_s(&c.mul_s(t));
        }
        tr.mul_s(&alg.two_pow_inv(alg.m as u32 / 2))
    }

    /// Two-sided inverse, when the left-multiplication matrix is invertible.
    pub fn inverse(&self) -> Option<Self> {
        let alg = &self.alg;
        let l = self.left_mul_matrix();
        let mut e0 = Mat::zeros(alg.dim, 1, alg.proto.zero_like());
        e0.set(0, 0, alg.proto.one_like());
        let y = l.solve(&e0)?;
        let cand = CliffordElement { alg: Arc::clone(alg), coeffs: y.col(0) };
        let lhs = self.cl_mul(&cand).expect("same algebra");
        let rhs = cand.cl_mul(self).expect("same algebra");
        if lhs == alg.one() && rhs == alg.one() {
            Some(cand)
        } else {
            None
        }
    }

    /// ν(x) = x*·x when that lands in the scalars; Ok(None) when x*·x has
    /// higher-degree components (so x is not in GSpin).
    pub fn spinor_norm(&self) -> Result<Option<T>> {
        if !self.is_even() {
            return Err(Error::precondition("spinor norm requires an element of the even part"));
        }
        if self.inverse().is_none() {
            return Err(Error::precondition("spinor norm requires an invertible element"));
        }
        let n = self.star().cl_mul(self)?;
        if n.support().iter().all(|&s| s == 0) {
            Ok(Some(n.coeffs[0].clone()))
        } else {
            Ok(None)
        }
    }
}

impl<T: PAdicScalar> CliffordElement<T> {
    /// GSpin membership: conjugation must map the span of the generators to
    /// itself by a p-integral matrix with p-unit determinant. Returns that
    /// induced orthogonal matrix when it does.
    pub fn is_gspin(&self) -> Result<Option<Mat<T>>> {
        if !self.is_even() {
            return Err(Error::precondition("GSpin membership requires an even element"));
        }
        let inv = self
            .inverse()
            .ok_or_else(|| Error::precondition("GSpin membership requires an invertible element"))?;
        let alg = &self.alg;
        let m = alg.m;
        let mut cols: Vec<Vec<T>> = Vec::with_capacity(m);
        for i in 0..m {
            let conj = self.cl_mul(&alg.generator(i))?.cl_mul(&inv)?;
            if conj.support().iter().any(|s| s.count_ones() != 1) {
                return Ok(None);
            }
            cols.push((0..m).map(|j| conj.coeffs[1 << j].clone()).collect());
        }
        let mat = Mat::from_cols(cols);
        let p = alg.p;
        for i in 0..m {
            for j in 0..m {
                if !mat.at(i, j).is_integral_at(p) {
                    return Ok(None);
                }
            }
        }
        match mat.det() {
            Some(d) if d.is_unit_at(p) => Ok(Some(mat)),
            _ => Ok(None),
        }
    }
}

impl<T: FieldScalar + std::fmt::Display> std::fmt::Display for CliffordElement<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for s in self.support() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if s == 0 {
                write!(f, "{}", self.coeffs[s])?;
            } else {
                write!(f, "({})", self.coeffs[s])?;
                for i in 0..self.alg.m {
                    if s & (1 << i) != 0 {
                        write!(f, "e{}", i + 1)?;
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Clifford algebra of a p-local lattice over the rationals.
pub fn lattice_algebra(l: &QuadLattice) -> Result<Arc<CliffordAlgebra<Rat>>> {
    CliffordAlgebra::new(l.p, l.gram.clone())
}

/// The same algebra with coefficients in a truncated Witt ring.
pub fn lattice_algebra_witt(
    l: &QuadLattice,
    ring: &WittRing,
) -> Result<Arc<CliffordAlgebra<WittElem>>> {
    if ring.p != l.p {
        return Err(Error::precondition("Witt ring prime must match the lattice prime"));
    }
    let mut gram = Mat::zeros(l.rank(), l.rank(), ring.zero());
    for i in 0..l.rank() {
        for j in 0..l.rank() {
            gram.set(i, j, ring.from_rat(l.gram.at(i, j))?);
        }
    }
    CliffordAlgebra::new(l.p, gram)
}

/// The projector from endomorphisms of the algebra onto left multiplications
/// by the dual basis: π(φ) = Σ_i [φ, e_i]·L(A e_i) with A the inverse Gram
/// matrix and [·,·] the normalized trace pairing on operators.
pub struct ProjectorTensor {
    pub alg: Arc<CliffordAlgebra<Rat>>,
    gen_ops: Vec<Mat<Rat>>,
    dual_ops: Vec<Mat<Rat>>,
    dual_vectors: Vec<Vec<Rat>>,
    normalizer: Rat,
}

pub fn projector_pi(l: &QuadLattice) -> Result<ProjectorTensor> {
    let alg = lattice_algebra(l)?;
    let m = alg.rank();
    let a = l
        .gram
        .inverse()
        .ok_or_else(|| Error::precondition("projector needs a nondegenerate form"))?;
    let gen_ops: Vec<Mat<Rat>> = (0..m).map(|i| alg.generator(i).left_mul_matrix()).collect();
    let dual_vectors: Vec<Vec<Rat>> = (0..m).map(|i| a.col(i)).collect();
    let dual_ops: Vec<Mat<Rat>> =
        dual_vectors.iter().map(|v| alg.vector(v).left_mul_matrix()).collect();
    // The trace pairing on left multiplications restricts to 2^{m-1}·[·,·]
    // on the lattice; asserted here rather than assumed.
    let normalizer = Rat::from_integer(BigInt::from(2).pow(m as u32 - 1));
    for i in 0..m {
        for j in 0..m {
            let tr = gen_ops[i].mul(&gen_ops[j]).trace();
            if tr != l.gram.at(i, j) * &normalizer {
                return Err(Error::invariant(
                    "trace pairing does not restrict to the bilinear form at the expected scale",
                ));
            }
        }
    }
    Ok(ProjectorTensor { alg, gen_ops, dual_ops, dual_vectors, normalizer })
}

impl ProjectorTensor {
    pub fn rank(&self) -> usize {
        self.gen_ops.len()
    }

    /// Normalized trace pairing of two operators on the algebra.
    pub fn pairing(&self, a: &Mat<Rat>, b: &Mat<Rat>) -> Rat {
        a.mul(b).trace() / &self.normalizer
    }

    pub fn apply(&self, phi: &Mat<Rat>) -> Mat<Rat> {
        let dim = self.alg.dim();
        let mut out = Mat::zeros(dim, dim, Rat::zero());
        for (gen, dual) in self.gen_ops.iter().zip(&self.dual_ops) {
            let c = self.pairing(phi, gen);
            if !c.is_zero_elem() {
                out = out.add(&dual.scale(&c));
            }
        }
        out
    }

    /// π(φ) expressed as the degree-one coefficient vector of the element it
    /// left-multiplies by.
    pub fn apply_to_vector(&self, phi: &Mat<Rat>) -> Vec<Rat> {
        let m = self.rank();
        let mut v = vec![Rat::zero(); m];
        for (i, gen) in self.gen_ops.iter().enumerate() {
            let c = self.pairing(phi, gen);
            for (acc, d) in v.iter_mut().zip(&self.dual_vectors[i]) {
                *acc += &c * d;
            }
        }
        v
    }

    pub fn image_ops(&self) -> &[Mat<Rat>] {
        &self.dual_ops
    }

    pub fn is_fixed(&self, phi: &Mat<Rat>) -> bool {
        self.apply(phi) == *phi
    }

    /// The full operator on End(H) as a sparse matrix over flattened indices
    /// row·dim + col.
    pub fn sparse_matrix(&self) -> std::collections::BTreeMap<(usize, usize), Rat> {
        let dim = self.alg.dim();
        let mut out = std::collections::BTreeMap::new();
        for i in 0..self.rank() {
            for a in 0..dim {
                for b in 0..dim {
                    // [E_ab, gen_i] = gen_i[b,a] / normalizer.
                    let w = self.gen_ops[i].at(b, a) / &self.normalizer;
                    if w.is_zero_elem() {
                        continue;
                    }
                    for c in 0..dim {
                        for d in 0..dim {
                            let v = self.dual_ops[i].at(c, d);
                            if !v.is_zero_elem() {
                                let entry = out
                                    .entry((c * dim + d, a * dim + b))
                                    .or_insert_with(Rat::zero);
                                *entry += &w * v;
                            }
                        }
                    }
                }
            }
        }
        out.retain(|_, v| !v.is_zero_elem());
        out
    }
}

/// Matrix of ψ_δ(x,y) = Trd(x·δ·y*) in the monomial basis. Requires δ
/// invertible with δ* = −δ; the result is checked to be alternating and
/// nondegenerate.
pub fn psi_delta<T: FieldScalar>(delta: &CliffordElement<T>) -> Result<Mat<T>> {
    if delta.star() != delta.neg() {
        return Err(Error::precondition("ψ_δ requires δ* = −δ"));
    }
    if delta.inverse().is_none() {
        return Err(Error::precondition("ψ_δ requires δ invertible"));
    }
    let alg = &delta.alg;
    let dim = alg.dim();
    // Trd(e_s e_v) table lets each entry come from one coefficient pass.
    let tau = alg.trace_functional().clone();
    let scale = alg.two_pow_inv(alg.m as u32 / 2);
    let trd_pair = Mat::from_fn(dim, dim, |s, v| {
        let prod = alg.mono_mul(s, v);
        let mut tr = alg.proto.zero_like();
        for (c, t) in prod.iter().zip(&tau) {
            tr = tr.add_s(&c.mul_s(t));
        }
        tr.mul_s(&scale)
    });
    let mut y = Mat::zeros(dim, dim, alg.proto.zero_like());
    for t in 0..dim {
        let et_star = alg.monomial(t, alg.proto.one_like()).star();
        let col = delta.cl_mul(&et_star)?;
        for v in 0..dim {
            y.set(v, t, col.coeffs[v].clone());
        }
    }
    let psi = trd_pair.mul(&y);
    if psi.transpose() != psi.neg() {
        return Err(Error::invariant("ψ_δ must be alternating"));
    }
    if psi.rank() != dim {
        return Err(Error::invariant("ψ_δ must be nondegenerate"));
    }
    Ok(psi)
}

/// Filtration data attached to an isotropic subspace L¹ and a splitting
/// L = L¹ ⊕ L⁰ ⊕ L⁻¹ with L⁻¹ isotropic and dual to L¹. Holds bases of the
/// filtration steps F^iH = im(∧^iL¹), the weight spaces E_iH of the
/// associated cocharacter, and the graded pieces H^i = E_iH ∩ F^iH.
pub struct ParabolicFiltration {
    pub alg: Arc<CliffordAlgebra<Rat>>,
    pub r: usize,
    pub l1: Mat<Rat>,
    pub l0: Mat<Rat>,
    pub lm1: Mat<Rat>,
    /// F^0 ⊇ F^1 ⊇ … ⊇ F^{r+1} = 0 as column bases; index i is F^i.
    pub f_spaces: Vec<Mat<Rat>>,
    /// Weight spaces E_0, …, E_r.
    pub e_spaces: Vec<Mat<Rat>>,
    /// H^i = E_i ∩ F^i.
    pub h_spaces: Vec<Mat<Rat>>,
}

fn col_space_basis(columns: Vec<Vec<Rat>>, dim: usize) -> Mat<Rat> {
    if columns.is_empty() {
        return Mat::zeros(dim, 0, Rat::zero());
    }
    let m = Mat::from_cols(columns);
    let (red, pivots) = m.transpose().rref();
    let cols: Vec<Vec<Rat>> = (0..pivots.len()).map(|i| red.row(i)).collect();
    if cols.is_empty() {
        return Mat::zeros(dim, 0, Rat::zero());
    }
    Mat::from_cols(cols)
}

fn span_contains(space: &Mat<Rat>, vectors: &Mat<Rat>) -> bool {
    if vectors.cols == 0 {
        return true;
    }
    if space.cols == 0 {
        return vectors.is_zero();
    }
    space.hstack(vectors).rank() == space.rank()
}

fn spans_equal(a: &Mat<Rat>, b: &Mat<Rat>) -> bool {
    span_contains(a, b) && span_contains(b, a)
}

fn intersect_col_spans(a: &Mat<Rat>, b: &Mat<Rat>, dim: usize) -> Mat<Rat> {
    if a.cols == 0 || b.cols == 0 {
        return Mat::zeros(dim, 0, Rat::zero());
    }
    let joint = a.hstack(&b.neg());
    let ker = joint.kernel_basis();
    let mut cols = Vec::new();
    for k in ker {
        let alpha: Vec<Rat> = k[..a.cols].to_vec();
        let v = a.mul_vec(&alpha);
        if v.iter().any(|x| !x.is_zero_elem()) {
            cols.push(v);
        }
    }
    col_space_basis(cols, dim)
}

pub fn parabolic_filtration(
    l: &QuadLattice,
    l1: &Mat<Rat>,
    l0: &Mat<Rat>,
    lm1: &Mat<Rat>,
) -> Result<ParabolicFiltration> {
    let m = l.rank();
    let g = &l.gram;
    if l1.rows != m || l0.rows != m || lm1.rows != m {
        return Err(Error::precondition("splitting blocks must have one row per lattice basis vector"));
    }
    let r = l1.cols;
    if lm1.cols != r || l1.cols + l0.cols + lm1.cols != m {
        return Err(Error::precondition("splitting must decompose the whole space with dual ends"));
    }
    if r == 0 {
        return Err(Error::precondition("isotropic part must be nonzero"));
    }
    if !l1.transpose().mul(g).mul(l1).is_zero() {
        return Err(Error::precondition("first block must be isotropic"));
    }
    if !lm1.transpose().mul(g).mul(lm1).is_zero() {
        return Err(Error::precondition("last block must be isotropic"));
    }
    if l0.cols > 0
        && (!l0.transpose().mul(g).mul(l1).is_zero() || !l0.transpose().mul(g).mul(lm1).is_zero())
    {
        return Err(Error::precondition("middle block must be orthogonal to both isotropic blocks"));
    }
    let pairing = l1.transpose().mul(g).mul(lm1);
    let pinv = pairing
        .inverse()
        .ok_or_else(|| Error::precondition("isotropic blocks must pair perfectly"))?;
    // Normalize the lowering block so that [l1_i, lm1_j] = δ_ij.
    let lm1 = lm1.mul(&pinv);
    let full = l1.hstack(l0).hstack(&lm1);
    if full.rank() != m {
        return Err(Error::precondition("splitting blocks must span the lattice"));
    }
    let alg = lattice_algebra(l)?;
    let dim = alg.dim();

    let raising_ops: Vec<Mat<Rat>> = (0..r).map(|j| alg.vector(&l1.col(j)).left_mul_matrix()).collect();
    // Products over index subsets give the exterior-power images.
    let subset_op = |js: &[usize]| -> Mat<Rat> {
        let mut op = Mat::identity(dim, &Rat::one());
        for &j in js {
            op = op.mul(&raising_ops[j]);
        }
        op
    };
    let subsets_of_size = |k: usize| -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), 0usize)];
        while let Some((cur, start)) = stack.pop() {
            if cur.len() == k {
                out.push(cur);
                continue;
            }
            for j in start..r {
                let mut next = cur.clone();
                next.push(j);
                stack.push((next, j + 1));
            }
        }
        out
    };

    let mut f_spaces = Vec::with_capacity(r + 2);
    for i in 0..=r {
        if i == 0 {
            f_spaces.push(Mat::identity(dim, &Rat::one()));
            continue;
        }
        let mut cols = Vec::new();
        for js in subsets_of_size(i) {
            let op = subset_op(&js);
            for c in 0..dim {
                cols.push(op.col(c));
            }
        }
        f_spaces.push(col_space_basis(cols, dim));
    }
    f_spaces.push(Mat::zeros(dim, 0, Rat::zero()));
    for i in 0..=r {
        if !span_contains(&f_spaces[i], &f_spaces[i + 1]) {
            return Err(Error::invariant("filtration steps must be nested"));
        }
    }
    // im(∧^i L¹) = ker(∧^{r-i+1} L¹): kernels of the stacked product maps.
    for i in 0..=r + 1 {
        let j = r + 1 - i;
        let kernel = if j == 0 {
            Mat::zeros(dim, 0, Rat::zero())
        } else if j > r {
            Mat::identity(dim, &Rat::one())
        } else {
            let mut stacked_rows: Vec<Vec<Rat>> = Vec::new();
            for js in subsets_of_size(j) {
                let op = subset_op(&js);
                for rr in 0..dim {
                    stacked_rows.push(op.row(rr));
                }
            }
            let stacked = Mat::from_rows(stacked_rows);
            let ker = stacked.kernel_basis();
            if ker.is_empty() {
                Mat::zeros(dim, 0, Rat::zero())
            } else {
                Mat::from_cols(ker)
            }
        };
        if !spans_equal(&f_spaces[i], &kernel) {
            return Err(Error::invariant(
                "image of the raising powers must equal the kernel of the complementary power",
            ));
        }
    }

    // Weight projectors from the hyperbolic pairs (l1_j, lm1_j).
    let lowering_ops: Vec<Mat<Rat>> =
        (0..r).map(|j| alg.vector(&lm1.col(j)).left_mul_matrix()).collect();
    let plus: Vec<Mat<Rat>> = (0..r).map(|j| raising_ops[j].mul(&lowering_ops[j])).collect();
    let minus: Vec<Mat<Rat>> = (0..r).map(|j| lowering_ops[j].mul(&raising_ops[j])).collect();
    let mut weight_proj: Vec<Mat<Rat>> = vec![Mat::zeros(dim, dim, Rat::zero()); r + 1];
    for choice in 0..(1usize << r) {
        let mut op = Mat::identity(dim, &Rat::one());
        for j in 0..r {
            op = op.mul(if choice & (1 << j) != 0 { &plus[j] } else { &minus[j] });
        }
        let w = (choice as u32).count_ones() as usize;
        weight_proj[w] = weight_proj[w].add(&op);
    }
    let mut total = Mat::zeros(dim, dim, Rat::zero());
    for wp in &weight_proj {
        total = total.add(wp);
    }
    if total != Mat::identity(dim, &Rat::one()) {
        return Err(Error::invariant("weight projectors must sum to the identity"));
    }
    let e_spaces: Vec<Mat<Rat>> = weight_proj
        .iter()
        .map(|wp| col_space_basis((0..dim).map(|c| wp.col(c)).collect(), dim))
        .collect();

    let h_spaces: Vec<Mat<Rat>> =
        (0..=r).map(|i| intersect_col_spans(&e_spaces[i], &f_spaces[i], dim)).collect();
    let mut concat = Mat::zeros(dim, 0, Rat::zero());
    for h in &h_spaces {
        if h.cols > 0 {
            concat = concat.hstack(h);
        }
    }
    if concat.cols != dim || concat.rank() != dim {
        return Err(Error::invariant("graded pieces must sum directly to the whole module"));
    }

    // Raising, fixing, lowering: v·H^i lands in H^{i+1}, H^i, H^{i-1}.
    let filt = ParabolicFiltration {
        alg,
        r,
        l1: l1.clone(),
        l0: l0.clone(),
        lm1,
        f_spaces,
        e_spaces,
        h_spaces,
    };
    filt.check_weight_shifts()?;
    Ok(filt)
}

impl ParabolicFiltration {
    fn check_weight_shifts(&self) -> Result<()> {
        let dim = self.alg.dim();
        let zero = Mat::zeros(dim, 0, Rat::zero());
        let h_at = |i: i64| -> &Mat<Rat> {
            if i < 0 || i > self.r as i64 {
                &zero
            } else {
                &self.h_spaces[i as usize]
            }
        };
        let blocks: [(&Mat<Rat>, i64); 3] = [(&self.l1, 1), (&self.l0, 0), (&self.lm1, -1)];
        for (block, shift) in blocks {
            for j in 0..block.cols {
                let op = self.alg.vector(&block.col(j)).left_mul_matrix();
                for i in 0..=self.r {
                    let moved = op.mul(&self.h_spaces[i]);
                    if !span_contains(h_at(i as i64 + shift), &moved) {
                        return Err(Error::invariant(
                            "multiplication by a splitting vector must shift the grading by its weight",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn f_dim(&self, i: usize) -> usize {
        self.f_spaces[i].cols
    }

    /// For r = 1: left multiplication by the lowering vector carries F¹H
    /// isomorphically onto a complement of F¹H, so H = F¹H ⊕ f·F¹H.
    pub fn lowering_iso_check(&self) -> Result<bool> {
        if self.r != 1 {
            return Err(Error::precondition("the quotient comparison is for one-step filtrations"));
        }
        let dim = self.alg.dim();
        let op = self.alg.vector(&self.lm1.col(0)).left_mul_matrix();
        let moved = op.mul(&self.f_spaces[1]);
        Ok(self.f_spaces[1].hstack(&moved).rank() == dim)
    }
}

/// Compares, inside the Clifford algebra of `lt` over W(F_{p²})/p^k, the
/// submodule v·H with H¹ + p·H⁰, where H¹ = im L(e·f), H⁰ = im L(f·e) come
/// from a hyperbolic pair (e, f). Requires ν_p(Q(v)) = 1; then v⁻¹·H equals
/// p⁻¹H¹ + H⁰ exactly when this comparison holds, since v⁻¹ = Q(v)⁻¹·v and
/// unit scalings fix submodules.
pub fn visom_check(
    lt: &QuadLattice,
    ring: &WittRing,
    v: &[WittElem],
    e: &[WittElem],
    f: &[WittElem],
) -> Result<bool> {
    let alg = lattice_algebra_witt(lt, ring)?;
    let m = alg.rank();
    if v.len() != m || e.len() != m || f.len() != m {
        return Err(Error::precondition("vectors must have one coordinate per lattice generator"));
    }
    let pair = |x: &[WittElem], y: &[WittElem]| -> WittElem {
        let gy = alg.gram().mul_vec(y);
        let mut acc = ring.zero();
        for (a, b) in x.iter().zip(&gy) {
            acc = acc.add(&a.mul(b));
        }
        acc
    };
    let two_inv = ring.from_i64(2).inv().expect("odd p");
    let q = |x: &[WittElem]| pair(x, x).mul(&two_inv);
    if !q(e).is_zero() || !q(f).is_zero() {
        return Err(Error::precondition("splitting pair must be isotropic"));
    }
    if pair(e, f) != ring.one() {
        return Err(Error::precondition("splitting pair must satisfy [e,f] = 1"));
    }
    if q(v).valuation() != Some(1) {
        return Err(Error::precondition("vector must have Q-valuation exactly 1"));
    }
    let ev = alg.vector(e);
    let fv = alg.vector(f);
    let h1_gen = ev.cl_mul(&fv)?.left_mul_matrix();
    let h0_gen = fv.cl_mul(&ev)?.left_mul_matrix();
    let v_gen = alg.vector(v).left_mul_matrix();

    let dim = alg.dim();
    let pk = BigInt::from(ring.p).pow(ring.k);
    let pbig = BigInt::from(ring.p);
    // Flatten a W-column to 2·dim integers and adjoin its ω-multiple so the
    // Z/p^k span matches the W-span.
    let flatten = |col: &[WittElem], scale_p: bool| -> Vec<Vec<BigInt>> {
        let mut plain = Vec::with_capacity(2 * dim);
        let mut omega = Vec::with_capacity(2 * dim);
        for x in col {
            let (a, b) = (BigInt::from(x.a), BigInt::from(x.b));
            let c = BigInt::from(ring.c);
            // ω·(a + bω) = cb + aω.
            plain.push(a.clone());
            plain.push(b.clone());
            omega.push(&c * &b);
            omega.push(a);
        }
        if scale_p {
            plain = plain.into_iter().map(|x| x * &pbig).collect();
            omega = omega.into_iter().map(|x| x * &pbig).collect();
        }
        vec![plain, omega]
    };
    let mut lhs_cols = Vec::new();
    let mut rhs_cols = Vec::new();
    for cidx in 0..dim {
        lhs_cols.extend(flatten(&v_gen.col(cidx), false));
        rhs_cols.extend(flatten(&h1_gen.col(cidx), false));
        rhs_cols.extend(flatten(&h0_gen.col(cidx), true));
    }
    let lhs = zq_module_canonical(&Mat::from_cols(lhs_cols), &pk);
    let rhs = zq_module_canonical(&Mat::from_cols(rhs_cols), &pk);
    Ok(lhs == rhs)
}
