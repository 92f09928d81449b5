//! Dense matrices over any exact scalar. Scalars carry their own ring
//! context (a finite field or Witt ring is a runtime value, not a type), so
//! the traits here pass context through witness elements instead of nullary
//! constructors.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::fq::FqElem;
use super::rational::Rat;
use super::witt::WittElem;

pub trait Scalar: Clone + PartialEq + std::fmt::Debug {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero_elem(&self) -> bool;
    fn add_s(&self, rhs: &Self) -> Self;
    fn sub_s(&self, rhs: &Self) -> Self;
    fn mul_s(&self, rhs: &Self) -> Self;
    fn neg_s(&self) -> Self;
}

/// Scalars with partial multiplicative inversion. For genuine fields `inv_s`
/// fails only at zero; for a local ring like a truncated Witt ring it fails
/// on every non-unit, and the elimination routines only ever pivot on
/// invertible entries.
pub trait FieldScalar: Scalar {
    fn inv_s(&self) -> Option<Self>;
}

impl Scalar for Rat {
    fn zero_like(&self) -> Self {
        Rat::zero()
    }
    fn one_like(&self) -> Self {
        Rat::one()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_s(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub_s(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul_s(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_s(&self) -> Self {
        -self
    }
}

impl FieldScalar for Rat {
    fn inv_s(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.recip())
        }
    }
}

impl Scalar for BigInt {
    fn zero_like(&self) -> Self {
        BigInt::zero()
    }
    fn one_like(&self) -> Self {
        BigInt::one()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_s(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub_s(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul_s(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_s(&self) -> Self {
        -self
    }
}

impl Scalar for FqElem {
    fn zero_like(&self) -> Self {
        self.field.zero()
    }
    fn one_like(&self) -> Self {
        self.field.one()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_s(&self, rhs: &Self) -> Self {
        self.add(rhs)
    }
    fn sub_s(&self, rhs: &Self) -> Self {
        self.sub(rhs)
    }
    fn mul_s(&self, rhs: &Self) -> Self {
        self.mul(rhs)
    }
    fn neg_s(&self) -> Self {
        self.neg()
    }
}

impl FieldScalar for FqElem {
    fn inv_s(&self) -> Option<Self> {
        self.inv()
    }
}

impl Scalar for WittElem {
    fn zero_like(&self) -> Self {
        self.ring.zero()
    }
    fn one_like(&self) -> Self {
        self.ring.one()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_s(&self, rhs: &Self) -> Self {
        self.add(rhs)
    }
    fn sub_s(&self, rhs: &Self) -> Self {
        self.sub(rhs)
    }
    fn mul_s(&self, rhs: &Self) -> Self {
        self.mul(rhs)
    }
    fn neg_s(&self) -> Self {
        self.neg()
    }
}

impl FieldScalar for WittElem {
    fn inv_s(&self) -> Option<Self> {
        self.inv()
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize, zero: T) -> Self {
        Mat { rows, cols, data: vec![zero; rows * cols] }
    }

    pub fn identity(n: usize, proto: &T) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { proto.one_like() } else { proto.zero_like() })
    }

    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.cols).map(|j| self.at(i, j).clone()).collect()
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn map<S: Scalar>(&self, mut f: impl FnMut(&T) -> S) -> Mat<S> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| f(x)).collect() }
    }

    pub fn add(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).add_s(rhs.at(i, j)))
    }

    pub fn sub(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).sub_s(rhs.at(i, j)))
    }

    pub fn neg(&self) -> Mat<T> {
        self.map(|x| x.neg_s())
    }

    pub fn scale(&self, c: &T) -> Mat<T> {
        self.map(|x| x.mul_s(c))
    }

    pub fn mul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch");
        let zero = self
            .data
            .first()
            .or_else(|| rhs.data.first())
            .map(|x| x.zero_like())
            .expect("cannot multiply empty matrices without a witness");
        Mat::from_fn(self.rows, rhs.cols, |i, j| {
            let mut acc = zero.clone();
            for k in 0..self.cols {
                acc = acc.add_s(&self.at(i, k).mul_s(rhs.at(k, j)));
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        let zero = self.data.first().or_else(|| v.first()).unwrap().zero_like();
        (0..self.rows)
            .map(|i| {
                let mut acc = zero.clone();
                for (k, vk) in v.iter().enumerate() {
                    acc = acc.add_s(&self.at(i, k).mul_s(vk));
                }
                acc
            })
            .collect()
    }

    pub fn trace(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let mut acc = self.data[0].zero_like();
        for i in 0..self.rows {
            acc = acc.add_s(self.at(i, i));
        }
        acc
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.at(i, j) == self.at(j, i)))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero_elem())
    }

    pub fn hstack(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows, rhs.rows);
        Mat::from_fn(self.rows, self.cols + rhs.cols, |i, j| {
            if j < self.cols {
                self.at(i, j).clone()
            } else {
                rhs.at(i, j - self.cols).clone()
            }
        })
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn from_cols(cols: Vec<Vec<T>>) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |col| col.len());
        assert!(cols.iter().all(|col| col.len() == r), "ragged columns");
        Mat::from_fn(r, c, |i, j| cols[j][i].clone())
    }
}

impl<T: FieldScalar> Mat<T> {
    /// Row reduction pivoting only on invertible entries. Returns the reduced
    /// matrix and the pivot column of each pivot row. Over a field this is
    /// the ordinary reduced row echelon form; over a local ring it reduces as
    /// far as unit pivots allow.
    pub fn rref(&self) -> (Mat<T>, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pr) = (r..m.rows).find(|&i| m.at(i, c).inv_s().is_some()) else {
                continue;
            };
            for j in 0..m.cols {
                let tmp = m.at(r, j).clone();
                let v = m.at(pr, j).clone();
                m.set(r, j, v);
                m.set(pr, j, tmp);
            }
            let inv = m.at(r, c).inv_s().unwrap();
            for j in 0..m.cols {
                let v = m.at(r, j).mul_s(&inv);
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i != r && !m.at(i, c).is_zero_elem() {
                    let f = m.at(i, c).clone();
                    for j in 0..m.cols {
                        let v = m.at(i, j).sub_s(&f.mul_s(m.at(r, j)));
                        m.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Solves self * X = B exactly (free variables pinned to zero). None when
    /// inconsistent or when elimination stalls on non-invertible pivots.
    pub fn solve(&self, b: &Mat<T>) -> Option<Mat<T>> {
        assert_eq!(self.rows, b.rows);
        let aug = self.hstack(b);
        let (red, pivots) = aug.rref();
        // A pivot inside the right block means inconsistency (for a field) or
        // a solution not expressible without inverting a non-unit.
        if pivots.iter().any(|&c| c >= self.cols) {
            return None;
        }
        // Residual nonzero rows beyond the pivot rows also mean inconsistency.
        for i in pivots.len()..red.rows {
            for j in self.cols..red.cols {
                if !red.at(i, j).is_zero_elem() {
                    return None;
                }
            }
        }
        let zero = b.data.first().map(|x| x.zero_like()).or_else(|| self.data.first().map(|x| x.zero_like()))?;
        let mut x = Mat::zeros(self.cols, b.cols, zero);
        for (r, &c) in pivots.iter().enumerate() {
            for j in 0..b.cols {
                x.set(c, j, red.at(r, self.cols + j).clone());
            }
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Mat<T>> {
        assert_eq!(self.rows, self.cols);
        let proto = self.data.first()?;
        let id = Mat::identity(self.rows, proto);
        let x = self.solve(&id)?;
        if self.mul(&x) == id {
            Some(x)
        } else {
            None
        }
    }

    /// Basis of the right kernel, one column per free variable. Correct over
    /// fields; do not use over local rings.
    pub fn kernel_basis(&self) -> Vec<Vec<T>> {
        let proto = match self.data.first() {
            Some(p) => p.clone(),
            None => return Vec::new(),
        };
        let (red, pivots) = self.rref();
        let piv_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if piv_set.contains(&free) {
                continue;
            }
            let mut v = vec![proto.zero_like(); self.cols];
            v[free] = proto.one_like();
            for (r, &c) in pivots.iter().enumerate() {
                v[c] = red.at(r, free).neg_s();
            }
            basis.push(v);
        }
        basis
    }

    /// Determinant by unit-pivot elimination. Over a field this is always the
    /// determinant; over a local ring it is Some only when elimination never
    /// stalls (in particular whenever the determinant is a unit).
    pub fn det(&self) -> Option<T> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return None;
        }
        let mut m = self.clone();
        let mut acc = m.data[0].one_like();
        let mut negate = false;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| m.at(i, c).inv_s().is_some()) else {
                // No invertible pivot: over a field the column below c is
                // zero, hence determinant zero. Over a local ring a nonzero
                // non-unit residue defeats this routine.
                if (c..n).all(|i| m.at(i, c).is_zero_elem()) {
                    return Some(m.data[0].zero_like());
                }
                return None;
            };
            if pr != c {
                negate = !negate;
                for j in 0..n {
                    let tmp = m.at(c, j).clone();
                    let v = m.at(pr, j).clone();
                    m.set(c, j, v);
                    m.set(pr, j, tmp);
                }
            }
            let pivot = m.at(c, c).clone();
            acc = acc.mul_s(&pivot);
            let inv = pivot.inv_s().unwrap();
            for i in c + 1..n {
                if m.at(i, c).is_zero_elem() {
                    continue;
                }
                let f = m.at(i, c).mul_s(&inv);
                for j in c..n {
                    let v = m.at(i, j).sub_s(&f.mul_s(m.at(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        Some(if negate { acc.neg_s() } else { acc })
    }
}

/// Determinant over the integers via exact rational elimination.
pub fn bigint_det(m: &Mat<BigInt>) -> BigInt {
    let rm: Mat<Rat> = m.map(|x| Rat::from(x.clone()));
    match rm.det() {
        Some(d) => {
            debug_assert!(d.denom().is_one() || d.is_zero());
            d.numer().clone()
        }
        None => BigInt::zero(),
    }
}

/// True when the integer matrix has determinant +-1 times a p-unit, i.e. is
/// invertible over Z_(p).
pub fn is_p_unimodular(m: &Mat<BigInt>, p: u64) -> bool {
    let d = bigint_det(m);
    !d.is_zero() && super::rational::int_valuation(&d, p) == super::rational::Valuation::Finite(0)
}

#[allow(unused_imports)]
use num_integer::Integer as _;
