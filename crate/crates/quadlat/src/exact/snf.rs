//! Smith normal form over Z with full unimodular transforms, plus a row
//! Hermite form used to compare finitely generated submodules of (Z/p^k)^n
//! by canonical bases.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::matrix::Mat;

pub struct SmithForm {
    /// Row transform, unimodular.
    pub u: Mat<BigInt>,
    pub u_inv: Mat<BigInt>,
    /// Diagonal with d_i >= 0 and d_i | d_{i+1}; u * m * v = d.
    pub d: Mat<BigInt>,
    /// Column transform, unimodular.
    pub v: Mat<BigInt>,
    pub v_inv: Mat<BigInt>,
}

impl SmithForm {
    pub fn divisors(&self) -> Vec<BigInt> {
        (0..self.d.rows.min(self.d.cols)).map(|i| self.d.at(i, i).clone()).collect()
    }

    /// Nonzero divisors only.
    pub fn elementary_divisors(&self) -> Vec<BigInt> {
        self.divisors().into_iter().filter(|d| !d.is_zero()).collect()
    }
}

pub fn smith_normal_form(m: &Mat<BigInt>) -> SmithForm {
    let (r, c) = (m.rows, m.cols);
    let one = BigInt::one();
    let mut a = m.clone();
    let mut u = Mat::identity(r, &one);
    let mut u_inv = Mat::identity(r, &one);
    let mut v = Mat::identity(c, &one);
    let mut v_inv = Mat::identity(c, &one);

    // Row op A <- E A keeps A = U M V if U <- E U, U_inv <- U_inv E^{-1}.
    fn row_swap(a: &mut Mat<BigInt>, u: &mut Mat<BigInt>, u_inv: &mut Mat<BigInt>, i: usize, j: usize) {
        for mat in [&mut *a, &mut *u] {
            for col in 0..mat.cols {
                let x = mat.at(i, col).clone();
                let y = mat.at(j, col).clone();
                mat.set(i, col, y);
                mat.set(j, col, x);
            }
        }
        for row in 0..u_inv.rows {
            let x = u_inv.at(row, i).clone();
            let y = u_inv.at(row, j).clone();
            u_inv.set(row, i, y);
            u_inv.set(row, j, x);
        }
    }
    fn col_swap(a: &mut Mat<BigInt>, v: &mut Mat<BigInt>, v_inv: &mut Mat<BigInt>, i: usize, j: usize) {
        for mat in [&mut *a, &mut *v] {
            for row in 0..mat.rows {
                let x = mat.at(row, i).clone();
                let y = mat.at(row, j).clone();
                mat.set(row, i, y);
                mat.set(row, j, x);
            }
        }
        for col in 0..v_inv.cols {
            let x = v_inv.at(i, col).clone();
            let y = v_inv.at(j, col).clone();
            v_inv.set(i, col, y);
            v_inv.set(j, col, x);
        }
    }
    // row_i -= q * row_t
    fn row_sub(a: &mut Mat<BigInt>, u: &mut Mat<BigInt>, u_inv: &mut Mat<BigInt>, i: usize, t: usize, q: &BigInt) {
        for mat in [&mut *a, &mut *u] {
            for col in 0..mat.cols {
                let val = mat.at(i, col) - q * mat.at(t, col);
                mat.set(i, col, val);
            }
        }
        for row in 0..u_inv.rows {
            let val = u_inv.at(row, t) + q * u_inv.at(row, i);
            u_inv.set(row, t, val);
        }
    }
    fn col_sub(a: &mut Mat<BigInt>, v: &mut Mat<BigInt>, v_inv: &mut Mat<BigInt>, j: usize, t: usize, q: &BigInt) {
        for mat in [&mut *a, &mut *v] {
            for row in 0..mat.rows {
                let val = mat.at(row, j) - q * mat.at(row, t);
                mat.set(row, j, val);
            }
        }
        for col in 0..v_inv.cols {
            let val = v_inv.at(t, col) + q * v_inv.at(j, col);
            v_inv.set(t, col, val);
        }
    }

    let n = r.min(c);
    for t in 0..n {
        'pivot: loop {
            // Smallest nonzero entry by absolute value in the trailing block.
            let mut best: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    if !a.at(i, j).is_zero()
                        && best.map_or(true, |(bi, bj)| a.at(i, j).abs() < a.at(bi, bj).abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break 'pivot };
            if pi != t {
                row_swap(&mut a, &mut u, &mut u_inv, t, pi);
            }
            if pj != t {
                col_swap(&mut a, &mut v, &mut v_inv, t, pj);
            }
            let mut dirty = false;
            for i in t + 1..r {
                if !a.at(i, t).is_zero() {
                    let q = a.at(i, t).div_floor(a.at(t, t));
                    row_sub(&mut a, &mut u, &mut u_inv, i, t, &q);
                    dirty |= !a.at(i, t).is_zero();
                }
            }
            for j in t + 1..c {
                if !a.at(t, j).is_zero() {
                    let q = a.at(t, j).div_floor(a.at(t, t));
                    col_sub(&mut a, &mut v, &mut v_inv, j, t, &q);
                    dirty |= !a.at(t, j).is_zero();
                }
            }
            if dirty {
                continue 'pivot;
            }
            // Row and column are clear. Enforce divisibility into the rest.
            let pivot = a.at(t, t).clone();
            let offender = (t + 1..r)
                .flat_map(|i| (t + 1..c).map(move |j| (i, j)))
                .find(|&(i, j)| !a.at(i, j).mod_floor(&pivot).is_zero());
            match offender {
                Some((i, _)) => {
                    // Fold the offending row into row t and keep reducing.
                    row_sub(&mut a, &mut u, &mut u_inv, t, i, &-BigInt::one());
                    continue 'pivot;
                }
                None => break 'pivot,
            }
        }
        // Sign-normalize the pivot.
        if a.at(t, t).is_negative() {
            for col in 0..c {
                let x = -a.at(t, col).clone();
                a.set(t, col, x);
            }
            for col in 0..u.cols {
                let x = -u.at(t, col).clone();
                u.set(t, col, x);
            }
            for row in 0..u_inv.rows {
                let x = -u_inv.at(row, t).clone();
                u_inv.set(row, t, x);
            }
        }
    }

    debug_assert_eq!(u.mul(m).mul(&v), a);
    debug_assert_eq!(u.mul(&u_inv), Mat::identity(r, &one));
    debug_assert_eq!(v.mul(&v_inv), Mat::identity(c, &one));
    SmithForm { u, u_inv, d: a, v, v_inv }
}

/// Row Hermite normal form: upper echelon, positive pivots, entries above a
/// pivot reduced into [0, pivot). Zero rows are dropped, so the result is a
/// canonical basis of the row space as a Z-module.
pub fn row_hnf(m: &Mat<BigInt>) -> Mat<BigInt> {
    let mut rows: Vec<Vec<BigInt>> = (0..m.rows).map(|i| m.row(i)).collect();
    let cols = m.cols;
    let mut out: Vec<Vec<BigInt>> = Vec::new();
    for c in 0..cols {
        // Euclid all rows with a nonzero entry in column c down to one.
        loop {
            let mut nz: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i][c].is_zero()).collect();
            if nz.len() <= 1 {
                break;
            }
            nz.sort_by_key(|&i| rows[i][c].abs());
            let (small, big) = (nz[0], nz[1]);
            let q = rows[big][c].div_floor(&rows[small][c]);
            for j in 0..cols {
                let val = &rows[big][j] - &q * &rows[small][j];
                rows[big][j] = val;
            }
        }
        if let Some(i) = (0..rows.len()).find(|&i| !rows[i][c].is_zero()) {
            let mut pivot_row = rows.remove(i);
            if pivot_row[c].is_negative() {
                for x in pivot_row.iter_mut() {
                    *x = -x.clone();
                }
            }
            // Reduce earlier pivot rows above this pivot.
            let pv = pivot_row[c].clone();
            for prev in out.iter_mut() {
                let q = prev[c].div_floor(&pv);
                if !q.is_zero() {
                    for j in 0..cols {
                        let val = &prev[j] - &q * &pivot_row[j];
                        prev[j] = val;
                    }
                }
            }
            out.push(pivot_row);
        }
    }
    if out.is_empty() {
        Mat::zeros(0, cols, BigInt::zero())
    } else {
        Mat::from_rows(out)
    }
}

/// Canonical basis matrix of the submodule of (Z/q)^n generated by the given
/// columns: the Hermite form of the generators together with q times the
/// standard basis. Two generating sets span the same submodule iff their
/// canonical bases agree.
pub fn zq_module_canonical(generators: &Mat<BigInt>, q: &BigInt) -> Mat<BigInt> {
    let n = generators.rows;
    let gens_t = generators.transpose();
    let scaled = Mat::identity(n, &BigInt::one()).map(|x| x * q);
    let mut all_rows: Vec<Vec<BigInt>> = Vec::new();
    for i in 0..gens_t.rows {
        all_rows.push(gens_t.row(i));
    }
    for i in 0..n {
        all_rows.push(scaled.row(i));
    }
    row_hnf(&Mat::from_rows(all_rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn imat(rows: Vec<Vec<i64>>) -> Mat<BigInt> {
        Mat::from_rows(
            rows.into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect(),
        )
    }

    fn divisors_of(m: &Mat<BigInt>) -> Vec<i64> {
        smith_normal_form(m)
            .divisors()
            .iter()
            .map(|d| i64::try_from(d).unwrap())
            .collect()
    }

    #[test]
    fn diagonal_example() {
        assert_eq!(divisors_of(&imat(vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, -6]])), vec![2, 2, 6]);
    }

    #[test]
    fn hyperbolic_example() {
        assert_eq!(divisors_of(&imat(vec![vec![0, 1], vec![1, 0]])), vec![1, 1]);
    }

    #[test]
    fn identity_fixed_point() {
        let id = Mat::identity(4, &BigInt::one());
        let s = smith_normal_form(&id);
        assert_eq!(s.d, id);
    }

    #[test]
    fn rectangular_and_zero() {
        let m = imat(vec![vec![2, 4, 6]]);
        let s = smith_normal_form(&m);
        assert_eq!(s.divisors(), vec![BigInt::from(2)]);
        assert_eq!(s.u.mul(&m).mul(&s.v), s.d);
        let z = imat(vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(divisors_of(&z), vec![0, 0]);
    }

    // Property suite: U M V = D exactly, U and V unimodular, divisor chain,
    // |prod d_i| = |det M| for square M.
    #[test]
    fn random_matrices_reduce_correctly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for case in 0..100 {
            let r = rng.gen_range(1..=5);
            let c = if case % 3 == 0 { rng.gen_range(1..=5) } else { r };
            let m = Mat::from_fn(r, c, |_, _| BigInt::from(rng.gen_range(-9i64..=9)));
            let s = smith_normal_form(&m);
            assert_eq!(s.u.mul(&m).mul(&s.v), s.d, "U M V = D");
            let one = BigInt::one();
            assert_eq!(s.u.mul(&s.u_inv), Mat::identity(r, &one));
            assert_eq!(s.v.mul(&s.v_inv), Mat::identity(c, &one));
            assert_eq!(super::super::matrix::bigint_det(&s.u).abs(), one);
            assert_eq!(super::super::matrix::bigint_det(&s.v).abs(), one);
            let div = s.divisors();
            for w in div.windows(2) {
                if !w[0].is_zero() {
                    assert!(w[1].mod_floor(&w[0]).is_zero(), "divisor chain");
                } else {
                    assert!(w[1].is_zero());
                }
            }
            for (i, d) in div.iter().enumerate() {
                assert_eq!(s.d.at(i, i), d);
                assert!(!d.is_negative());
            }
            if r == c {
                let prod = div.iter().fold(BigInt::one(), |acc, d| acc * d);
                assert_eq!(prod.abs(), super::super::matrix::bigint_det(&m).abs());
            }
        }
    }

    #[test]
    fn hermite_canonical_for_module_comparison() {
        let q = BigInt::from(27);
        // Same submodule of (Z/27)^2 generated two ways.
        let g1 = imat(vec![vec![3, 0], vec![0, 3]]);
        let g2 = imat(vec![vec![3, 6], vec![3, 0]]);
        assert_eq!(zq_module_canonical(&g1, &q), zq_module_canonical(&g2, &q));
        let g3 = imat(vec![vec![3, 0], vec![0, 9]]);
        assert_ne!(zq_module_canonical(&g1, &q), zq_module_canonical(&g3, &q));
    }
}
