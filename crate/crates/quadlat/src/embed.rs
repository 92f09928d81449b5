//! Constructive self-dual overlattices: every p-local lattice embeds as a
//! direct summand of a self-dual lattice with positive-definite orthogonal
//! complement. Non-unit diagonal entries are absorbed one at a time, each
//! costing a single extra rank: positive entries into a binary form
//! ax² + xy + pc′y², negative entries into a hyperbolic plane.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::matrix::Mat;
use crate::exact::rational::{is_p_integral, is_p_unit, rat_int, valuation, Rat, Valuation};
use crate::exact::snf::smith_normal_form;
use crate::quadlattice::QuadLattice;

/// An isometric embedding of a lattice into a self-dual one, stored as the
/// target Gram matrix, the matrix of the embedding on basis vectors, and a
/// basis of the orthogonal complement.
#[derive(Clone, Debug)]
pub struct SelfDualEmbedding {
    pub source: QuadLattice,
    pub target_gram: Mat<Rat>,
    /// Columns are the images of the source basis vectors.
    pub embed_matrix: Mat<Rat>,
    /// Columns span the orthogonal complement of the image.
    pub complement_basis: Mat<Rat>,
    /// Construction notes, e.g. when the signature assertion was skipped.
    pub notes: Vec<String>,
}

/// Gram matrix of ax² + xy + pc′y² with c′ the smallest positive integer
/// making the form definite (4ac′ > 1). Its determinant 4apc′ − 1 is a
/// p-unit, and the form represents a primitively at (1,0).
pub fn eplus(a: &Rat, p: u64) -> Result<Mat<Rat>> {
    if !a.is_positive() {
        return Err(Error::precondition("the represented value must be positive"));
    }
    // Smallest c' >= 1 with 4ac' > 1.
    let mut cp = Rat::one();
    while &(rat_int(4) * a * &cp) <= &Rat::one() {
        cp += Rat::one();
    }
    let pc = rat_int(p as i64) * &cp;
    let gram = Mat::from_rows(vec![
        vec![a * rat_int(2), Rat::one()],
        vec![Rat::one(), &pc * rat_int(2)],
    ]);
    debug_assert!(is_p_unit(&gram.det().unwrap(), p));
    Ok(gram)
}

/// Gram of the hyperbolic plane with Q(xe + yf) = xy.
pub fn hyperbolic_gram() -> Mat<Rat> {
    Mat::from_rows(vec![vec![Rat::zero(), Rat::one()], vec![Rat::one(), Rat::zero()]])
}

/// The vector e + b·f in the hyperbolic plane; its Q-value is b and it
/// generates a direct summand.
pub fn hyperbolic_embed(b: &Rat) -> Vec<Rat> {
    vec![Rat::one(), b.clone()]
}

fn is_positive_definite(gram: &Mat<Rat>) -> bool {
    // Sylvester: all leading principal minors positive.
    for k in 1..=gram.rows {
        let minor = Mat::from_fn(k, k, |i, j| gram.at(i, j).clone());
        match minor.det() {
            Some(d) if d.is_positive() => {}
            _ => return false,
        }
    }
    true
}

fn p_unit_elementary_divisors(m: &Mat<Rat>, p: u64) -> bool {
    // Clear (prime-to-p) denominators and read the Smith divisors.
    let mut l = BigInt::one();
    for i in 0..m.rows {
        for j in 0..m.cols {
            l = l.lcm(m.at(i, j).denom());
        }
    }
    if (&l % p).is_zero() {
        return false;
    }
    let int = m.map(|x| (x * &l).to_integer());
    let s = smith_normal_form(&int);
    let divisors = s.elementary_divisors();
    if divisors.len() != m.cols.min(m.rows) {
        return false;
    }
    divisors.iter().all(|d| !(d % p).is_zero())
}

impl SelfDualEmbedding {
    /// Re-checks every structural invariant; used by tests and the
    /// self-check suite rather than trusted blindly.
    pub fn verify(&self) -> Result<()> {
        let p = self.source.p;
        let g = &self.target_gram;
        let n = g.rows;
        if !g.is_symmetric() {
            return Err(Error::invariant("target Gram must be symmetric"));
        }
        for i in 0..n {
            for j in 0..n {
                if !is_p_integral(g.at(i, j), p) {
                    return Err(Error::invariant("target Gram must be p-integral"));
                }
            }
        }
        match g.det() {
            Some(d) if is_p_unit(&d, p) => {}
            _ => return Err(Error::invariant("target Gram must have p-unit determinant")),
        }
        let e = &self.embed_matrix;
        if e.rows != n || e.cols != self.source.rank() {
            return Err(Error::invariant("embedding matrix has wrong shape"));
        }
        if e.transpose().mul(g).mul(e) != self.source.gram {
            return Err(Error::invariant("embedding must be isometric"));
        }
        for i in 0..e.rows {
            for j in 0..e.cols {
                if !is_p_integral(e.at(i, j), p) {
                    return Err(Error::invariant("embedding matrix must be p-integral"));
                }
            }
        }
        if !p_unit_elementary_divisors(e, p) {
            return Err(Error::invariant("image must be a direct summand"));
        }
        let c = &self.complement_basis;
        if c.rows != n || e.cols + c.cols != n {
            return Err(Error::invariant("complement basis has wrong shape"));
        }
        if c.cols > 0 {
            if !e.transpose().mul(g).mul(c).is_zero() {
                return Err(Error::invariant("complement must be orthogonal to the image"));
            }
            let cg = c.transpose().mul(g).mul(c);
            if !is_positive_definite(&cg) {
                return Err(Error::invariant("complement must be positive definite"));
            }
            if !p_unit_elementary_divisors(c, p) {
                return Err(Error::invariant("complement must be a direct summand"));
            }
        }
        Ok(())
    }

    pub fn target_rank(&self) -> usize {
        self.target_gram.rows
    }

    pub fn target_lattice(&self) -> Result<QuadLattice> {
        QuadLattice::new(self.source.p, self.target_gram.clone())
    }

    /// The complement Λ = L^⊥ as a lattice of its own.
    pub fn complement_lattice(&self) -> Result<Option<QuadLattice>> {
        if self.complement_basis.cols == 0 {
            return Ok(None);
        }
        let cg = self
            .complement_basis
            .transpose()
            .mul(&self.target_gram)
            .mul(&self.complement_basis);
        Ok(Some(QuadLattice::new(self.source.p, cg)?))
    }
}

/// Builds a self-dual overlattice with L as a direct summand and positive
/// definite complement. Unit diagonal entries pass through; each positive
/// non-unit a is absorbed into the binary block from `eplus`; each negative
/// non-unit into a hyperbolic plane. The rank grows by one per non-unit
/// entry, so a cyclic discriminant costs at most one extra rank.
pub fn selfdual_overlattice(l: &QuadLattice) -> Result<SelfDualEmbedding> {
    let p = l.p;
    let n = l.rank();
    let mut notes = Vec::new();

    // Already self-dual: take the lattice itself.
    if is_p_unit(&l.det_gram(), p) {
        return Ok(SelfDualEmbedding {
            source: l.clone(),
            target_gram: l.gram.clone(),
            embed_matrix: Mat::identity(n, &Rat::one()),
            complement_basis: Mat::zeros(n, 0, Rat::zero()),
            notes,
        });
    }

    let (u, diag) = l.diagonalize()?;

    enum Block {
        Unit(Rat),
        Plus(Mat<Rat>),
        Hyperbolic(Rat),
    }
    let mut blocks = Vec::with_capacity(n);
    for d in &diag {
        let unit = match valuation(d, p) {
            Valuation::Finite(v) => v == 0,
            Valuation::Infinite => unreachable!("nondegenerate diagonal"),
        };
        if unit {
            blocks.push(Block::Unit(d.clone()));
        } else if d.is_positive() {
            blocks.push(Block::Plus(eplus(d, p)?));
        } else {
            blocks.push(Block::Hyperbolic(d.clone()));
        }
    }

    let target_rank: usize = blocks
        .iter()
        .map(|b| match b {
            Block::Unit(_) => 1,
            _ => 2,
        })
        .sum();
    let mut target = Mat::zeros(target_rank, target_rank, Rat::zero());
    let mut embed_diag = Mat::zeros(target_rank, n, Rat::zero());
    let mut comp_cols: Vec<Vec<Rat>> = Vec::new();
    let mut row = 0usize;
    for (j, b) in blocks.iter().enumerate() {
        match b {
            Block::Unit(d) => {
                target.set(row, row, d * rat_int(2));
                embed_diag.set(row, j, Rat::one());
                row += 1;
            }
            Block::Plus(g2) => {
                for a in 0..2 {
                    for bb in 0..2 {
                        target.set(row + a, row + bb, g2.at(a, bb).clone());
                    }
                }
                // (1,0) represents the diagonal value; its orthogonal
                // complement in the block is (1, -2a) with Q = a(4apc'-1).
                embed_diag.set(row, j, Rat::one());
                let d = &diag[j];
                let mut comp = vec![Rat::zero(); target_rank];
                comp[row] = Rat::one();
                comp[row + 1] = d * rat_int(-2);
                comp_cols.push(comp);
                row += 2;
            }
            Block::Hyperbolic(d) => {
                let g2 = hyperbolic_gram();
                for a in 0..2 {
                    for bb in 0..2 {
                        target.set(row + a, row + bb, g2.at(a, bb).clone());
                    }
                }
                let v = hyperbolic_embed(d);
                embed_diag.set(row, j, v[0].clone());
                embed_diag.set(row + 1, j, v[1].clone());
                // (1, -d) pairs to zero with (1, d) and has Q = -d > 0.
                let mut comp = vec![Rat::zero(); target_rank];
                comp[row] = Rat::one();
                comp[row + 1] = d.clone() * rat_int(-1);
                comp_cols.push(comp);
                row += 2;
            }
        }
    }
    debug_assert_eq!(row, target_rank);

    // embed_diag sends the diagonalizing basis into the target; compose
    // with the basis change to embed the original basis.
    let u_inv = u.inverse().expect("diagonalizing change is invertible");
    let embed = embed_diag.mul(&u_inv);
    let complement = if comp_cols.is_empty() {
        Mat::zeros(target_rank, 0, Rat::zero())
    } else {
        Mat::from_cols(comp_cols)
    };

    // Signature bookkeeping only applies to inputs with two negative values.
    let neg = diag.iter().filter(|d| d.is_negative()).count();
    if neg == 2 {
        let lt = QuadLattice::new(p, target.clone())?;
        let (tp, tm) = lt.signature()?;
        if tm != 2 {
            return Err(Error::invariant("target signature must keep exactly two negatives"));
        }
        let extra = target_rank - n;
        if tp != n - 2 + extra {
            return Err(Error::invariant("positive part must grow by the added rank"));
        }
    } else {
        notes.push(format!(
            "signature assertion skipped: source has {neg} negative diagonal values, not 2"
        ));
    }

    let out = SelfDualEmbedding {
        source: l.clone(),
        target_gram: target,
        embed_matrix: embed,
        complement_basis: complement,
        notes,
    };
    out.verify()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lat_diag(p: u64, q: &[i64]) -> QuadLattice {
        let qv: Vec<Rat> = q.iter().map(|&x| rat_int(x)).collect();
        QuadLattice::from_diag(p, &qv).unwrap()
    }

    #[test]
    fn eplus_examples() {
        let g = eplus(&rat_int(1), 3).unwrap();
        assert_eq!(
            g,
            Mat::from_rows(vec![
                vec![rat_int(2), rat_int(1)],
                vec![rat_int(1), rat_int(6)],
            ])
        );
        assert_eq!(g.det().unwrap(), rat_int(11));
        let g5 = eplus(&rat_int(1), 5).unwrap();
        assert_eq!(
            g5,
            Mat::from_rows(vec![
                vec![rat_int(2), rat_int(1)],
                vec![rat_int(1), rat_int(10)],
            ])
        );
        let gh = eplus(&rat(1, 2), 3).unwrap();
        assert_eq!(
            gh,
            Mat::from_rows(vec![
                vec![rat_int(1), rat_int(1)],
                vec![rat_int(1), rat_int(6)],
            ])
        );
        assert_eq!(gh.det().unwrap(), rat_int(5));
        for g in [&g, &g5, &gh] {
            assert!(is_positive_definite(g));
        }
        assert!(eplus(&rat_int(0), 3).is_err());
        assert!(eplus(&rat_int(-2), 3).is_err());
    }

    #[test]
    fn eplus_represents_value_primitively() {
        let a = rat_int(3);
        let g = eplus(&a, 3).unwrap();
        assert_eq!(
            g,
            Mat::from_rows(vec![
                vec![rat_int(6), rat_int(1)],
                vec![rat_int(1), rat_int(6)],
            ])
        );
        assert_eq!(g.det().unwrap(), rat_int(35));
        // Q(1,0) = a.
        let v = vec![Rat::one(), Rat::zero()];
        let gv = g.mul_vec(&v);
        let q: Rat = v.iter().zip(&gv).map(|(x, y)| x * y).sum::<Rat>() / rat_int(2);
        assert_eq!(q, a);
    }

    #[test]
    fn hyperbolic_embed_examples() {
        let u = hyperbolic_gram();
        let qval = |v: &[Rat]| -> Rat {
            let gv = u.mul_vec(v);
            v.iter().zip(&gv).map(|(x, y)| x * y).sum::<Rat>() / rat_int(2)
        };
        assert_eq!(hyperbolic_embed(&Rat::zero()), vec![Rat::one(), Rat::zero()]);
        assert_eq!(qval(&hyperbolic_embed(&Rat::zero())), Rat::zero());
        let v = hyperbolic_embed(&rat_int(-3));
        assert_eq!(qval(&v), rat_int(-3));
        let w = vec![Rat::one(), rat_int(3)];
        let gw = u.mul_vec(&w);
        let pairing: Rat = v.iter().zip(&gw).map(|(x, y)| x * y).sum();
        assert!(pairing.is_zero());
        assert_eq!(qval(&w), rat_int(3));
        assert_eq!(qval(&hyperbolic_embed(&Rat::one())), Rat::one());
    }

    #[test]
    fn unimodular_lattice_is_its_own_target() {
        let l = lat_diag(3, &[1, -1, 2]);
        let e = selfdual_overlattice(&l).unwrap();
        assert_eq!(e.target_gram, l.gram);
        assert_eq!(e.embed_matrix, Mat::identity(3, &Rat::one()));
        assert_eq!(e.complement_basis.cols, 0);
        e.verify().unwrap();
        // Also for a non-diagonal unimodular Gram.
        let hyp = QuadLattice::new(3, hyperbolic_gram()).unwrap();
        let eh = selfdual_overlattice(&hyp).unwrap();
        assert_eq!(eh.target_gram, hyp.gram);
        eh.verify().unwrap();
    }

    #[test]
    fn cyclic_negative_entry_goes_hyperbolic() {
        let l = lat_diag(3, &[1, -3, -1]);
        let e = selfdual_overlattice(&l).unwrap();
        e.verify().unwrap();
        assert_eq!(e.target_rank(), 4);
        // Complement is one-dimensional of Q-value 3.
        let comp = e.complement_lattice().unwrap().unwrap();
        assert_eq!(comp.rank(), 1);
        assert_eq!(comp.gram.at(0, 0), &rat_int(6));
        // Signature (1,2) in, (2,2) out.
        assert_eq!(l.signature().unwrap(), (1, 2));
        assert_eq!(e.target_lattice().unwrap().signature().unwrap(), (2, 2));
        assert!(e.notes.is_empty());
    }

    #[test]
    fn cyclic_positive_entry_uses_binary_block() {
        let l = lat_diag(3, &[3, -1, -1]);
        let e = selfdual_overlattice(&l).unwrap();
        e.verify().unwrap();
        assert_eq!(e.target_rank(), 4);
        // The binary block is 3x² + xy + 3y².
        assert_eq!(e.target_gram.at(0, 0), &rat_int(6));
        assert_eq!(e.target_gram.at(0, 1), &rat_int(1));
        assert_eq!(e.target_gram.at(1, 1), &rat_int(6));
        let comp = e.complement_lattice().unwrap().unwrap();
        assert_eq!(comp.rank(), 1);
        // Q of the complement generator: a(4apc' - 1) = 3·35.
        assert_eq!(comp.gram.at(0, 0), &rat_int(2 * 105));
    }

    #[test]
    fn random_lattices_satisfy_all_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for &p in &[3u64, 5] {
            let pi = p as i64;
            let pool = [1, -1, 2, -2, pi, -pi, 2 * pi, -2 * pi, pi * pi, -pi * pi];
            for _case in 0..50 {
                let n = rng.gen_range(1..=4);
                let q: Vec<i64> = (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
                let l = lat_diag(p, &q);
                let e = selfdual_overlattice(&l).unwrap();
                e.verify().unwrap();
                let nonunit = q.iter().filter(|&&x| x.unsigned_abs() % p == 0).count();
                assert!(e.target_rank() <= l.rank() + 2 * nonunit.max(1));
                assert_eq!(e.target_rank(), l.rank() + nonunit);
                if l.discriminant_form().orders.len() <= 1 {
                    assert!(e.target_rank() <= l.rank() + 1);
                }
            }
        }
    }

    #[test]
    fn nondiagonal_sources_embed_isometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let mut done = 0;
        while done < 15 {
            let n = rng.gen_range(2..=4);
            let m = Mat::from_fn(n, n, |_, _| rat_int(rng.gen_range(-6i64..=6)));
            let sym = m.add(&m.transpose());
            let Ok(l) = QuadLattice::new(3, sym) else { continue };
            done += 1;
            let e = selfdual_overlattice(&l).unwrap();
            e.verify().unwrap();
        }
    }

    #[test]
    fn disc_transfer_to_complement_for_maximal_lattices() {
        // For maximal L, disc(L) and disc(Λ) have the same order and the
        // same anisotropy.
        let cases: Vec<(u64, Vec<i64>)> = vec![
            (3, vec![1, 1, -3]),
            (3, vec![1, 3, 1]),
            (5, vec![1, 1, -5]),
            (5, vec![2, 5, 1]),
        ];
        for (p, q) in cases {
            let l = lat_diag(p, &q);
            if !l.is_maximal().unwrap().maximal {
                continue;
            }
            let e = selfdual_overlattice(&l).unwrap();
            let comp = e.complement_lattice().unwrap().expect("non-unimodular source");
            let dl = l.discriminant_form();
            let dc = comp.discriminant_form();
            assert_eq!(dl.order(), dc.order(), "p={p} q={q:?}");
            assert_eq!(
                dl.is_anisotropic().unwrap(),
                dc.is_anisotropic().unwrap(),
                "p={p} q={q:?}"
            );
        }
    }
}
