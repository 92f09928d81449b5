//! The symplectic pairing psi_delta on the Clifford algebra and its
//! similitude law: conjugation-free, psi(gx, gy) = nu(g) psi(x, y) for even
//! invertible g, with nu the spinor norm.

use num_traits::Zero;

use quadlat::clifford::{lattice_algebra, psi_delta};
use quadlat::exact::rational::{format_rat, rat_int};
use quadlat::quadlattice::QuadLattice;

fn main() -> quadlat::Result<()> {
    let l = QuadLattice::from_diag(5, &[rat_int(1), rat_int(1), rat_int(2)])?;
    let alg = lattice_algebra(&l)?;
    let dim = alg.dim();

    // delta = e1 (e2 + e3) is an invertible even element with delta* =
    // -delta, the two properties the pairing construction needs.
    let v = alg.vector(&[rat_int(0), rat_int(1), rat_int(1)]);
    let delta = alg.generator(0).cl_mul(&v)?;
    assert_eq!(delta.star(), delta.neg());
    let psi = psi_delta(&delta)?;
    println!("psi_delta on C(<1,1,2>) is a {dim} x {dim} alternating form");

    // The first few nonzero values on the monomial basis.
    let mut shown = 0;
    'scan: for s in 0..dim {
        for t in s + 1..dim {
            if !psi.at(s, t).is_zero() {
                println!("  psi(m{s}, m{t}) = {}", format_rat(psi.at(s, t)));
                shown += 1;
                if shown == 4 {
                    break 'scan;
                }
            }
        }
    }

    // Norm multiplicativity on vector products.
    let w1 = alg.vector(&[rat_int(2), rat_int(1), rat_int(0)]);
    let w2 = alg.vector(&[rat_int(0), rat_int(1), rat_int(-1)]);
    let g = w1.cl_mul(&w2)?;
    let nu = g.spinor_norm()?.expect("even element");
    let q1 = l.qform(&[rat_int(2), rat_int(1), rat_int(0)]);
    let q2 = l.qform(&[rat_int(0), rat_int(1), rat_int(-1)]);
    assert_eq!(nu, &q1 * &q2);
    println!(
        "\nnu(w1 w2) = {} = Q(w1) Q(w2) = {} * {}",
        format_rat(&nu),
        format_rat(&q1),
        format_rat(&q2)
    );

    // The similitude law, checked as matrices: Lg^T psi Lg = nu psi.
    let lg = g.left_mul_matrix();
    let lhs = lg.transpose().mul(&psi).mul(&lg);
    assert_eq!(lhs, psi.scale(&nu));
    println!("Lg^T psi Lg = nu(g) psi holds exactly");

    // The same identity on a single pair of basis vectors, written out.
    let (s, t) = (1usize, 2usize);
    let x: Vec<_> = (0..dim).map(|i| rat_int((i == s) as i64)).collect();
    let y: Vec<_> = (0..dim).map(|i| rat_int((i == t) as i64)).collect();
    let gx = lg.mul_vec(&x);
    let gy = lg.mul_vec(&y);
    let pair = |a: &[_], b: &[_]| {
        let pb = psi.mul_vec(b);
        a.iter().zip(&pb).map(|(p, q)| p * q).sum::<quadlat::exact::rational::Rat>()
    };
    println!(
        "psi(g m{s}, g m{t}) = {}, nu(g) psi(m{s}, m{t}) = {}",
        format_rat(&pair(&gx, &gy)),
        format_rat(&(&nu * &pair(&x, &y)))
    );

    Ok(())
}
