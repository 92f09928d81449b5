//! The Clifford algebra of a lattice: products and the grading, the main
//! anti-involution, spinor norms, and the projector that cuts the lattice
//! (or its dual) back out of the endomorphisms of C(L).

use num_traits::{One, Zero};

use quadlat::clifford::{lattice_algebra, projector_pi};
use quadlat::exact::matrix::Mat;
use quadlat::exact::rational::{format_rat, rat_int, valuation, Rat};
use quadlat::quadlattice::QuadLattice;

fn main() -> quadlat::Result<()> {
    let l = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(1)])?;
    let alg = lattice_algebra(&l)?;
    println!("C(<1,1,1>) has dimension {}", alg.dim());

    // Generators anticommute and square to their Q-values.
    let e1 = alg.generator(0);
    let e2 = alg.generator(1);
    let e12 = e1.cl_mul(&e2)?;
    assert_eq!(e12, e2.cl_mul(&e1)?.neg());
    println!("e1*e2 = -e2*e1, e1*e1 = {}", format_rat(&e1.cl_mul(&e1)?.coeffs[0]));

    // The main anti-involution reverses products and fixes vectors.
    assert_eq!(e12.star(), e2.cl_mul(&e1)?);
    println!("(e1 e2)* = e2 e1");

    // Spinor norm of a vector product is the product of the Q-values:
    // nu((e1+e2) e2) = Q(e1+e2) Q(e2) = 2.
    let v = alg.vector(&[rat_int(1), rat_int(1), rat_int(0)]);
    let g = v.cl_mul(&e2)?;
    let nu = g.spinor_norm()?.expect("even element");
    println!("nu((e1+e2) e2) = {}", format_rat(&nu));

    // The projector is idempotent and fixes left multiplications by lattice
    // vectors.
    let pi = projector_pi(&l)?;
    let dim = alg.dim();
    let op = e12.left_mul_matrix();
    assert_eq!(pi.apply(&pi.apply(&op)), pi.apply(&op));
    assert!(pi.is_fixed(&e1.left_mul_matrix()));
    println!("\npi is idempotent and fixes L(e1)");

    // On a unimodular lattice the projector lands back in L itself: every
    // endomorphism projects to a p-integral vector.
    'outer: for a in 0..dim {
        for b in 0..dim {
            let mut e = Mat::zeros(dim, dim, Rat::zero());
            e.set(a, b, Rat::one());
            let img = pi.apply_to_vector(&e);
            if img.iter().any(|c| !c.is_zero()) {
                let s: Vec<String> = img.iter().map(format_rat).collect();
                println!("pi(E_{a}{b}) = ({}) lands in <1,1,1>", s.join(", "));
                break 'outer;
            }
        }
    }

    // With a non-unit diagonal entry the image is the dual lattice: some
    // operators project to vectors with negative 3-adic valuation.
    let l3 = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(3)])?;
    let pi3 = projector_pi(&l3)?;
    let dim3 = pi3.alg.dim();
    println!("\nprojector images outside <1,1,3> (dual-lattice vectors):");
    let mut shown = 0;
    'scan: for a in 0..dim3 {
        for b in 0..dim3 {
            let mut e = Mat::zeros(dim3, dim3, Rat::zero());
            e.set(a, b, Rat::one());
            let img = pi3.apply_to_vector(&e);
            if img.iter().any(|c| valuation(c, 3).finite().is_some_and(|v| v < 0)) {
                let s: Vec<String> = img.iter().map(format_rat).collect();
                println!("  pi(E_{a}{b}) = ({})", s.join(", "));
                shown += 1;
                if shown == 3 {
                    break 'scan;
                }
            }
        }
    }
    println!("denominator 3 marks the dual-lattice direction");

    Ok(())
}
