//! The local model of a lattice: the quadric of isotropic lines, its point
//! counts over F_p and F_{p^2}, singular and irregular loci, affine charts,
//! and the symbolic smoothness verdicts.

use quadlat::exact::rational::rat_int;
use quadlat::localmodel::{chart_at, enumerate_mloc, normal_form_witt, vz_classify};
use quadlat::quadlattice::QuadLattice;

fn main() -> quadlat::Result<()> {
    let l = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(3), rat_int(3)])?;

    // Over F_3 the quadric x1^2 + x2^2 = 0 (the p-block contributes nothing
    // mod 3) has exactly the radical points.
    let pts3 = enumerate_mloc(&l, 1)?;
    println!("M^loc(F_3): {} points", pts3.len());
    for pt in &pts3 {
        println!("  {} singular: {}", pt.display(), pt.singular);
    }

    // Over F_9 the count jumps and the two isotropic lines of the scaled
    // radical form become visible.
    let pts9 = enumerate_mloc(&l, 2)?;
    let singular = pts9.iter().filter(|pt| pt.singular).count();
    let irregular: Vec<_> = pts9.iter().filter(|pt| pt.irregular).collect();
    println!("\nM^loc(F_9): {} points, {} singular", pts9.len(), singular);
    for pt in &irregular {
        println!("  irregular: {}", pt.display());
    }

    // The Witt normal form behind the charts: a unit block and a p-block.
    let nf = normal_form_witt(&l, 6)?;
    println!(
        "\nnormal form at k=6: {} unit coordinates, t = {}, variables {:?}",
        nf.units,
        nf.t,
        nf.coordinate_names()
    );

    // A chart at a regular singular point: one relation, verdict of order 2
    // (p lies in m^2 but not m^3).
    let reg_sing = pts9.iter().find(|pt| pt.singular && !pt.irregular).expect("exists");
    let chart = chart_at(&l, reg_sing, 6)?;
    println!("\nchart at {} in variables {:?}:", reg_sing.display(), chart.vars);
    for rel in chart.display_relations() {
        println!("  0 = {rel}");
    }
    println!("verdict: {}", vz_classify(&chart)?.display());

    // At the irregular points the classification refuses a healthy verdict.
    let chart = chart_at(&l, irregular[0], 6)?;
    println!("\nverdict at {}: {}", irregular[0].display(), vz_classify(&chart)?.display());

    // A lattice with trivial radical has a smooth local model; any point
    // chart classifies as Smooth.
    let uni = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(1), rat_int(-1)])?;
    let upts = enumerate_mloc(&uni, 1)?;
    let chart = chart_at(&uni, &upts[0], 6)?;
    println!(
        "\n<1,1,1,-1>: {} F_3-points, verdict at {}: {}",
        upts.len(),
        upts[0].display(),
        vz_classify(&chart)?.display()
    );

    Ok(())
}
