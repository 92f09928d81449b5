//! The refined local model: its ideal presentation, the three kinds of
//! affine charts with their verdicts, the pointwise comparison with the
//! quadric, and the auxiliary self-dual lattices at the irregular points.

use quadlat::exact::rational::rat_int;
use quadlat::exact::witt::WittRing;
use quadlat::localmodel::{enumerate_mloc, ldiamond, mref_ideal, mref_vs_mloc, vz_classify};
use quadlat::quadlattice::QuadLattice;
use quadlat::clifford::visom_check;
use quadlat::exact::matrix::Mat;

fn main() -> quadlat::Result<()> {
    let l = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(3), rat_int(3)])?;

    // The presentation of the refined model and its charts. The T-chart
    // origin is the one point where smoothness genuinely needs the escape
    // argument: p = -y w1^2 - y w2^2 has no order-2 witness, but the unit
    // monomial y w1^2 avoids (p, T1^3, T2^3, T1^2 T2^2).
    let pres = mref_ideal(&l, 6)?;
    println!("refined model ideal in variables {:?}:", pres.vars);
    for g in &pres.generators {
        println!("  0 = {}", g.display_with(&pres.vars));
    }
    for chart in &pres.charts {
        println!("\n{} in variables {:?}:", chart.label, chart.vars);
        for rel in chart.display_relations() {
            println!("  0 = {rel}");
        }
        println!("  verdict: {}", vz_classify(chart)?.display());
    }

    // Away from the irregular points the refined model projects bijectively
    // onto the quadric; only the irregular points can have fibers with more
    // than one point, seen here at the level of F_9-points.
    for ext in [1u32, 2] {
        let cmp = mref_vs_mloc(&l, ext, 6)?;
        println!(
            "\nq = {}: {} refined points -> {} quadric points, regular locus bijective: {}",
            3u64.pow(ext),
            cmp.mref_points,
            cmp.mloc_points,
            cmp.regular_bijective
        );
        for (pt, size) in &cmp.irregular_fibers {
            println!("  fiber over irregular {pt}: {size} points");
        }
    }

    // The auxiliary self-dual lattice at each irregular line: scaling the
    // line by 1/p produces a unit-determinant Gram over W(F_9), and the two
    // choices give genuinely different lattices.
    let irregular: Vec<_> =
        enumerate_mloc(&l, 2)?.into_iter().filter(|pt| pt.irregular).collect();
    for pt in &irregular {
        let ld = ldiamond(&l, pt, 6)?;
        let det = ld.gram.det().expect("square matrix");
        println!(
            "\nL-diamond at {}: det = {}, inclusion elementary divisors p^{:?}",
            pt.display(),
            det,
            ld.inclusion_valuations
        );
    }

    // The submodule comparison behind the isogeny statement, on the rank-2
    // toy: v (e, f) with Q(e) = Q(f) = 0, [e,f] = 1, v = e + p f.
    let gram = Mat::from_rows(vec![
        vec![rat_int(0), rat_int(1)],
        vec![rat_int(1), rat_int(0)],
    ]);
    let toy = QuadLattice::new(3, gram)?;
    let ring = WittRing::new(3, 6)?;
    let e = vec![ring.one(), ring.zero()];
    let f = vec![ring.zero(), ring.one()];
    let v = vec![ring.one(), ring.p_elem()];
    println!(
        "\nsubmodule comparison on the hyperbolic toy: {} (swapped splitting: {})",
        visom_check(&toy, &ring, &v, &e, &f)?,
        visom_check(&toy, &ring, &v, &f, &e)?
    );

    Ok(())
}
