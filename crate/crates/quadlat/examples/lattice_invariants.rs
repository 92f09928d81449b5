//! Invariants of quadratic lattices over Z_(p): diagonalization, signature,
//! the radical mod p, the discriminant form, and the maximality test with
//! its overlattice witnesses.

use quadlat::exact::matrix::Mat;
use quadlat::exact::rational::{format_rat, rat_int, Rat};
use quadlat::quadlattice::{MaximalityWitness, QuadLattice};

fn print_mat(label: &str, m: &Mat<Rat>) {
    println!("{label}:");
    for i in 0..m.rows {
        let row: Vec<String> = (0..m.cols).map(|j| format_rat(m.at(i, j))).collect();
        println!("  [{}]", row.join(", "));
    }
}

fn main() -> quadlat::Result<()> {
    // A non-diagonal form: Q(x,y) = x^2 + xy + y^2 over Z_(3).
    let gram = Mat::from_rows(vec![
        vec![rat_int(2), rat_int(1)],
        vec![rat_int(1), rat_int(2)],
    ]);
    let hex = QuadLattice::new(3, gram)?;
    let (u, diag) = hex.diagonalize()?;
    let dstr: Vec<String> = diag.iter().map(format_rat).collect();
    println!("x^2+xy+y^2 diagonalizes to <{}>", dstr.join(", "));
    print_mat("change of basis (unimodular over Z_(3))", &u);

    // The running example: Q = <1,1,3,3> at p = 3.
    let l = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(3), rat_int(3)])?;
    let (plus, minus) = l.signature()?;
    println!("\n<1,1,3,3> at p=3: rank {}, signature ({plus},{minus})", l.rank());

    let rad = l.radical_mod_p()?;
    println!("radical mod 3 has dimension t = {}", rad.t);

    let disc = l.discriminant_form();
    let orders: Vec<String> = disc.orders.iter().map(|o| o.to_string()).collect();
    let qvals: Vec<String> = disc.qbar_gens.iter().map(format_rat).collect();
    println!("disc group Z/{}, q-values on generators: {}", orders.join(" x Z/"), qvals.join(", "));
    println!("maximal: {}", l.is_maximal()?.maximal);

    // <1,9> is not maximal: the discriminant group has a factor Z/9, and
    // adjoining a third of the second basis vector stays integral.
    let l9 = QuadLattice::from_diag(3, &[rat_int(1), rat_int(9)])?;
    let report = l9.is_maximal()?;
    println!("\n<1,9> maximal: {}", report.maximal);
    match report.witness.expect("non-maximal lattices carry a witness") {
        MaximalityWitness::NonElementaryDivisor { divisor_valuation, overlattice_vector } => {
            let v: Vec<String> = overlattice_vector.iter().map(format_rat).collect();
            println!("  disc has a factor of order 3^{divisor_valuation}");
            println!("  overlattice vector ({}), Q = {}", v.join(", "),
                format_rat(&l9.qform(&overlattice_vector)));
        }
        w => println!("  witness: {w:?}"),
    }

    // <1,3,-3> has elementary discriminant but an isotropic class: the
    // vector (0, 1/3, 1/3) has integral Q-value even though it is not in L.
    let l33 = QuadLattice::from_diag(3, &[rat_int(1), rat_int(3), rat_int(-3)])?;
    let report = l33.is_maximal()?;
    println!("<1,3,-3> maximal: {}", report.maximal);
    if let Some(MaximalityWitness::IsotropicDiscElement { overlattice_vector, .. }) =
        report.witness
    {
        let v: Vec<String> = overlattice_vector.iter().map(format_rat).collect();
        println!("  isotropic witness ({}), Q = {}", v.join(", "),
            format_rat(&l33.qform(&overlattice_vector)));
    }

    Ok(())
}
