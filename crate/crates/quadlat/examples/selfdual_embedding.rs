//! Constructive embedding of a maximal lattice into a self-dual one: the
//! target Gram matrix, the embedding matrix, and the rank bound for cyclic
//! discriminant groups.

use quadlat::embed::selfdual_overlattice;
use quadlat::exact::matrix::Mat;
use quadlat::exact::rational::{format_rat, rat_int, valuation, Rat};
use quadlat::quadlattice::QuadLattice;

fn print_mat(label: &str, m: &Mat<Rat>) {
    println!("{label}:");
    for i in 0..m.rows {
        let row: Vec<String> = (0..m.cols).map(|j| format_rat(m.at(i, j))).collect();
        println!("  [{}]", row.join(", "));
    }
}

fn show(l: &QuadLattice, name: &str) -> quadlat::Result<()> {
    let e = selfdual_overlattice(l)?;
    e.verify()?;
    let disc = l.discriminant_form();
    println!(
        "\n{name}: rank {} -> rank {} (disc group has {} generator(s))",
        l.rank(),
        e.target_rank(),
        disc.orders.len()
    );
    print_mat("target gram", &e.target_gram);
    print_mat("embedding (columns are images)", &e.embed_matrix);
    let det = e.target_gram.det().expect("square");
    println!("det = {} with v_{}(det) = {}", format_rat(&det), l.p, valuation(&det, l.p));
    for note in &e.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn main() -> quadlat::Result<()> {
    // Already self-dual: the embedding is the identity.
    let unimod = QuadLattice::from_diag(3, &[rat_int(1), rat_int(-1)])?;
    show(&unimod, "<1,-1>")?;

    // Cyclic discriminant Z/3: one extra dimension suffices.
    let cyclic = QuadLattice::from_diag(3, &[rat_int(1), rat_int(3)])?;
    show(&cyclic, "<1,3>")?;

    // Z/3 x Z/3: two extra dimensions.
    let two = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(3), rat_int(3)])?;
    show(&two, "<1,1,3,3>")?;

    Ok(())
}
