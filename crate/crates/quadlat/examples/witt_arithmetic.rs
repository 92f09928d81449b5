//! Tour of the scalar kernels: p-adic valuations of exact rationals, the
//! field F_{p^2} presented as F_p[w]/(w^2 - c), and the truncated Witt ring
//! W(F_{p^2})/p^k with Hensel square roots.

use quadlat::exact::fq::FqField;
use quadlat::exact::rational::{p_primary_split, rat, valuation};
use quadlat::exact::witt::{hensel_sqrt, WittRing};

fn main() -> quadlat::Result<()> {
    // Valuations are exact. 18/5 = 2·3^2/5 has v_3 = 2 and v_5 = -1.
    let x = rat(18, 5);
    println!("v_3(18/5) = {}", valuation(&x, 3));
    println!("v_5(18/5) = {}", valuation(&x, 5));
    let (e, u) = p_primary_split(&rat(45, 4), 3).expect("nonzero");
    println!("45/4 = 3^{e} * {u}");

    // F_9 = F_3[w] with w^2 equal to the smallest non-residue mod 3.
    let f9 = FqField::quadratic(3)?;
    println!("\nF_9 with w^2 = {}", f9.c);
    let g = f9.elem(1, 1);
    let mut pow = f9.one();
    let mut order = 0;
    loop {
        pow = pow.mul(&g);
        order += 1;
        if pow == f9.one() {
            break;
        }
    }
    println!("1+w has multiplicative order {order}");
    println!("(1+w)^-1 = {}", g.inv().expect("unit"));

    // The Witt ring carries w^2 = c exactly at every truncation level.
    let ring = WittRing::new(3, 6)?;
    println!("\nW(F_9)/3^6: modulus {}, w^2 = {}", ring.modulus, ring.c);
    let w = ring.omega();
    println!("w * w = {}", w.mul(&w));
    let five = ring.from_i64(5);
    println!("5^-1 = {} (check: {})", five.inv().expect("unit"), five.mul(&five.inv().unwrap()));

    // 7 = 1 mod 3 is a square; Newton lifting finds the root to the full
    // precision.
    let s = hensel_sqrt(&ring.from_i64(7))?;
    println!("sqrt(7) = {s}, squared back: {}", s.mul(&s));

    // 1+w generates the residue multiplicative group, so it has no root.
    match hensel_sqrt(&ring.elem(1, 1)) {
        Err(e) => println!("sqrt(1+w) rejected: {e}"),
        Ok(_) => unreachable!("a generator of F_9* is not a square"),
    }

    // Dividing by p loses one level of precision and says so in the type:
    // the result lives in W(F_9)/3^5.
    let six = ring.from_i64(6);
    let half = six.div_p()?;
    println!("6/3 = {} at truncation k = {}", half, half.ring.k);
    println!("v(6) = {:?}, v(w) = {:?}", six.valuation(), w.valuation());

    Ok(())
}
