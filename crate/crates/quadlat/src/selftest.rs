//! Deterministic self-checks behind the `selftest` subcommand.
//!
//! Four suites exercise one module each end to end. Every suite draws from
//! its own seeded stream, so the whole run is a pure function of the seed
//! and size, and reports are byte-stable across runs.

use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::{lattice_algebra, projector_pi, psi_delta};
use crate::embed::selfdual_overlattice;
use crate::error::{Error, Result};
use crate::exact::fq::FqField;
use crate::exact::matrix::Mat;
use crate::exact::rational::{rat_int, valuation, Rat};
use crate::localmodel::{
    chart_at, enumerate_mloc, mref_ideal, mref_vs_mloc, normal_form_witt, vz_classify, VzVerdict,
};
use crate::quadlattice::{extend_to_so, QuadLattice};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestBlock {
    pub seed: u64,
    pub size: String,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

/// Runs every suite. `size` is "small" or "large"; large repeats the random
/// families three times and adds the quadratic-extension model comparison.
pub fn run_selftest(seed: u64, size: &str) -> Result<SelftestBlock> {
    let reps: usize = match size {
        "small" => 1,
        "large" => 3,
        other => {
            return Err(Error::parse(format!(
                "unknown selftest size {other:?} (expected \"small\" or \"large\")"
            )))
        }
    };
    let suites = vec![
        lattice_suite(seed, reps),
        clifford_suite(seed, reps),
        embed_suite(seed, reps),
        localmodel_suite(seed, reps),
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(SelftestBlock { seed, size: size.to_string(), suites, passed })
}

struct Suite {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite { name, cases: 0, failures: Vec::new() }
    }

    fn case(&mut self, outcome: std::result::Result<(), String>) {
        self.cases += 1;
        if let Err(msg) = outcome {
            if self.failures.len() < 16 {
                self.failures.push(format!("case {}: {}", self.cases, msg));
            } else if self.failures.len() == 16 {
                self.failures.push("further failures suppressed".to_string());
            }
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.to_string(),
            cases: self.cases,
            passed: self.failures.is_empty(),
            failures: self.failures,
        }
    }
}

fn err_str(e: Error) -> String {
    e.to_string()
}

fn ensure(ok: bool, msg: &str) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

/// Product of random shears, so the determinant is exactly 1.
fn random_unimodular(n: usize, rng: &mut ChaCha8Rng) -> Mat<Rat> {
    let mut u = Mat::identity(n, &Rat::one());
    if n == 1 {
        return u;
    }
    for _ in 0..2 * n {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut e = Mat::identity(n, &Rat::one());
        e.set(i, j, rat_int(rng.gen_range(-2i64..=2)));
        u = u.mul(&e);
    }
    u
}

fn lattice_suite(seed: u64, reps: usize) -> SuiteResult {
    let mut s = Suite::new("quadlattice");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11a7);

    // Invariants survive a unimodular change of basis.
    for &p in &[3u64, 5] {
        let pi64 = p as i64;
        let pool = [1, -1, 2, -2, pi64, -pi64, 2 * pi64, -2 * pi64, pi64 * pi64, -pi64 * pi64];
        for _ in 0..8 * reps {
            let n = rng.gen_range(1..=4);
            let d: Vec<i64> = (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            let u = random_unimodular(n, &mut rng);
            s.case(lattice_case(p, &d, &u));
        }
    }

    // Lie-algebra extension from random subspaces, f induced by a true
    // special-orthogonal derivation.
    for &p in &[3u64, 5] {
        let field = match FqField::prime(p) {
            Ok(f) => f,
            Err(e) => {
                s.case(Err(err_str(e)));
                continue;
            }
        };
        for _ in 0..8 * reps {
            s.case(extend_case(&field, &mut rng));
        }
    }

    // Degenerate subspace: N spans the radical mod p, f = 0.
    s.case(degenerate_extend_case());

    s.finish()
}

fn lattice_case(p: u64, d: &[i64], u: &Mat<Rat>) -> std::result::Result<(), String> {
    let n = d.len();
    let qvals: Vec<Rat> = d.iter().map(|&x| rat_int(x)).collect();
    let diag = QuadLattice::from_diag(p, &qvals).map_err(err_str)?;
    let gram = u.transpose().mul(&diag.gram).mul(u);
    let l = QuadLattice::new(p, gram).map_err(err_str)?;

    let (basis, vals) = l.diagonalize().map_err(err_str)?;
    let recon = basis.transpose().mul(&l.gram).mul(&basis);
    let expect = Mat::from_fn(n, n, |i, j| {
        if i == j {
            &vals[i] * rat_int(2)
        } else {
            Rat::zero()
        }
    });
    ensure(recon == expect, "diagonalization is not a congruence")?;

    let plus = d.iter().filter(|&&x| x > 0).count();
    let sig = l.signature().map_err(err_str)?;
    ensure(sig == (plus, n - plus), "signature disagrees with the diagonal signs")?;

    let vals_p: Vec<i64> = d
        .iter()
        .map(|&x| valuation(&rat_int(x), p).finite().expect("nonzero"))
        .collect();
    let t_expect = vals_p.iter().filter(|&&v| v >= 1).count();
    let rad = l.radical_mod_p().map_err(err_str)?;
    ensure(rad.t == t_expect, "radical dimension disagrees with the diagonal valuations")?;

    let total: i64 = vals_p.iter().sum();
    let order = l.discriminant_form().order();
    let expect_order = num_bigint::BigInt::from(p).pow(total as u32);
    ensure(order == expect_order, "discriminant group order is wrong")?;

    let m1 = diag.is_maximal().map_err(err_str)?.maximal;
    let m2 = l.is_maximal().map_err(err_str)?.maximal;
    ensure(m1 == m2, "maximality is not basis-invariant")?;
    Ok(())
}

fn extend_case(field: &FqField, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let m = rng.gen_range(2..=5);
    let gram = loop {
        let a = Mat::from_fn(m, m, |_, _| field.from_i64(rng.gen_range(-4i64..=4)));
        let sym = a.add(&a.transpose());
        if sym.rank() == m {
            break sym;
        }
    };
    let t = rng.gen_range(1..=m);
    let n = loop {
        let cand = Mat::from_fn(m, t, |_, _| field.from_i64(rng.gen_range(-4i64..=4)));
        if cand.rank() == t {
            break cand;
        }
    };
    let mut skew = Mat::zeros(m, m, field.zero());
    for i in 0..m {
        for j in i + 1..m {
            let v = field.from_i64(rng.gen_range(-4i64..=4));
            skew.set(i, j, v);
            skew.set(j, i, skew.at(i, j).neg());
        }
    }
    let x_true = gram.inverse().ok_or("unit gram must invert")?.mul(&skew);
    let fim = x_true.mul(&n);
    let x = extend_to_so(&gram, &n, &fim).map_err(err_str)?;
    let defect = x.transpose().mul(&gram).add(&gram.mul(&x));
    ensure(defect.is_zero(), "extension is not in the orthogonal Lie algebra")?;
    ensure(x.mul(&n) == fim, "extension does not restrict to f")?;
    Ok(())
}

fn degenerate_extend_case() -> std::result::Result<(), String> {
    // The restriction of the form to N is identically zero: N is the line
    // through (1,1,1) inside diag(1,1,1) over F_3.
    let field = FqField::prime(3).map_err(err_str)?;
    let gram = Mat::from_fn(3, 3, |i, j| if i == j { field.from_i64(2) } else { field.zero() });
    let n = Mat::from_fn(3, 1, |_, _| field.one());
    let fim = Mat::zeros(3, 1, field.zero());
    let x = extend_to_so(&gram, &n, &fim).map_err(err_str)?;
    let defect = x.transpose().mul(&gram).add(&gram.mul(&x));
    ensure(defect.is_zero(), "isotropic-line case left the Lie algebra")?;
    ensure(x.mul(&n) == fim, "isotropic-line case does not fix the image")?;
    Ok(())
}

fn clifford_suite(seed: u64, reps: usize) -> SuiteResult {
    let mut s = Suite::new("clifford");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc11f);

    // Projector: idempotent on the whole operator basis, fixes the
    // generators, commutes with unit-norm vector-product conjugation.
    for &p in &[3u64, 5] {
        let pi64 = p as i64;
        let pool = [1, -1, 2, -2, pi64];
        for _ in 0..3 * reps {
            let n = rng.gen_range(2..=3);
            let d: Vec<i64> = (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            s.case(projector_case(p, &d, &mut rng));
        }
    }

    // Spinor norm multiplies the quadratic values of the factors.
    for _ in 0..10 * reps {
        s.case(spinor_case(&mut rng));
    }

    // Symplectic pairing: alternating, and a similitude for vector products.
    s.case(psi_case(reps, &mut rng));

    // The rank cap surfaces as a clean resource error.
    s.case(rank_cap_case());

    s.finish()
}

fn projector_case(p: u64, d: &[i64], rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let qvals: Vec<Rat> = d.iter().map(|&x| rat_int(x)).collect();
    let l = QuadLattice::from_diag(p, &qvals).map_err(err_str)?;
    let pi = projector_pi(&l).map_err(err_str)?;
    let alg = pi.alg.clone();
    let dim = alg.dim();
    let n = l.rank();

    for a in 0..dim {
        for b in 0..dim {
            let mut e = Mat::zeros(dim, dim, Rat::zero());
            e.set(a, b, Rat::one());
            let once = pi.apply(&e);
            ensure(pi.apply(&once) == once, "projector is not idempotent")?;
        }
    }
    for k in 0..n {
        let ek = alg.generator(k).left_mul_matrix();
        ensure(pi.is_fixed(&ek), "projector moves a generator")?;
    }

    // Conjugation by one unit-norm vector product. When every diagonal
    // value is divisible by p no vector has unit norm, so there is nothing
    // to conjugate by.
    if d.iter().all(|&x| x.unsigned_abs() % p == 0) {
        return Ok(());
    }
    let mut attempts = 0;
    loop {
        attempts += 1;
        if attempts > 200 {
            return Err("no invertible unit-norm vector product found".to_string());
        }
        let w1 = alg.vector(&(0..n).map(|_| rat_int(rng.gen_range(-2i64..=2))).collect::<Vec<_>>());
        let w2 = alg.vector(&(0..n).map(|_| rat_int(rng.gen_range(-2i64..=2))).collect::<Vec<_>>());
        let g = w1.cl_mul(&w2).map_err(err_str)?;
        let Some(ginv) = g.inverse() else { continue };
        let nu = g.spinor_norm().map_err(err_str)?.ok_or("vector product has a spinor norm")?;
        if !crate::exact::rational::is_p_unit(&nu, p) {
            continue;
        }
        let lg = g.left_mul_matrix();
        let lginv = ginv.left_mul_matrix();
        for _ in 0..4 {
            let a = rng.gen_range(0..dim);
            let b = rng.gen_range(0..dim);
            let mut e = Mat::zeros(dim, dim, Rat::zero());
            e.set(a, b, Rat::one());
            let conj_then_pi = pi.apply(&lg.mul(&e).mul(&lginv));
            let pi_then_conj = lg.mul(&pi.apply(&e)).mul(&lginv);
            ensure(conj_then_pi == pi_then_conj, "conjugation does not commute with the projector")?;
        }
        return Ok(());
    }
}

fn spinor_case(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let p = 3;
    let n = rng.gen_range(2..=3);
    let d: Vec<i64> = (0..n).map(|_| [1, -1, 2, -2][rng.gen_range(0..4)]).collect();
    let qvals: Vec<Rat> = d.iter().map(|&x| rat_int(x)).collect();
    let l = QuadLattice::from_diag(p, &qvals).map_err(err_str)?;
    let alg = lattice_algebra(&l).map_err(err_str)?;
    for _ in 0..40 {
        let c1: Vec<Rat> = (0..n).map(|_| rat_int(rng.gen_range(-3i64..=3))).collect();
        let c2: Vec<Rat> = (0..n).map(|_| rat_int(rng.gen_range(-3i64..=3))).collect();
        let q1 = l.qform(&c1);
        let q2 = l.qform(&c2);
        if q1.is_zero() || q2.is_zero() {
            continue;
        }
        let g = alg.vector(&c1).cl_mul(&alg.vector(&c2)).map_err(err_str)?;
        let nu = g.spinor_norm().map_err(err_str)?.ok_or("product of two vectors is even")?;
        ensure(nu == q1 * q2, "spinor norm differs from the product of Q-values")?;
        return Ok(());
    }
    Err("no anisotropic vector pair found".to_string())
}

fn psi_case(reps: usize, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let l = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(2)]).map_err(err_str)?;
    let alg = lattice_algebra(&l).map_err(err_str)?;
    let v = alg.vector(&[Rat::zero(), rat_int(1), rat_int(1)]);
    let delta = alg.generator(0).cl_mul(&v).map_err(err_str)?;
    ensure(delta.star() == delta.neg(), "delta is not anti-fixed by the involution")?;
    let psi = psi_delta(&delta).map_err(err_str)?;
    let dim = alg.dim();

    for _ in 0..6 * reps {
        let x: Vec<Rat> = (0..dim).map(|_| rat_int(rng.gen_range(-3i64..=3))).collect();
        let px = psi.mul_vec(&x);
        let xx: Rat = x.iter().zip(&px).map(|(a, b)| a * b).sum();
        ensure(xx.is_zero(), "pairing is not alternating")?;
    }

    let mut done = 0;
    let mut attempts = 0;
    while done < 6 * reps {
        attempts += 1;
        if attempts > 500 {
            return Err("no invertible vector products for the similitude check".to_string());
        }
        let w1 = alg.vector(&(0..3).map(|_| rat_int(rng.gen_range(-2i64..=2))).collect::<Vec<_>>());
        let w2 = alg.vector(&(0..3).map(|_| rat_int(rng.gen_range(-2i64..=2))).collect::<Vec<_>>());
        let g = w1.cl_mul(&w2).map_err(err_str)?;
        if g.inverse().is_none() {
            continue;
        }
        done += 1;
        let nu = g.spinor_norm().map_err(err_str)?.ok_or("even element has a norm")?;
        let lg = g.left_mul_matrix();
        ensure(
            lg.transpose().mul(&psi).mul(&lg) == psi.scale(&nu),
            "similitude law fails for a vector product",
        )?;
    }
    Ok(())
}

fn rank_cap_case() -> std::result::Result<(), String> {
    let qvals: Vec<Rat> = (0..9).map(|_| rat_int(1)).collect();
    let l = QuadLattice::from_diag(3, &qvals).map_err(err_str)?;
    match lattice_algebra(&l) {
        Err(Error::Resource(_)) => Ok(()),
        Err(e) => Err(format!("rank cap produced the wrong error kind: {e}")),
        Ok(_) => Err("rank 9 must exceed the algebra cap".to_string()),
    }
}

fn embed_suite(seed: u64, reps: usize) -> SuiteResult {
    let mut s = Suite::new("embed");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe3bd);

    for &p in &[3u64, 5] {
        let pi64 = p as i64;
        let pool = [1, -1, 2, -2, pi64, -pi64, 2 * pi64, -2 * pi64, pi64 * pi64, -pi64 * pi64];
        for _ in 0..12 * reps {
            let n = rng.gen_range(1..=4);
            let d: Vec<i64> = (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            s.case(embed_case(p, &d));
        }
    }

    // Non-diagonal sources.
    let mut done = 0;
    let mut attempts = 0;
    while done < 4 * reps && attempts < 300 {
        attempts += 1;
        let n = rng.gen_range(2..=4);
        let m = Mat::from_fn(n, n, |_, _| rat_int(rng.gen_range(-6i64..=6)));
        let sym = m.add(&m.transpose());
        let Ok(l) = QuadLattice::new(3, sym) else { continue };
        done += 1;
        s.case(selfdual_overlattice(&l).and_then(|e| e.verify()).map_err(err_str));
    }

    s.finish()
}

fn embed_case(p: u64, d: &[i64]) -> std::result::Result<(), String> {
    let qvals: Vec<Rat> = d.iter().map(|&x| rat_int(x)).collect();
    let l = QuadLattice::from_diag(p, &qvals).map_err(err_str)?;
    let e = selfdual_overlattice(&l).map_err(err_str)?;
    e.verify().map_err(err_str)?;
    let nonunit = d.iter().filter(|&&x| x.unsigned_abs() % p == 0).count();
    ensure(e.target_rank() == l.rank() + nonunit, "target rank is not rank plus defect")?;
    if l.discriminant_form().orders.len() <= 1 {
        ensure(e.target_rank() <= l.rank() + 1, "cyclic discriminant must embed in corank one")?;
    }
    Ok(())
}

fn localmodel_suite(seed: u64, reps: usize) -> SuiteResult {
    let mut s = Suite::new("localmodel");
    let _ = seed;

    s.case(fixture_counts_case());
    s.case(fixture_chart_case());
    s.case(fixture_refined_case());
    s.case(order_two_chart_case());
    if reps > 1 {
        s.case(fixture_comparison_case());
    }

    s.finish()
}

fn fixture_lattice() -> std::result::Result<QuadLattice, String> {
    QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(3), rat_int(3)]).map_err(err_str)
}

fn fixture_counts_case() -> std::result::Result<(), String> {
    let l = fixture_lattice()?;
    let pts_p = enumerate_mloc(&l, 1).map_err(err_str)?;
    ensure(pts_p.len() == 4, "wrong prime-field point count")?;
    ensure(pts_p.iter().all(|pt| pt.singular), "every prime-field point is singular here")?;
    ensure(pts_p.iter().all(|pt| !pt.irregular), "irregularity needs the quadratic extension")?;

    let pts_q = enumerate_mloc(&l, 2).map_err(err_str)?;
    ensure(pts_q.len() == 172, "wrong quadratic-extension point count")?;
    let irr: Vec<_> = pts_q.iter().filter(|pt| pt.irregular).collect();
    ensure(irr.len() == 2, "exactly two irregular points expected")?;
    ensure(irr.iter().all(|pt| pt.singular), "irregular points must be singular")?;

    let nf = normal_form_witt(&l, 6).map_err(err_str)?;
    ensure(nf.t == 2 && nf.units == 2, "normal form must split as two units plus two radicals")?;
    Ok(())
}

fn fixture_chart_case() -> std::result::Result<(), String> {
    let l = fixture_lattice()?;
    let pts = enumerate_mloc(&l, 2).map_err(err_str)?;
    let irregular = pts.iter().find(|pt| pt.irregular).ok_or("irregular point exists")?;
    let regular = pts.iter().find(|pt| !pt.singular).ok_or("regular point exists")?;

    let chart = chart_at(&l, irregular, 6).map_err(err_str)?;
    let verdict = vz_classify(&chart).map_err(err_str)?;
    ensure(
        matches!(verdict, VzVerdict::Irregular),
        "irregular point must classify as irregular",
    )?;

    let chart = chart_at(&l, regular, 6).map_err(err_str)?;
    let verdict = vz_classify(&chart).map_err(err_str)?;
    ensure(matches!(verdict, VzVerdict::Smooth), "regular point must classify as smooth")?;
    Ok(())
}

fn fixture_refined_case() -> std::result::Result<(), String> {
    let l = fixture_lattice()?;
    let pres = mref_ideal(&l, 6).map_err(err_str)?;
    ensure(pres.charts.len() == 3, "three affine charts expected")?;
    for chart in &pres.charts {
        let verdict = vz_classify(chart).map_err(err_str)?;
        let ok = match chart.label.as_str() {
            "U-chart" => matches!(verdict, VzVerdict::Smooth),
            "T-chart" => matches!(verdict, VzVerdict::QuasiHealthyMain { .. }),
            "W1-chart" => matches!(verdict, VzVerdict::QuasiHealthyOrder { ord } if ord <= 2),
            _ => false,
        };
        ensure(ok, &format!("unexpected verdict on {}: {}", chart.label, verdict.display()))?;
    }
    Ok(())
}

fn order_two_chart_case() -> std::result::Result<(), String> {
    let l = QuadLattice::from_diag(3, &[rat_int(1), rat_int(1), rat_int(-3)]).map_err(err_str)?;
    let pts = enumerate_mloc(&l, 1).map_err(err_str)?;
    let singular = pts.iter().find(|pt| pt.singular).ok_or("singular point exists")?;
    let chart = chart_at(&l, singular, 6).map_err(err_str)?;
    let verdict = vz_classify(&chart).map_err(err_str)?;
    ensure(
        matches!(verdict, VzVerdict::QuasiHealthyOrder { ord: 2 }),
        "one radical line must give a quasi-healthy chart of order 2",
    )?;
    Ok(())
}

fn fixture_comparison_case() -> std::result::Result<(), String> {
    let l = fixture_lattice()?;
    let cmp = mref_vs_mloc(&l, 1, 6).map_err(err_str)?;
    ensure(cmp.regular_bijective, "prime-field comparison must be bijective")?;
    ensure(cmp.mloc_points == 4 && cmp.mref_points == 4, "prime-field counts must agree")?;
    let cmp = mref_vs_mloc(&l, 2, 6).map_err(err_str)?;
    ensure(cmp.regular_bijective, "regular locus must match bijectively")?;
    ensure(cmp.irregular_fibers.len() == 2, "two irregular fibers expected")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_stable() {
        let a = run_selftest(0, "small").unwrap();
        assert!(a.passed, "failures: {:#?}", a.suites);
        assert_eq!(a.suites.len(), 4);
        assert!(a.suites.iter().all(|s| s.cases > 0));
        let b = run_selftest(0, "small").unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn seeds_change_the_stream_but_not_the_outcome() {
        let a = run_selftest(7, "small").unwrap();
        assert!(a.passed, "failures: {:#?}", a.suites);
    }

    #[test]
    fn unknown_size_is_a_parse_error() {
        match run_selftest(0, "medium") {
            Err(Error::Parse(_)) => {}
            other => panic!("expected a parse error, got {other:?}"),
        }
    }
}
