//! The quadric of isotropic lines attached to a lattice: finite-field point
//! enumeration with singular and irregular flags, Witt-coefficient normal
//! forms, affine charts at points, a symbolic regularity classifier in the
//! style of Vasiu and Zink, the auxiliary self-dual lattice obtained by
//! dividing an isotropic discriminant line by p, and the refined model that
//! resolves the two irregular points.

use crate::error::{Error, Result};
use crate::exact::fq::{FqElem, FqField};
use crate::exact::matrix::Mat;
use crate::exact::poly::WittPoly;
use crate::exact::rational::{valuation, Rat, Valuation};
use crate::exact::witt::{hensel_sqrt, WittElem, WittRing};
use crate::quadlattice::QuadLattice;

/// Cap on the number of projective points visited by exhaustion.
pub const PROJ_ENUM_CAP: u128 = 2_000_000;

/// A point of projective space over F_q, normalized so the first nonzero
/// coordinate is 1, with quadric membership and singularity flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjPoint {
    pub coords: Vec<FqElem>,
    pub on_quadric: bool,
    pub singular: bool,
    pub irregular: bool,
}

impl ProjPoint {
    pub fn display(&self) -> String {
        let inner: Vec<String> = self.coords.iter().map(|c| format!("{c}")).collect();
        format!("[{}]", inner.join(":"))
    }
}

fn embed_into(field: &FqField, x: &FqElem) -> FqElem {
    if x.field == *field {
        return x.clone();
    }
    assert_eq!(x.field.p, field.p);
    assert_eq!(x.field.d, 1, "can only embed the prime field upward");
    field.elem(x.a, 0)
}

fn gram_over(l: &QuadLattice, field: &FqField) -> Result<Mat<FqElem>> {
    let n = l.rank();
    let mut out = Mat::zeros(n, n, field.zero());
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, field.from_rat(l.gram.at(i, j))?);
        }
    }
    Ok(out)
}

fn qvalue(gram: &Mat<FqElem>, v: &[FqElem], half: &FqElem) -> FqElem {
    let gv = gram.mul_vec(v);
    let mut acc = half.field.zero();
    for (x, y) in v.iter().zip(&gv) {
        acc = acc.add(&x.mul(y));
    }
    acc.mul(half)
}

fn is_zero_vec(v: &[FqElem]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// All points of the quadric Q = 0 in P(V) for the given Gram matrix, by
/// exhaustion over normalized representatives.
pub fn quadric_points(gram: &Mat<FqElem>, field: &FqField) -> Result<Vec<Vec<FqElem>>> {
    let n = gram.rows;
    let q = field.order() as u128;
    let mut total: u128 = 0;
    let mut power: u128 = 1;
    for _ in 0..n {
        total += power;
        power = power.saturating_mul(q);
    }
    if total > PROJ_ENUM_CAP {
        return Err(Error::resource(format!(
            "projective enumeration of {total} points exceeds the cap of {PROJ_ENUM_CAP}"
        )));
    }
    let half = field
        .from_u64(2)
        .inv()
        .ok_or_else(|| Error::precondition("2 must be invertible in the field"))?;
    let elems = field.elements();
    let mut out = Vec::new();
    for pivot in 0..n {
        let free = n - pivot - 1;
        let mut odometer = vec![0usize; free];
        loop {
            let mut coords = vec![field.zero(); n];
            coords[pivot] = field.one();
            for (slot, &ei) in odometer.iter().enumerate() {
                coords[pivot + 1 + slot] = elems[ei].clone();
            }
            if qvalue(gram, &coords, &half).is_zero() {
                out.push(coords);
            }
            // Advance the odometer.
            let mut carry = true;
            for slot in (0..free).rev() {
                if carry {
                    odometer[slot] += 1;
                    if odometer[slot] == elems.len() {
                        odometer[slot] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
    }
    Ok(out)
}

/// Enumerates the quadric points of L over F_p (ext_degree 1) or F_{p^2}
/// (ext_degree 2). Singular means the point lies in the radical; for
/// ext_degree 2 and a two-dimensional radical, irregular marks the isotropic
/// lines of the scaled form on the radical.
pub fn enumerate_mloc(l: &QuadLattice, ext_degree: u32) -> Result<Vec<ProjPoint>> {
    let field = match ext_degree {
        1 => FqField::prime(l.p)?,
        2 => FqField::quadratic(l.p)?,
        _ => return Err(Error::precondition("extension degree must be 1 or 2")),
    };
    let gram_f = gram_over(l, &field)?;
    let rad = l.radical_mod_p()?;
    let t = rad.t;
    // Basis of the radical over the current field, one column per generator.
    let n_cols: Vec<Vec<FqElem>> = rad
        .n_basis
        .iter()
        .map(|col| col.iter().map(|x| embed_into(&field, x)).collect())
        .collect();
    // Gram of the scaled form on the radical: (N^T G N) / p.
    let scaled_radical_gram = if t > 0 {
        let lift = Mat::from_fn(l.rank(), t, |i, j| {
            Rat::from(num_bigint::BigInt::from(rad.n_basis[j][i].a))
        });
        let nn = lift.transpose().mul(&l.gram).mul(&lift);
        let p_rat = Rat::from(num_bigint::BigInt::from(l.p));
        let mut g = Mat::zeros(t, t, field.zero());
        for i in 0..t {
            for j in 0..t {
                g.set(i, j, field.from_rat(&(nn.at(i, j) / &p_rat))?);
            }
        }
        Some(g)
    } else {
        None
    };
    let n_mat = if t > 0 { Some(Mat::from_cols(n_cols)) } else { None };
    let half = field.from_u64(2).inv().expect("odd p");

    let mut out = Vec::new();
    for coords in quadric_points(&gram_f, &field)? {
        let singular = is_zero_vec(&gram_f.mul_vec(&coords));
        let mut irregular = false;
        if singular && t == 2 && ext_degree == 2 {
            let (n_mat, radical_gram) = (n_mat.as_ref().unwrap(), scaled_radical_gram.as_ref().unwrap());
            let rhs = Mat::from_cols(vec![coords.clone()]);
            let c = n_mat
                .solve(&rhs)
                .ok_or_else(|| Error::invariant("singular point must lie in the radical"))?;
            let cvec = c.col(0);
            irregular = qvalue(radical_gram, &cvec, &half).is_zero();
        }
        out.push(ProjPoint { coords, on_quadric: true, singular, irregular });
    }
    Ok(out)
}

/// A basis over the truncated Witt ring splitting the form into a unit
/// diagonal block followed by a p-block: empty (t=0), p times a unit square
/// class (t=1), or the antidiagonal plane with pairing p (t=2).
#[derive(Clone, Debug)]
pub struct WittNormalForm {
    pub ring: WittRing,
    pub t: usize,
    /// Number of unit-block coordinates, rank - t.
    pub units: usize,
    /// Columns express the new basis in the original one; unit determinant.
    pub basis: Mat<WittElem>,
    /// basis^T G basis in the split shape.
    pub gram: Mat<WittElem>,
    /// Q-values of the unit-block vectors after square-root absorption.
    pub unit_values: Vec<WittElem>,
    pub note: Option<String>,
}

impl WittNormalForm {
    /// Coordinate names: unit block, then the p-block.
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.units).map(|i| format!("x{i}")).collect();
        match self.t {
            0 => {}
            1 => names.push("y".to_string()),
            2 => {
                names.push("y".to_string());
                names.push("z".to_string());
            }
            _ => unreachable!("normal form only exists for t <= 2"),
        }
        names
    }
}

pub fn normal_form_witt(l: &QuadLattice, k: u32) -> Result<WittNormalForm> {
    let report = l.is_maximal()?;
    if !report.maximal {
        return Err(Error::precondition("normal form requires a maximal lattice"));
    }
    let ring = WittRing::new(l.p, k)?;
    let (u, diag) = l.diagonalize()?;
    let n = l.rank();
    let mut unit_idx = Vec::new();
    let mut p_idx = Vec::new();
    for (i, d) in diag.iter().enumerate() {
        match valuation(d, l.p) {
            Valuation::Finite(0) => unit_idx.push(i),
            Valuation::Finite(1) => p_idx.push(i),
            _ => {
                return Err(Error::invariant(
                    "maximal lattice diagonal values have valuation 0 or 1",
                ))
            }
        }
    }
    let t = p_idx.len();
    if t > 2 {
        return Err(Error::invariant("maximal lattice has radical of dimension at most 2"));
    }
    let p_rat = Rat::from(num_bigint::BigInt::from(l.p));

    // Start from the diagonalizing basis, units first.
    let order: Vec<usize> = unit_idx.iter().chain(p_idx.iter()).copied().collect();
    let mut cols: Vec<Vec<WittElem>> = Vec::with_capacity(n);
    for &j in &order {
        let mut col = Vec::with_capacity(n);
        for i in 0..n {
            col.push(ring.from_rat(u.at(i, j))?);
        }
        cols.push(col);
    }
    let mut note = None;
    let mut unit_values = Vec::with_capacity(unit_idx.len());
    for (slot, &j) in unit_idx.iter().enumerate() {
        let d = ring.from_rat(&diag[j])?;
        match hensel_sqrt(&d) {
            Ok(s) => {
                let sinv = s.inv().expect("square root of a unit");
                for x in cols[slot].iter_mut() {
                    *x = x.mul(&sinv);
                }
                unit_values.push(ring.one());
            }
            Err(_) => {
                // Residue outside the squares of F_{p^2}; keep the value.
                note = Some(format!("unit block entry {} kept as a non-square", slot + 1));
                unit_values.push(d);
            }
        }
    }
    match t {
        0 => {}
        1 => {
            let slot = unit_idx.len();
            let u0 = ring.from_rat(&(&diag[p_idx[0]] / &p_rat))?;
            match hensel_sqrt(&u0) {
                Ok(s) => {
                    let sinv = s.inv().expect("unit root");
                    for x in cols[slot].iter_mut() {
                        *x = x.mul(&sinv);
                    }
                }
                Err(_) => {
                    note = Some("p-block unit kept as a non-square".to_string());
                }
            }
        }
        2 => {
            let (s1, s2) = (unit_idx.len(), unit_idx.len() + 1);
            let u1 = ring.from_rat(&(&diag[p_idx[0]] / &p_rat))?;
            let u2 = ring.from_rat(&(&diag[p_idx[1]] / &p_rat))?;
            // Isotropic vector y*b1 + b2 with y^2 = -u2/u1, then a paired
            // isotropic partner scaled so the pairing is exactly p.
            let ratio = u2.mul(&u1.inv().expect("unit")).neg();
            let y = hensel_sqrt(&ratio)?;
            let b1 = cols[s1].clone();
            let b2 = cols[s2].clone();
            let v: Vec<WittElem> =
                b1.iter().zip(&b2).map(|(a, b)| a.mul(&y).add(b)).collect();
            // w1 = b1 - v/(2y) is isotropic; w2 = w1/(2*u1*y) pairs to p.
            let two_y_inv = ring.from_i64(2).mul(&y).inv().expect("unit");
            let w1: Vec<WittElem> =
                b1.iter().zip(&v).map(|(a, b)| a.sub(&b.mul(&two_y_inv))).collect();
            let scale = ring
                .from_i64(2)
                .mul(&u1)
                .mul(&y)
                .inv()
                .expect("unit");
            let w2: Vec<WittElem> = w1.iter().map(|a| a.mul(&scale)).collect();
            cols[s1] = v;
            cols[s2] = w2;
        }
        _ => unreachable!(),
    }

    let basis = Mat::from_cols(cols);
    let det = basis.det().ok_or_else(|| Error::invariant("normal form basis must be invertible"))?;
    if !det.is_unit() {
        return Err(Error::invariant("normal form basis must have unit determinant"));
    }
    let mut gw = Mat::zeros(n, n, ring.zero());
    for i in 0..n {
        for j in 0..n {
            gw.set(i, j, ring.from_rat(l.gram.at(i, j))?);
        }
    }
    let gram = basis.transpose().mul(&gw).mul(&basis);
    // Shape check: block diagonal with the expected p-block.
    let m = unit_idx.len();
    for i in 0..n {
        for j in 0..n {
            let entry = gram.at(i, j);
            let expected_zero = if i == j {
                t == 2 && i >= m
            } else {
                !(t == 2 && i >= m && j >= m)
            };
            if expected_zero && !entry.is_zero() {
                return Err(Error::invariant("normal form Gram is not in split shape"));
            }
        }
    }
    if t == 2 {
        let pe = ring.p_elem();
        if gram.at(m, m + 1) != &pe || gram.at(m + 1, m) != &pe {
            return Err(Error::invariant("p-block pairing must be exactly p"));
        }
    }
    for (slot, val) in unit_values.iter().enumerate() {
        if gram.at(slot, slot) != &ring.from_i64(2).mul(val) {
            return Err(Error::invariant("unit block diagonal mismatch"));
        }
    }
    Ok(WittNormalForm { ring, t, units: m, basis, gram, unit_values, note })
}

/// An affine chart with relations centered at the distinguished point.
#[derive(Clone, Debug)]
pub struct Chart {
    pub ring: WittRing,
    pub vars: Vec<String>,
    pub relations: Vec<WittPoly>,
    /// Residue coordinates of the distinguished point in the parent frame.
    pub origin: Vec<FqElem>,
    pub irregular: bool,
    pub label: String,
}

impl Chart {
    pub fn display_relations(&self) -> Vec<String> {
        self.relations.iter().map(|r| r.display_with(&self.vars)).collect()
    }
}

/// Dehomogenizes the Witt normal form at the point and translates the point
/// to the origin, producing the single quadric relation.
pub fn chart_at(l: &QuadLattice, point: &ProjPoint, k: u32) -> Result<Chart> {
    if !point.on_quadric {
        return Err(Error::precondition("charts exist only at quadric points"));
    }
    let nf = normal_form_witt(l, k)?;
    let ring = nf.ring;
    let field = ring.residue_field();
    let n = l.rank();
    if point.coords.len() != n {
        return Err(Error::precondition("point dimension mismatch"));
    }
    let x: Vec<FqElem> = point.coords.iter().map(|c| embed_into(&field, c)).collect();
    let bbar = nf.basis.map(|w| w.reduce());
    let y = bbar
        .solve(&Mat::from_cols(vec![x]))
        .ok_or_else(|| Error::invariant("normal form basis is invertible"))?
        .col(0);
    let pivot = y
        .iter()
        .position(|c| !c.is_zero())
        .ok_or_else(|| Error::invariant("projective point cannot be zero"))?;
    let scale = y[pivot].inv().expect("nonzero");
    let y: Vec<FqElem> = y.iter().map(|c| c.mul(&scale)).collect();

    let all_names = nf.coordinate_names();
    let vars: Vec<String> =
        (0..n).filter(|&j| j != pivot).map(|j| all_names[j].clone()).collect();
    let nvars = n - 1;
    // Coordinate polynomials: the pivot is 1, the rest are lift + variable.
    let mut coord_polys = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(nvars);
    let mut slot = 0usize;
    for j in 0..n {
        if j == pivot {
            coord_polys.push(WittPoly::constant(ring, nvars, &ring.one()));
        } else {
            let lift = ring.lift(&y[j]);
            origin.push(y[j].clone());
            let poly =
                WittPoly::constant(ring, nvars, &lift).add(&WittPoly::var(ring, nvars, slot));
            coord_polys.push(poly);
            slot += 1;
        }
    }
    let half = ring.from_i64(2).inv().expect("odd p");
    let mut h = WittPoly::zero(ring, nvars);
    for i in 0..n {
        for j in 0..n {
            let c = nf.gram.at(i, j).mul(&half);
            if c.is_zero() {
                continue;
            }
            h = h.add(&coord_polys[i].mul(&coord_polys[j]).scale(&c));
        }
    }
    let c0 = h.constant_term();
    if !(c0.is_zero() || c0.valuation().map_or(false, |v| v >= 1)) {
        return Err(Error::invariant("relation must vanish at the point modulo p"));
    }
    Ok(Chart {
        ring,
        vars,
        relations: vec![h],
        origin,
        irregular: point.irregular,
        label: format!("chart at {}", point.display()),
    })
}

/// Moves the distinguished point of a chart by the given residue offsets.
pub fn translate_chart(chart: &Chart, delta: &[FqElem]) -> Result<Chart> {
    if delta.len() != chart.vars.len() {
        return Err(Error::precondition("translation dimension mismatch"));
    }
    let ring = chart.ring;
    let nvars = chart.vars.len();
    let lifts: Vec<WittElem> = delta.iter().map(|d| ring.lift(d)).collect();
    let mut relations = Vec::with_capacity(chart.relations.len());
    for r in &chart.relations {
        let mut moved = r.clone();
        for (i, lift) in lifts.iter().enumerate() {
            let shift =
                WittPoly::constant(ring, nvars, lift).add(&WittPoly::var(ring, nvars, i));
            moved = moved.subst(i, &shift);
        }
        let c0 = moved.constant_term();
        if !(c0.is_zero() || c0.valuation().map_or(false, |v| v >= 1)) {
            return Err(Error::precondition("target point does not lie on the chart"));
        }
        relations.push(moved);
    }
    let origin: Vec<FqElem> =
        chart.origin.iter().zip(delta).map(|(a, b)| a.add(b)).collect();
    Ok(Chart {
        ring,
        vars: chart.vars.clone(),
        relations,
        origin,
        irregular: false,
        label: format!("{} translated", chart.label),
    })
}

/// All residue-field points of a chart: assignments where every relation
/// vanishes mod p.
pub fn chart_points(chart: &Chart) -> Result<Vec<Vec<FqElem>>> {
    let field = chart.ring.residue_field();
    let elems = field.elements();
    let nvars = chart.vars.len();
    let total = (elems.len() as u128).pow(nvars as u32);
    if total > PROJ_ENUM_CAP {
        return Err(Error::resource("chart point enumeration exceeds the cap"));
    }
    let reduced: Vec<WittPoly> = chart.relations.to_vec();
    let mut out = Vec::new();
    let mut odometer = vec![0usize; nvars];
    loop {
        let point: Vec<FqElem> = odometer.iter().map(|&i| elems[i].clone()).collect();
        let lifts: Vec<WittElem> = point.iter().map(|x| chart.ring.lift(x)).collect();
        if reduced.iter().all(|r| r.eval(&lifts).reduce().is_zero()) {
            out.push(point);
        }
        let mut carry = true;
        for slot in (0..nvars).rev() {
            if carry {
                odometer[slot] += 1;
                if odometer[slot] == elems.len() {
                    odometer[slot] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(out)
}

/// Outcome of the symbolic regularity classification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VzVerdict {
    Smooth,
    /// p lands in the maximal ideal with computable order below p.
    QuasiHealthyOrder { ord: u64 },
    /// A two-variable restriction p = h(T1,T2) with a unit monomial escaping
    /// (p, T1^p, T2^p, T1^{p-1} T2^{p-1}).
    QuasiHealthyMain { variables: (String, String), monomial: (u32, u32) },
    Irregular,
    Unclassified,
}

impl VzVerdict {
    pub fn display(&self) -> String {
        match self {
            VzVerdict::Smooth => "Smooth".to_string(),
            VzVerdict::QuasiHealthyOrder { ord } => {
                format!("QuasiHealthyOrder(ord={ord})")
            }
            VzVerdict::QuasiHealthyMain { variables, monomial } => format!(
                "QuasiHealthyMain({}^{} * {}^{})",
                variables.0, monomial.0, variables.1, monomial.1
            ),
            VzVerdict::Irregular => "Irregular".to_string(),
            VzVerdict::Unclassified => "Unclassified".to_string(),
        }
    }
}

/// Classifies the complete local ring presented by a chart. Variables with a
/// unit linear coefficient are eliminated as power series first; if nothing
/// remains the chart is smooth. Otherwise p is solved from a relation whose
/// constant term has valuation exactly one, its order in the maximal ideal
/// is bounded by a weight fixpoint, and failing the order test every
/// two-variable zero-substitution is searched for an escaping unit monomial.
pub fn vz_classify(chart: &Chart) -> Result<VzVerdict> {
    let ring = chart.ring;
    let p = ring.p;
    if ring.k < 3 {
        return Err(Error::precondition("classification needs truncation at least 3"));
    }
    let kv = ring.k - 1;
    let rv = WittRing::new(p, kv)?;
    let nvars = chart.vars.len();
    let dmax = 2 * (p as u32) + 1;
    let mut rels: Vec<WittPoly> = chart
        .relations
        .iter()
        .map(|r| {
            r.map_coeffs(|c| c.reduce_to(kv).expect("reduction to lower precision"))
                .truncate_above(dmax)
        })
        .filter(|r| !r.is_zero())
        .collect();

    // Eliminate formally smooth directions by iterated series substitution.
    'outer: loop {
        for ri in 0..rels.len() {
            for v in 0..nvars {
                let c = rels[ri].linear_coeff(v);
                if !c.is_unit() {
                    continue;
                }
                let cinv = c.inv().expect("unit");
                let vmono = WittPoly::var(rv, nvars, v);
                let rest = rels[ri].sub(&vmono.scale(&c)).scale(&cinv).neg();
                let mut series = WittPoly::zero(rv, nvars);
                // Contraction is joint in degree and p-adic depth, so the
                // iteration count covers both filtrations.
                for _ in 0..(dmax + kv + 3) {
                    series = rest.subst(v, &series).truncate_above(dmax);
                }
                if rest.subst(v, &series).truncate_above(dmax) != series {
                    return Err(Error::invariant("series elimination did not stabilize"));
                }
                rels.remove(ri);
                for r in rels.iter_mut() {
                    *r = r.subst(v, &series).truncate_above(dmax);
                }
                rels.retain(|r| !r.is_zero());
                continue 'outer;
            }
        }
        break;
    }
    if rels.is_empty() {
        return Ok(VzVerdict::Smooth);
    }

    // Find a relation whose constant term is p times a unit.
    let mut chosen = None;
    let mut deeper = false;
    for (i, r) in rels.iter().enumerate() {
        match r.constant_term().valuation() {
            Some(0) => {
                return Err(Error::invariant("distinguished point is not on the chart"))
            }
            Some(1) => {
                chosen = Some(i);
                break;
            }
            Some(_) => deeper = true,
            None => {}
        }
    }
    let Some(ci) = chosen else {
        if deeper {
            return Err(Error::precondition(
                "relation is not linear in p at the distinguished point",
            ));
        }
        return Ok(if chart.irregular { VzVerdict::Irregular } else { VzVerdict::Unclassified });
    };

    // Solve for p: the constant is p*gamma with gamma a unit, so p equals
    // -gamma^{-1} times the variable part, read at one less digit.
    let kg = kv - 1;
    let c0 = rels[ci].constant_term();
    let gamma = c0.div_p()?;
    let gamma_inv = gamma.inv().ok_or_else(|| Error::invariant("unit by valuation"))?;
    let variable_part = rels[ci].sub(&WittPoly::constant(rv, nvars, &c0));
    let g = variable_part
        .map_coeffs(|c| c.reduce_to(kg).expect("reduce"))
        .scale(&gamma_inv.neg());

    if g.is_zero() {
        return Ok(VzVerdict::Unclassified);
    }
    // Order of p in the maximal ideal: each term contributes its total
    // degree plus its coefficient valuation times the current weight of p.
    let term_data: Vec<(u64, u64)> = g
        .terms
        .iter()
        .map(|(e, c)| {
            let deg: u32 = e.iter().sum();
            (deg as u64, c.valuation().expect("nonzero coefficient") as u64)
        })
        .collect();
    let mut w: u64 = 1;
    for _ in 0..=(p + 2) {
        let w2 = term_data.iter().map(|(d, e)| d + e * w).min().expect("nonempty");
        if w2 == w {
            break;
        }
        w = w2;
        if w > p as u64 + 1 {
            break;
        }
    }
    if w < p as u64 {
        return Ok(VzVerdict::QuasiHealthyOrder { ord: w });
    }

    // Two-variable route: zero out all but a pair of variables; the other
    // surviving relations must vanish under the same substitution.
    let others: Vec<&WittPoly> = rels
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ci)
        .map(|(_, r)| r)
        .collect();
    let used = g.vars_present();
    for a in 0..used.len() {
        for b in (a + 1)..used.len() {
            let (vi, vj) = (used[a], used[b]);
            let restrict = |poly: &WittPoly| -> WittPoly {
                let zero_poly = WittPoly::zero(poly.ring, nvars);
                let mut r = poly.clone();
                for v in 0..nvars {
                    if v != vi && v != vj {
                        r = r.subst(v, &zero_poly);
                    }
                }
                r
            };
            if !others.iter().all(|o| restrict(o).is_zero()) {
                continue;
            }
            let h2 = restrict(&g);
            for (e, c) in &h2.terms {
                let (ea, eb) = (e[vi] as u64, e[vj] as u64);
                if c.is_unit() && ea < p && eb < p && !(ea >= p - 1 && eb >= p - 1) {
                    return Ok(VzVerdict::QuasiHealthyMain {
                        variables: (chart.vars[vi].clone(), chart.vars[vj].clone()),
                        monomial: (e[vi], e[vj]),
                    });
                }
            }
        }
    }
    Ok(VzVerdict::Unclassified)
}

/// Valuations of the Smith-type elementary divisors of a matrix over the
/// truncated Witt ring, in nondecreasing order. Entries indistinguishable
/// from zero count as full-precision valuations.
pub fn witt_elementary_valuations(m: &Mat<WittElem>) -> Vec<u32> {
    let mut a = m.clone();
    let steps = a.rows.min(a.cols);
    let mut vals = Vec::with_capacity(steps);
    for step in 0..steps {
        // Pick the entry of minimal valuation in the remaining block.
        let mut best: Option<(usize, usize, u32)> = None;
        for i in step..a.rows {
            for j in step..a.cols {
                if let Some(v) = a.at(i, j).valuation() {
                    if best.map_or(true, |(_, _, bv)| v < bv) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let Some((pi, pj, pv)) = best else {
            // Remaining block is zero to working precision.
            for _ in step..steps {
                vals.push(a.at(0, 0).ring.k);
            }
            return vals;
        };
        vals.push(pv);
        // Swap the pivot into place.
        for j in 0..a.cols {
            let tmp = a.at(step, j).clone();
            a.set(step, j, a.at(pi, j).clone());
            a.set(pi, j, tmp);
        }
        for i in 0..a.rows {
            let tmp = a.at(i, step).clone();
            a.set(i, step, a.at(i, pj).clone());
            a.set(i, pj, tmp);
        }
        let pivot = a.at(step, step).clone();
        let ring = pivot.ring;
        // factor(x) lifts x / pivot back to full precision; the product
        // matches x exactly because the error is beyond p^k.
        let factor = |x: &WittElem| -> WittElem {
            let mut num = x.clone();
            let mut unit = pivot.clone();
            for _ in 0..pv {
                num = num.div_p().expect("minimal valuation divides");
                unit = unit.div_p().expect("pivot divisible by its valuation");
            }
            let f = num.mul(&unit.inv().expect("unit part"));
            ring.elem(f.a, f.b)
        };
        for i in (step + 1)..a.rows {
            if a.at(i, step).is_zero() {
                continue;
            }
            let f = factor(a.at(i, step));
            for j in step..a.cols {
                let newv = a.at(i, j).sub(&f.mul(a.at(step, j)));
                a.set(i, j, newv);
            }
        }
        for j in (step + 1)..a.cols {
            if a.at(step, j).is_zero() {
                continue;
            }
            let f = factor(a.at(step, j));
            for i in step..a.rows {
                let newv = a.at(i, j).sub(&f.mul(a.at(i, step)));
                a.set(i, j, newv);
            }
        }
    }
    vals.sort_unstable();
    vals
}

/// The self-dual lattice obtained from an isotropic discriminant line by
/// adjoining the line divided by p.
#[derive(Clone, Debug)]
pub struct LDiamondLattice {
    pub ring: WittRing,
    /// The chosen irregular line, in the original coordinates.
    pub line: Vec<FqElem>,
    /// Column j is p times the j-th basis vector of the new lattice,
    /// expressed in the original basis over the Witt ring.
    pub scaled_basis: Mat<WittElem>,
    /// Gram matrix of the new basis; unit determinant.
    pub gram: Mat<WittElem>,
    /// Original basis vectors in the new one; elementary divisor
    /// valuations (0, ..., 0, 1).
    pub inclusion: Mat<WittElem>,
    pub inclusion_valuations: Vec<u32>,
}

pub fn ldiamond(l: &QuadLattice, line: &ProjPoint, k: u32) -> Result<LDiamondLattice> {
    let report = l.is_maximal()?;
    if !report.maximal {
        return Err(Error::precondition("the construction requires a maximal lattice"));
    }
    let rad = l.radical_mod_p()?;
    if rad.t != 2 {
        return Err(Error::precondition("the construction requires a radical of dimension 2"));
    }
    if !line.irregular {
        return Err(Error::precondition("the line must be one of the two irregular points"));
    }
    if k < 2 {
        return Err(Error::precondition("truncation must be at least 2"));
    }
    let n = l.rank();
    let ki = k + 2;
    let ring_i = WittRing::new(l.p, ki)?;
    let field = ring_i.residue_field();
    let mut gw = Mat::zeros(n, n, ring_i.zero());
    for i in 0..n {
        for j in 0..n {
            gw.set(i, j, ring_i.from_rat(l.gram.at(i, j))?);
        }
    }
    let half = ring_i.from_i64(2).inv().expect("odd p");
    let qval = |v: &[WittElem]| -> WittElem {
        let gv = gw.mul_vec(v);
        let mut acc = ring_i.zero();
        for (x, y) in v.iter().zip(&gv) {
            acc = acc.add(&x.mul(y));
        }
        acc.mul(&half)
    };

    // A radical direction pairing nontrivially with the line, used to steer
    // the isotropy correction without disturbing Q more than quadratically.
    let x_line: Vec<FqElem> = line.coords.iter().map(|c| embed_into(&field, c)).collect();
    let mut v: Vec<WittElem> = x_line.iter().map(|c| ring_i.lift(c)).collect();
    let mut steer: Option<Vec<WittElem>> = None;
    for gen in &rad.n_basis {
        let cand: Vec<WittElem> =
            gen.iter().map(|c| ring_i.lift(&embed_into(&field, c))).collect();
        let pairing = {
            let gv = gw.mul_vec(&v);
            let mut acc = ring_i.zero();
            for (x, y) in cand.iter().zip(&gv) {
                acc = acc.add(&x.mul(y));
            }
            acc
        };
        if pairing.valuation() == Some(1) {
            steer = Some(cand);
            break;
        }
    }
    let steer = steer.ok_or_else(|| {
        Error::invariant("the radical form must pair the line with some radical direction")
    })?;

    // Newton steps: subtract (Q(v)/[v,steer]) * steer until Q(v) vanishes at
    // working precision. Each step at least doubles the attained valuation.
    for _ in 0..(2 * ki) {
        let q = qval(&v);
        if q.is_zero() {
            break;
        }
        let s = q.valuation().expect("nonzero");
        if s >= ki {
            break;
        }
        if s < 2 {
            return Err(Error::invariant("line lift must have Q divisible by p^2"));
        }
        let pairing = {
            let gv = gw.mul_vec(&v);
            let mut acc = ring_i.zero();
            for (x, y) in steer.iter().zip(&gv) {
                acc = acc.add(&x.mul(y));
            }
            acc
        };
        if pairing.valuation() != Some(1) {
            return Err(Error::invariant("correction direction degenerated"));
        }
        // c = Q(v)/pairing, computed one digit down and lifted back; the
        // product c*pairing still matches Q(v) to full precision.
        let c = q
            .div_p()?
            .mul(&pairing.div_p()?.inv().expect("unit after dividing by p"))
            .clone();
        let c_full = ring_i.elem(c.a, c.b);
        for (vi, si) in v.iter_mut().zip(&steer) {
            *vi = vi.sub(&c_full.mul(si));
        }
    }
    if !qval(&v).is_zero() {
        return Err(Error::invariant("isotropy correction failed to converge"));
    }

    let j0 = x_line
        .iter()
        .position(|c| !c.is_zero())
        .ok_or_else(|| Error::invariant("line cannot be zero"))?;
    // Scaled basis: p*e_i except in slot j0, which holds the corrected line.
    let pe = ring_i.p_elem();
    let mut mcols: Vec<Vec<WittElem>> = Vec::with_capacity(n);
    for i in 0..n {
        if i == j0 {
            mcols.push(v.clone());
        } else {
            let mut col = vec![ring_i.zero(); n];
            col[i] = pe.clone();
            mcols.push(col);
        }
    }
    let m = Mat::from_cols(mcols);
    let big = m.transpose().mul(&gw).mul(&m);
    let mut gram = Mat::zeros(n, n, WittRing::new(l.p, k)?.zero());
    for i in 0..n {
        for j in 0..n {
            let e = big.at(i, j).div_p()?.div_p()?;
            gram.set(i, j, e);
        }
    }
    let det = gram.det().ok_or_else(|| Error::invariant("degenerate Gram"))?;
    if !det.is_unit() {
        return Err(Error::invariant("the constructed lattice must be self-dual"));
    }
    // Original basis vectors inside the new lattice. M itself is not
    // invertible over the truncated ring, but p*M^{-1} is integral: it is
    // the identity except in column j0, where e_{j0} = v[j0]^{-1} * (v -
    // sum of the other coordinates) unwinds the corrected line.
    let vj0_inv = v[j0]
        .inv()
        .ok_or_else(|| Error::invariant("line coordinate must be a unit"))?;
    let mut inclusion_full = Mat::identity(n, &ring_i.one());
    for r in 0..n {
        if r == j0 {
            inclusion_full.set(r, j0, pe.mul(&vj0_inv));
        } else {
            inclusion_full.set(r, j0, v[r].mul(&vj0_inv).neg());
        }
    }
    let check = m.mul(&inclusion_full);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { pe.clone() } else { ring_i.zero() };
            if check.at(i, j) != &want {
                return Err(Error::invariant("inclusion must satisfy M * A = p * I"));
            }
        }
    }
    let vals = witt_elementary_valuations(&inclusion_full);
    let mut expected = vec![0u32; n - 1];
    expected.push(1);
    if vals != expected {
        return Err(Error::invariant("inclusion must have elementary divisors (1,...,1,p)"));
    }
    let reduce = |mat: &Mat<WittElem>| -> Result<Mat<WittElem>> {
        let mut out = Mat::zeros(mat.rows, mat.cols, WittRing::new(l.p, k)?.zero());
        for i in 0..mat.rows {
            for j in 0..mat.cols {
                out.set(i, j, mat.at(i, j).reduce_to(k)?);
            }
        }
        Ok(out)
    };
    Ok(LDiamondLattice {
        ring: WittRing::new(l.p, k)?,
        line: x_line,
        scaled_basis: reduce(&m)?,
        gram,
        inclusion: reduce(&inclusion_full)?,
        inclusion_valuations: vals,
    })
}

/// The refined model over a dehomogenized base chart: the ideal generators
/// in split coordinates and its three kinds of affine charts.
#[derive(Clone, Debug)]
pub struct MrefPresentation {
    pub ring: WittRing,
    pub vars: Vec<String>,
    pub generators: Vec<WittPoly>,
    pub charts: Vec<Chart>,
}

fn drop_redundant(gens: &mut Vec<WittPoly>) {
    gens.retain(|g| !g.is_zero());
    let mut i = 0;
    while i < gens.len() {
        let others: Vec<&WittPoly> =
            gens.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g).collect();
        if !others.is_empty() && gens[i].reduce_modulo(&others).is_zero() {
            gens.remove(i);
            i = 0;
        } else {
            i += 1;
        }
    }
}

/// Removes variable v when some generator is (unit)*v + rest with v absent
/// from rest. With require_elsewhere the variable must also occur in a
/// second generator, so a lone hypersurface equation is never consumed.
fn try_eliminate(gens: &mut Vec<WittPoly>, v: usize, require_elsewhere: bool) -> bool {
    for gi in 0..gens.len() {
        let c = gens[gi].linear_coeff(v);
        if !c.is_unit() {
            continue;
        }
        let occurrences = gens[gi].terms.keys().filter(|e| e[v] > 0).count();
        if occurrences != 1 {
            continue;
        }
        if require_elsewhere {
            let elsewhere = gens
                .iter()
                .enumerate()
                .any(|(j, g)| j != gi && g.terms.keys().any(|e| e[v] > 0));
            if !elsewhere {
                continue;
            }
        }
        let cinv = c.inv().expect("unit");
        let ring = gens[gi].ring;
        let nvars = gens[gi].nvars;
        let vmono = WittPoly::var(ring, nvars, v);
        let value = gens[gi].sub(&vmono.scale(&c)).scale(&cinv).neg();
        gens.remove(gi);
        for g in gens.iter_mut() {
            *g = g.subst(v, &value);
        }
        return true;
    }
    false
}

fn build_chart_from(
    ring: WittRing,
    parent_vars: &[String],
    generators: &[WittPoly],
    base_vars: usize,
    dehom: usize,
    label: &str,
) -> Result<Chart> {
    let nvars = parent_vars.len();
    let one = WittPoly::constant(ring, nvars, &ring.one());
    let mut gens: Vec<WittPoly> = generators.iter().map(|g| g.subst(dehom, &one)).collect();
    let mut eliminated = vec![false; nvars];
    eliminated[dehom] = true;

    // Base coordinates are functions of the fiber in every chart, so they
    // are substituted away first. Fiber coordinates are only eliminated
    // while they connect two generators, after redundant generators are
    // dropped; this keeps each chart's defining equations.
    loop {
        loop {
            let mut any = false;
            for v in 0..base_vars {
                if !eliminated[v] && try_eliminate(&mut gens, v, false) {
                    eliminated[v] = true;
                    any = true;
                    break;
                }
            }
            if !any {
                break;
            }
        }
        drop_redundant(&mut gens);
        let mut fired = false;
        for v in base_vars..nvars {
            if !eliminated[v] && try_eliminate(&mut gens, v, true) {
                eliminated[v] = true;
                fired = true;
                break;
            }
        }
        if !fired {
            break;
        }
        drop_redundant(&mut gens);
    }
    // Normalize each generator by its leading unit coefficient.
    for g in gens.iter_mut() {
        if let Some((_, c)) = g.leading_term() {
            if c.is_unit() {
                let cinv = c.inv().expect("unit");
                *g = g.scale(&cinv);
            }
        }
    }

    // Compact the variable set to those still appearing.
    let mut used: Vec<usize> = Vec::new();
    for v in 0..nvars {
        if eliminated[v] {
            continue;
        }
        if gens.iter().any(|g| g.vars_present().contains(&v)) {
            used.push(v);
        }
    }
    let vars: Vec<String> = used.iter().map(|&v| parent_vars[v].clone()).collect();
    let compact: Vec<WittPoly> = gens
        .iter()
        .map(|g| {
            let mut out = WittPoly::zero(ring, used.len());
            for (e, c) in &g.terms {
                let ne: Vec<u32> = used.iter().map(|&v| e[v]).collect();
                out = out.add(&WittPoly::monomial(ring, ne, c.clone()));
            }
            out
        })
        .collect();

    // Distinguished point: the first residue point where the Jacobian rank
    // is minimal, so the chart is centered at its most singular point.
    let field = ring.residue_field();
    let elems = field.elements();
    let m = used.len();
    let total = (elems.len() as u128).pow(m as u32);
    if total > PROJ_ENUM_CAP {
        return Err(Error::resource("chart point search exceeds the cap"));
    }
    let partials: Vec<Vec<WittPoly>> = compact
        .iter()
        .map(|g| (0..m).map(|v| g.partial(v)).collect())
        .collect();
    let mut best: Option<(Vec<FqElem>, usize)> = None;
    let mut odometer = vec![0usize; m];
    loop {
        let point: Vec<FqElem> = odometer.iter().map(|&i| elems[i].clone()).collect();
        let lifts: Vec<WittElem> = point.iter().map(|x| ring.lift(x)).collect();
        if compact.iter().all(|r| r.eval(&lifts).reduce().is_zero()) {
            let jac = Mat::from_fn(compact.len(), m, |i, j| {
                partials[i][j].eval(&lifts).reduce()
            });
            let rank = jac.rank();
            if best.as_ref().map_or(true, |(_, br)| rank < *br) {
                best = Some((point, rank));
            }
            if matches!(best, Some((_, 0))) {
                break;
            }
        }
        let mut carry = true;
        for slot in (0..m).rev() {
            if carry {
                odometer[slot] += 1;
                if odometer[slot] == elems.len() {
                    odometer[slot] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    let (origin, _) =
        best.ok_or_else(|| Error::invariant("chart has no residue point"))?;
    let base = Chart {
        ring,
        vars,
        relations: compact,
        origin: vec![field.zero(); m],
        irregular: false,
        label: label.to_string(),
    };
    if origin.iter().all(|c| c.is_zero()) {
        Ok(base)
    } else {
        let mut translated = translate_chart(&base, &origin)?;
        translated.label = label.to_string();
        Ok(translated)
    }
}

pub fn mref_ideal(l: &QuadLattice, k: u32) -> Result<MrefPresentation> {
    let nf = normal_form_witt(l, k)?;
    if nf.t != 2 {
        return Err(Error::precondition("the refined model requires a radical of dimension 2"));
    }
    let m = nf.units;
    if m < 1 {
        return Err(Error::precondition("the refined model needs at least one unit coordinate"));
    }
    let ring = nf.ring;
    // Variables: x1..xm, y on the base; w1..wm, u, t in the fiber.
    let mut vars: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    vars.push("y".to_string());
    vars.extend((1..=m).map(|i| format!("w{i}")));
    vars.push("u".to_string());
    vars.push("t".to_string());
    let nvars = vars.len();
    let xi = |i: usize| WittPoly::var(ring, nvars, i);
    let y = WittPoly::var(ring, nvars, m);
    let wi = |i: usize| WittPoly::var(ring, nvars, m + 1 + i);
    let uu = WittPoly::var(ring, nvars, 2 * m + 1);
    let tt = WittPoly::var(ring, nvars, 2 * m + 2);
    let pp = WittPoly::constant(ring, nvars, &ring.p_elem());

    let mut generators = Vec::new();
    // Base: sum of unit squares plus p*y.
    let mut base = pp.mul(&y);
    for i in 0..m {
        base = base.add(&xi(i).mul(&xi(i)).scale(&nf.unit_values[i]));
    }
    generators.push(base);
    // Fiber quadric: sum of unit squares plus u*t.
    let mut fiber = uu.mul(&tt);
    for i in 0..m {
        fiber = fiber.add(&wi(i).mul(&wi(i)).scale(&nf.unit_values[i]));
    }
    generators.push(fiber);
    // Proportionality of the two lines.
    for i in 0..m {
        for j in (i + 1)..m {
            generators.push(xi(j).mul(&wi(i)).sub(&xi(i).mul(&wi(j))));
        }
    }
    for i in 0..m {
        generators.push(pp.mul(&wi(i)).sub(&xi(i).mul(&uu)));
    }
    for i in 0..m {
        generators.push(y.mul(&wi(i)).sub(&xi(i).mul(&tt)));
    }
    generators.push(y.mul(&uu).sub(&pp.mul(&tt)));

    let charts = vec![
        build_chart_from(ring, &vars, &generators, m + 1, 2 * m + 1, "U-chart")?,
        build_chart_from(ring, &vars, &generators, m + 1, 2 * m + 2, "T-chart")?,
        build_chart_from(ring, &vars, &generators, m + 1, m + 1, "W1-chart")?,
    ];
    Ok(MrefPresentation { ring, vars, generators, charts })
}

/// Point-level comparison of the refined model with the quadric.
#[derive(Clone, Debug)]
pub struct MrefComparison {
    pub ext_degree: u32,
    pub mloc_points: usize,
    pub mref_points: usize,
    /// Every non-irregular point has exactly one compatible fiber line.
    pub regular_bijective: bool,
    /// Fiber size over each irregular point.
    pub irregular_fibers: Vec<(String, usize)>,
}

pub fn mref_vs_mloc(l: &QuadLattice, ext_degree: u32, k: u32) -> Result<MrefComparison> {
    let mloc = enumerate_mloc(l, ext_degree)?;
    let irregular: Vec<ProjPoint> = enumerate_mloc(l, 2)?
        .into_iter()
        .filter(|pt| pt.irregular)
        .collect();
    if irregular.len() != 2 {
        return Err(Error::precondition(
            "the comparison requires exactly two irregular lines over the quadratic extension",
        ));
    }
    let ld = ldiamond(l, &irregular[0], k)?;
    let field = ld.ring.residue_field();
    let abar = ld.inclusion.map(|x| x.reduce());
    let gram_dia = ld.gram.map(|x| x.reduce());
    let fiber_lines = quadric_points(&gram_dia, &field)?;
    let half = field.from_u64(2).inv().expect("odd p");

    let mut mref_points = 0usize;
    let mut regular_bijective = true;
    let mut irregular_fibers = Vec::new();
    for pt in &mloc {
        let x: Vec<FqElem> = pt.coords.iter().map(|c| embed_into(&field, c)).collect();
        let img = abar.mul_vec(&x);
        let fiber = if is_zero_vec(&img) {
            fiber_lines.len()
        } else {
            if !qvalue(&gram_dia, &img, &half).is_zero() {
                return Err(Error::invariant("the inclusion must preserve isotropy"));
            }
            1
        };
        mref_points += fiber;
        if pt.irregular {
            irregular_fibers.push((pt.display(), fiber));
        } else if fiber != 1 {
            regular_bijective = false;
        }
    }
    Ok(MrefComparison {
        ext_degree,
        mloc_points: mloc.len(),
        mref_points,
        regular_bijective,
        irregular_fibers,
    })
}
