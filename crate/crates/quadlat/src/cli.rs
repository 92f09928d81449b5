//! Document ingestion and report assembly for the command-line front end.
//! Reports are deterministic: the same document, flags, and seed produce
//! byte-identical output in both renderings.

use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::embed::selfdual_overlattice;
use crate::error::{Error, Result};
use crate::exact::matrix::Mat;
use crate::exact::rational::Rat;
use crate::localmodel::{self, VzVerdict};
use crate::quadlattice::{MaximalityWitness, QuadLattice};
use crate::selftest;

/// Input document: an odd prime and exactly one of a full Gram matrix of
/// bilinear values or a list of diagonal Q-values.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeDocument {
    pub p: u64,
    #[serde(default)]
    pub gram: Option<Vec<Vec<RatValue>>>,
    #[serde(default)]
    pub diag_q: Option<Vec<RatValue>>,
    #[serde(default)]
    pub label: Option<String>,
}

/// Rational entry in a document: a plain integer or a string "a" or "a/b".
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RatValue {
    Int(i64),
    Str(String),
}

fn parse_rat(v: &RatValue) -> Result<Rat> {
    match v {
        RatValue::Int(n) => Ok(Rat::from(BigInt::from(*n))),
        RatValue::Str(s) => {
            let s = s.trim();
            let (num, den) = match s.split_once('/') {
                Some((a, b)) => (a.trim(), Some(b.trim())),
                None => (s, None),
            };
            let n = BigInt::from_str(num)
                .map_err(|_| Error::parse(format!("bad rational numerator in {s:?}")))?;
            let d = match den {
                Some(b) => BigInt::from_str(b)
                    .map_err(|_| Error::parse(format!("bad rational denominator in {s:?}")))?,
                None => BigInt::one(),
            };
            if d == BigInt::from(0) {
                return Err(Error::parse(format!("zero denominator in {s:?}")));
            }
            Ok(Rat::new(n, d))
        }
    }
}

fn rat_str(x: &Rat) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn mat_strs(m: &Mat<Rat>) -> Vec<Vec<String>> {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| rat_str(m.at(i, j))).collect())
        .collect()
}

impl LatticeDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("document: {e}")))
    }

    pub fn lattice(&self) -> Result<QuadLattice> {
        match (&self.gram, &self.diag_q) {
            (Some(_), Some(_)) => {
                Err(Error::parse("document must provide exactly one of gram or diag_q"))
            }
            (None, None) => Err(Error::parse("document must provide gram or diag_q")),
            (Some(rows), None) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::parse("gram must be a nonempty square matrix"));
                }
                let mut gram = Mat::zeros(n, n, Rat::from(BigInt::from(0)));
                for (i, row) in rows.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        gram.set(i, j, parse_rat(v)?);
                    }
                }
                QuadLattice::new(self.p, gram)
            }
            (None, Some(diag)) => {
                let vals: Vec<Rat> = diag.iter().map(parse_rat).collect::<Result<_>>()?;
                QuadLattice::from_diag(self.p, &vals)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantsBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localmodel: Option<LocalModelBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selftest: Option<selftest::SelftestBlock>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantsBlock {
    pub rank: usize,
    pub signature: (usize, usize),
    pub t: usize,
    pub s: i64,
    pub disc_elementary_divisors: Vec<String>,
    pub maximal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximality_witness: Option<WitnessInfo>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessInfo {
    pub kind: String,
    pub overlattice_vector: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingBlock {
    pub source_rank: usize,
    pub target_rank: usize,
    pub target_gram: Vec<Vec<String>>,
    pub embed_matrix: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complement_gram: Option<Vec<Vec<String>>>,
    pub disc_cyclic: bool,
    pub rank_bound_ok: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalModelBlock {
    pub k: u32,
    pub per_q: Vec<QSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<RefinedBlock>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QSummary {
    pub q: u64,
    pub total_points: usize,
    pub singular_points: Vec<String>,
    pub irregular_points: Vec<String>,
    /// Chart relations and verdicts at every singular point.
    pub charts: Vec<ChartVerdict>,
    pub regular_points: usize,
    /// True when every regular point classified as smooth; absent when
    /// charts could not be constructed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regular_all_smooth: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartVerdict {
    pub point: String,
    pub verdict: String,
    pub relations: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedBlock {
    pub charts: Vec<RefinedChart>,
    pub comparisons: Vec<ComparisonInfo>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedChart {
    pub label: String,
    pub vars: Vec<String>,
    pub relations: Vec<String>,
    pub origin: Vec<String>,
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonInfo {
    pub q: u64,
    pub mloc_points: usize,
    pub mref_points: usize,
    pub regular_bijective: bool,
    pub irregular_fibers: Vec<(String, usize)>,
}

impl Report {
    fn empty(doc: Option<&LatticeDocument>) -> Report {
        Report {
            label: doc.and_then(|d| d.label.clone()),
            p: doc.map(|d| d.p),
            invariants: None,
            embedding: None,
            localmodel: None,
            selftest: None,
            errors: Vec::new(),
        }
    }

    pub fn to_structured(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        if let Some(label) = &self.label {
            line(format!("lattice: {label}"));
        }
        if let Some(p) = self.p {
            line(format!("p: {p}"));
        }
        if let Some(inv) = &self.invariants {
            line("invariants:".to_string());
            line(format!("  rank: {}", inv.rank));
            line(format!("  signature: ({}, {})", inv.signature.0, inv.signature.1));
            line(format!("  t: {}", inv.t));
            line(format!("  s: {}", inv.s));
            line(format!(
                "  disc elementary divisors: [{}]",
                inv.disc_elementary_divisors.join(", ")
            ));
            line(format!("  maximal: {}", inv.maximal));
            if let Some(w) = &inv.maximality_witness {
                line(format!(
                    "  witness: {} via ({})",
                    w.kind,
                    w.overlattice_vector.join(", ")
                ));
            }
        }
        if let Some(emb) = &self.embedding {
            line("embedding:".to_string());
            line(format!("  source rank: {}", emb.source_rank));
            line(format!("  target rank: {}", emb.target_rank));
            line(format!("  target gram: {}", rows_text(&emb.target_gram)));
            line(format!("  embed matrix: {}", rows_text(&emb.embed_matrix)));
            match &emb.complement_gram {
                Some(c) => line(format!("  complement gram: {}", rows_text(c))),
                None => line("  complement gram: (zero complement)".to_string()),
            }
            line(format!("  disc cyclic: {}", emb.disc_cyclic));
            line(format!("  rank bound ok: {}", emb.rank_bound_ok));
            for n in &emb.notes {
                line(format!("  note: {n}"));
            }
        }
        if let Some(lm) = &self.localmodel {
            line("localmodel:".to_string());
            line(format!("  k: {}", lm.k));
            for qs in &lm.per_q {
                line(format!("  q={}:", qs.q));
                line(format!("    points: {}", qs.total_points));
                line(format!(
                    "    singular: {} [{}]",
                    qs.singular_points.len(),
                    qs.singular_points.join(", ")
                ));
                line(format!(
                    "    irregular: {} [{}]",
                    qs.irregular_points.len(),
                    qs.irregular_points.join(", ")
                ));
                for c in &qs.charts {
                    line(format!("    chart at {}: {}", c.point, c.verdict));
                    for r in &c.relations {
                        line(format!("      relation: {r}"));
                    }
                }
                line(format!("    regular points: {}", qs.regular_points));
                if let Some(ok) = qs.regular_all_smooth {
                    line(format!("    regular all smooth: {ok}"));
                }
            }
            if let Some(refined) = &lm.refined {
                line("  refined:".to_string());
                for c in &refined.charts {
                    line(format!(
                        "    {} [{}] at ({}): {}",
                        c.label,
                        c.vars.join(", "),
                        c.origin.join(", "),
                        c.verdict
                    ));
                    for r in &c.relations {
                        line(format!("      relation: {r}"));
                    }
                }
                for cmp in &refined.comparisons {
                    line(format!(
                        "    comparison q={}: points {} -> {}, bijective away from irregular: {}",
                        cmp.q, cmp.mref_points, cmp.mloc_points, cmp.regular_bijective
                    ));
                    for (pt, size) in &cmp.irregular_fibers {
                        line(format!("      fiber over {pt}: {size}"));
                    }
                }
            }
        }
        if let Some(st) = &self.selftest {
            line("selftest:".to_string());
            line(format!("  seed: {}", st.seed));
            line(format!("  size: {}", st.size));
            for suite in &st.suites {
                line(format!(
                    "  {}: {} ({} cases)",
                    suite.name,
                    if suite.passed { "pass" } else { "FAIL" },
                    suite.cases
                ));
                for f in &suite.failures {
                    line(format!("    failure: {f}"));
                }
            }
            line(format!("  passed: {}", st.passed));
        }
        for e in &self.errors {
            line(format!("error: {e}"));
        }
        out
    }
}

fn rows_text(rows: &[Vec<String>]) -> String {
    let inner: Vec<String> = rows.iter().map(|r| format!("[{}]", r.join(", "))).collect();
    format!("[{}]", inner.join(", "))
}

pub fn cmd_analyze(doc: &LatticeDocument) -> Result<Report> {
    let l = doc.lattice()?;
    let mut report = Report::empty(Some(doc));
    let rad = l.radical_mod_p()?;
    let disc = l.discriminant_form();
    let maximality = l.is_maximal()?;
    let witness = maximality.witness.as_ref().map(|w| match w {
        MaximalityWitness::NonElementaryDivisor { divisor_valuation, overlattice_vector } => {
            WitnessInfo {
                kind: format!("cyclic factor of order p^{divisor_valuation}"),
                overlattice_vector: overlattice_vector.iter().map(rat_str).collect(),
            }
        }
        MaximalityWitness::IsotropicDiscElement { overlattice_vector, .. } => WitnessInfo {
            kind: "isotropic discriminant class".to_string(),
            overlattice_vector: overlattice_vector.iter().map(rat_str).collect(),
        },
    });
    report.invariants = Some(InvariantsBlock {
        rank: l.rank(),
        signature: l.signature()?,
        t: rad.t,
        s: rad.s,
        disc_elementary_divisors: disc.orders.iter().map(|o| format!("{o}")).collect(),
        maximal: maximality.maximal,
        maximality_witness: witness,
    });
    Ok(report)
}

pub fn cmd_embed(doc: &LatticeDocument) -> Result<Report> {
    let l = doc.lattice()?;
    let mut report = Report::empty(Some(doc));
    let emb = selfdual_overlattice(&l)?;
    let disc = l.discriminant_form();
    let disc_cyclic = disc.orders.len() <= 1;
    let rank_bound_ok = !disc_cyclic || emb.target_rank() <= l.rank() + 1;
    let complement_gram = if emb.complement_basis.cols == 0 {
        None
    } else {
        let c = emb
            .complement_basis
            .transpose()
            .mul(&emb.target_gram)
            .mul(&emb.complement_basis);
        Some(mat_strs(&c))
    };
    report.embedding = Some(EmbeddingBlock {
        source_rank: l.rank(),
        target_rank: emb.target_rank(),
        target_gram: mat_strs(&emb.target_gram),
        embed_matrix: mat_strs(&emb.embed_matrix),
        complement_gram,
        disc_cyclic,
        rank_bound_ok,
        notes: emb.notes.clone(),
    });
    Ok(report)
}

fn ext_degree_for(l: &QuadLattice, q: u64) -> Result<u32> {
    if q == l.p {
        Ok(1)
    } else if q == l.p * l.p {
        Ok(2)
    } else {
        Err(Error::precondition(format!(
            "q must be {} or {}, got {q}",
            l.p,
            l.p * l.p
        )))
    }
}

pub fn cmd_localmodel(
    doc: &LatticeDocument,
    q_list: &[u64],
    refined: bool,
    k: u32,
) -> Result<Report> {
    let l = doc.lattice()?;
    let mut report = Report::empty(Some(doc));
    let qs = if q_list.is_empty() { vec![l.p] } else { q_list.to_vec() };
    let mut per_q = Vec::new();
    for &q in &qs {
        let ext = ext_degree_for(&l, q)?;
        let points = localmodel::enumerate_mloc(&l, ext)?;
        let singular_points: Vec<String> =
            points.iter().filter(|pt| pt.singular).map(|pt| pt.display()).collect();
        let irregular_points: Vec<String> =
            points.iter().filter(|pt| pt.irregular).map(|pt| pt.display()).collect();
        let mut charts = Vec::new();
        let mut regular_all_smooth = Some(true);
        let mut charts_available = true;
        for pt in &points {
            if !charts_available {
                break;
            }
            let outcome = localmodel::chart_at(&l, pt, k)
                .and_then(|c| localmodel::vz_classify(&c).map(|v| (c, v)));
            match outcome {
                Ok((chart, verdict)) => {
                    if pt.singular {
                        charts.push(ChartVerdict {
                            point: pt.display(),
                            verdict: verdict.display(),
                            relations: chart.display_relations(),
                        });
                    } else if verdict != VzVerdict::Smooth {
                        regular_all_smooth = Some(false);
                    }
                }
                Err(e) => {
                    report.errors.push(format!("charts at q={q}: {e}"));
                    charts_available = false;
                    regular_all_smooth = None;
                    charts.clear();
                }
            }
        }
        let regular_points = points.len() - singular_points.len();
        per_q.push(QSummary {
            q,
            total_points: points.len(),
            singular_points,
            irregular_points,
            charts,
            regular_points,
            regular_all_smooth,
        });
    }
    let refined_block = if refined {
        match localmodel::mref_ideal(&l, k) {
            Ok(pres) => {
                let charts = pres
                    .charts
                    .iter()
                    .map(|c| RefinedChart {
                        label: c.label.clone(),
                        vars: c.vars.clone(),
                        relations: c.display_relations(),
                        origin: c.origin.iter().map(|x| format!("{x}")).collect(),
                        verdict: match localmodel::vz_classify(c) {
                            Ok(v) => v.display(),
                            Err(e) => format!("error: {e}"),
                        },
                    })
                    .collect();
                let mut comparisons = Vec::new();
                for &q in &qs {
                    let ext = ext_degree_for(&l, q)?;
                    match localmodel::mref_vs_mloc(&l, ext, k) {
                        Ok(c) => comparisons.push(ComparisonInfo {
                            q,
                            mloc_points: c.mloc_points,
                            mref_points: c.mref_points,
                            regular_bijective: c.regular_bijective,
                            irregular_fibers: c.irregular_fibers,
                        }),
                        Err(e) => report.errors.push(format!("comparison at q={q}: {e}")),
                    }
                }
                Some(RefinedBlock { charts, comparisons })
            }
            Err(e) => {
                report.errors.push(format!("refined model: {e}"));
                None
            }
        }
    } else {
        None
    };
    report.localmodel = Some(LocalModelBlock { k, per_q, refined: refined_block });
    Ok(report)
}

pub fn cmd_selftest(seed: u64, size: &str) -> Result<Report> {
    let block = selftest::run_selftest(seed, size)?;
    let mut report = Report::empty(None);
    report.selftest = Some(block);
    Ok(report)
}

/// Process exit code for an error. Success is 0; a failed selftest is 5.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) => 2,
        Error::Precondition(_) => 3,
        Error::Resource(_) => 4,
        Error::Invariant(_) => 5,
    }
}
