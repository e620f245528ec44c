//! Verification procedures built on the jet, operator and sampling layers.
//!
//! Every procedure returns one of three report shapes: [`ScanReport`] for
//! pointwise scans, [`DefectReport`] for two-sided integral comparisons and
//! [`FitResult`] for constant fitting over a family of test functions.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::CarnotGroup;
use crate::poly::{CompiledPoly, PolyQ};
use crate::sampler::Estimate;

pub mod adams;
pub mod examples;
pub mod fit;
pub mod hardy;
pub mod lsi;
pub mod poincare;
pub mod step2;
pub mod ubound;

pub use adams::{adams_dual_scan, adams_scan, ScanPath};
pub use examples::{eg2_adams_failure, eg3_star_bound, rockland_terms, Eg2Config, Eg3Config};
pub use fit::{fit_constants, FitResult, MemberFit};
pub use hardy::{hardy_check, improved_weight_slope, HardyConfig};
pub use lsi::{lsi_defect, LsiConfig};
pub use poincare::{
    higher_poincare_check, poincare_estimate, statpoly_build, statpoly_build_with, PoincareConstant,
};
pub use step2::{ibp_check, step2_identity_check};
pub use ubound::{fit_ubound_constants, inductive_bound_pipeline, ubound_defect, InductiveConfig, WeightChoice};

/// Pointwise scan output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub label: String,
    /// Names of the per-row values, in column order.
    pub columns: Vec<String>,
    pub rows: Vec<ScanRow>,
    pub summary: ScanSummary,
    /// Further named quantities, in key order.
    pub extras: BTreeMap<String, f64>,
    /// Whether the scan's contract held; `None` for informational scans.
    pub holds: Option<bool>,
    pub notices: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    /// Path parameter (shell radius, axis coordinate, ...).
    pub param: f64,
    pub point: Vec<f64>,
    pub values: Vec<f64>,
    pub singular: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    /// Maximum of the first column over nonsingular rows.
    pub max: f64,
    pub argmax: Option<usize>,
    /// Ratios of the first column between consecutive nonsingular rows.
    pub growth: Vec<f64>,
}

impl ScanReport {
    pub(crate) fn new(label: &str, columns: &[&str], rows: Vec<ScanRow>, notices: Vec<String>) -> Self {
        let mut max = f64::NEG_INFINITY;
        let mut argmax = None;
        let mut prev: Option<f64> = None;
        let mut growth = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r.singular {
                continue;
            }
            let v = r.values[0];
            if v > max {
                max = v;
                argmax = Some(i);
            }
            if let Some(p) = prev {
                growth.push(v / p);
            }
            prev = Some(v);
        }
        ScanReport {
            label: label.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
            summary: ScanSummary {
                max,
                argmax,
                growth,
            },
            extras: BTreeMap::new(),
            holds: None,
            notices,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    /// CSV with columns `row,param,singular,p1..pd,<value columns>,growth`,
    /// where `growth` is the first-column ratio to the previous
    /// nonsingular row (empty for the first).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let csv_err = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let d = self.rows.first().map_or(0, |r| r.point.len());
        let mut header = vec!["row".to_string(), "param".into(), "singular".into()];
        header.extend((1..=d).map(|i| format!("p{i}")));
        header.extend(self.columns.iter().cloned());
        header.push("growth".into());
        w.write_record(&header).map_err(csv_err)?;
        let mut prev: Option<f64> = None;
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![i.to_string(), fmt_f64(r.param), r.singular.to_string()];
            rec.extend(r.point.iter().map(|&v| fmt_f64(v)));
            rec.extend(r.values.iter().map(|&v| fmt_f64(v)));
            let growth = if r.singular {
                String::new()
            } else {
                let s = prev.map(|p| fmt_f64(r.values[0] / p)).unwrap_or_default();
                prev = Some(r.values[0]);
                s
            };
            rec.push(growth);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Shortest round-trip decimal; non-finite values are written as `nan`,
/// `inf` or `-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

/// Two-sided integral comparison `lhs ≤ rhs` (or `lhs = rhs`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    pub label: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub ratio: Option<f64>,
    /// `rhs − lhs`
    pub defect: f64,
    /// Quadrature sum of the two standard errors.
    pub defect_err: f64,
    /// Further named quantities, in key order.
    pub extras: BTreeMap<String, f64>,
    /// Whether the procedure's contract held; `None` for informational
    /// reports.
    pub holds: Option<bool>,
    pub notices: Vec<String>,
}

impl DefectReport {
    pub(crate) fn new(label: &str, lhs: Estimate, rhs: Estimate) -> Self {
        let ratio = if rhs.mean != 0.0 {
            Some(lhs.mean / rhs.mean)
        } else {
            None
        };
        DefectReport {
            label: label.to_string(),
            lhs,
            rhs,
            ratio,
            defect: rhs.mean - lhs.mean,
            defect_err: pooled_err(&lhs, &rhs),
            extras: BTreeMap::new(),
            holds: None,
            notices: Vec::new(),
        }
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.get(key).copied()
    }

    pub(crate) fn with(mut self, key: &str, v: f64) -> Self {
        self.extras.insert(key.to_string(), v);
        self
    }
}

pub fn pooled_err(a: &Estimate, b: &Estimate) -> f64 {
    a.std_err.hypot(b.std_err)
}

/// Relative discrepancy `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// `X_i f` for every horizontal generator.
pub fn horizontal_grad(g: &CarnotGroup, f: &PolyQ) -> Result<Vec<PolyQ>> {
    g.generators().iter().map(|x| x.apply(f)).collect()
}

/// All words `X_{i_1} ⋯ X_{i_k} f` of length `k`, in lexicographic word
/// order.
pub fn word_derivatives(g: &CarnotGroup, f: &PolyQ, k: usize) -> Result<Vec<PolyQ>> {
    let mut level = vec![f.clone()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(level.len() * g.horizontal_dim());
        for p in &level {
            for x in g.generators() {
                next.push(x.apply(p)?);
            }
        }
        level = next;
    }
    Ok(level)
}

/// `|∇^k f|² = Σ_words |X_{i_1} ⋯ X_{i_k} f|²`.
pub fn nabla_k_sq(g: &CarnotGroup, f: &PolyQ, k: usize) -> Result<PolyQ> {
    let mut acc = PolyQ::zero(g.dim());
    for w in word_derivatives(g, f, k)? {
        acc = acc.checked_add(&w.checked_mul(&w)?)?;
    }
    Ok(acc)
}

pub(crate) fn square(p: &PolyQ) -> Result<PolyQ> {
    p.checked_mul(p)
}

pub(crate) fn is_constant(p: &PolyQ) -> bool {
    p.degree().is_none_or(|d| d == 0)
}

pub(crate) fn check_group(g: &CarnotGroup, f: &PolyQ) -> Result<()> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: f.dim(),
        });
    }
    Ok(())
}

/// Compiled polynomial shared across integrand closures.
pub(crate) fn compiled(p: &PolyQ) -> CompiledPoly {
    p.compile()
}

/// Jet at `p`, or `None` on the singular set (treated as a null set by
/// the integrands).
pub(crate) fn jet_at(eval: &crate::jets::PotentialEval, p: &[f64]) -> Option<crate::jets::Jet2> {
    eval.jet(p).ok()
}

/// Heuristic growth check for polynomial potentials before Monte Carlo or
/// grid integration: along fixed directions `U` must increase from radius
/// 10 to 100 and exceed the polynomial weight of degree `deg` carried by
/// the integrands.
pub fn integrability_precheck(eval: &crate::jets::PotentialEval, deg: u32) -> Result<()> {
    use rand_distr::{Distribution, StandardNormal};
    if !matches!(eval.spec(), crate::jets::PotentialSpec::Polynomial { .. }) {
        return Ok(());
    }
    let d = eval.group().dim();
    let mut rng = crate::sampler::chain_rng(0, 0);
    let u0 = eval.value(&vec![0.0; d]);
    let need = (d as f64 + deg as f64 + 2.0) * 100f64.ln();
    for _ in 0..256 {
        let mut th: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = th.iter().map(|v| v * v).sum::<f64>().sqrt();
        th.iter_mut().for_each(|v| *v /= n);
        let at = |r: f64| eval.value(&th.iter().map(|v| v * r).collect::<Vec<_>>());
        let (u1, u2) = (at(10.0), at(100.0));
        if !(u2 > u1 && u2 - u0 > need) {
            return Err(Error::InvalidScenario(format!(
                "e^(-U) times degree-{deg} integrands may not be integrable: U does not grow along direction {th:?}"
            )));
        }
    }
    Ok(())
}
