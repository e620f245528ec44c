//! Minimal feasible constants for families of inequalities
//! `lhs_i ≤ C·a_i + D·b_i`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default weight of the second constant in the objective `C + λD`.
pub const DEFAULT_LAMBDA: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberFit {
    pub label: String,
    pub lhs: f64,
    /// Coefficients multiplying the fitted constants.
    pub coeffs: Vec<f64>,
    /// `Σ c_k·coeffs_k − lhs` at the fitted constants.
    pub margin: f64,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub family: String,
    pub constants: BTreeMap<String, f64>,
    /// Minimum member margin.
    pub margin: f64,
    pub members: Vec<MemberFit>,
    pub extras: BTreeMap<String, f64>,
    pub notices: Vec<String>,
}

impl FitResult {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

/// One family member: `lhs ≤ Σ_k c_k·coeffs[k]`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub label: String,
    pub lhs: f64,
    pub coeffs: Vec<f64>,
}

fn feasible(c: &[f64], k: &Constraint) -> bool {
    let rhs: f64 = c.iter().zip(&k.coeffs).map(|(a, b)| a * b).sum();
    let scale = k.lhs.abs() + c.iter().zip(&k.coeffs).map(|(a, b)| (a * b).abs()).sum::<f64>();
    rhs >= k.lhs - 1e-12 * scale
}

/// Minimizes `c_0 + λ c_1` (or `c_0` alone for one constant) over
/// nonnegative constants satisfying every member; two-constant problems are
/// solved by enumerating the vertices of the feasible polygon.
pub fn fit_constants(
    family: &str,
    names: &[&str],
    members: Vec<Constraint>,
    lambda: f64,
) -> Result<FitResult> {
    if names.is_empty() || names.len() > 2 {
        return Err(Error::InvalidParameter(
            "constant fitting supports one or two constants".into(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let k = names.len();
    let mut notices = Vec::new();
    let mut active = Vec::new();
    let mut skipped = vec![false; members.len()];
    for (i, m) in members.iter().enumerate() {
        if m.coeffs.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: m.coeffs.len(),
            });
        }
        if !m.lhs.is_finite() || m.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::ConditionFailed(format!(
                "member `{}` has non-finite data",
                m.label
            )));
        }
        if m.coeffs.iter().all(|&c| c <= 0.0) {
            if m.lhs > 0.0 {
                return Err(Error::ConditionFailed(format!(
                    "member `{}` has positive left side {} but no controlling term",
                    m.label, m.lhs
                )));
            }
            skipped[i] = true;
            notices.push(format!("member `{}` is degenerate and was skipped", m.label));
            continue;
        }
        active.push(m.clone());
    }

    let best: Vec<f64> = if k == 1 {
        let c = active
            .iter()
            .filter(|m| m.lhs > 0.0)
            .map(|m| m.lhs / m.coeffs[0])
            .fold(0.0, f64::max);
        vec![c]
    } else {
        // Candidate vertices: pairwise intersections of the boundary lines,
        // including the axes.
        let mut lines: Vec<(f64, f64, f64)> = active
            .iter()
            .map(|m| (m.coeffs[0], m.coeffs[1], m.lhs))
            .collect();
        lines.push((1.0, 0.0, 0.0));
        lines.push((0.0, 1.0, 0.0));
        let mut best: Option<(f64, [f64; 2])> = None;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (a1, b1, l1) = lines[i];
                let (a2, b2, l2) = lines[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-300 {
                    continue;
                }
                let c = (l1 * b2 - l2 * b1) / det;
                let d = (a1 * l2 - a2 * l1) / det;
                if c < 0.0 || d < 0.0 || !c.is_finite() || !d.is_finite() {
                    continue;
                }
                if !active.iter().all(|m| feasible(&[c, d], m)) {
                    continue;
                }
                let obj = c + lambda * d;
                if best.is_none_or(|(o, _)| obj < o) {
                    best = Some((obj, [c, d]));
                }
            }
        }
        match best {
            Some((_, v)) => v.to_vec(),
            None => {
                return Err(Error::ConditionFailed(format!(
                    "no feasible constants for family `{family}`"
                )))
            }
        }
    };

    let mut fitted = Vec::with_capacity(members.len());
    let mut margin = f64::INFINITY;
    for (i, m) in members.into_iter().enumerate() {
        let rhs: f64 = best.iter().zip(&m.coeffs).map(|(a, b)| a * b).sum();
        let mg = rhs - m.lhs;
        margin = margin.min(mg);
        fitted.push(MemberFit {
            label: m.label,
            lhs: m.lhs,
            coeffs: m.coeffs,
            margin: mg,
            skipped: skipped[i],
        });
    }
    if fitted.is_empty() {
        margin = 0.0;
    }
    let mut extras = BTreeMap::new();
    if k == 2 {
        extras.insert("lambda".to_string(), lambda);
    }
    Ok(FitResult {
        family: family.to_string(),
        constants: names
            .iter()
            .zip(&best)
            // `+ 0.0` turns a vertex at −0 into +0
            .map(|(n, v)| (n.to_string(), *v + 0.0))
            .collect(),
        margin,
        members: fitted,
        extras,
        notices,
    })
}
