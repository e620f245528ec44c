//! U-bound defects, U-bound constant fits and the inductive moment-bound
//! pipeline.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_constants, Constraint, FitResult};
use super::{
    check_group, compiled, horizontal_grad, integrability_precheck, jet_at, nabla_k_sq,
    rel_gap, DefectReport,
};
use crate::error::{Error, Result};
use crate::group::Point;
use crate::jets::{fd_jet_fn, PotentialEval};
use crate::poly::{CompiledPoly, PolyQ};
use crate::sampler::{chain_rng, Expectation};

/// `μ(f²𝒱) ≤ μ|∇f|²` together with the independently integrated defect
/// `∫|∇(f e^{−U/2})|² dλ / Z = μ|∇f − ½ f ∇U|²`.
///
/// `tol` is the relative tolerance of the three-way identity under grid
/// quadrature; under Monte Carlo the identity must hold within three
/// pooled standard errors.
pub fn ubound_defect(ex: &Expectation, f: &PolyQ, tol: f64) -> Result<DefectReport> {
    let eval = ex.eval();
    let g = eval.group();
    check_group(g, f)?;
    integrability_precheck(eval, 2 * f.degree().unwrap_or(0) + 4)?;
    let fc = compiled(f);
    let grad: Vec<CompiledPoly> = horizontal_grad(g, f)?.iter().map(compiled).collect();
    let lhs_f = |p: &[f64]| match jet_at(eval, p) {
        Some(j) => fc.eval(p).powi(2) * j.v_potential(),
        None => 0.0,
    };
    let rhs_f = |p: &[f64]| grad.iter().map(|c| c.eval(p).powi(2)).sum::<f64>();
    let def_f = |p: &[f64]| match jet_at(eval, p) {
        Some(j) => {
            let fv = fc.eval(p);
            grad.iter()
                .zip(&j.grad_h)
                .map(|(c, du)| (c.eval(p) - 0.5 * fv * du).powi(2))
                .sum::<f64>()
        }
        None => 0.0,
    };
    let est = ex.integrate(&[&lhs_f, &rhs_f, &def_f])?;
    let (lhs, rhs, direct) = (est[0], est[1], est[2]);
    let mut r = DefectReport::new("ubound_defect", lhs, rhs);
    let gap = r.defect - direct.mean;
    let scale = lhs.mean.abs().max(rhs.mean.abs()).max(direct.mean.abs());
    let rel = if scale == 0.0 { 0.0 } else { gap.abs() / scale };
    let holds = if ex.is_grid() {
        rel <= tol
    } else {
        let sigma = (lhs.std_err.powi(2) + rhs.std_err.powi(2) + direct.std_err.powi(2)).sqrt();
        gap.abs() <= 3.0 * sigma
    };
    let drg = rel_gap(r.defect, direct.mean);
    r = r
        .with("defect_direct", direct.mean)
        .with("defect_direct_err", direct.std_err)
        .with("identity_gap", gap)
        .with("identity_gap_rel", rel)
        .with("defect_rel_gap", drg);
    r.holds = Some(holds);
    r.notices.extend(ex.warnings());
    Ok(r)
}

/// Positive weight built from `𝒱` (or from a directional `𝒱_j`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum WeightChoice {
    /// `⟨𝒱⟩ = (𝒱² + 1)^{1/2}`
    Bracket,
    /// `𝒱 + c`
    Shift { c: f64 },
    /// Signed `𝒱`.
    Raw,
}

impl WeightChoice {
    /// `(𝒲, d𝒲/d𝒱)`
    pub fn apply(&self, v: f64) -> (f64, f64) {
        match self {
            WeightChoice::Bracket => {
                let w = (v * v + 1.0).sqrt();
                (w, v / w)
            }
            WeightChoice::Shift { c } => (v + c, 1.0),
            WeightChoice::Raw => (v, 1.0),
        }
    }
}

/// `𝒱_j = ¼|X_jU|² − ½X_j²U`, or the full `𝒱` when `direction` is `None`.
fn v_dir(j: &crate::jets::Jet2, direction: Option<usize>) -> f64 {
    match direction {
        Some(k) => 0.25 * j.grad_h[k].powi(2) - 0.5 * j.hess_h[k][k],
        None => j.v_potential(),
    }
}

/// Minimal `(C, D)` with `μ(f²𝒲) ≤ C μ|X_jf|² + D μf²` over the family
/// (`|∇f|²` when `direction` is `None`), minimizing `C + λD`.
pub fn fit_ubound_constants(
    ex: &Expectation,
    family: &[PolyQ],
    direction: Option<usize>,
    weight: WeightChoice,
    lambda: f64,
) -> Result<FitResult> {
    let eval = ex.eval();
    let g = eval.group();
    if let Some(k) = direction {
        if k >= g.horizontal_dim() {
            return Err(Error::IndexOutOfRange {
                index: k,
                dim: g.horizontal_dim(),
            });
        }
    }
    let mut members = Vec::new();
    for f in family {
        check_group(g, f)?;
        integrability_precheck(eval, 2 * f.degree().unwrap_or(0) + 4)?;
        let fc = compiled(f);
        let grad: Vec<CompiledPoly> = horizontal_grad(g, f)?.iter().map(compiled).collect();
        let lhs_f = |p: &[f64]| match jet_at(eval, p) {
            Some(j) => fc.eval(p).powi(2) * weight.apply(v_dir(&j, direction)).0,
            None => 0.0,
        };
        let a_f = |p: &[f64]| match direction {
            Some(k) => grad[k].eval(p).powi(2),
            None => grad.iter().map(|c| c.eval(p).powi(2)).sum(),
        };
        let b_f = |p: &[f64]| fc.eval(p).powi(2);
        let e = ex.integrate(&[&lhs_f, &a_f, &b_f])?;
        members.push(Constraint {
            label: g.format_poly(f),
            lhs: e[0].mean,
            coeffs: vec![e[1].mean, e[2].mean],
        });
    }
    let mut fit = fit_constants("ubound", &["C", "D"], members, lambda)?;
    fit.notices.extend(ex.warnings());
    Ok(fit)
}

/// Parameters of the inductive moment-bound pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InductiveConfig {
    /// Target power `n`.
    pub n: u32,
    pub epsilon: f64,
    /// Inner radius `R`; the scan uses norm shells at or above it.
    pub radius: f64,
    /// Norm levels of the scan shells.
    pub shells: Vec<f64>,
    /// Points per shell.
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_weight")]
    pub weight: WeightChoice,
    /// Largest acceptable `E_ε`.
    #[serde(default = "default_cap")]
    pub cap: f64,
}

fn default_directions() -> usize {
    64
}

fn default_weight() -> WeightChoice {
    WeightChoice::Bracket
}

fn default_cap() -> f64 {
    1e12
}

/// Deterministic scan points at the given norm levels (Kaplan norm on
/// Heisenberg groups, Euclidean norm otherwise).
pub fn shell_points(eval: &PotentialEval, shells: &[f64], directions: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let g = eval.group();
    let d = g.dim();
    let mut rng = chain_rng(0x5ca1, 0);
    let dirs: Vec<Vec<f64>> = (0..directions)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut out = Vec::with_capacity(shells.len() * directions);
    for &r in shells {
        for th in &dirs {
            let p = if g.heisenberg_n().is_some() {
                let n0 = g.kaplan_norm(th)?;
                g.dilate(r / n0, &Point::new(th.clone())?)?.coords().to_vec()
            } else {
                let n0 = th.iter().map(|v| v * v).sum::<f64>().sqrt();
                th.iter().map(|v| v * r / n0).collect()
            };
            out.push((r, p));
        }
    }
    Ok(out)
}

/// Scan of `(1/𝒲)|∇𝒲|² − ε𝒲²` outside `B_R` followed by empirical
/// `a_m` with `μ(𝒲^m f²) ≤ a_m μ(f² + Σ_{k≤m}|∇^k f|²)` for `m ≤ n`.
///
/// Constants: `E_eps` and `a_1 … a_n`; extras carry `epsilon` and the gate
/// value `ε·a_1·n²/2`.
pub fn inductive_bound_pipeline(
    ex: &Expectation,
    cfg: &InductiveConfig,
    family: &[PolyQ],
) -> Result<FitResult> {
    let eval = ex.eval();
    let g = eval.group();
    if cfg.n == 0 || !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidParameter(
            "inductive pipeline needs n >= 1 and epsilon > 0".into(),
        ));
    }
    let shells: Vec<f64> = cfg.shells.iter().copied().filter(|&r| r >= cfg.radius).collect();
    if shells.is_empty() {
        return Err(Error::InvalidParameter(
            "no scan shell lies outside the ball".into(),
        ));
    }

    // Exact derivatives of 𝒱 for polynomial potentials, differences otherwise.
    let vpoly = eval.spec().as_polynomial(g)?.map(|u| crate::diffop::v_potential_poly(g, &u)).transpose()?;
    let vgrad: Option<(CompiledPoly, Vec<CompiledPoly>)> = match &vpoly {
        Some(v) => Some((compiled(v), horizontal_grad(g, v)?.iter().map(compiled).collect())),
        None => None,
    };
    let v_and_grad = |p: &[f64]| -> Result<(f64, f64)> {
        match &vgrad {
            Some((v, gr)) => Ok((v.eval(p), gr.iter().map(|c| c.eval(p).powi(2)).sum())),
            None => {
                let f = |q: &[f64]| eval.v_potential(q).unwrap_or(f64::NAN);
                let scale = 1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let j = fd_jet_fn(g, &f, p, 1e-5 * scale)?;
                Ok((f(p), j.gradsq))
            }
        }
    };

    let pts = shell_points(eval, &shells, cfg.directions)?;
    let evals: Vec<Result<(f64, Vec<f64>, f64)>> = pts
        .into_par_iter()
        .map(|(_, p)| {
            let (v, gv2) = v_and_grad(&p)?;
            let (w, dw) = cfg.weight.apply(v);
            if !(w > 0.0) {
                return Err(Error::ConditionFailed(format!(
                    "weight is not positive ({w}) at {p:?}"
                )));
            }
            let q = dw * dw * gv2 / w - cfg.epsilon * w * w;
            Ok((q, p, w))
        })
        .collect();
    let mut e_eps = 0.0f64;
    let mut worst: Option<Vec<f64>> = None;
    for r in evals {
        let (q, p, _) = r?;
        if !q.is_finite() {
            return Err(Error::ConditionFailed(format!(
                "scan quantity is not finite at {p:?}"
            )));
        }
        if q > e_eps {
            e_eps = q;
            worst = Some(p);
        }
    }
    if e_eps > cfg.cap {
        return Err(Error::ConditionFailed(format!(
            "required E_eps = {e_eps:e} exceeds the cap {:e} at {:?}",
            cfg.cap,
            worst.unwrap_or_default()
        )));
    }

    // Empirical a_m.
    let mut constants = std::collections::BTreeMap::new();
    constants.insert("E_eps".to_string(), e_eps);
    let mut members = Vec::new();
    let mut notices = ex.warnings();
    let mut margin = f64::INFINITY;
    let weight = cfg.weight;
    let wval = |p: &[f64]| -> f64 {
        match &vgrad {
            Some((v, _)) => weight.apply(v.eval(p)).0,
            None => match jet_at(eval, p) {
                Some(j) => weight.apply(j.v_potential()).0,
                None => 0.0,
            },
        }
    };
    let mut per_m: Vec<Vec<Constraint>> = vec![Vec::new(); cfg.n as usize];
    for f in family {
        check_group(g, f)?;
        integrability_precheck(eval, 2 * f.degree().unwrap_or(0) + 4 * cfg.n)?;
        let fc = compiled(f);
        let mut sq = Vec::new();
        for k in 1..=cfg.n as usize {
            sq.push(compiled(&nabla_k_sq(g, f, k)?));
        }
        for m in 1..=cfg.n as usize {
            let lhs_f = |p: &[f64]| wval(p).powi(m as i32) * fc.eval(p).powi(2);
            let rhs_f = |p: &[f64]| fc.eval(p).powi(2) + sq[..m].iter().map(|c| c.eval(p)).sum::<f64>();
            let e = ex.integrate(&[&lhs_f, &rhs_f])?;
            per_m[m - 1].push(Constraint {
                label: format!("{} [m={m}]", g.format_poly(f)),
                lhs: e[0].mean,
                coeffs: vec![e[1].mean],
            });
        }
    }
    for (i, cons) in per_m.into_iter().enumerate() {
        let name = format!("a_{}", i + 1);
        let fit = fit_constants("inductive", &[name.as_str()], cons, 1.0)?;
        constants.insert(name.clone(), fit.constant(&name).unwrap_or(0.0));
        margin = margin.min(fit.margin);
        members.extend(fit.members.into_iter());
        notices.extend(fit.notices);
    }
    if members.is_empty() {
        margin = 0.0;
    }
    let a1 = constants.get("a_1").copied().unwrap_or(0.0);
    let mut extras = std::collections::BTreeMap::new();
    extras.insert("epsilon".to_string(), cfg.epsilon);
    extras.insert("radius".to_string(), cfg.radius);
    extras.insert(
        "gate".to_string(),
        cfg.epsilon * a1 * f64::from(cfg.n).powi(2) / 2.0,
    );
    Ok(FitResult {
        family: "inductive".into(),
        constants,
        margin,
        members,
        extras,
        notices,
    })
}
