//! Hardy-type bounds for `dμ = e^{−U}dλ/Z` and the improved radial weight.

use serde::{Deserialize, Serialize};

use super::fit::{fit_constants, Constraint, FitResult, DEFAULT_LAMBDA};
use super::ubound::shell_points;
use super::{check_group, compiled, horizontal_grad, integrability_precheck, jet_at, DefectReport};
use crate::error::{Error, Result};
use crate::jets::{radial_cosine_profile, PotentialEval, PotentialSpec, RadialNorm};
use crate::poly::{CompiledPoly, PolyQ};
use crate::sampler::{Estimate, Expectation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyConfig {
    /// Hardy constant `C` of `∫f²/|x|² dλ ≤ C∫|∇f|² dλ`. Defaults to
    /// `4/(n₁−2)²` when the horizontal dimension `n₁` exceeds 2.
    #[serde(default)]
    pub c: Option<f64>,
    /// Shift `D ≥ 0` making the improved weight nonnegative; computed
    /// from the radial profile when absent.
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl Default for HardyConfig {
    fn default() -> Self {
        HardyConfig {
            c: None,
            d: None,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Per-member Hardy reports and the `(C̃, D̃)` fit of the improved bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardyReport {
    pub members: Vec<DefectReport>,
    pub improved_fit: Option<FitResult>,
    pub notices: Vec<String>,
}

/// Radial profile `(U'(N), U''(N))` of a potential that depends on the
/// point only through its norm; `None` for other families.
pub fn radial_profile(spec: &PotentialSpec, heisenberg: bool) -> Option<Box<dyn Fn(f64) -> (f64, f64) + Sync>> {
    match *spec {
        PotentialSpec::KaplanPower { kappa } if heisenberg => Some(Box::new(move |r: f64| {
            (kappa * r.powf(kappa - 1.0), kappa * (kappa - 1.0) * r.powf(kappa - 2.0))
        })),
        PotentialSpec::RadialCosine {
            alpha,
            epsilon,
            omega,
            kappa,
            norm,
        } if (norm == RadialNorm::Kaplan) == heisenberg => Some(Box::new(move |r: f64| {
            let (_, d1, d2) = radial_cosine_profile(alpha, epsilon, omega, kappa, r);
            (d1, d2)
        })),
        _ => None,
    }
}

fn radius(eval: &PotentialEval, p: &[f64]) -> f64 {
    let g = eval.group();
    if g.heisenberg_n().is_some() {
        g.kaplan_norm(p).unwrap_or(f64::NAN)
    } else {
        p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `W − D = ¼U'² − ½U'' − ((Q−1)/2)·U'/N` from the radial profile.
fn w_core(prof: &(dyn Fn(f64) -> (f64, f64) + Sync), q_minus_1: f64, r: f64) -> f64 {
    let (d1, d2) = prof(r);
    0.25 * d1 * d1 - 0.5 * d2 - 0.5 * q_minus_1 * d1 / r
}

/// Smallest `D ≥ 0` with `W ≥ 0` on a logarithmic radius grid over
/// `[10⁻³, 10³]`.
pub fn minimal_shift(eval: &PotentialEval) -> Result<f64> {
    let g = eval.group();
    let prof = radial_profile(eval.spec(), g.heisenberg_n().is_some()).ok_or_else(|| {
        Error::InvalidParameter("improved Hardy weight needs a radial potential".into())
    })?;
    let qm1 = g.hardy_dimension_constant() as f64;
    let mut worst = 0.0f64;
    for i in 0..=6000 {
        let r = 10f64.powf(-3.0 + i as f64 * 1e-3);
        worst = worst.min(w_core(prof.as_ref(), qm1, r));
    }
    Ok(-worst)
}

/// Improved weight `W^{1/2}/N` at `p` via the radial profile.
pub fn improved_weight(eval: &PotentialEval, d: f64, p: &[f64]) -> Result<f64> {
    let g = eval.group();
    let prof = radial_profile(eval.spec(), g.heisenberg_n().is_some()).ok_or_else(|| {
        Error::InvalidParameter("improved Hardy weight needs a radial potential".into())
    })?;
    let r = radius(eval, p);
    let w = w_core(prof.as_ref(), g.hardy_dimension_constant() as f64, r) + d;
    Ok(w.max(0.0).sqrt() / r)
}

/// Least-squares slope of `log(mean shell weight)` against `log N` over
/// the given shells.
pub fn improved_weight_slope(eval: &PotentialEval, shells: &[f64], directions: usize) -> Result<f64> {
    if shells.len() < 2 {
        return Err(Error::InvalidParameter("slope needs at least two shells".into()));
    }
    let d = minimal_shift(eval)?;
    let pts = shell_points(eval, shells, directions)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &r) in shells.iter().enumerate() {
        let mut acc = 0.0;
        for (_, p) in &pts[k * directions..(k + 1) * directions] {
            acc += improved_weight(eval, d, p)?;
        }
        xs.push(r.ln());
        ys.push((acc / directions as f64).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Hardy checks over a family: per member `μ(f²/|x|²)` against
/// `2Cμ|∇f|² + (C/2)μ(f²|∇U|²)`, then the minimal `(C̃, D̃)` with
/// `μ(f² W^{1/2}/N) ≤ C̃μ|∇f|² + D̃μf²` for radial potentials.
///
/// Members not vanishing on `{x = 0}` are rejected (the weight `1/|x|²`
/// is then not integrable); points with `x = 0` are a null set and
/// contribute nothing.
pub fn hardy_check(ex: &Expectation, family: &[PolyQ], cfg: &HardyConfig) -> Result<HardyReport> {
    let eval = ex.eval();
    let g = eval.group();
    let n1 = g.horizontal_dim();
    let c = match cfg.c {
        Some(c) => c,
        None if n1 > 2 => 4.0 / ((n1 - 2) as f64).powi(2),
        None => {
            return Err(Error::InvalidParameter(format!(
                "Hardy constant must be given for horizontal dimension {n1}"
            )))
        }
    };
    let radial = radial_profile(eval.spec(), g.heisenberg_n().is_some()).is_some();
    let d_shift = match (cfg.d, radial) {
        (Some(d), _) => Some(d),
        (None, true) => Some(minimal_shift(eval)?),
        (None, false) => None,
    };
    let mut notices = ex.warnings();
    if !radial {
        notices.push("potential is not radial; improved weight skipped".into());
    }
    let mut members = Vec::new();
    let mut fit_members = Vec::new();
    let zero_h: Vec<PolyQ> = (0..g.dim())
        .map(|i| {
            if i < n1 {
                Ok(PolyQ::zero(g.dim()))
            } else {
                PolyQ::var(g.dim(), i)
            }
        })
        .collect::<Result<_>>()?;
    for f in family {
        check_group(g, f)?;
        let label = g.format_poly(f);
        if !f.substitute(&zero_h)?.is_zero() {
            notices.push(format!(
                "member `{label}` does not vanish on {{x = 0}}; 1/|x|^2 weight not integrable, rejected"
            ));
            continue;
        }
        integrability_precheck(eval, 2 * f.degree().unwrap_or(0) + 4)?;
        let fc = compiled(f);
        let grad: Vec<CompiledPoly> = horizontal_grad(g, f)?.iter().map(compiled).collect();
        let hx = |p: &[f64]| {
            let x2: f64 = p[..n1].iter().map(|v| v * v).sum();
            if x2 == 0.0 {
                0.0
            } else {
                fc.eval(p).powi(2) / x2
            }
        };
        let dir = |p: &[f64]| grad.iter().map(|c| c.eval(p).powi(2)).sum::<f64>();
        let gu = |p: &[f64]| match jet_at(eval, p) {
            Some(j) => fc.eval(p).powi(2) * j.gradsq,
            None => 0.0,
        };
        let l2 = |p: &[f64]| fc.eval(p).powi(2);
        let ds = d_shift.unwrap_or(0.0);
        let imp = |p: &[f64]| {
            let r = radius(eval, p);
            if !(r > 0.0) || !radial {
                0.0
            } else {
                fc.eval(p).powi(2) * improved_weight(eval, ds, p).unwrap_or(0.0)
            }
        };
        let e = ex.integrate(&[&hx, &dir, &gu, &l2, &imp])?;
        let rhs = Estimate {
            mean: 2.0 * c * e[1].mean + 0.5 * c * e[2].mean,
            std_err: (2.0 * c * e[1].std_err).hypot(0.5 * c * e[2].std_err),
            ess: e[1].ess.min(e[2].ess),
        };
        let mut r = DefectReport::new(&format!("hardy[{label}]"), e[0], rhs)
            .with("C", c)
            .with("dirichlet", e[1].mean)
            .with("grad_u_weighted", e[2].mean)
            .with("l2", e[3].mean);
        if radial {
            r = r.with("improved_lhs", e[4].mean);
            fit_members.push(Constraint {
                label: label.clone(),
                lhs: e[4].mean,
                coeffs: vec![e[1].mean, e[3].mean],
            });
        }
        r.holds = Some(e[0].mean <= rhs.mean + 3.0 * r.defect_err);
        members.push(r);
    }
    let improved_fit = if radial {
        let mut fit = fit_constants("hardy_improved", &["C_tilde", "D_tilde"], fit_members, cfg.lambda)?;
        fit.extras.insert("D_shift".into(), d_shift.unwrap_or(0.0));
        Some(fit)
    } else {
        None
    };
    Ok(HardyReport {
        members,
        improved_fit,
        notices,
    })
}
