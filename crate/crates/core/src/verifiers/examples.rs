//! Worked examples: critical points of an oscillating radial potential,
//! the quadric-potential bound and the Rockland quadratic-form terms.

use serde::{Deserialize, Serialize};

use super::fit::{fit_constants, Constraint, FitResult, DEFAULT_LAMBDA};
use super::{check_group, compiled, horizontal_grad, integrability_precheck, ScanReport, ScanRow};
use crate::diffop::rockland_op;
use crate::error::{Error, Result};
use crate::jets::{radial_cosine_profile, PotentialSpec, RadialNorm};
use crate::poly::{CompiledPoly, PolyQ};
use crate::sampler::Expectation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eg2Config {
    /// Shell indices `k`: shells `ω r^κ ∈ [2πk, 2π(k+1)]`.
    pub shells: Vec<u64>,
    /// Gradient threshold for a located point.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Sign-change search resolution per shell.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Polar angle of the located points.
    #[serde(default = "default_angle")]
    pub angle: f64,
}

fn default_delta() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    256
}

fn default_angle() -> f64 {
    0.3
}

/// Locates zeros of `U'(r)` in each shell by sign changes and bisection,
/// then evaluates `|∇U|` and `ΔU` there through the jet layer.
///
/// Columns: `abs_lap, lap, grad_norm, shell`. `holds` requires, in every
/// shell, located points of both Laplacian signs with `|∇U| < δ`, and the
/// smallest `|ΔU|` of each sign to exceed the largest of the previous
/// shell.
pub fn eg2_adams_failure(eval: &crate::jets::PotentialEval, cfg: &Eg2Config) -> Result<ScanReport> {
    let (alpha, eps, omega, kappa) = match *eval.spec() {
        PotentialSpec::RadialCosine {
            alpha,
            epsilon,
            omega,
            kappa,
            norm: RadialNorm::Euclidean,
        } => (alpha, epsilon, omega, kappa),
        _ => {
            return Err(Error::InvalidParameter(
                "eg2 needs a radial_cosine potential with the Euclidean norm".into(),
            ))
        }
    };
    let g = eval.group();
    let d = g.dim();
    if cfg.samples < 4 || cfg.shells.is_empty() {
        return Err(Error::InvalidParameter("eg2 needs shells and >= 4 samples".into()));
    }
    let dphi = |r: f64| radial_cosine_profile(alpha, eps, omega, kappa, r).1;
    let r_of = |theta: f64| (theta / omega).powf(1.0 / kappa);
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    let mut extras = std::collections::BTreeMap::new();
    let mut ok = true;
    let mut prev: Option<(f64, f64)> = None; // largest |ΔU| per sign class
    for &k in &cfg.shells {
        let t0 = 2.0 * std::f64::consts::PI * k as f64;
        let t1 = t0 + 2.0 * std::f64::consts::PI;
        let mut roots = Vec::new();
        let mut last_r = r_of(t0);
        let mut last_v = dphi(last_r);
        for i in 1..=cfg.samples {
            let r = r_of(t0 + (t1 - t0) * i as f64 / cfg.samples as f64);
            let v = dphi(r);
            if last_v == 0.0 {
                roots.push(last_r);
            } else if last_v.signum() != v.signum() && v != 0.0 {
                let (mut a, mut b, mut fa) = (last_r, r, last_v);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    let fm = dphi(m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            last_r = r;
            last_v = v;
        }
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for r in roots {
            let mut p = vec![0.0; d];
            p[0] = r * cfg.angle.cos();
            if d > 1 {
                p[1] = r * cfg.angle.sin();
            }
            let j = eval.jet(&p)?;
            let gn = j.gradsq.sqrt();
            if gn < cfg.delta {
                if j.lap > 0.0 {
                    pos.push(j.lap.abs());
                } else if j.lap < 0.0 {
                    neg.push(j.lap.abs());
                }
            }
            rows.push(ScanRow {
                param: r,
                point: p,
                values: vec![j.lap.abs(), j.lap, gn, k as f64],
                singular: false,
            });
        }
        if pos.is_empty() || neg.is_empty() {
            ok = false;
            notices.push(format!(
                "shell {k}: missing near-critical points of one Laplacian sign (resolution {})",
                cfg.samples
            ));
            prev = None;
            continue;
        }
        let (pmin, pmax) = min_max(&pos);
        let (nmin, nmax) = min_max(&neg);
        extras.insert(format!("shell_{k}_pos_min"), pmin);
        extras.insert(format!("shell_{k}_neg_min"), nmin);
        if let Some((pp, pn)) = prev {
            if !(pmin > pp && nmin > pn) {
                ok = false;
                notices.push(format!("shell {k}: |ΔU| does not grow over the previous shell"));
            }
        }
        prev = Some((pmax, nmax));
    }
    let mut rep = ScanReport::new(
        "eg2_adams_failure",
        &["abs_lap", "lap", "grad_norm", "shell"],
        rows,
        notices,
    );
    rep.extras = extras;
    rep.holds = Some(ok);
    Ok(rep)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eg3Config {
    pub a: f64,
    /// Hardy constant `C`.
    pub c: f64,
    /// Dimension parameter `ñ` of the Hardy constant `C/(ñ−2)²`; required.
    pub n_tilde: f64,
    pub d: f64,
}

/// Both sides of
/// `μ(f² (A/4) r^{2(n−1)} (1+z²)^{1/2}) ≤ (4A²/(A−1))·C/(ñ−2)²·μ|∇f|² + Dμf²`
/// on `ℍ¹` with `U = r^{2n}/(2n)`, `r² = x² + y² + 2z²`.
///
/// Constants `K` (the gradient coefficient) and `D` echo the
/// configuration; extras carry the gate `¼ − 2CA²/(ñ−2)²` (must exceed
/// 1/8) and `D_min`, the least `D` making every member feasible.
pub fn eg3_star_bound(ex: &Expectation, family: &[PolyQ], cfg: &Eg3Config) -> Result<FitResult> {
    let eval = ex.eval();
    let g = eval.group();
    let n = match *eval.spec() {
        PotentialSpec::QuadricPower { n } => n,
        _ => return Err(Error::InvalidParameter("eg3 needs a quadric_power potential".into())),
    };
    if g.heisenberg_n() != Some(1) {
        return Err(Error::InvalidParameter("eg3 is stated on the first Heisenberg group".into()));
    }
    if !(cfg.a > 1.0) || !(cfg.c > 0.0) || cfg.n_tilde == 2.0 || !(cfg.d >= 0.0) {
        return Err(Error::InvalidParameter(
            "eg3 needs A > 1, C > 0, n_tilde != 2 and D >= 0".into(),
        ));
    }
    let h = cfg.c / (cfg.n_tilde - 2.0).powi(2);
    let gate = 0.25 - 2.0 * h * cfg.a * cfg.a;
    if !(gate > 0.125) {
        return Err(Error::ConditionFailed(format!(
            "gate 1/4 - 2CA^2/(n_tilde-2)^2 = {gate} does not exceed 1/8"
        )));
    }
    let kcoef = 4.0 * cfg.a * cfg.a / (cfg.a - 1.0) * h;
    let mut cons = Vec::new();
    let mut d_min = 0.0f64;
    for f in family {
        check_group(g, f)?;
        integrability_precheck(eval, 2 * f.degree().unwrap_or(0) + 2)?;
        let fc = compiled(f);
        let grad: Vec<CompiledPoly> = horizontal_grad(g, f)?.iter().map(compiled).collect();
        let a = cfg.a;
        let lhs = |p: &[f64]| {
            let r2 = p[0] * p[0] + p[1] * p[1] + 2.0 * p[2] * p[2];
            fc.eval(p).powi(2) * a / 4.0 * r2.powf(n - 1.0) * (1.0 + p[2] * p[2]).sqrt()
        };
        let dir = |p: &[f64]| grad.iter().map(|c| c.eval(p).powi(2)).sum::<f64>();
        let l2 = |p: &[f64]| fc.eval(p).powi(2);
        let e = ex.integrate(&[&lhs, &dir, &l2])?;
        if e[2].mean > 0.0 {
            d_min = d_min.max((e[0].mean - kcoef * e[1].mean) / e[2].mean);
        }
        cons.push(Constraint {
            label: g.format_poly(f),
            lhs: e[0].mean,
            coeffs: vec![e[1].mean, e[2].mean],
        });
    }
    // Evaluate margins at the configured constants rather than fitting.
    let mut members = Vec::new();
    let mut margin = f64::INFINITY;
    for k in cons {
        let mg = kcoef * k.coeffs[0] + cfg.d * k.coeffs[1] - k.lhs;
        margin = margin.min(mg);
        members.push(super::MemberFit {
            label: k.label,
            lhs: k.lhs,
            coeffs: k.coeffs,
            margin: mg,
            skipped: false,
        });
    }
    if members.is_empty() {
        margin = 0.0;
    }
    let mut constants = std::collections::BTreeMap::new();
    constants.insert("K".to_string(), kcoef);
    constants.insert("D".to_string(), cfg.d);
    let mut extras = std::collections::BTreeMap::new();
    extras.insert("gate".to_string(), gate);
    extras.insert("D_min".to_string(), d_min);
    Ok(FitResult {
        family: "eg3_star".into(),
        constants,
        margin,
        members,
        extras,
        notices: ex.warnings(),
    })
}

/// For each `m < 2n`, the minimal `(b_m, c_m)` with
/// `Σ_j μ(|X_j^m f|² |X_j^{2n−m}U|²) ≤ b_m μ|Rf|² + c_m μf²` over the
/// family, `R = (−1)^n Σ_j X_j^{2n}`. Needs a polynomial potential.
pub fn rockland_terms(ex: &Expectation, family: &[PolyQ], n: u32, lambda: Option<f64>) -> Result<FitResult> {
    let eval = ex.eval();
    let g = eval.group();
    let u = eval.spec().as_polynomial(g)?.ok_or_else(|| {
        Error::InvalidParameter("rockland terms need a polynomial potential".into())
    })?;
    let lambda = lambda.unwrap_or(DEFAULT_LAMBDA);
    let rock = rockland_op(g, n)?;
    let k = g.horizontal_dim();
    // powers[j][s] = X_j^s U and X_j^s f are built by repeated application.
    let pow_apply = |j: usize, s: u32, p: &PolyQ| -> Result<PolyQ> {
        let x = g.generator(j)?;
        let mut acc = p.clone();
        for _ in 0..s {
            acc = x.apply(&acc)?;
        }
        Ok(acc)
    };
    let mut constants = std::collections::BTreeMap::new();
    let mut members = Vec::new();
    let mut notices = ex.warnings();
    let mut margin = f64::INFINITY;
    let mut per_m: Vec<Vec<Constraint>> = vec![Vec::new(); 2 * n as usize];
    for f in family {
        check_group(g, f)?;
        let rf = rock.apply(f)?;
        let mut lhs_polys: Vec<PolyQ> = Vec::new();
        for m in 0..2 * n {
            let mut acc = PolyQ::zero(g.dim());
            for j in 0..k {
                let a = pow_apply(j, m, f)?;
                let b = pow_apply(j, 2 * n - m, &u)?;
                let t = a.checked_mul(&b)?;
                acc = acc.checked_add(&t.checked_mul(&t)?)?;
            }
            lhs_polys.push(acc);
        }
        let deg = lhs_polys.iter().filter_map(|p| p.degree()).max().unwrap_or(0);
        integrability_precheck(eval, deg.max(2 * rf.degree().unwrap_or(0)))?;
        let rc = compiled(&rf);
        let fc = compiled(f);
        let lc: Vec<CompiledPoly> = lhs_polys.iter().map(compiled).collect();
        let mut obs: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync + '_>> = vec![
            Box::new(|p: &[f64]| rc.eval(p).powi(2)),
            Box::new(|p: &[f64]| fc.eval(p).powi(2)),
        ];
        for c in &lc {
            obs.push(Box::new(move |p: &[f64]| c.eval(p)));
        }
        let refs: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = obs.iter().map(|b| b.as_ref()).collect();
        let e = ex.integrate(&refs)?;
        for m in 0..2 * n as usize {
            per_m[m].push(Constraint {
                label: format!("{} [m={m}]", g.format_poly(f)),
                lhs: e[2 + m].mean,
                coeffs: vec![e[0].mean, e[1].mean],
            });
        }
    }
    for (m, cons) in per_m.into_iter().enumerate() {
        let (bn, cn) = (format!("b_{m}"), format!("c_{m}"));
        let fit = fit_constants("rockland", &[bn.as_str(), cn.as_str()], cons, lambda)?;
        constants.insert(bn.clone(), fit.constant(&bn).unwrap_or(0.0));
        constants.insert(cn.clone(), fit.constant(&cn).unwrap_or(0.0));
        margin = margin.min(fit.margin);
        members.extend(fit.members);
        notices.extend(fit.notices);
    }
    if members.is_empty() {
        margin = 0.0;
    }
    let mut extras = std::collections::BTreeMap::new();
    extras.insert("lambda".to_string(), lambda);
    extras.insert("order".to_string(), n as f64);
    Ok(FitResult {
        family: "rockland_terms".into(),
        constants,
        margin,
        members,
        extras,
        notices,
    })
}
