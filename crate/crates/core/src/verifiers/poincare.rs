//! Poincaré constants, statistical polynomials and the higher-order
//! Poincaré chain.

use serde::{Deserialize, Serialize};

use super::fit::{fit_constants, Constraint, FitResult};
use super::{
    check_group, compiled, horizontal_grad, integrability_precheck, is_constant, nabla_k_sq,
    pooled_err, DefectReport,
};
use crate::diffop::nabla_multi;
use crate::error::{Error, Result};
use crate::group::CarnotGroup;
use crate::poly::{rat_from_f64, CompiledPoly, MultiIndex, PolyQ, Rational};
use crate::sampler::{Estimate, Expectation};

/// `(Var_μ f, μ|∇f|²)` on a shared backend.
fn variance_and_dirichlet(ex: &Expectation, f: &PolyQ) -> Result<(Estimate, Estimate)> {
    let g = ex.eval().group();
    let fc = compiled(f);
    let grad: Vec<CompiledPoly> = horizontal_grad(g, f)?.iter().map(compiled).collect();
    let mean = ex.integrate_one(&|p: &[f64]| fc.eval(p))?.mean;
    let var_f = |p: &[f64]| (fc.eval(p) - mean).powi(2);
    let dir_f = |p: &[f64]| grad.iter().map(|c| c.eval(p).powi(2)).sum::<f64>();
    let e = ex.integrate(&[&var_f, &dir_f])?;
    Ok((e[0], e[1]))
}

/// Lower bound `C = max_f Var(f) / μ|∇f|²` over the family.
pub fn poincare_estimate(ex: &Expectation, family: &[PolyQ]) -> Result<FitResult> {
    let g = ex.eval().group();
    let mut members = Vec::new();
    let mut notices = ex.warnings();
    for f in family {
        check_group(g, f)?;
        let label = g.format_poly(f);
        if is_constant(f) {
            notices.push(format!("constant member `{label}` skipped"));
            continue;
        }
        integrability_precheck(ex.eval(), 2 * f.degree().unwrap_or(0))?;
        let (var, dir) = variance_and_dirichlet(ex, f)?;
        members.push(Constraint {
            label,
            lhs: var.mean,
            coeffs: vec![dir.mean],
        });
    }
    let mut fit = fit_constants("poincare", &["C"], members, 1.0)?;
    notices.append(&mut fit.notices);
    fit.notices = notices;
    Ok(fit)
}

/// Moment oracle: `(μ(p), standard error)`.
pub type MomentFn<'a> = dyn FnMut(&PolyQ) -> Result<(Rational, f64)> + 'a;

/// Downhill construction of `ζ_m`: for levels `ℓ = m−1, …, 0` subtract
/// `Σ_{|γ|=ℓ} w_γ·μ(∇^γ f_cur)` from the current polynomial. Returns
/// `(ζ_m, f − ζ_m, notices)`.
pub fn statpoly_build_with(
    g: &CarnotGroup,
    f: &PolyQ,
    m: u32,
    moment: &mut MomentFn,
) -> Result<(PolyQ, PolyQ, Vec<String>)> {
    check_group(g, f)?;
    if m == 0 {
        return Err(Error::InvalidParameter("statpoly order must be >= 1".into()));
    }
    let n1 = g.horizontal_dim();
    let mut cur = f.clone();
    let mut zeta = PolyQ::zero(g.dim());
    let mut notices = Vec::new();
    for level in (0..m).rev() {
        let mut sub = PolyQ::zero(g.dim());
        for gamma in MultiIndex::all_of_order(n1, level) {
            let d = nabla_multi(g, gamma.exponents())?.apply(&cur)?;
            if d.is_zero() {
                continue;
            }
            let (mu, err) = moment(&d)?;
            let mag = crate::poly::rat_to_f64(&mu).abs();
            if err > 0.1 * mag {
                notices.push(format!(
                    "moment of order {gamma:?} has standard error {err:e} above 10% of {mag:e}"
                ));
            }
            let mut ex = gamma.exponents().to_vec();
            ex.resize(g.dim(), 0);
            let w = PolyQ::dual_weight(&MultiIndex::new(ex), n1)?;
            sub = sub.checked_add(&w.scale(&mu))?;
        }
        cur = cur.checked_sub(&sub)?;
        zeta = zeta.checked_add(&sub)?;
    }
    Ok((zeta, cur, notices))
}

fn numeric_moment<'a>(ex: &'a Expectation<'a>) -> impl FnMut(&PolyQ) -> Result<(Rational, f64)> + 'a {
    move |p: &PolyQ| {
        let c = compiled(p);
        let e = ex.integrate_one(&|q: &[f64]| c.eval(q))?;
        let r = rat_from_f64(e.mean).ok_or_else(|| Error::TaintedEstimate {
            value: e.mean,
            point: Vec::new(),
        })?;
        Ok((r, e.std_err))
    }
}

/// `ζ_m` with moments from the backend, and the residual `μ|f − ζ_m|²`
/// (lhs) against `μ|∇^m f|²` (rhs).
pub fn statpoly_build(ex: &Expectation, f: &PolyQ, m: u32) -> Result<(PolyQ, DefectReport)> {
    let (zeta, _, r) = statpoly_inner(ex, f, m)?;
    Ok((zeta, r))
}

fn statpoly_inner(ex: &Expectation, f: &PolyQ, m: u32) -> Result<(PolyQ, PolyQ, DefectReport)> {
    let g = ex.eval().group();
    integrability_precheck(ex.eval(), 2 * f.degree().unwrap_or(0))?;
    let mut mom = numeric_moment(ex);
    let (zeta, rest, mut notices) = statpoly_build_with(g, f, m, &mut mom)?;
    let rc = compiled(&rest);
    let top = compiled(&nabla_k_sq(g, f, m as usize)?);
    let e = ex.integrate(&[&|p: &[f64]| rc.eval(p).powi(2), &|p: &[f64]| top.eval(p)])?;
    let mut r = DefectReport::new("statpoly", e[0], e[1]).with("residual", e[0].mean);
    r.extras.insert("zeta_terms".into(), zeta.num_terms() as f64);
    notices.extend(ex.warnings());
    r.notices = notices;
    Ok((zeta, rest, r))
}

/// Constant used on the right of the higher-order chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PoincareConstant {
    Fixed { c: f64 },
    /// Maximum of the family estimate and of the ratios
    /// `μ|∇^k g|² / μ|∇^{k+1} g|²`, `k < m`, along the chain for
    /// `g = f − ζ_m`.
    Estimated { family: Vec<String> },
}

/// `μ|f − ζ_m|² ≤ C^m μ|∇^m f|²`; holds when the left side is within
/// three pooled standard errors (plus a `1e-9·μf²` floor) of the right.
pub fn higher_poincare_check(
    ex: &Expectation,
    f: &PolyQ,
    m: u32,
    c: &PoincareConstant,
) -> Result<DefectReport> {
    let g = ex.eval().group();
    let (_, rest, sp) = statpoly_inner(ex, f, m)?;
    let mut notices = sp.notices.clone();

    let mut chain_max = 0.0f64;
    let (c_family, cval) = match c {
        PoincareConstant::Fixed { c } => (f64::NAN, *c),
        PoincareConstant::Estimated { family } => {
            let fam: Vec<PolyQ> = family
                .iter()
                .map(|t| g.parse_poly(t))
                .collect::<Result<_>>()?;
            let cf = if fam.is_empty() {
                0.0
            } else {
                poincare_estimate(ex, &fam)?.constant("C").unwrap_or(0.0)
            };
            let levels: Vec<CompiledPoly> = (0..=m as usize)
                .map(|k| nabla_k_sq(g, &rest, k).map(|p| compiled(&p)))
                .collect::<Result<_>>()?;
            let obs: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync>> = levels
                .iter()
                .map(|c| Box::new(move |p: &[f64]| c.eval(p)) as Box<dyn Fn(&[f64]) -> f64 + Sync>)
                .collect();
            let refs: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = obs.iter().map(|b| b.as_ref()).collect();
            let vals = ex.integrate(&refs)?;
            for k in 0..m as usize {
                let (num, den) = (vals[k].mean, vals[k + 1].mean);
                if den > 0.0 {
                    chain_max = chain_max.max(num / den);
                } else if num > 1e-12 {
                    notices.push(format!(
                        "chain level {k} has positive mass {num:e} over a vanishing derivative"
                    ));
                }
            }
            (cf, cf.max(chain_max))
        }
    };
    let lhs = sp.lhs;
    let top = sp.rhs;
    let rhs = Estimate {
        mean: cval.powi(m as i32) * top.mean,
        std_err: cval.powi(m as i32) * top.std_err,
        ess: top.ess,
    };
    let fc = compiled(f);
    let l2 = ex.integrate_one(&|p: &[f64]| fc.eval(p).powi(2))?.mean;
    let mut r = DefectReport::new("higher_poincare", lhs, rhs)
        .with("C", cval)
        .with("m", m as f64)
        .with("grad_m_sq", top.mean);
    if c_family.is_finite() {
        r = r.with("C_family", c_family).with("C_chain", chain_max);
    }
    let slack = 3.0 * pooled_err(&lhs, &rhs) + 1e-9 * l2;
    r.holds = Some(lhs.mean <= rhs.mean + slack);
    r.notices = notices;
    Ok(r)
}

/// `μ(p)` for the standard Gaussian on `ℝ^d`, exactly.
pub fn gaussian_expectation(p: &PolyQ) -> Rational {
    let mut acc = Rational::from_integer(0.into());
    for (mi, c) in p.terms() {
        let mut t = c.clone();
        for &e in mi.exponents() {
            if e % 2 == 1 {
                t = Rational::from_integer(0.into());
                break;
            }
            // (e − 1)!!
            let mut df: u64 = 1;
            let mut k = e as u64;
            while k > 1 {
                k -= 1;
                df *= k;
                k -= 1;
            }
            t *= Rational::from_integer(df.into());
        }
        acc += t;
    }
    acc
}
