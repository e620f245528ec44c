//! Both sides of the iterated β-log-Sobolev inequality for one test
//! function.

use serde::{Deserialize, Serialize};

use super::{check_group, compiled, integrability_precheck, DefectReport};
use crate::diffop::nabla_multi;
use crate::error::{Error, Result};
use crate::poly::{CompiledPoly, MultiIndex, PolyQ};
use crate::sampler::{Estimate, Expectation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsiConfig {
    pub beta: f64,
    /// Derivative order `m`.
    pub m: u32,
    pub p: f64,
}

/// `lhs = μ(|f|^p |log(|f|^p / μ|f|^p)|^{βm})` against
/// `rhs = Σ_{|α|≤m} μ|∇^α f|^p` (multi-index derivatives).
///
/// Extras: `mu_fp`, `normalized_lhs = lhs / μ|f|^p`, `ratio_grad_only`
/// (the same ratio without the `|α| = 0` term, i.e. without an additive
/// `μ|f|^p` term) and `order_k` for each derivative order.
pub fn lsi_defect(ex: &Expectation, f: &PolyQ, cfg: &LsiConfig) -> Result<DefectReport> {
    let g = ex.eval().group();
    check_group(g, f)?;
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) || !(cfg.p > 0.0) || cfg.m == 0 {
        return Err(Error::InvalidParameter(
            "LSI needs beta in (0,1), p > 0 and m >= 1".into(),
        ));
    }
    integrability_precheck(ex.eval(), (cfg.p.ceil() as u32) * f.degree().unwrap_or(0) + 2)?;
    let fc = compiled(f);
    let p = cfg.p;
    let mu_fp = ex.integrate_one(&|q: &[f64]| fc.eval(q).abs().powf(p))?;
    if !(mu_fp.mean > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "μ|f|^p = {} for f = {}",
            mu_fp.mean,
            g.format_poly(f)
        )));
    }
    let big_m = mu_fp.mean;
    let expo = cfg.beta * cfg.m as f64;
    let lhs_f = |q: &[f64]| {
        let a = fc.eval(q).abs().powf(p);
        if a == 0.0 {
            0.0
        } else {
            a * (a / big_m).ln().abs().powf(expo)
        }
    };

    let mut orders: Vec<Vec<CompiledPoly>> = Vec::new();
    for k in 0..=cfg.m {
        let mut ds = Vec::new();
        for alpha in MultiIndex::all_of_order(g.horizontal_dim(), k) {
            let d = nabla_multi(g, alpha.exponents())?.apply(f)?;
            if !d.is_zero() {
                ds.push(compiled(&d));
            }
        }
        orders.push(ds);
    }
    let order_fns: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync + '_>> = orders
        .iter()
        .map(|ds| {
            Box::new(move |q: &[f64]| ds.iter().map(|c| c.eval(q).abs().powf(p)).sum::<f64>())
                as Box<dyn Fn(&[f64]) -> f64 + Sync>
        })
        .collect();
    let mut obs: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = vec![&lhs_f];
    obs.extend(order_fns.iter().map(|b| b.as_ref()));
    let e = ex.integrate(&obs)?;
    let lhs = e[0];
    let terms = &e[1..];
    let sum = |ts: &[Estimate]| Estimate {
        mean: ts.iter().map(|t| t.mean).sum(),
        std_err: ts.iter().map(|t| t.std_err * t.std_err).sum::<f64>().sqrt(),
        ess: ts.iter().map(|t| t.ess).fold(f64::INFINITY, f64::min),
    };
    let rhs = sum(terms);
    let grad_only = sum(&terms[1..]).mean;
    let mut r = DefectReport::new("lsi_defect", lhs, rhs)
        .with("mu_fp", big_m)
        .with("normalized_lhs", lhs.mean / big_m)
        .with("beta", cfg.beta)
        .with("p", cfg.p)
        .with("m", cfg.m as f64);
    if grad_only > 0.0 {
        r = r.with("ratio_grad_only", lhs.mean / grad_only);
    }
    for (k, t) in terms.iter().enumerate() {
        r = r.with(&format!("order_{k}"), t.mean);
    }
    r.notices.extend(ex.warnings());
    Ok(r)
}
