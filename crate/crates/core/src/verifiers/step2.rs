//! The step-two operator identity
//! `‖𝔏f‖² + Σ_{l,j}‖[V_l,V_j]f‖² = Σ_{j,l}‖V_jV_lf‖²` and the
//! antisymmetry `μ(f V_j g) = −μ((V_j f) g)`.

use super::{check_group, compiled, horizontal_grad, integrability_precheck, jet_at, rel_gap, square, DefectReport};
use crate::diffop::{l_operator, v_bracket, v_field};
use crate::error::{Error, Result};
use crate::poly::{CompiledPoly, PolyQ};
use crate::sampler::Expectation;

/// Both sides as μ-integrals of symbolically expanded polynomial
/// integrands. `tol` is the relative tolerance under grid quadrature;
/// Monte Carlo runs must agree within three pooled standard errors.
pub fn step2_identity_check(ex: &Expectation, f: &PolyQ, tol: f64) -> Result<DefectReport> {
    let eval = ex.eval();
    let g = eval.group();
    check_group(g, f)?;
    if g.step() > 2 {
        return Err(Error::UnsupportedStructure(format!(
            "identity requires step <= 2, group has step {}",
            g.step()
        )));
    }
    let u = eval.spec().as_polynomial(g)?.ok_or_else(|| {
        Error::InvalidParameter("step-two identity needs a polynomial potential".into())
    })?;
    let k = g.horizontal_dim();
    let vs = (0..k).map(|j| v_field(g, &u, j)).collect::<Result<Vec<_>>>()?;
    let lf = l_operator(g, &u)?.apply(f)?;
    let mut lhs = square(&lf)?;
    let mut rhs = PolyQ::zero(g.dim());
    let vf: Vec<PolyQ> = vs.iter().map(|v| v.apply(f)).collect::<Result<_>>()?;
    for l in 0..k {
        for j in 0..k {
            let b = v_bracket(g, &u, l, j)?.apply(f)?;
            lhs = lhs.checked_add(&square(&b)?)?;
            let vv = vs[j].apply(&vf[l])?;
            rhs = rhs.checked_add(&square(&vv)?)?;
        }
    }
    let deg = lhs.degree().unwrap_or(0).max(rhs.degree().unwrap_or(0));
    integrability_precheck(eval, deg)?;
    let (lc, rc) = (compiled(&lhs), compiled(&rhs));
    let e = ex.integrate(&[&|p: &[f64]| lc.eval(p), &|p: &[f64]| rc.eval(p)])?;
    let mut r = DefectReport::new("step2_identity", e[0], e[1]);
    let rel = rel_gap(e[0].mean, e[1].mean);
    r = r.with("rel_gap", rel).with("norm_lf_sq", {
        let c = compiled(&square(&lf)?);
        ex.integrate_one(&|p: &[f64]| c.eval(p))?.mean
    });
    r.holds = Some(if ex.is_grid() {
        rel <= tol
    } else {
        (e[0].mean - e[1].mean).abs() <= 3.0 * r.defect_err
    });
    r.notices.extend(ex.warnings());
    Ok(r)
}

/// `μ(f V_j g) + μ((V_j f) g)` for every ordered pair in the family and
/// every horizontal direction, all integrals in one pass. The report
/// carries the pair with the largest relative gap; `holds` requires every
/// gap within `tol` (grid) or three pooled standard errors (Monte Carlo).
pub fn ibp_check(ex: &Expectation, family: &[PolyQ], tol: f64) -> Result<DefectReport> {
    let eval = ex.eval();
    let g = eval.group();
    if family.is_empty() {
        return Err(Error::InvalidParameter("ibp check needs a nonempty family".into()));
    }
    let k = g.horizontal_dim();
    let comp: Vec<(CompiledPoly, Vec<CompiledPoly>)> = family
        .iter()
        .map(|f| {
            check_group(g, f)?;
            integrability_precheck(eval, 2 * f.degree().unwrap_or(0) + 2)?;
            Ok((compiled(f), horizontal_grad(g, f)?.iter().map(compiled).collect()))
        })
        .collect::<Result<_>>()?;
    // X_jU exactly when U is polynomial, from the jet otherwise
    let xu: Option<Vec<CompiledPoly>> = match eval.spec().as_polynomial(g)? {
        Some(u) => Some(horizontal_grad(g, &u)?.iter().map(compiled).collect()),
        None => None,
    };
    let du = |p: &[f64], j: usize| -> Option<f64> {
        match &xu {
            Some(c) => Some(c[j].eval(p)),
            None => jet_at(eval, p).map(|jt| jt.grad_h[j]),
        }
    };
    type Obs<'o> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'o>;
    let mut obs: Vec<Obs> = Vec::new();
    for (fa, _) in &comp {
        obs.push(Box::new(move |p: &[f64]| fa.eval(p).powi(2)));
    }
    let mut keys = Vec::new();
    for (a, (fa, ga)) in comp.iter().enumerate() {
        for (b, (fb, gb)) in comp.iter().enumerate() {
            for j in 0..k {
                let du = &du;
                // V_j h = X_j h − ½ (X_jU) h
                obs.push(Box::new(move |p: &[f64]| match du(p, j) {
                    Some(d) => fa.eval(p) * (gb[j].eval(p) - 0.5 * d * fb.eval(p)),
                    None => 0.0,
                }));
                obs.push(Box::new(move |p: &[f64]| match du(p, j) {
                    Some(d) => -(ga[j].eval(p) - 0.5 * d * fa.eval(p)) * fb.eval(p),
                    None => 0.0,
                }));
                keys.push((a, b, j));
            }
        }
    }
    let refs: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = obs.iter().map(|o| o.as_ref()).collect();
    let e = ex.integrate(&refs)?;
    let nf = comp.len();
    let mut worst: Option<(f64, DefectReport)> = None;
    let mut all_ok = true;
    for (t, &(a, b, j)) in keys.iter().enumerate() {
        let (l, r) = (e[nf + 2 * t], e[nf + 2 * t + 1]);
        let scale = (e[a].mean * e[b].mean).sqrt();
        let gap = (l.mean - r.mean).abs();
        let rel = if scale > 0.0 { gap / scale } else { gap };
        let ok = if ex.is_grid() {
            rel <= tol
        } else {
            gap <= 3.0 * l.std_err.hypot(r.std_err)
        };
        all_ok &= ok;
        if worst.as_ref().is_none_or(|(w, _)| rel > *w) {
            let rep = DefectReport::new("ibp", l, r)
                .with("f_index", a as f64)
                .with("g_index", b as f64)
                .with("direction", j as f64)
                .with("rel_gap", rel);
            worst = Some((rel, rep));
        }
    }
    let (_, mut r) = worst.expect("nonempty family");
    r.holds = Some(all_ok);
    r.notices.extend(ex.warnings());
    Ok(r)
}
