//! Scans of the second-order growth ratio
//! `Σ_{|α|=2}|∇^αU| / (1 + |∇U|)^{2−ε}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ScanReport, ScanRow};
use crate::error::{Error, Result};
use crate::jets::{PotentialEval, PotentialSpec};

/// Scan path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ScanPath {
    /// Points `(0, …, 0, z)` for each listed `z`.
    ZAxis { shells: Vec<f64> },
    /// Points `(R, 0, …, 0)` for each listed `R`.
    Radial { shells: Vec<f64> },
    /// Tensor grid on `[lo, hi]^d`.
    Box { lo: f64, hi: f64, nodes: usize },
}

impl ScanPath {
    /// Geometric shells `10^k`, `k = first..=last`.
    pub fn decades(first: i32, last: i32) -> Vec<f64> {
        (first..=last).map(|k| 10f64.powi(k)).collect()
    }

    fn points(&self, dim: usize, heisenberg: bool) -> Result<Vec<(f64, Vec<f64>)>> {
        match self {
            ScanPath::ZAxis { shells } => {
                if !heisenberg {
                    return Err(Error::InvalidParameter(
                        "z-axis scans need a Heisenberg group".into(),
                    ));
                }
                Ok(shells
                    .iter()
                    .map(|&z| {
                        let mut p = vec![0.0; dim];
                        p[dim - 1] = z;
                        (z, p)
                    })
                    .collect())
            }
            ScanPath::Radial { shells } => Ok(shells
                .iter()
                .map(|&r| {
                    let mut p = vec![0.0; dim];
                    p[0] = r;
                    (r, p)
                })
                .collect()),
            ScanPath::Box { lo, hi, nodes } => {
                if *nodes < 2 || !(hi > lo) || dim > 3 {
                    return Err(Error::InvalidParameter(
                        "box scans need hi > lo, nodes >= 2 and dimension <= 3".into(),
                    ));
                }
                let step = (hi - lo) / (*nodes - 1) as f64;
                let total = nodes.pow(dim as u32);
                Ok((0..total)
                    .map(|mut idx| {
                        let mut p = vec![0.0; dim];
                        for v in p.iter_mut() {
                            *v = lo + step * (idx % nodes) as f64;
                            idx /= nodes;
                        }
                        (p[0], p)
                    })
                    .collect())
            }
        }
    }
}

const COLUMNS: [&str; 5] = ["ratio", "hess_sum", "grad_norm", "lap", "v"];

fn scan_points(
    eval: &PotentialEval,
    pts: Vec<(f64, Vec<f64>)>,
    eps: f64,
    with_hessian: bool,
) -> Result<Vec<ScanRow>> {
    pts.into_par_iter()
        .map(|(param, p)| match eval.jet(&p) {
            Ok(j) => {
                let gn = j.gradsq.sqrt();
                let hs = j.hess_abs_sum();
                let mut values = vec![hs / (1.0 + gn).powf(2.0 - eps), hs, gn, j.lap, j.v_potential()];
                if with_hessian {
                    values.extend(j.hess_h.iter().flatten().copied());
                }
                Ok(ScanRow {
                    param,
                    point: p,
                    values,
                    singular: false,
                })
            }
            Err(Error::SingularPoint(_)) => {
                let n = COLUMNS.len()
                    + if with_hessian {
                        eval.group().horizontal_dim().pow(2)
                    } else {
                        0
                    };
                Ok(ScanRow {
                    param,
                    point: p,
                    values: vec![f64::NAN; n],
                    singular: true,
                })
            }
            Err(e) => Err(e),
        })
        .collect()
}

fn singular_notices(rows: &[ScanRow]) -> Vec<String> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.singular)
        .map(|(i, r)| format!("row {i}: singular point {:?}", r.point))
        .collect()
}

/// Adams ratio along a path, with the growth factor between consecutive
/// points in the summary.
pub fn adams_scan(eval: &PotentialEval, path: &ScanPath, eps: f64) -> Result<ScanReport> {
    if !(0.0..2.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0, 2), got {eps}"
        )));
    }
    let g = eval.group();
    let pts = path.points(g.dim(), g.heisenberg_n().is_some())?;
    let rows = scan_points(eval, pts, eps, false)?;
    let notices = singular_notices(&rows);
    Ok(ScanReport::new(
        &format!("adams_scan[{}]", eval.spec().family_name()),
        &COLUMNS,
        rows,
        notices,
    ))
}

/// Adams ratio for `U = F(w_α)` along `η_j = t → 0` with `η^α` held at 1
/// (or, when `α` has a single nonzero entry, with the other horizontal
/// coordinates held at 1). Hessian entries `X_bX_aU` are appended as
/// columns `h_b_a`.
pub fn adams_dual_scan(eval: &PotentialEval, ts: &[f64], eps: f64) -> Result<ScanReport> {
    let alpha = match eval.spec() {
        PotentialSpec::DualMonomial { alpha, .. } => alpha.clone(),
        _ => {
            return Err(Error::InvalidParameter(
                "dual scans need a dual_monomial potential".into(),
            ))
        }
    };
    if alpha.iter().sum::<u32>() < 2 {
        return Err(Error::InvalidParameter("dual scans need |α| >= 2".into()));
    }
    let g = eval.group();
    let m = g.horizontal_dim();
    let j = alpha.iter().position(|&a| a > 0).unwrap_or(0);
    let rest: u32 = alpha.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, a)| a).sum();
    let pts: Vec<(f64, Vec<f64>)> = ts
        .iter()
        .map(|&t| {
            let mut p = vec![0.0; g.dim()];
            for (k, v) in p.iter_mut().enumerate().take(m) {
                *v = if k == j {
                    t
                } else if rest == 0 {
                    1.0
                } else if alpha[k] > 0 {
                    t.powf(-(alpha[j] as f64) / rest as f64)
                } else {
                    0.0
                };
            }
            (t, p)
        })
        .collect();
    let rows = scan_points(eval, pts, eps, true)?;
    let mut cols: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    for b in 0..m {
        for a in 0..m {
            cols.push(format!("h_{}_{}", b + 1, a + 1));
        }
    }
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let notices = singular_notices(&rows);
    Ok(ScanReport::new("adams_dual_scan", &col_refs, rows, notices))
}
