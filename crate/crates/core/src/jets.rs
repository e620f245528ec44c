//! Second-order jets of interaction potentials along the horizontal fields,
//! a finite-difference oracle, and the derived potentials `𝒱`, `𝒱_Z`.

use serde::{Deserialize, Serialize};

use crate::diffop::{sub_laplacian, DiffOp};
use crate::error::{Error, Result};
use crate::group::{CarnotGroup, DEFAULT_SINGULAR_RADIUS};
use crate::poly::{rat, rat_int, CompiledPoly, MultiIndex, PolyQ, Rational};

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialNorm {
    Euclidean,
    Kaplan,
}

/// Scalar profile `F` in `U = F(w_α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum OuterProfile {
    /// `F(t) = |t|^p`
    Power { p: f64 },
    /// `F(t) = exp(|t|^p)`
    ExpPower { p: f64 },
    /// `F(t) = slope · t`
    Linear { slope: f64 },
}

impl OuterProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let a = t.abs();
        let s = if t < 0.0 { -1.0 } else { 1.0 };
        match *self {
            OuterProfile::Power { p } => {
                let f = a.powf(p);
                let f1 = if p == 1.0 { s } else { p * a.powf(p - 1.0) * s };
                let f2 = if p == 1.0 || p == 2.0 {
                    p * (p - 1.0)
                } else {
                    p * (p - 1.0) * a.powf(p - 2.0)
                };
                (f, f1, f2)
            }
            OuterProfile::ExpPower { p } => {
                let ap = a.powf(p);
                let f = ap.exp();
                let d1 = p * a.powf(p - 1.0) * s;
                let d2 = if p == 1.0 || p == 2.0 {
                    p * (p - 1.0)
                } else {
                    p * (p - 1.0) * a.powf(p - 2.0)
                };
                (f, f * d1, f * (d1 * d1 + d2))
            }
            OuterProfile::Linear { slope } => (slope * t, slope, 0.0),
        }
    }
}

/// Interaction families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `U = N^κ` with `N` the Kaplan norm.
    KaplanPower { kappa: f64 },
    /// `U = r^α (1 + ε cos(ω r^κ))`, `r` the Euclidean or Kaplan norm.
    RadialCosine {
        alpha: f64,
        epsilon: f64,
        omega: f64,
        kappa: f64,
        norm: RadialNorm,
    },
    /// `U = r^{(1 + ε cos φ)/(1 − ε)}` on the plane.
    PolarLog { epsilon: f64 },
    /// `U = (|x|² + 2z²)^n / (2n)`.
    QuadricPower { n: f64 },
    /// `U = F(w_α)` with `w_α` the dual weight of a horizontal index.
    DualMonomial { alpha: Vec<u32>, outer: OuterProfile },
    /// Raw polynomial in the group's coordinate names.
    Polynomial { text: String },
}

impl PotentialSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            PotentialSpec::KaplanPower { .. } => "kaplan_power",
            PotentialSpec::RadialCosine { .. } => "radial_cosine",
            PotentialSpec::PolarLog { .. } => "polar_log",
            PotentialSpec::QuadricPower { .. } => "quadric_power",
            PotentialSpec::DualMonomial { .. } => "dual_monomial",
            PotentialSpec::Polynomial { .. } => "polynomial",
        }
    }

    pub fn polynomial(g: &CarnotGroup, p: &PolyQ) -> Self {
        PotentialSpec::Polynomial {
            text: g.format_poly(p),
        }
    }

    /// Exact polynomial form when the family reduces to one.
    pub fn as_polynomial(&self, g: &CarnotGroup) -> Result<Option<PolyQ>> {
        Ok(match self {
            PotentialSpec::Polynomial { text } => Some(g.parse_poly(text)?),
            PotentialSpec::KaplanPower { kappa }
                if g.heisenberg_n().is_some() && is_int(*kappa) && *kappa as i64 % 4 == 0 =>
            {
                Some(g.kaplan_quartic_poly()?.pow((*kappa as u32) / 4))
            }
            PotentialSpec::QuadricPower { n } if g.heisenberg_n().is_some() && is_int(*n) => {
                let q = quadric_poly(g)?;
                let k = *n as u32;
                Some(q.pow(k).scale(&rat(1, 2 * k as i64)))
            }
            PotentialSpec::DualMonomial { alpha, outer } => {
                let w = dual_weight_poly(g, alpha)?;
                match *outer {
                    OuterProfile::Power { p } if is_int(p) && (p as i64) % 2 == 0 => {
                        Some(w.pow(p as u32))
                    }
                    OuterProfile::Linear { slope } => match crate::poly::rat_from_f64(slope) {
                        Some(s) => Some(w.scale(&s)),
                        None => None,
                    },
                    _ => None,
                }
            }
            _ => None,
        })
    }

    /// Checks parameter ranges and group compatibility.
    pub fn validate(&self, g: &CarnotGroup) -> Result<()> {
        let mismatch = || Error::FamilyGroupMismatch {
            family: self.family_name().into(),
            group: g.name(),
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{} needs {name} > 0, got {v}",
                    self.family_name()
                )))
            }
        };
        match self {
            PotentialSpec::KaplanPower { kappa } => {
                g.heisenberg_n().ok_or_else(mismatch)?;
                positive("kappa", *kappa)
            }
            PotentialSpec::RadialCosine {
                alpha,
                epsilon,
                omega,
                kappa,
                norm,
            } => {
                match norm {
                    RadialNorm::Kaplan => {
                        g.heisenberg_n().ok_or_else(mismatch)?;
                    }
                    RadialNorm::Euclidean => {
                        if g.heisenberg_n().is_some() {
                            return Err(mismatch());
                        }
                    }
                }
                if !(*alpha > 0.0) {
                    return Err(Error::InvalidMeasure(format!(
                        "radial_cosine with alpha = {alpha} does not give an integrable density"
                    )));
                }
                if !(0.0..1.0).contains(epsilon) {
                    return Err(Error::InvalidParameter(format!(
                        "radial_cosine needs epsilon in [0, 1), got {epsilon}"
                    )));
                }
                positive("omega", *omega)?;
                positive("kappa", *kappa)
            }
            PotentialSpec::PolarLog { epsilon } => {
                if g.kind() != crate::group::GroupKind::Euclidean(2) {
                    return Err(mismatch());
                }
                if !(0.0..1.0).contains(epsilon) {
                    return Err(Error::InvalidParameter(format!(
                        "polar_log needs epsilon in [0, 1), got {epsilon}"
                    )));
                }
                Ok(())
            }
            PotentialSpec::QuadricPower { n } => {
                g.heisenberg_n().ok_or_else(mismatch)?;
                if !(*n >= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "quadric_power needs n >= 1, got {n}"
                    )));
                }
                Ok(())
            }
            PotentialSpec::DualMonomial { alpha, outer } => {
                if alpha.len() != g.horizontal_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: g.horizontal_dim(),
                        got: alpha.len(),
                    });
                }
                match *outer {
                    OuterProfile::Power { p } | OuterProfile::ExpPower { p } => positive("p", p),
                    OuterProfile::Linear { slope } => {
                        if slope.is_finite() {
                            Ok(())
                        } else {
                            Err(Error::InvalidParameter("non-finite slope".into()))
                        }
                    }
                }
            }
            PotentialSpec::Polynomial { text } => g.parse_poly(text).map(|_| ()),
        }
    }
}

fn is_int(v: f64) -> bool {
    v.fract() == 0.0 && v > 0.0 && v < 1e6
}

/// `|x|² + 2z²`.
fn quadric_poly(g: &CarnotGroup) -> Result<PolyQ> {
    let d = g.dim();
    let mut q = PolyQ::zero(d);
    for i in 0..g.horizontal_dim() {
        let x = PolyQ::var(d, i)?;
        q = &q + &(&x * &x);
    }
    let z = PolyQ::var(d, d - 1)?;
    Ok(&q + &(&z * &z).scale(&rat_int(2)))
}

fn dual_weight_poly(g: &CarnotGroup, alpha: &[u32]) -> Result<PolyQ> {
    let mut ex = alpha.to_vec();
    ex.resize(g.dim(), 0);
    PolyQ::dual_weight(&MultiIndex::new(ex), g.horizontal_dim())
}

/// Value and horizontal derivatives up to order two.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Jet2 {
    pub u: f64,
    /// `X_iU`
    pub grad_h: Vec<f64>,
    /// `hess_h[j][i] = X_jX_iU`
    pub hess_h: Vec<Vec<f64>>,
    /// `(ZU, Z²U)` on Heisenberg groups.
    pub center: Option<(f64, f64)>,
    pub gradsq: f64,
    pub lap: f64,
}

impl Jet2 {
    fn assemble(
        u: f64,
        grad_h: Vec<f64>,
        hess_h: Vec<Vec<f64>>,
        center: Option<(f64, f64)>,
    ) -> Self {
        let gradsq = grad_h.iter().map(|v| v * v).sum();
        let lap = (0..grad_h.len()).map(|i| hess_h[i][i]).sum();
        Jet2 {
            u,
            grad_h,
            hess_h,
            center,
            gradsq,
            lap,
        }
    }

    /// `𝒱 = ¼|∇U|² − ½ΔU`
    pub fn v_potential(&self) -> f64 {
        0.25 * self.gradsq - 0.5 * self.lap
    }

    /// `Σ_{i,j} |X_iX_jU|` over ordered pairs.
    pub fn hess_abs_sum(&self) -> f64 {
        self.hess_h.iter().flatten().map(|v| v.abs()).sum()
    }
}

/// Jet of a norm-like function `r` along the horizontal fields.
struct NormJet {
    r: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
    center: Option<(f64, f64)>,
}

fn euclidean_norm_jet(x: &[f64], delta: f64) -> Result<NormJet> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(r > delta) {
        return Err(Error::SingularPoint(format!(
            "radius {r} at {x:?} is within {delta} of the origin"
        )));
    }
    let d = x.len();
    let grad = x.iter().map(|v| v / r).collect();
    let r3 = r * r * r;
    let mut hess = vec![vec![0.0; d]; d];
    for (j, row) in hess.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = -x[i] * x[j] / r3 + if i == j { 1.0 / r } else { 0.0 };
        }
    }
    Ok(NormJet {
        r,
        grad,
        hess,
        center: None,
    })
}

fn kaplan_norm_jet(g: &CarnotGroup, p: &[f64], delta: f64) -> Result<NormJet> {
    let j = g.kaplan_jet_with_radius(p, delta)?;
    Ok(NormJet {
        r: j.value,
        grad: j.grad_h,
        hess: j.hess_h,
        center: j.z_jet,
    })
}

/// One-dimensional chain rule `U = φ(r)`.
fn chain(nj: &NormJet, phi: f64, d1: f64, d2: f64) -> Jet2 {
    let k = nj.grad.len();
    let grad: Vec<f64> = nj.grad.iter().map(|g| d1 * g).collect();
    let mut hess = vec![vec![0.0; k]; k];
    for (j, row) in hess.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = d2 * nj.grad[j] * nj.grad[i] + d1 * nj.hess[j][i];
        }
    }
    let center = nj
        .center
        .map(|(zr, zzr)| (d1 * zr, d2 * zr * zr + d1 * zzr));
    Jet2::assemble(phi, grad, hess, center)
}

/// Profile `φ(r) = r^α(1 + ε cos(ω r^κ))` and its first two derivatives.
pub fn radial_cosine_profile(alpha: f64, eps: f64, omega: f64, kappa: f64, r: f64) -> (f64, f64, f64) {
    let rk = r.powf(kappa);
    let (s, c) = (omega * rk).sin_cos();
    let phi = r.powf(alpha) * (1.0 + eps * c);
    let g = alpha * (1.0 + eps * c) - eps * omega * kappa * rk * s;
    let gp = -eps * omega * kappa * r.powf(kappa - 1.0) * ((alpha + kappa) * s + omega * kappa * rk * c);
    let d1 = r.powf(alpha - 1.0) * g;
    let d2 = (alpha - 1.0) * r.powf(alpha - 2.0) * g + r.powf(alpha - 1.0) * gp;
    (phi, d1, d2)
}

#[derive(Clone, Debug)]
enum Kernel {
    KaplanPower {
        kappa: f64,
    },
    RadialCosine {
        alpha: f64,
        eps: f64,
        omega: f64,
        kappa: f64,
        norm: RadialNorm,
    },
    PolarLog {
        eps: f64,
    },
    Quadric {
        n: f64,
    },
    Dual {
        alpha: Vec<i32>,
        inv_fact: f64,
        outer: OuterProfile,
    },
    Poly(Box<PolyJets>),
}

#[derive(Clone, Debug)]
struct PolyJets {
    u: CompiledPoly,
    grad: Vec<CompiledPoly>,
    hess: Vec<Vec<CompiledPoly>>,
    center: Option<(CompiledPoly, CompiledPoly)>,
}

/// Prepared evaluator for one `(group, potential)` pair.
#[derive(Clone, Debug)]
pub struct PotentialEval {
    group: CarnotGroup,
    spec: PotentialSpec,
    kernel: Kernel,
    delta_sing: f64,
}

impl PotentialEval {
    pub fn new(g: &CarnotGroup, spec: &PotentialSpec) -> Result<Self> {
        spec.validate(g)?;
        let kernel = match spec {
            PotentialSpec::KaplanPower { kappa } => Kernel::KaplanPower { kappa: *kappa },
            PotentialSpec::RadialCosine {
                alpha,
                epsilon,
                omega,
                kappa,
                norm,
            } => Kernel::RadialCosine {
                alpha: *alpha,
                eps: *epsilon,
                omega: *omega,
                kappa: *kappa,
                norm: *norm,
            },
            PotentialSpec::PolarLog { epsilon } => Kernel::PolarLog { eps: *epsilon },
            PotentialSpec::QuadricPower { n } => Kernel::Quadric { n: *n },
            PotentialSpec::DualMonomial { alpha, outer } => {
                let fact: f64 = alpha
                    .iter()
                    .map(|&a| (1..=a).map(f64::from).product::<f64>())
                    .product();
                Kernel::Dual {
                    alpha: alpha.iter().map(|&a| a as i32).collect(),
                    inv_fact: 1.0 / fact,
                    outer: *outer,
                }
            }
            PotentialSpec::Polynomial { text } => {
                let u = g.parse_poly(text)?;
                Kernel::Poly(Box::new(PolyJets::new(g, &u)?))
            }
        };
        Ok(PotentialEval {
            group: g.clone(),
            spec: spec.clone(),
            kernel,
            delta_sing: DEFAULT_SINGULAR_RADIUS,
        })
    }

    /// Evaluator for an exact polynomial potential.
    pub fn from_poly(g: &CarnotGroup, u: &PolyQ) -> Result<Self> {
        Self::new(g, &PotentialSpec::polynomial(g, u))
    }

    pub fn with_singular_radius(mut self, delta: f64) -> Self {
        self.delta_sing = delta;
        self
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// `U(p)`; defined everywhere, including the singular set of the jets.
    pub fn value(&self, p: &[f64]) -> f64 {
        let g = &self.group;
        match &self.kernel {
            Kernel::KaplanPower { kappa } => {
                let k = g.kaplan_quartic(p).unwrap_or(f64::NAN);
                k.powf(kappa / 4.0)
            }
            Kernel::RadialCosine {
                alpha,
                eps,
                omega,
                kappa,
                norm,
            } => {
                let r = match norm {
                    RadialNorm::Euclidean => p.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    RadialNorm::Kaplan => g.kaplan_norm(p).unwrap_or(f64::NAN),
                };
                r.powf(*alpha) * (1.0 + eps * (omega * r.powf(*kappa)).cos())
            }
            Kernel::PolarLog { eps } => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return 0.0;
                }
                let phi = p[1].atan2(p[0]);
                ((1.0 + eps * phi.cos()) / (1.0 - eps) * r.ln()).exp()
            }
            Kernel::Quadric { n } => {
                let m = g.horizontal_dim();
                let q: f64 = p[..m].iter().map(|v| v * v).sum::<f64>() + 2.0 * p[m] * p[m];
                q.powf(*n) / (2.0 * n)
            }
            Kernel::Dual {
                alpha,
                inv_fact,
                outer,
            } => {
                let w = dual_value(alpha, *inv_fact, p);
                outer.eval(w).0
            }
            Kernel::Poly(pj) => pj.u.eval(p),
        }
    }

    /// Closed-form jet at `p`.
    pub fn jet(&self, p: &[f64]) -> Result<Jet2> {
        let g = &self.group;
        if p.len() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                got: p.len(),
            });
        }
        match &self.kernel {
            Kernel::KaplanPower { kappa } => {
                let nj = kaplan_norm_jet(g, p, self.delta_sing)?;
                let r = nj.r;
                Ok(chain(
                    &nj,
                    r.powf(*kappa),
                    kappa * r.powf(kappa - 1.0),
                    kappa * (kappa - 1.0) * r.powf(kappa - 2.0),
                ))
            }
            Kernel::RadialCosine {
                alpha,
                eps,
                omega,
                kappa,
                norm,
            } => {
                let nj = match norm {
                    RadialNorm::Euclidean => euclidean_norm_jet(p, self.delta_sing)?,
                    RadialNorm::Kaplan => kaplan_norm_jet(g, p, self.delta_sing)?,
                };
                let (phi, d1, d2) = radial_cosine_profile(*alpha, *eps, *omega, *kappa, nj.r);
                Ok(chain(&nj, phi, d1, d2))
            }
            Kernel::PolarLog { eps } => polar_log_cartesian(*eps, p, self.delta_sing),
            Kernel::Quadric { n } => Ok(quadric_jet(g, *n, p)),
            Kernel::Dual {
                alpha,
                inv_fact,
                outer,
            } => Ok(dual_jet(g, alpha, *inv_fact, outer, p)),
            Kernel::Poly(pj) => Ok(pj.jet(p)),
        }
    }

    pub fn v_potential(&self, p: &[f64]) -> Result<f64> {
        Ok(self.jet(p)?.v_potential())
    }

    /// Euclidean coordinate gradient of `U` by central differences.
    pub fn coord_gradient(&self, p: &[f64], h: f64) -> Vec<f64> {
        let mut q = p.to_vec();
        (0..p.len())
            .map(|a| {
                q[a] = p[a] + h;
                let up = self.value(&q);
                q[a] = p[a] - h;
                let um = self.value(&q);
                q[a] = p[a];
                (up - um) / (2.0 * h)
            })
            .collect()
    }
}

fn dual_value(alpha: &[i32], inv_fact: f64, p: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(p)
        .map(|(&a, &x)| x.powi(a))
        .product::<f64>()
        * inv_fact
}

/// `∂_i x^α` evaluated, times `1/α!`, with a derivative multi-index.
fn dual_derivative(alpha: &[i32], inv_fact: f64, p: &[f64], d: &[i32]) -> f64 {
    let mut acc = inv_fact;
    for (i, (&a, &di)) in alpha.iter().zip(d).enumerate() {
        if di > a {
            return 0.0;
        }
        for k in 0..di {
            acc *= f64::from(a - k);
        }
        acc *= p[i].powi(a - di);
    }
    acc
}

fn dual_jet(g: &CarnotGroup, alpha: &[i32], inv_fact: f64, outer: &OuterProfile, p: &[f64]) -> Jet2 {
    // w depends on horizontal coordinates only, where each X_i acts as ∂_i.
    let k = g.horizontal_dim();
    let w = dual_value(alpha, inv_fact, p);
    let (f, f1, f2) = outer.eval(w);
    let mut d = vec![0i32; k];
    let dw: Vec<f64> = (0..k)
        .map(|i| {
            d[i] = 1;
            let v = dual_derivative(alpha, inv_fact, p, &d);
            d[i] = 0;
            v
        })
        .collect();
    let mut hess = vec![vec![0.0; k]; k];
    for j in 0..k {
        for i in 0..k {
            d[i] += 1;
            d[j] += 1;
            let dij = dual_derivative(alpha, inv_fact, p, &d);
            d[i] -= 1;
            d[j] -= 1;
            hess[j][i] = f2 * dw[j] * dw[i] + f1 * dij;
        }
    }
    let grad = dw.iter().map(|v| f1 * v).collect();
    let center = g.heisenberg_n().map(|_| (0.0, 0.0));
    Jet2::assemble(f, grad, hess, center)
}

fn quadric_jet(g: &CarnotGroup, n: f64, p: &[f64]) -> Jet2 {
    let m = g.horizontal_dim();
    let hn = m / 2;
    let partner = |i: usize| 2 * hn - 1 - i;
    let z = p[m];
    let q: f64 = p[..m].iter().map(|v| v * v).sum::<f64>() + 2.0 * z * z;
    let s: Vec<f64> = (0..m).map(|i| g.sigma(i)).collect();
    let xq: Vec<f64> = (0..m)
        .map(|i| 2.0 * p[i] + 4.0 * z * s[i] * p[partner(i)])
        .collect();
    let mut xxq = vec![vec![0.0; m]; m];
    for (j, row) in xxq.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            let mut v = 4.0 * s[i] * s[j] * p[partner(i)] * p[partner(j)];
            if i == j {
                v += 2.0;
            }
            if j == partner(i) {
                v += 4.0 * s[i] * z;
            }
            *slot = v;
        }
    }
    // U = q^n/(2n), U' = q^{n−1}/2, U'' = (n−1) q^{n−2}/2.
    let u = q.powf(n) / (2.0 * n);
    let d1 = 0.5 * q.powf(n - 1.0);
    let d2 = if n == 1.0 {
        0.0
    } else {
        0.5 * (n - 1.0) * q.powf(n - 2.0)
    };
    let grad = xq.iter().map(|v| d1 * v).collect();
    let mut hess = vec![vec![0.0; m]; m];
    for j in 0..m {
        for i in 0..m {
            hess[j][i] = d2 * xq[j] * xq[i] + d1 * xxq[j][i];
        }
    }
    let zq = 4.0 * z;
    let center = Some((d1 * zq, d2 * zq * zq + d1 * 4.0));
    Jet2::assemble(u, grad, hess, center)
}

/// Cartesian jet of `U = exp(a(φ) log r)` with `a(φ) = (1 + ε cos φ)/(1 − ε)`.
fn polar_log_cartesian(eps: f64, p: &[f64], delta: f64) -> Result<Jet2> {
    let (x, y) = (p[0], p[1]);
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    if !(r > delta) {
        return Err(Error::SingularPoint(format!(
            "polar_log is singular at the origin, got r = {r}"
        )));
    }
    let phi = y.atan2(x);
    let (sp, cp) = phi.sin_cos();
    let a = (1.0 + eps * cp) / (1.0 - eps);
    let a1 = -eps * sp / (1.0 - eps);
    let a2 = -eps * cp / (1.0 - eps);
    let l = r.ln();
    let r4 = r2 * r2;
    let dl = [x / r2, y / r2];
    let ddl = [
        [1.0 / r2 - 2.0 * x * x / r4, -2.0 * x * y / r4],
        [-2.0 * x * y / r4, 1.0 / r2 - 2.0 * y * y / r4],
    ];
    let dphi = [-y / r2, x / r2];
    let ddphi = [
        [2.0 * x * y / r4, (y * y - x * x) / r4],
        [(y * y - x * x) / r4, -2.0 * x * y / r4],
    ];
    let e = a * l;
    let u = e.exp();
    let de: Vec<f64> = (0..2).map(|i| a1 * dphi[i] * l + a * dl[i]).collect();
    let mut hess = vec![vec![0.0; 2]; 2];
    for j in 0..2 {
        for i in 0..2 {
            let dde = a2 * dphi[j] * dphi[i] * l
                + a1 * ddphi[j][i] * l
                + a1 * dphi[i] * dl[j]
                + a1 * dphi[j] * dl[i]
                + a * ddl[j][i];
            hess[j][i] = u * (de[i] * de[j] + dde);
        }
    }
    let grad = de.iter().map(|v| u * v).collect();
    Ok(Jet2::assemble(u, grad, hess, None))
}

/// Polar closed forms for `polar_log`: returns `(|∇U|², ΔU)`.
///
/// `|∇U|² = U²((1+ε cos φ)² + ε² sin²φ log²r) / ((1−ε)² r²)` and
/// `ΔU = U((1+ε cos φ)² + (ε sin φ log r)² − ε(1−ε) cos φ log r) / ((1−ε)² r²)`.
pub fn polar_jet(eps: f64, r: f64, phi: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "polar_jet needs r > 0, got {r}"
        )));
    }
    let (sp, cp) = phi.sin_cos();
    let l = r.ln();
    let u = ((1.0 + eps * cp) / (1.0 - eps) * l).exp();
    let pre = 1.0 / ((1.0 - eps) * (1.0 - eps) * r * r);
    let a = 1.0 + eps * cp;
    let gradsq = pre * u * u * (a * a + eps * eps * sp * sp * l * l);
    let lap = pre * u * (a * a + (eps * sp * l).powi(2) - eps * (1.0 - eps) * cp * l);
    Ok((gradsq, lap))
}

impl PolyJets {
    fn new(g: &CarnotGroup, u: &PolyQ) -> Result<Self> {
        let ex = ExactJet::new(g, u)?;
        Ok(PolyJets {
            u: ex.u.compile(),
            grad: ex.grad.iter().map(PolyQ::compile).collect(),
            hess: ex
                .hess
                .iter()
                .map(|row| row.iter().map(PolyQ::compile).collect())
                .collect(),
            center: ex.center.map(|(a, b)| (a.compile(), b.compile())),
        })
    }

    fn jet(&self, p: &[f64]) -> Jet2 {
        Jet2::assemble(
            self.u.eval(p),
            self.grad.iter().map(|c| c.eval(p)).collect(),
            self.hess
                .iter()
                .map(|row| row.iter().map(|c| c.eval(p)).collect())
                .collect(),
            self.center.as_ref().map(|(a, b)| (a.eval(p), b.eval(p))),
        )
    }
}

/// Symbolic jet of a polynomial potential.
#[derive(Clone, Debug)]
pub struct ExactJet {
    pub u: PolyQ,
    pub grad: Vec<PolyQ>,
    /// `hess[j][i] = X_jX_iU`
    pub hess: Vec<Vec<PolyQ>>,
    pub center: Option<(PolyQ, PolyQ)>,
    pub gradsq: PolyQ,
    pub lap: PolyQ,
}

impl ExactJet {
    pub fn new(g: &CarnotGroup, u: &PolyQ) -> Result<Self> {
        let gens = g.generators();
        let grad: Vec<PolyQ> = gens.iter().map(|x| x.apply(u)).collect::<Result<_>>()?;
        let hess: Vec<Vec<PolyQ>> = gens
            .iter()
            .map(|xj| grad.iter().map(|gi| xj.apply(gi)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let center = match g.center_fields().first() {
            Some(z) => {
                let zu = z.apply(u)?;
                let zzu = z.apply(&zu)?;
                Some((zu, zzu))
            }
            None => None,
        };
        let mut gradsq = PolyQ::zero(g.dim());
        for gi in &grad {
            gradsq = &gradsq + &(gi * gi);
        }
        let lap = sub_laplacian(g)?.apply(u)?;
        Ok(ExactJet {
            u: u.clone(),
            grad,
            hess,
            center,
            gradsq,
            lap,
        })
    }

    /// `𝒱` as a polynomial.
    pub fn v_potential(&self) -> PolyQ {
        &self.gradsq.scale(&rat(1, 4)) - &self.lap.scale(&rat(1, 2))
    }

    pub fn eval_v(&self, p: &[Rational]) -> Result<Rational> {
        self.v_potential().eval_exact(p)
    }
}

/// Horizontal jet of an arbitrary function by nested central differences:
/// `D_iF(p) = Σ_a c_{ia}(p) (F(p + h e_a) − F(p − h e_a)) / 2h` with
/// `c_{ia}` the coefficients of `X_i`.
pub fn fd_jet_fn(g: &CarnotGroup, f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Result<Jet2> {
    if p.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: p.len(),
        });
    }
    let coeffs: Vec<Vec<CompiledPoly>> = g
        .generators()
        .iter()
        .map(|x| field_coeffs(x, g.dim()))
        .collect();
    let centers: Vec<Vec<CompiledPoly>> = g
        .center_fields()
        .iter()
        .map(|x| field_coeffs(x, g.dim()))
        .collect();
    let d = g.dim();
    let directional = |c: &[CompiledPoly], q: &[f64], fun: &dyn Fn(&[f64]) -> f64| -> f64 {
        let mut s = 0.0;
        let mut qq = q.to_vec();
        for (a, ca) in c.iter().enumerate() {
            let w = ca.eval(q);
            if w == 0.0 {
                continue;
            }
            qq[a] = q[a] + h;
            let fp = fun(&qq);
            qq[a] = q[a] - h;
            let fm = fun(&qq);
            qq[a] = q[a];
            s += w * (fp - fm) / (2.0 * h);
        }
        s
    };
    let u = f(p);
    if !u.is_finite() {
        return Err(Error::SingularPoint(format!("non-finite value at {p:?}")));
    }
    let k = coeffs.len();
    let grad: Vec<f64> = coeffs.iter().map(|c| directional(c, p, f)).collect();
    let mut hess = vec![vec![0.0; k]; k];
    for (j, row) in hess.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            let inner = |q: &[f64]| directional(&coeffs[i], q, f);
            *slot = directional(&coeffs[j], p, &inner);
        }
    }
    let center = centers.first().map(|c| {
        let zf = directional(c, p, f);
        let inner = |q: &[f64]| directional(c, q, f);
        (zf, directional(c, p, &inner))
    });
    let jet = Jet2::assemble(u, grad, hess, center);
    let finite = jet.grad_h.iter().chain(jet.hess_h.iter().flatten()).all(|v| v.is_finite());
    if !finite || d == 0 {
        return Err(Error::SingularPoint(format!(
            "finite differences hit a singular neighbourhood of {p:?}"
        )));
    }
    Ok(jet)
}

fn field_coeffs(x: &DiffOp, dim: usize) -> Vec<CompiledPoly> {
    (0..dim).map(|a| x.field_coeff(a).compile()).collect()
}

/// Finite-difference jet of a potential.
pub fn fd_jet(eval: &PotentialEval, p: &[f64], h: f64) -> Result<Jet2> {
    fd_jet_fn(eval.group(), &|q: &[f64]| eval.value(q), p, h)
}

/// Largest entry-wise deviation between two jets for first and second
/// order, each divided by the jet scale `max(‖∇U‖∞, ‖∇²U‖∞)` of the
/// reference. Using a common scale keeps the measure meaningful near
/// critical points, where the gradient alone is tiny.
pub fn jet_rel_error(reference: &Jet2, other: &Jet2) -> (f64, f64) {
    let mut g1 = reference.grad_h.clone();
    let mut o1 = other.grad_h.clone();
    let mut g2: Vec<f64> = reference.hess_h.iter().flatten().copied().collect();
    let mut o2: Vec<f64> = other.hess_h.iter().flatten().copied().collect();
    if let (Some(a), Some(b)) = (reference.center, other.center) {
        g1.push(a.0);
        o1.push(b.0);
        g2.push(a.1);
        o2.push(b.1);
    }
    let scale = g1
        .iter()
        .chain(&g2)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = |a: &[f64], b: &[f64]| {
        let d = a
            .iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if scale == 0.0 {
            d
        } else {
            d / scale
        }
    };
    (dev(&g1, &o1), dev(&g2, &o2))
}

/// Both routes to `𝒱_Z = ¼(ZU)² − ½Z²U` for `U = N^κ` on `ℍ¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VzPair {
    pub closed: f64,
    pub jet: f64,
}

/// `𝒱_Z` for `kaplan_power(κ)`: the closed form
/// `16κN^{κ−4}[(κN^κ + 6 − 2(κ−1)) N^{−4} z² − ¼]` and the jet route.
pub fn v_z_potential(eval: &PotentialEval, p: &[f64]) -> Result<VzPair> {
    let kappa = match eval.spec() {
        PotentialSpec::KaplanPower { kappa } => *kappa,
        other => {
            return Err(Error::FamilyGroupMismatch {
                family: other.family_name().into(),
                group: eval.group().name(),
            })
        }
    };
    if eval.group().heisenberg_n() != Some(1) {
        return Err(Error::FamilyGroupMismatch {
            family: "kaplan_power".into(),
            group: eval.group().name(),
        });
    }
    let jet = eval.jet(p)?;
    let (zu, zzu) = jet.center.expect("Heisenberg jets carry center derivatives");
    let n = eval.group().kaplan_norm(p)?;
    let z = p[2];
    let closed = 16.0
        * kappa
        * n.powf(kappa - 4.0)
        * ((kappa * n.powf(kappa) + 6.0 - 2.0 * (kappa - 1.0)) * z * z / n.powi(4) - 0.25);
    Ok(VzPair {
        closed,
        jet: 0.25 * zu * zu - 0.5 * zzu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupKind, HeisenbergSigns};

    #[test]
    fn quadric_power_example_point() {
        let g = CarnotGroup::with_signs(GroupKind::Heisenberg(1), HeisenbergSigns::Flipped).unwrap();
        let ev = PotentialEval::new(&g, &PotentialSpec::QuadricPower { n: 1.0 }).unwrap();
        let j = ev.jet(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(j.grad_h, vec![2.0, 0.0]);
    }

    #[test]
    fn kaplan_power_on_the_z_axis() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let ev = PotentialEval::new(&g, &PotentialSpec::KaplanPower { kappa: 4.0 }).unwrap();
        let j = ev.jet(&[0.0, 0.0, 100.0]).unwrap();
        assert!(j.grad_h.iter().all(|v| *v == 0.0));
        assert!((j.hess_abs_sum() - 3200.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_v_potential() {
        let g = CarnotGroup::euclidean(1).unwrap();
        let ev = PotentialEval::new(&g, &PotentialSpec::Polynomial { text: "1/2 x^2".into() }).unwrap();
        assert!((ev.v_potential(&[2.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polar_log_at_angle_pi() {
        let eps = 0.5;
        let (gs, lap) = polar_jet(eps, 7.0, std::f64::consts::PI).unwrap();
        assert!((gs - 1.0).abs() < 1e-12);
        let expected = (1.0 + eps / (1.0 - eps) * 7.0f64.ln()) / 7.0;
        assert!((lap - expected).abs() < 1e-12);
        let (gs, lap) = polar_jet(eps, 1e6, std::f64::consts::PI).unwrap();
        assert!((0.25 * gs - 0.5 * lap - 0.25).abs() < 1e-4);
        assert!(polar_jet(eps, 0.0, 1.0).is_err());
    }

    #[test]
    fn family_group_checks() {
        let h1 = CarnotGroup::heisenberg(1).unwrap();
        let e2 = CarnotGroup::euclidean(2).unwrap();
        assert!(matches!(
            PotentialEval::new(&e2, &PotentialSpec::KaplanPower { kappa: 2.0 }),
            Err(Error::FamilyGroupMismatch { .. })
        ));
        assert!(matches!(
            PotentialEval::new(&h1, &PotentialSpec::PolarLog { epsilon: 0.5 }),
            Err(Error::FamilyGroupMismatch { .. })
        ));
        let bad = PotentialSpec::RadialCosine {
            alpha: 0.0,
            epsilon: 0.5,
            omega: 1.0,
            kappa: 1.0,
            norm: RadialNorm::Euclidean,
        };
        assert!(matches!(
            PotentialEval::new(&e2, &bad),
            Err(Error::InvalidMeasure(_))
        ));
    }
}
