//! Sampling from `dμ = e^{−U} dλ / Z` and tensor-grid quadrature.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::PotentialEval;

/// Number of batches used for batch-means standard errors.
pub const NUM_BATCHES: usize = 32;

/// Acceptance band targeted during burn-in tuning.
const TARGET_ACCEPTANCE: (f64, f64) = (0.25, 0.40);
const TUNE_WINDOW: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub steps: usize,
    pub burn_in: usize,
    /// Initial random-walk step; tuned during burn-in when `tune` is set.
    #[serde(default = "default_scale")]
    pub proposal_scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// Gradient-informed (Langevin) proposals.
    #[serde(default)]
    pub drift: bool,
    #[serde(default = "default_true")]
    pub tune: bool,
    /// Thinning interval for stored samples.
    #[serde(default = "default_thin")]
    pub thin: usize,
}

fn default_scale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_thin() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            steps: 20_000,
            burn_in: 2_000,
            proposal_scale: 1.0,
            seed: 0,
            drift: false,
            tune: true,
            thin: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidParameter("chains must be >= 1".into()));
        }
        if self.steps <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be >= 1".into()));
        }
        if (self.steps - self.burn_in) / self.thin < NUM_BATCHES {
            return Err(Error::InvalidParameter(format!(
                "need at least {NUM_BATCHES} stored samples per chain"
            )));
        }
        if !(self.proposal_scale > 0.0) || !self.proposal_scale.is_finite() {
            return Err(Error::InvalidParameter(
                "proposal_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Stored chain output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBatch {
    pub dim: usize,
    /// `chains[c]` holds the stored points of chain `c`, row-major.
    pub chains: Vec<Vec<f64>>,
    pub acceptance_rate: Vec<f64>,
    pub proposal_scale: Vec<f64>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl SampleBatch {
    pub fn num_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn samples_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.len() / self.dim.max(1))
    }

    pub fn total_samples(&self) -> usize {
        self.num_chains() * self.samples_per_chain()
    }

    pub fn point(&self, chain: usize, k: usize) -> &[f64] {
        &self.chains[chain][k * self.dim..(k + 1) * self.dim]
    }

    /// Same samples with chains reordered by `perm` (chain `i` of the
    /// result is chain `perm[i]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> SampleBatch {
        SampleBatch {
            dim: self.dim,
            chains: perm.iter().map(|&i| self.chains[i].clone()).collect(),
            acceptance_rate: perm.iter().map(|&i| self.acceptance_rate[i]).collect(),
            proposal_scale: perm.iter().map(|&i| self.proposal_scale[i]).collect(),
            seed: self.seed,
            warnings: self.warnings.clone(),
        }
    }

    /// One CSV row per stored sample: `chain,step,x1,...`.
    pub fn write_csv<W: Write>(&self, out: W, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "step".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        for c in 0..self.num_chains() {
            for k in 0..self.samples_per_chain() {
                let mut row = vec![c.to_string(), k.to_string()];
                row.extend(self.point(c, k).iter().map(|v| v.to_string()));
                w.write_record(&row)
                    .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
            }
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Monte Carlo (or quadrature) estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub ess: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Estimate {
            mean,
            std_err: 0.0,
            ess: f64::INFINITY,
        }
    }
}

/// Deterministic RNG of chain `c`: the master seed with stream id `c`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

struct ChainOut {
    points: Vec<f64>,
    accepted: usize,
    proposed: usize,
    scale: f64,
}

fn run_one(eval: &PotentialEval, cfg: &SamplerConfig, chain: usize) -> ChainOut {
    let d = eval.group().dim();
    let mut rng = chain_rng(cfg.seed, chain);
    let mut x = vec![0.0; d];
    // Start slightly off the origin, where norm-based jets are singular.
    for v in x.iter_mut() {
        *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    let mut ux = eval.value(&x);
    let fd_h = 1e-5;
    let mut gx = if cfg.drift {
        eval.coord_gradient(&x, fd_h)
    } else {
        Vec::new()
    };
    let mut scale = cfg.proposal_scale;
    let kept = (cfg.steps - cfg.burn_in) / cfg.thin;
    let mut points = Vec::with_capacity(kept * d);
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut window_acc = 0usize;
    let (mut too_small, mut too_large) = (None::<f64>, None::<f64>);
    let mut y = vec![0.0; d];
    for step in 0..cfg.steps {
        let burning = step < cfg.burn_in;
        for a in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            y[a] = if cfg.drift {
                x[a] - 0.5 * scale * scale * gx[a] + scale * xi
            } else {
                x[a] + scale * xi
            };
        }
        let uy = eval.value(&y);
        let mut log_alpha = ux - uy;
        let mut gy = Vec::new();
        if cfg.drift && uy.is_finite() {
            gy = eval.coord_gradient(&y, fd_h);
            // log q(x|y) − log q(y|x) for Langevin proposals
            let s2 = scale * scale;
            let mut fwd = 0.0;
            let mut bwd = 0.0;
            for a in 0..d {
                let m_fwd = x[a] - 0.5 * s2 * gx[a];
                let m_bwd = y[a] - 0.5 * s2 * gy[a];
                fwd += (y[a] - m_fwd).powi(2);
                bwd += (x[a] - m_bwd).powi(2);
            }
            log_alpha += (fwd - bwd) / (2.0 * s2);
        }
        let u: f64 = rng.random();
        let accept = uy.is_finite() && u.ln() < log_alpha;
        if accept {
            x.copy_from_slice(&y);
            ux = uy;
            if cfg.drift {
                gx = gy;
            }
        }
        if burning {
            if accept {
                window_acc += 1;
            }
            if cfg.tune && (step + 1) % TUNE_WINDOW == 0 {
                let rate = window_acc as f64 / TUNE_WINDOW as f64;
                if rate > TARGET_ACCEPTANCE.1 {
                    too_small = Some(scale);
                } else if rate < TARGET_ACCEPTANCE.0 {
                    too_large = Some(scale);
                }
                // Double or halve until the band is bracketed, then bisect
                // geometrically.
                scale = match (too_small, too_large) {
                    _ if (TARGET_ACCEPTANCE.0..=TARGET_ACCEPTANCE.1).contains(&rate) => scale,
                    (Some(a), Some(b)) => (a * b).sqrt(),
                    (Some(a), None) => 2.0 * a,
                    (None, Some(b)) => 0.5 * b,
                    (None, None) => scale,
                };
                window_acc = 0;
            }
        } else {
            proposed += 1;
            if accept {
                accepted += 1;
            }
            if (step - cfg.burn_in) % cfg.thin == 0 && points.len() < kept * d {
                points.extend_from_slice(&x);
            }
        }
    }
    ChainOut {
        points,
        accepted,
        proposed,
        scale,
    }
}

/// Runs independent Metropolis chains; output depends only on
/// `(eval, cfg)`.
pub fn run_chains(eval: &PotentialEval, cfg: &SamplerConfig) -> Result<SampleBatch> {
    cfg.validate()?;
    let outs: Vec<ChainOut> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_one(eval, cfg, c))
        .collect();
    let mut warnings = Vec::new();
    let acceptance_rate: Vec<f64> = outs
        .iter()
        .map(|o| o.accepted as f64 / o.proposed.max(1) as f64)
        .collect();
    for (c, &r) in acceptance_rate.iter().enumerate() {
        if r < 0.01 {
            warnings.push(format!(
                "chain {c}: acceptance rate {r} is below 1%; estimates are unreliable"
            ));
        }
    }
    Ok(SampleBatch {
        dim: eval.group().dim(),
        proposal_scale: outs.iter().map(|o| o.scale).collect(),
        chains: outs.into_iter().map(|o| o.points).collect(),
        acceptance_rate,
        seed: cfg.seed,
        warnings,
    })
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Order-independent sum: values are sorted before compensated summation.
fn canonical_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    compensated_sum(values)
}

/// Batch-means estimate of `μ(obs)`. Each chain is cut into
/// [`NUM_BATCHES`] equal batches (a trailing remainder is dropped); the
/// reported mean is the average of all batch means.
pub fn estimate(batch: &SampleBatch, obs: &dyn Fn(&[f64]) -> f64) -> Result<Estimate> {
    let per_chain = batch.samples_per_chain();
    let b = per_chain / NUM_BATCHES;
    if b == 0 {
        return Err(Error::InvalidParameter(
            "too few samples for batch means".into(),
        ));
    }
    let mut batch_means = Vec::with_capacity(batch.num_chains() * NUM_BATCHES);
    let mut sq_sums = Vec::with_capacity(batch.num_chains() * NUM_BATCHES);
    for c in 0..batch.num_chains() {
        for k in 0..NUM_BATCHES {
            let mut vals = Vec::with_capacity(b);
            for s in k * b..(k + 1) * b {
                let p = batch.point(c, s);
                let v = obs(p);
                if !v.is_finite() {
                    return Err(Error::TaintedEstimate {
                        value: v,
                        point: p.to_vec(),
                    });
                }
                vals.push(v);
            }
            let m = compensated_sum(vals.iter().copied()) / b as f64;
            sq_sums.push(compensated_sum(vals.iter().map(|v| (v - m) * (v - m))));
            batch_means.push(m);
        }
    }
    Ok(batch_means_summary(batch_means, sq_sums, b))
}

/// Evaluates several observables on the same batch.
pub fn estimate_many(
    batch: &SampleBatch,
    obs: &[&(dyn Fn(&[f64]) -> f64 + Sync)],
) -> Result<Vec<Estimate>> {
    obs.iter().map(|f| estimate(batch, *f)).collect()
}

fn batch_means_summary(batch_means: Vec<f64>, within_sq: Vec<f64>, b: usize) -> Estimate {
    let nb = batch_means.len() as f64;
    let mean = canonical_sum(batch_means.clone()) / nb;
    let var_bm = canonical_sum(batch_means.iter().map(|m| (m - mean) * (m - mean)).collect())
        / (nb - 1.0).max(1.0);
    let total = nb * b as f64;
    // total sum of squares = within-batch + between-batch parts
    let ss = canonical_sum(within_sq)
        + b as f64 * canonical_sum(batch_means.iter().map(|m| (m - mean) * (m - mean)).collect());
    let s2 = ss / (total - 1.0).max(1.0);
    let std_err = (var_bm / nb).sqrt();
    let ess = if var_bm > 0.0 {
        (total * s2 / (b as f64 * var_bm)).min(total)
    } else {
        total
    };
    Estimate {
        mean,
        std_err,
        ess,
    }
}

/// Tensor-grid specification on `[−R, R]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radius: f64,
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radius: 8.0,
            nodes: 101,
        }
    }
}

/// Relative tail threshold for the boundary-shell check.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Integrals of `obs_k · e^{−U}` normalized by `∫e^{−U}` using the
/// trapezoid rule on a tensor grid. The weighted integrands must be
/// negligible on the boundary shell of the box.
pub fn grid_quadrature(
    eval: &PotentialEval,
    obs: &[&(dyn Fn(&[f64]) -> f64 + Sync)],
    spec: &GridSpec,
) -> Result<Vec<f64>> {
    let d = eval.group().dim();
    if d > 3 {
        return Err(Error::UnsupportedStructure(format!(
            "grid quadrature supports dimension <= 3, got {d}"
        )));
    }
    if spec.nodes < 3 || !(spec.radius > 0.0) {
        return Err(Error::InvalidParameter(
            "grid needs radius > 0 and at least 3 nodes".into(),
        ));
    }
    let n = spec.nodes;
    let hstep = 2.0 * spec.radius / (n - 1) as f64;
    let coord = |i: usize| -spec.radius + hstep * i as f64;
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let center = vec![0.0; d];
    let u0 = {
        let v = eval.value(&center);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let k = obs.len();
    let inner = if d >= 2 { n.pow(d as u32 - 1) } else { 1 };

    struct Slab {
        sums: Vec<f64>,
        interior_max: Vec<f64>,
        boundary_max: Vec<f64>,
        tainted: Option<(f64, Vec<f64>)>,
    }

    let slabs: Vec<Slab> = (0..n)
        .into_par_iter()
        .map(|i0| {
            let mut sums = vec![0.0; k + 1];
            let mut interior_max = vec![0.0f64; k + 1];
            let mut boundary_max = vec![0.0f64; k + 1];
            let mut tainted = None;
            let mut p = vec![0.0; d];
            for rest in 0..inner {
                let mut idx = [i0, 0, 0];
                let mut r = rest;
                for slot in idx.iter_mut().take(d).skip(1) {
                    *slot = r % n;
                    r /= n;
                }
                let mut w = 1.0;
                let mut on_boundary = false;
                for a in 0..d {
                    p[a] = coord(idx[a]);
                    w *= weight(idx[a]);
                    on_boundary |= idx[a] == 0 || idx[a] == n - 1;
                }
                let e = (u0 - eval.value(&p)).exp();
                if !e.is_finite() {
                    tainted.get_or_insert((e, p.clone()));
                    continue;
                }
                for j in 0..=k {
                    let f = if j == 0 { 1.0 } else { obs[j - 1](&p) };
                    let fe = f * e;
                    if !fe.is_finite() {
                        if e > 0.0 {
                            tainted.get_or_insert((f, p.clone()));
                        }
                        continue;
                    }
                    sums[j] += w * fe;
                    let m = if on_boundary {
                        &mut boundary_max[j]
                    } else {
                        &mut interior_max[j]
                    };
                    *m = m.max(fe.abs());
                }
            }
            Slab {
                sums,
                interior_max,
                boundary_max,
                tainted,
            }
        })
        .collect();

    if let Some((value, point)) = slabs.iter().find_map(|s| s.tainted.clone()) {
        return Err(Error::TaintedEstimate { value, point });
    }
    let mut totals = vec![0.0; k + 1];
    let mut imax = vec![0.0f64; k + 1];
    let mut bmax = vec![0.0f64; k + 1];
    for j in 0..=k {
        totals[j] = compensated_sum(slabs.iter().map(|s| s.sums[j]));
        imax[j] = slabs.iter().fold(0.0, |m, s| m.max(s.interior_max[j]));
        bmax[j] = slabs.iter().fold(0.0, |m, s| m.max(s.boundary_max[j]));
    }
    for j in 0..=k {
        if bmax[j] > TAIL_TOLERANCE * imax[j] {
            return Err(Error::Truncation {
                message: format!(
                    "weighted integrand {j} has boundary magnitude {:e} vs interior max {:e} at radius {}",
                    bmax[j], imax[j], spec.radius
                ),
                suggested_radius: spec.radius * 1.5,
            });
        }
    }
    if !(totals[0] > 0.0) {
        return Err(Error::InvalidMeasure(
            "density integrates to zero on the grid".into(),
        ));
    }
    Ok(totals[1..].iter().map(|t| t / totals[0]).collect())
}

/// Integration backend used by the verifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Integrator {
    Grid(GridSpec),
    MonteCarlo(SamplerConfig),
}

impl Integrator {
    /// `μ(obs_k)` for every observable, with error bars for Monte Carlo.
    pub fn integrate(
        &self,
        eval: &PotentialEval,
        obs: &[&(dyn Fn(&[f64]) -> f64 + Sync)],
    ) -> Result<Vec<Estimate>> {
        match self {
            Integrator::Grid(spec) => Ok(grid_quadrature(eval, obs, spec)?
                .into_iter()
                .map(Estimate::exact)
                .collect()),
            Integrator::MonteCarlo(cfg) => {
                let batch = run_chains(eval, cfg)?;
                estimate_many(&batch, obs)
            }
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, Integrator::Grid(_))
    }
}

/// Integration backend bound to one potential. Monte Carlo chains are
/// run once on construction and shared by every later integral.
pub struct Expectation<'a> {
    eval: &'a PotentialEval,
    backend: Backend,
}

enum Backend {
    Grid(GridSpec),
    Samples(SampleBatch),
}

impl<'a> Expectation<'a> {
    pub fn new(eval: &'a PotentialEval, integrator: &Integrator) -> Result<Self> {
        let backend = match integrator {
            Integrator::Grid(spec) => Backend::Grid(*spec),
            Integrator::MonteCarlo(cfg) => Backend::Samples(run_chains(eval, cfg)?),
        };
        Ok(Expectation { eval, backend })
    }

    pub fn eval(&self) -> &'a PotentialEval {
        self.eval
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.backend, Backend::Grid(_))
    }

    pub fn batch(&self) -> Option<&SampleBatch> {
        match &self.backend {
            Backend::Samples(b) => Some(b),
            Backend::Grid(_) => None,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        self.batch().map(|b| b.warnings.clone()).unwrap_or_default()
    }

    pub fn integrate(&self, obs: &[&(dyn Fn(&[f64]) -> f64 + Sync)]) -> Result<Vec<Estimate>> {
        match &self.backend {
            Backend::Grid(spec) => Ok(grid_quadrature(self.eval, obs, spec)?
                .into_iter()
                .map(Estimate::exact)
                .collect()),
            Backend::Samples(batch) => estimate_many(batch, obs),
        }
    }

    pub fn integrate_one(&self, obs: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<Estimate> {
        Ok(self.integrate(&[obs])?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
