use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use carnot_core::group::CarnotGroup;
use carnot_core::jets::{PotentialEval, PotentialSpec};
use carnot_core::poly::PolyQ;
use carnot_core::sampler::{Expectation, Integrator};
use carnot_core::verifiers::{self as ver, DefectReport, FitResult, ScanReport};
use carnot_core::Error;

use crate::exact::{run_suite, SuiteParams};
use crate::scenario::{Scenario, VerifierSpec};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockResult {
    pub index: usize,
    pub kind: String,
    pub status: Status,
    pub headline: String,
    pub detail: Value,
    /// Scan tables written as CSV; their rows are also in `detail`.
    #[serde(skip)]
    pub tables: Vec<ScanReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub toolkit: String,
    pub version: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub scenario: Scenario,
    pub status: Status,
    pub results: Vec<BlockResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Fail {
            crate::EXIT_VIOLATION
        } else {
            crate::EXIT_OK
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    pub tolerance_scale: f64,
    /// Record wall time in the report (breaks byte-for-byte
    /// reproducibility of the JSON file).
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            tolerance_scale: 1.0,
            timing: false,
        }
    }
}

pub fn run_scenario_file(path: &Path, opts: &RunOptions) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let sc = Scenario::from_toml(&text)?;
    run_scenario(&sc, opts)
}

/// Execute every verifier block in order.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    if !(opts.tolerance_scale > 0.0) || !opts.tolerance_scale.is_finite() {
        return Err(CliError::Usage("tolerance scale must be positive and finite".into()));
    }
    sc.validate()?;
    let start = Instant::now();
    let mut sc = sc.clone();
    if let Some(s) = opts.seed {
        sc.seed = s;
    }
    if let Some(Integrator::MonteCarlo(cfg)) = &mut sc.integrator {
        cfg.seed = sc.seed;
    }
    let g = sc.group.build().map_err(|e| CliError::Invalid {
        path: "group".into(),
        message: e.to_string(),
    })?;
    let eval = match &sc.potential {
        Some(spec) => Some(PotentialEval::new(&g, spec).map_err(|e| CliError::Invalid {
            path: "potential".into(),
            message: e.to_string(),
        })?),
        None => None,
    };
    let mut ex: Option<Expectation> = None;
    let mut results = Vec::with_capacity(sc.verifiers.len());
    for (index, v) in sc.verifiers.iter().enumerate() {
        let wrap = |source: Error| CliError::Verifier {
            index,
            kind: v.kind().into(),
            source,
        };
        if v.needs_integrator() && ex.is_none() {
            let (e, i) = (eval.as_ref().expect("validated"), sc.integrator.as_ref().expect("validated"));
            ex = Some(Expectation::new(e, i).map_err(wrap)?);
        }
        let ctx = Ctx {
            g: &g,
            eval: eval.as_ref(),
            ex: ex.as_ref(),
            scale: opts.tolerance_scale,
            seed: sc.seed,
            index,
        };
        let block = match run_block(&ctx, v) {
            Ok(b) => b,
            Err(BlockError::Core(Error::ConditionFailed(msg))) => BlockResult {
                index,
                kind: v.kind().into(),
                status: Status::Fail,
                headline: format!("condition failed: {msg}"),
                detail: json!({ "condition_failed": msg }),
                tables: Vec::new(),
            },
            Err(BlockError::Core(e)) => return Err(wrap(e)),
            Err(BlockError::Cli(e)) => return Err(e),
        };
        results.push(block);
    }
    let status = if results.iter().any(|r| r.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    };
    Ok(RunReport {
        toolkit: "carnot".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: sc.seed,
        tolerance_scale: opts.tolerance_scale,
        scenario: sc,
        status,
        results,
        wall_time_s: opts.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

struct Ctx<'a> {
    g: &'a CarnotGroup,
    eval: Option<&'a PotentialEval>,
    ex: Option<&'a Expectation<'a>>,
    scale: f64,
    seed: u64,
    index: usize,
}

enum BlockError {
    Core(Error),
    Cli(CliError),
}

impl From<Error> for BlockError {
    fn from(e: Error) -> Self {
        BlockError::Core(e)
    }
}

impl From<CliError> for BlockError {
    fn from(e: CliError) -> Self {
        BlockError::Cli(e)
    }
}

impl<'a> Ctx<'a> {
    fn eval(&self) -> &'a PotentialEval {
        self.eval.expect("validated: potential present")
    }

    fn ex(&self) -> &'a Expectation<'a> {
        self.ex.expect("validated: integrator present")
    }

    fn polys(&self, field: &str, texts: &[String]) -> Result<Vec<PolyQ>, CliError> {
        texts
            .iter()
            .enumerate()
            .map(|(j, t)| {
                self.g.parse_poly(t).map_err(|e| CliError::Invalid {
                    path: format!("verifier[{}].{field}[{j}]", self.index),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn block(ctx: &Ctx, kind: &str, status: Status, headline: String, detail: Value) -> BlockResult {
    BlockResult {
        index: ctx.index,
        kind: kind.into(),
        status,
        headline,
        detail,
        tables: Vec::new(),
    }
}

fn defect_block(ctx: &Ctx, kind: &str, reports: Vec<DefectReport>) -> BlockResult {
    let ok = reports.iter().filter(|r| r.holds == Some(true)).count();
    let status = Status::from_bool(ok == reports.len());
    let headline = format!("{ok}/{} members hold", reports.len());
    block(ctx, kind, status, headline, json!({ "members": to_value(&reports) }))
}

fn fit_block(ctx: &Ctx, kind: &str, fit: &FitResult, tol: Option<f64>) -> BlockResult {
    let consts: Vec<String> = fit
        .constants
        .iter()
        .map(|(k, v)| format!("{k}={}", ver::fmt_f64(*v)))
        .collect();
    let status = match tol {
        Some(t) => Status::from_bool(fit.margin >= -t),
        None => Status::Info,
    };
    let headline = format!("{} (margin {})", consts.join(", "), ver::fmt_f64(fit.margin));
    block(ctx, kind, status, headline, to_value(fit))
}

fn run_block(ctx: &Ctx, v: &VerifierSpec) -> Result<BlockResult, BlockError> {
    let kind = v.kind();
    let s = ctx.scale;
    Ok(match v {
        VerifierSpec::ExactSuite {
            harmonic_groups,
            bracket_groups,
            bracket_potentials,
            triple_groups,
            ad_groups,
            ad_potentials,
            ad_orders,
            dual_order,
        } => {
            let blocks = run_suite(&SuiteParams {
                harmonic_groups,
                bracket_groups,
                bracket_potentials: *bracket_potentials,
                triple_groups,
                ad_groups,
                ad_potentials: *ad_potentials,
                ad_orders,
                dual_order: *dual_order,
                seed: ctx.seed,
            })?;
            let ok = blocks.iter().filter(|b| b.exact).count();
            let checks: usize = blocks.iter().map(|b| b.checks).sum();
            block(
                ctx,
                kind,
                Status::from_bool(ok == blocks.len()),
                format!("{ok}/{} blocks exact ({checks} checks)", blocks.len()),
                json!({ "blocks": to_value(&blocks) }),
            )
        }
        VerifierSpec::AdamsScan {
            path,
            epsilon,
            expect_growth,
            growth_tolerance,
            bound,
        } => {
            let rep = ver::adams_scan(ctx.eval(), path, *epsilon)?;
            let mut ok = true;
            if let Some(e) = expect_growth {
                ok &= !rep.summary.growth.is_empty()
                    && rep.summary.growth.iter().all(|g| (g / e - 1.0).abs() <= growth_tolerance * s);
            }
            if let Some(b) = bound {
                ok &= rep.rows.iter().filter(|r| !r.singular).all(|r| r.values[0] <= *b);
            }
            let status = if expect_growth.is_some() || bound.is_some() {
                Status::from_bool(ok)
            } else {
                Status::Info
            };
            scan_block(ctx, kind, status, rep)
        }
        VerifierSpec::AdamsDualScan { ts, epsilon, min_growth } => {
            let rep = ver::adams_dual_scan(ctx.eval(), ts, *epsilon)?;
            let status = match min_growth {
                Some(m) => Status::from_bool(!rep.summary.growth.is_empty() && rep.summary.growth.iter().all(|g| g >= m)),
                None => Status::Info,
            };
            scan_block(ctx, kind, status, rep)
        }
        VerifierSpec::UboundDefect { functions, tolerance } => {
            let fs = ctx.polys("functions", functions)?;
            let reps = fs
                .iter()
                .map(|f| ver::ubound_defect(ctx.ex(), f, tolerance * s))
                .collect::<Result<Vec<_>, _>>()?;
            defect_block(ctx, kind, reps)
        }
        VerifierSpec::UboundFit {
            family,
            direction,
            weight,
            lambda,
            margin_tolerance,
        } => {
            let fs = ctx.polys("family", family)?;
            let fit = ver::fit_ubound_constants(ctx.ex(), &fs, *direction, *weight, *lambda)?;
            fit_block(ctx, kind, &fit, Some(margin_tolerance * s))
        }
        VerifierSpec::InductiveBound {
            family,
            n,
            epsilon,
            radius,
            shells,
            directions,
            weight,
            cap,
            margin_tolerance,
        } => {
            let fs = ctx.polys("family", family)?;
            let cfg = ver::InductiveConfig {
                n: *n,
                epsilon: *epsilon,
                radius: *radius,
                shells: shells.clone(),
                directions: *directions,
                weight: *weight,
                cap: *cap,
            };
            let fit = ver::inductive_bound_pipeline(ctx.ex(), &cfg, &fs)?;
            fit_block(ctx, kind, &fit, Some(margin_tolerance * s))
        }
        VerifierSpec::PoincareEstimate { family } => {
            let fs = ctx.polys("family", family)?;
            let fit = ver::poincare_estimate(ctx.ex(), &fs)?;
            fit_block(ctx, kind, &fit, None)
        }
        VerifierSpec::Statpoly {
            functions,
            m,
            annihilation_tolerance,
        } => {
            let fs = ctx.polys("functions", functions)?;
            let mut members = Vec::new();
            let mut worst = 0.0f64;
            for f in &fs {
                let (zeta, r) = ver::statpoly_build(ctx.ex(), f, *m)?;
                worst = worst.max(r.lhs.mean);
                members.push(json!({
                    "f": ctx.g.format_poly(f),
                    "zeta": ctx.g.format_poly(&zeta),
                    "report": to_value(&r),
                }));
            }
            let status = match annihilation_tolerance {
                Some(t) => Status::from_bool(worst <= t * s),
                None => Status::Info,
            };
            block(
                ctx,
                kind,
                status,
                format!("largest residual {}", ver::fmt_f64(worst)),
                json!({ "members": members }),
            )
        }
        VerifierSpec::HigherPoincare { functions, m, constant } => {
            let fs = ctx.polys("functions", functions)?;
            let reps = fs
                .iter()
                .map(|f| ver::higher_poincare_check(ctx.ex(), f, *m, constant))
                .collect::<Result<Vec<_>, _>>()?;
            defect_block(ctx, kind, reps)
        }
        VerifierSpec::LsiDefect { functions, beta, m, p } => {
            let fs = ctx.polys("functions", functions)?;
            let cfg = ver::LsiConfig { beta: *beta, m: *m, p: *p };
            let reps = fs
                .iter()
                .map(|f| ver::lsi_defect(ctx.ex(), f, &cfg))
                .collect::<Result<Vec<_>, _>>()?;
            let worst = reps.iter().filter_map(|r| r.ratio).fold(0.0f64, f64::max);
            block(
                ctx,
                kind,
                Status::Info,
                format!("largest ratio {}", ver::fmt_f64(worst)),
                json!({ "members": to_value(&reps) }),
            )
        }
        VerifierSpec::Step2Identity { functions, tolerance } => {
            let fs = ctx.polys("functions", functions)?;
            let reps = fs
                .iter()
                .map(|f| ver::step2_identity_check(ctx.ex(), f, tolerance * s))
                .collect::<Result<Vec<_>, _>>()?;
            defect_block(ctx, kind, reps)
        }
        VerifierSpec::Ibp { family, tolerance } => {
            let fs = ctx.polys("family", family)?;
            let r = ver::ibp_check(ctx.ex(), &fs, tolerance * s)?;
            defect_block(ctx, kind, vec![r])
        }
        VerifierSpec::Hardy {
            family,
            c,
            d,
            lambda,
            margin_tolerance,
        } => {
            let fs = ctx.polys("family", family)?;
            let cfg = ver::HardyConfig {
                c: *c,
                d: *d,
                lambda: *lambda,
            };
            let rep = ver::hardy_check(ctx.ex(), &fs, &cfg)?;
            let held = rep.members.iter().filter(|r| r.holds == Some(true)).count();
            let fit_ok = rep
                .improved_fit
                .as_ref()
                .is_none_or(|f| f.margin >= -margin_tolerance * s);
            let status = Status::from_bool(held == rep.members.len() && fit_ok);
            let mut headline = format!("{held}/{} members hold", rep.members.len());
            if let Some(f) = &rep.improved_fit {
                headline.push_str(&format!("; improved fit margin {}", ver::fmt_f64(f.margin)));
            }
            block(ctx, kind, status, headline, to_value(&rep))
        }
        VerifierSpec::HardySlope {
            shells,
            directions,
            expect,
            tolerance,
        } => {
            let slope = ver::improved_weight_slope(ctx.eval(), shells, *directions)?;
            let expected = expect.or(match ctx.eval().spec() {
                PotentialSpec::KaplanPower { kappa } => Some(kappa - 2.0),
                _ => None,
            });
            let status = match expected {
                Some(e) => Status::from_bool((slope - e).abs() <= tolerance * s),
                None => Status::Info,
            };
            block(
                ctx,
                kind,
                status,
                format!("log-log slope {}", ver::fmt_f64(slope)),
                json!({ "slope": slope, "expected": expected, "tolerance": tolerance * s }),
            )
        }
        VerifierSpec::Eg2AdamsFailure {
            shells,
            delta,
            samples,
            angle,
        } => {
            let cfg = ver::Eg2Config {
                shells: shells.clone(),
                delta: *delta,
                samples: *samples,
                angle: *angle,
            };
            let rep = ver::eg2_adams_failure(ctx.eval(), &cfg)?;
            let status = Status::from_bool(rep.holds == Some(true));
            scan_block(ctx, kind, status, rep)
        }
        VerifierSpec::Eg3StarBound {
            family,
            a,
            c,
            n_tilde,
            d,
            margin_tolerance,
        } => {
            let fs = ctx.polys("family", family)?;
            let cfg = ver::Eg3Config {
                a: *a,
                c: *c,
                n_tilde: *n_tilde,
                d: *d,
            };
            let fit = ver::eg3_star_bound(ctx.ex(), &fs, &cfg)?;
            fit_block(ctx, kind, &fit, Some(margin_tolerance * s))
        }
        VerifierSpec::RocklandTerms {
            family,
            n,
            lambda,
            margin_tolerance,
        } => {
            let fs = ctx.polys("family", family)?;
            let fit = ver::rockland_terms(ctx.ex(), &fs, *n, *lambda)?;
            fit_block(ctx, kind, &fit, Some(margin_tolerance * s))
        }
    })
}

fn scan_block(ctx: &Ctx, kind: &str, status: Status, rep: ScanReport) -> BlockResult {
    let growth: Vec<String> = rep.summary.growth.iter().map(|g| ver::fmt_f64(*g)).collect();
    let headline = format!(
        "{} points, max {} {}, growth [{}]",
        rep.rows.len(),
        rep.columns.first().map_or("value", String::as_str),
        ver::fmt_f64(rep.summary.max),
        growth.join(", ")
    );
    let mut b = block(ctx, kind, status, headline, to_value(&rep));
    b.tables.push(rep);
    b
}
