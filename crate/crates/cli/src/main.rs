use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use carnot_cli::report::to_summary;
use carnot_cli::scenario::OutputSpec;
use carnot_cli::{
    emit_report, run_scenario, CliError, Format, GroupSpec, RunOptions, Scenario, VerifierSpec, EXIT_ERROR,
};
use carnot_core::jets::PotentialSpec;
use carnot_core::sampler::{GridSpec, Integrator};
use carnot_core::verifiers::{ScanPath, WeightChoice};

/// Verification toolkit for coercive inequalities on Carnot groups.
#[derive(Parser)]
#[command(name = "carnot", version)]
struct Cli {
    /// Seed for every random draw (overrides the scenario seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Falls back to the scenario's `output.dir`, then
    /// to $CARNOT_OUT_DIR, then to the working directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Comma-separated artifacts to write: json, csv, summary.
    #[arg(long, global = true, default_value = "json,csv,summary")]
    format: String,
    /// Multiplier applied to every tolerance in the scenario.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Record wall time in the JSON report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file.
    Run { config: PathBuf },
    /// Built-in exact identity suite.
    Identities {
        /// Largest Heisenberg index for the harmonic and dual checks.
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        /// Random potentials per group for the bracket checks.
        #[arg(long, default_value_t = 20)]
        potentials: usize,
        /// Random potentials per group for the ad-expansion.
        #[arg(long, default_value_t = 10)]
        ad_potentials: usize,
    },
    /// Adams ratio along a shell path.
    ScanAdams {
        #[arg(long, default_value = "heisenberg:1")]
        group: String,
        /// Inline TOML table, e.g. '{family = "kaplan_power", kappa = 4}'.
        #[arg(long)]
        potential: String,
        #[arg(long, value_enum, default_value_t = PathKind::ZAxis)]
        path: PathKind,
        /// Comma-separated shell levels.
        #[arg(long, default_value = "10,100,1000,10000")]
        shells: String,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long)]
        expect_growth: Option<f64>,
    },
    /// Fit inequality constants over a polynomial family.
    FitConstants {
        #[arg(long, default_value = "heisenberg:1")]
        group: String,
        #[arg(long)]
        potential: String,
        /// Comma-separated polynomials.
        #[arg(long)]
        family: String,
        #[arg(long, value_enum, default_value_t = Target::Ubound)]
        target: Target,
        /// Rockland order `n` for `--target rockland`.
        #[arg(long, default_value_t = 1)]
        rockland_n: u32,
        #[arg(long, default_value_t = 8.0)]
        grid_radius: f64,
        #[arg(long, default_value_t = 101)]
        grid_nodes: usize,
    },
    /// Statistical polynomial and its residual.
    Statpoly {
        #[arg(long, default_value = "heisenberg:1")]
        group: String,
        #[arg(long)]
        potential: String,
        /// Polynomial `f`.
        #[arg(long)]
        f: String,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 8.0)]
        grid_radius: f64,
        #[arg(long, default_value_t = 101)]
        grid_nodes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PathKind {
    ZAxis,
    Radial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Ubound,
    Poincare,
    Hardy,
    Rockland,
}

fn inline_potential(s: &str) -> Result<PotentialSpec, CliError> {
    #[derive(Deserialize)]
    struct Wrap {
        p: PotentialSpec,
    }
    toml::from_str::<Wrap>(&format!("p = {s}"))
        .map(|w| w.p)
        .map_err(|e| CliError::Usage(format!("--potential: {e}")))
}

fn list_f64(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::Usage(format!("not a number: `{t}`"))))
        .collect()
}

fn list_str(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

fn inline(name: &str, group: &str, potential: Option<PotentialSpec>, integrator: Option<Integrator>, v: VerifierSpec) -> Result<Scenario, CliError> {
    Ok(Scenario {
        name: name.into(),
        seed: 0,
        group: GroupSpec::parse_short(group)?,
        potential,
        integrator,
        output: OutputSpec::default(),
        verifiers: vec![v],
    })
}

fn build(cmd: &Cmd) -> Result<Scenario, CliError> {
    match cmd {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(config).map_err(|e| CliError::io(config, e))?;
            Scenario::from_toml(&text)
        }
        Cmd::Identities {
            max_n,
            potentials,
            ad_potentials,
        } => inline(
            "identities",
            "heisenberg:1",
            None,
            None,
            VerifierSpec::ExactSuite {
                harmonic_groups: (1..=*max_n).collect(),
                bracket_groups: (1..=(*max_n).min(2)).collect(),
                bracket_potentials: *potentials,
                triple_groups: (1..=*max_n).collect(),
                ad_groups: (1..=(*max_n).min(2)).collect(),
                ad_potentials: *ad_potentials,
                ad_orders: vec![1, 2, 3],
                dual_order: 4,
            },
        ),
        Cmd::ScanAdams {
            group,
            potential,
            path,
            shells,
            epsilon,
            expect_growth,
        } => {
            let shells = list_f64(shells)?;
            let path = match path {
                PathKind::ZAxis => ScanPath::ZAxis { shells },
                PathKind::Radial => ScanPath::Radial { shells },
            };
            inline(
                "scan-adams",
                group,
                Some(inline_potential(potential)?),
                None,
                VerifierSpec::AdamsScan {
                    path,
                    epsilon: *epsilon,
                    expect_growth: *expect_growth,
                    growth_tolerance: 0.2,
                    bound: None,
                },
            )
        }
        Cmd::FitConstants {
            group,
            potential,
            family,
            target,
            rockland_n,
            grid_radius,
            grid_nodes,
        } => {
            let family = list_str(family);
            let v = match target {
                Target::Ubound => VerifierSpec::UboundFit {
                    family,
                    direction: None,
                    weight: WeightChoice::Bracket,
                    lambda: 1e-2,
                    margin_tolerance: 1e-9,
                },
                Target::Poincare => VerifierSpec::PoincareEstimate { family },
                Target::Hardy => VerifierSpec::Hardy {
                    family,
                    c: None,
                    d: None,
                    lambda: 1e-2,
                    margin_tolerance: 1e-9,
                },
                Target::Rockland => VerifierSpec::RocklandTerms {
                    family,
                    n: *rockland_n,
                    lambda: None,
                    margin_tolerance: 1e-9,
                },
            };
            let grid = Integrator::Grid(GridSpec {
                radius: *grid_radius,
                nodes: *grid_nodes,
            });
            inline("fit-constants", group, Some(inline_potential(potential)?), Some(grid), v)
        }
        Cmd::Statpoly {
            group,
            potential,
            f,
            m,
            grid_radius,
            grid_nodes,
        } => {
            let grid = Integrator::Grid(GridSpec {
                radius: *grid_radius,
                nodes: *grid_nodes,
            });
            inline(
                "statpoly",
                group,
                Some(inline_potential(potential)?),
                Some(grid),
                VerifierSpec::Statpoly {
                    functions: vec![f.clone()],
                    m: *m,
                    annihilation_tolerance: None,
                },
            )
        }
    }
}

fn out_dir(flag: Option<&Path>, sc: &Scenario) -> PathBuf {
    if let Some(d) = flag {
        return d.to_path_buf();
    }
    if let Some(d) = &sc.output.dir {
        return PathBuf::from(d);
    }
    match std::env::var_os("CARNOT_OUT_DIR") {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from("."),
    }
}

fn main_inner(cli: &Cli) -> Result<i32, CliError> {
    let formats = Format::parse_list(&cli.format)?;
    let sc = build(&cli.cmd)?;
    let opts = RunOptions {
        seed: cli.seed,
        tolerance_scale: cli.tolerance_scale,
        timing: cli.timing,
    };
    let report = run_scenario(&sc, &opts)?;
    let dir = out_dir(cli.out_dir.as_deref(), &sc);
    let stem = sc.output.stem.clone().unwrap_or_else(|| sc.name.clone());
    emit_report(&report, &formats, &dir, &stem)?;
    print!("{}", to_summary(&report));
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
