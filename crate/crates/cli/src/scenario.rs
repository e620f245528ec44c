//! Scenario files: one TOML document naming a group, a potential, an
//! integrator and an ordered list of verifiers.

use serde::{Deserialize, Serialize};

use carnot_core::group::{CarnotGroup, GroupKind, HeisenbergSigns};
use carnot_core::jets::PotentialSpec;
use carnot_core::sampler::Integrator;
use carnot_core::verifiers::{PoincareConstant, ScanPath, WeightChoice};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub group: GroupSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub integrator: Option<Integrator>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(rename = "verifier", default)]
    pub verifiers: Vec<VerifierSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFamily {
    Heisenberg,
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub kind: GroupFamily,
    pub n: usize,
    #[serde(default)]
    pub signs: HeisenbergSigns,
}

impl GroupSpec {
    pub fn build(&self) -> carnot_core::Result<CarnotGroup> {
        let kind = match self.kind {
            GroupFamily::Heisenberg => GroupKind::Heisenberg(self.n),
            GroupFamily::Euclidean => GroupKind::Euclidean(self.n),
        };
        CarnotGroup::with_signs(kind, self.signs)
    }

    /// `heisenberg:1`, `euclidean:2`, optionally suffixed `:flipped`.
    pub fn parse_short(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Usage(format!("group `{s}`: expected <heisenberg|euclidean>:<n>[:flipped]"));
        if parts.len() < 2 || parts.len() > 3 {
            return Err(bad());
        }
        let kind = match parts[0] {
            "heisenberg" | "H" => GroupFamily::Heisenberg,
            "euclidean" | "R" => GroupFamily::Euclidean,
            _ => return Err(bad()),
        };
        let n = parts[1].parse().map_err(|_| bad())?;
        let signs = match parts.get(2) {
            None | Some(&"alternating") => HeisenbergSigns::Alternating,
            Some(&"flipped") => HeisenbergSigns::Flipped,
            _ => return Err(bad()),
        };
        Ok(GroupSpec { kind, n, signs })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; the `--out-dir` flag and `CARNOT_OUT_DIR` take
    /// part in the lookup as documented on the CLI.
    #[serde(default)]
    pub dir: Option<String>,
    /// File stem for every artifact; the scenario name when absent.
    #[serde(default)]
    pub stem: Option<String>,
}

fn d_zero() -> f64 {
    0.0
}
fn d_tol() -> f64 {
    1e-3
}
fn d_ibp_tol() -> f64 {
    1e-6
}
fn d_growth_tol() -> f64 {
    0.2
}
fn d_slope_tol() -> f64 {
    0.05
}
fn d_lambda() -> f64 {
    carnot_core::verifiers::fit::DEFAULT_LAMBDA
}
fn d_directions() -> usize {
    64
}
fn d_slope_directions() -> usize {
    16
}
fn d_weight() -> WeightChoice {
    WeightChoice::Bracket
}
fn d_cap() -> f64 {
    1e12
}
fn d_margin_tol() -> f64 {
    1e-9
}
fn d_heis() -> Vec<usize> {
    vec![1, 2, 3]
}
fn d_pair() -> Vec<usize> {
    vec![1, 2]
}
fn d_orders() -> Vec<u32> {
    vec![1, 2, 3]
}
fn d_twenty() -> usize {
    20
}
fn d_ten() -> usize {
    10
}
fn d_four() -> u32 {
    4
}
fn d_delta() -> f64 {
    1e-3
}
fn d_samples() -> usize {
    256
}
fn d_angle() -> f64 {
    0.3
}

/// One verifier block. Tolerance fields are multiplied by the run's
/// tolerance scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum VerifierSpec {
    /// Harmonic library, dual biorthogonality, deformed brackets and the
    /// ad-expansion, all in exact arithmetic. Independent of the
    /// scenario's group and potential.
    ExactSuite {
        #[serde(default = "d_heis")]
        harmonic_groups: Vec<usize>,
        #[serde(default = "d_pair")]
        bracket_groups: Vec<usize>,
        #[serde(default = "d_twenty")]
        bracket_potentials: usize,
        #[serde(default = "d_heis")]
        triple_groups: Vec<usize>,
        #[serde(default = "d_pair")]
        ad_groups: Vec<usize>,
        #[serde(default = "d_ten")]
        ad_potentials: usize,
        #[serde(default = "d_orders")]
        ad_orders: Vec<u32>,
        #[serde(default = "d_four")]
        dual_order: u32,
    },
    AdamsScan {
        path: ScanPath,
        #[serde(default = "d_zero")]
        epsilon: f64,
        /// Expected growth factor between consecutive shells.
        #[serde(default)]
        expect_growth: Option<f64>,
        #[serde(default = "d_growth_tol")]
        growth_tolerance: f64,
        /// Required upper bound on every ratio.
        #[serde(default)]
        bound: Option<f64>,
    },
    AdamsDualScan {
        ts: Vec<f64>,
        #[serde(default = "d_zero")]
        epsilon: f64,
        #[serde(default)]
        min_growth: Option<f64>,
    },
    UboundDefect {
        functions: Vec<String>,
        #[serde(default = "d_tol")]
        tolerance: f64,
    },
    UboundFit {
        family: Vec<String>,
        #[serde(default)]
        direction: Option<usize>,
        #[serde(default = "d_weight")]
        weight: WeightChoice,
        #[serde(default = "d_lambda")]
        lambda: f64,
        #[serde(default = "d_margin_tol")]
        margin_tolerance: f64,
    },
    InductiveBound {
        family: Vec<String>,
        n: u32,
        epsilon: f64,
        radius: f64,
        shells: Vec<f64>,
        #[serde(default = "d_directions")]
        directions: usize,
        #[serde(default = "d_weight")]
        weight: WeightChoice,
        #[serde(default = "d_cap")]
        cap: f64,
        #[serde(default = "d_margin_tol")]
        margin_tolerance: f64,
    },
    PoincareEstimate {
        family: Vec<String>,
    },
    Statpoly {
        functions: Vec<String>,
        m: u32,
        /// When set, every residual must not exceed this value.
        #[serde(default)]
        annihilation_tolerance: Option<f64>,
    },
    HigherPoincare {
        functions: Vec<String>,
        m: u32,
        constant: PoincareConstant,
    },
    LsiDefect {
        functions: Vec<String>,
        beta: f64,
        m: u32,
        p: f64,
    },
    Step2Identity {
        functions: Vec<String>,
        #[serde(default = "d_tol")]
        tolerance: f64,
    },
    Ibp {
        family: Vec<String>,
        #[serde(default = "d_ibp_tol")]
        tolerance: f64,
    },
    Hardy {
        family: Vec<String>,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default)]
        d: Option<f64>,
        #[serde(default = "d_lambda")]
        lambda: f64,
        #[serde(default = "d_margin_tol")]
        margin_tolerance: f64,
    },
    HardySlope {
        shells: Vec<f64>,
        #[serde(default = "d_slope_directions")]
        directions: usize,
        /// Expected slope; `κ − 2` for `kaplan_power` when absent.
        #[serde(default)]
        expect: Option<f64>,
        #[serde(default = "d_slope_tol")]
        tolerance: f64,
    },
    Eg2AdamsFailure {
        shells: Vec<u64>,
        #[serde(default = "d_delta")]
        delta: f64,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_angle")]
        angle: f64,
    },
    Eg3StarBound {
        family: Vec<String>,
        a: f64,
        c: f64,
        /// No default: the dimension parameter must be chosen explicitly.
        n_tilde: f64,
        d: f64,
        #[serde(default = "d_margin_tol")]
        margin_tolerance: f64,
    },
    RocklandTerms {
        family: Vec<String>,
        n: u32,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default = "d_margin_tol")]
        margin_tolerance: f64,
    },
}

impl VerifierSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            VerifierSpec::ExactSuite { .. } => "exact_suite",
            VerifierSpec::AdamsScan { .. } => "adams_scan",
            VerifierSpec::AdamsDualScan { .. } => "adams_dual_scan",
            VerifierSpec::UboundDefect { .. } => "ubound_defect",
            VerifierSpec::UboundFit { .. } => "ubound_fit",
            VerifierSpec::InductiveBound { .. } => "inductive_bound",
            VerifierSpec::PoincareEstimate { .. } => "poincare_estimate",
            VerifierSpec::Statpoly { .. } => "statpoly",
            VerifierSpec::HigherPoincare { .. } => "higher_poincare",
            VerifierSpec::LsiDefect { .. } => "lsi_defect",
            VerifierSpec::Step2Identity { .. } => "step2_identity",
            VerifierSpec::Ibp { .. } => "ibp",
            VerifierSpec::Hardy { .. } => "hardy",
            VerifierSpec::HardySlope { .. } => "hardy_slope",
            VerifierSpec::Eg2AdamsFailure { .. } => "eg2_adams_failure",
            VerifierSpec::Eg3StarBound { .. } => "eg3_star_bound",
            VerifierSpec::RocklandTerms { .. } => "rockland_terms",
        }
    }

    /// Whether the block needs a potential and an integration backend.
    pub fn needs_potential(&self) -> bool {
        !matches!(self, VerifierSpec::ExactSuite { .. })
    }

    pub fn needs_integrator(&self) -> bool {
        !matches!(
            self,
            VerifierSpec::ExactSuite { .. }
                | VerifierSpec::AdamsScan { .. }
                | VerifierSpec::AdamsDualScan { .. }
                | VerifierSpec::HardySlope { .. }
                | VerifierSpec::Eg2AdamsFailure { .. }
        )
    }
}

impl Scenario {
    /// Parse and validate. Syntax errors carry line and column, schema
    /// errors the dotted path of the offending field.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        let value = toml::Value::Table(table);
        let sc: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::Invalid {
                path: if path == "." { "<root>".into() } else { path },
                message: e.into_inner().to_string().lines().next().unwrap_or_default().to_string(),
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |path: String, message: String| Err(CliError::Invalid { path, message });
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return invalid("name".into(), "must be a nonempty file-name-safe string".into());
        }
        if let Err(e) = self.group.build() {
            return invalid("group".into(), e.to_string());
        }
        if self.verifiers.is_empty() {
            return invalid("verifier".into(), "at least one verifier block is required".into());
        }
        for (i, v) in self.verifiers.iter().enumerate() {
            if v.needs_potential() && self.potential.is_none() {
                return invalid(format!("verifier[{i}]"), format!("`{}` needs a [potential] table", v.kind()));
            }
            if v.needs_integrator() && self.integrator.is_none() {
                return invalid(format!("verifier[{i}]"), format!("`{}` needs an [integrator] table", v.kind()));
            }
        }
        Ok(())
    }
}
