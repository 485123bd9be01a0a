//! TOML run configuration. Unknown keys are rejected; every omitted value is
//! filled with its default so that reports can embed the resolved config.

use crate::error::CliError;
use forced_waves::bounds::BoundOverrides;
use forced_waves::model::{ModelParams, Scenario};
use forced_waves::shift::ShiftProfile;
use forced_waves::wave::SolverConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub shift: ShiftConfig,
    /// Invaded-state scenario: `eu`, `estar`, `estable` or `necessary-only`.
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub bounds: BoundsBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub extinction: ExtinctionBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum ShiftKind {
    Sigmoid,
    SigmoidWithBump,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub family: ShiftKind,
    pub m: f64,
    pub rho: f64,
    #[serde(rename = "K")]
    pub k_bound: f64,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    /// Two-column `(z, alpha)` file for the tabulated family.
    #[serde(default)]
    pub table: Option<PathBuf>,
    /// Envelope constant of a tabulated profile.
    #[serde(default)]
    pub c: Option<f64>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            family: ShiftKind::Sigmoid,
            m: 2.0,
            rho: 1.5,
            k_bound: 1.0,
            amplitude: None,
            center: None,
            width: None,
            table: None,
            c: None,
        }
    }
}

impl ShiftConfig {
    pub fn build(&self, base: &Path) -> Result<ShiftProfile, CliError> {
        let missing =
            |key: &str| CliError::Config(format!("shift.{key} is required for this family"));
        let profile = match self.family {
            ShiftKind::Sigmoid => ShiftProfile::sigmoid(self.m, self.rho, self.k_bound)?,
            ShiftKind::SigmoidWithBump => ShiftProfile::sigmoid_with_bump(
                self.m,
                self.rho,
                self.k_bound,
                self.amplitude.ok_or_else(|| missing("amplitude"))?,
                self.center.ok_or_else(|| missing("center"))?,
                self.width.ok_or_else(|| missing("width"))?,
            )?,
            ShiftKind::Tabulated => {
                let table = self.table.as_ref().ok_or_else(|| missing("table"))?;
                let c = self.c.ok_or_else(|| missing("c"))?;
                ShiftProfile::read_table(base.join(table), self.rho, self.k_bound, c)?
            }
        };
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Half-width `L`; derived from the slowest decay rate when omitted.
    #[serde(default)]
    pub half_width: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: forced_waves::wave::DEFAULT_POINTS,
            half_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub sandwich_tol: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol: d.tol,
            max_iterations: d.max_iterations,
            max_halvings: d.max_halvings,
            sandwich_tol: d.sandwich_tol,
        }
    }
}

impl SolverBlock {
    pub fn to_solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iterations: self.max_iterations,
            max_halvings: self.max_halvings,
            sandwich_tol: self.sandwich_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsBlock {
    /// Construction name (`eu-super`, ...); chosen from scenario and speed
    /// when omitted.
    #[serde(default)]
    pub construction: Option<String>,
    #[serde(default)]
    pub overrides: BoundOverrides,
    pub verify_tol: f64,
    pub verify_lo: f64,
    pub verify_hi: f64,
    pub verify_points: usize,
}

impl Default for BoundsBlock {
    fn default() -> Self {
        Self {
            construction: None,
            overrides: BoundOverrides::default(),
            verify_tol: 1e-10,
            verify_lo: -60.0,
            verify_hi: 60.0,
            verify_points: 12001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum InitialData {
    /// Midpoint of the scenario's bounds.
    BoundsMidpoint,
    /// The Newton wave.
    Wave,
    /// The Newton wave with multiplicative noise.
    PerturbedWave,
    /// Compact pulses of v and w on the invaded state.
    Pulses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum LeftKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub t_end: f64,
    pub snapshot_every: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    pub left: LeftKind,
    pub initial: InitialData,
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            t_end: 50.0,
            snapshot_every: 10.0,
            dt: None,
            left: LeftKind::Dirichlet,
            initial: InitialData::Wave,
            perturbation: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum ExtinctionKind {
    LargeK,
    Subcritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtinctionBlock {
    pub variant: ExtinctionKind,
    pub threshold: f64,
    pub dwell: f64,
}

impl Default for ExtinctionBlock {
    fn default() -> Self {
        Self {
            variant: ExtinctionKind::LargeK,
            threshold: forced_waves::sim::EXTINCTION_THRESHOLD,
            dwell: forced_waves::sim::EXTINCTION_DWELL,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Speeds run as independent sub-runs (see `--jobs`).
    #[serde(default)]
    pub speeds: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario
            .ok_or_else(|| CliError::Config("`scenario` is required for this subcommand".into()))
    }

    pub fn speed(&self) -> Result<f64, CliError> {
        self.speed
            .ok_or_else(|| CliError::Config("`speed` is required for this subcommand".into()))
    }
}

/// Default configuration with documentation, as printed by `--print-schema`.
pub const SCHEMA: &str = r#"# forced-waves run configuration (TOML). Unknown keys are rejected.
# Values shown are the defaults; [model] has no defaults.

# scenario = "eu"          # eu | estar | estable | necessary-only
# speed = 2.5              # shift speed s > 0
# output_dir = "out"       # overridden by --out

[model]                    # required
d = 1.0
r1 = 1.0
r2 = 2.0
r3 = 1.0
a = 2.0
b = 0.1
h = 0.5
k = 1.5

[shift]
family = "sigmoid"         # sigmoid | sigmoid-with-bump | tabulated
m = 2.0                    # alpha(z) = -m / (1 + exp(-rho z))
rho = 1.5                  # envelope decay rate
K = 1.0                    # transition location bound
# amplitude = 0.1          # sigmoid-with-bump: Gaussian dip height
# center = 0.0             # sigmoid-with-bump: dip centre
# width = 1.0              # sigmoid-with-bump: dip width
# table = "alpha.csv"      # tabulated: two-column (z, alpha) file
# c = 2.0                  # tabulated: envelope constant

[grid]
n = 8001                   # at least 401
# half_width = 50.0        # symmetric [-L, L]; default sizes each end by its slowest decay

[solver]
tol = 1e-10                # residual sup-norm
max_iterations = 200
max_halvings = 30
sandwich_tol = 1e-8

[bounds]
# construction = "eu-super"  # eu-super | eu-critical | estar-super | estar-critical
verify_tol = 1e-10
verify_lo = -60.0
verify_hi = 60.0
verify_points = 12001

[bounds.overrides]         # any of: epsilon mu1 mu2 nu1 q1 q2 q3 q4 eta1 eta2
# q1 = 1.01

[simulation]
t_end = 50.0
snapshot_every = 10.0
# dt = 0.01                # default 0.25 / reaction Lipschitz bound
left = "dirichlet"         # dirichlet (invaded state) | neumann
initial = "wave"           # wave | perturbed-wave | bounds-midpoint | pulses
perturbation = 0.05        # relative noise for perturbed-wave
seed = 0

[extinction]
variant = "large-k"        # large-k | subcritical
threshold = 1e-4
dwell = 10.0

[sweep]
speeds = []                # run the subcommand once per speed (see --jobs)
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_parses_to_defaults() {
        let cfg = RunConfig::parse(SCHEMA).unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.solver, SolverBlock::default());
        assert_eq!(cfg.bounds, BoundsBlock::default());
        assert_eq!(cfg.simulation, SimulationBlock::default());
        assert_eq!(cfg.shift, ShiftConfig::default());
        assert_eq!(cfg.model.r2, 2.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SCHEMA.replace("[grid]\n", "[grid]\nbogus = 1\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn partial_blocks_take_defaults() {
        let cfg = RunConfig::parse(
            "[model]\nd = 1.0\nr1 = 1.0\nr2 = 2.0\nr3 = 1.0\na = 2.0\nb = 0.1\nh = 0.5\nk = 1.5\n\
             [bounds.overrides]\nq1 = 1.01\n[simulation]\nt_end = 5.0\n",
        )
        .unwrap();
        assert_eq!(cfg.bounds.overrides.q1, Some(1.01));
        assert_eq!(cfg.bounds.verify_points, 12001);
        assert_eq!(cfg.simulation.t_end, 5.0);
        assert_eq!(cfg.simulation.snapshot_every, 10.0);
    }

    #[test]
    fn model_block_is_required() {
        assert!(RunConfig::parse("speed = 1.0\n").is_err());
    }
}
