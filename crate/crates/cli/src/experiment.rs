use std::path::PathBuf;

use clap::Args;
use regcalc::catalog::{self, Scenario, ScenarioRun};
use regcalc::jumps::JumpLaw;
use regcalc::paths::uniform_grid;
use regcalc::regularize::{DEFAULT_EPS_BASE, DEFAULT_EPS_COUNT, DEFAULT_TOLERANCE};
use regcalc::simulate::{seed_sequence, Deterministic, ProcessKind, Regime, SimSpec};
use regcalc::{CadlagPath, EpsilonSchedule};

use crate::config::ConfigFile;
use crate::error::CliError;

pub const DEFAULT_N: usize = 65_536;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TEST_SEEDS: usize = 3;

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Scenario id from the catalog (see `list`).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Process kind, for runs outside the catalog.
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of uniform grid cells.
    #[arg(long)]
    pub n: Option<usize>,
    /// Horizon T.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, help_heading = "Process")]
    pub sigma: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub rate: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub drift: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub hurst: Option<f64>,
    /// Jump law: normal, dirac or uniform.
    #[arg(long, help_heading = "Process")]
    pub law: Option<String>,
    #[arg(long, help_heading = "Process")]
    pub jump_mean: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub jump_sd: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub jump_at: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub jump_lo: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub jump_hi: Option<f64>,
    /// PDP regime: constant or linear.
    #[arg(long, help_heading = "Process")]
    pub regime: Option<String>,
    /// Slope of linear PDP regimes and of the linear deterministic shape.
    #[arg(long, help_heading = "Process")]
    pub slope: Option<f64>,
    /// Deterministic shape: constant, linear or step.
    #[arg(long, help_heading = "Process")]
    pub shape: Option<String>,
    #[arg(long, help_heading = "Process")]
    pub step_at: Option<f64>,
    #[arg(long, help_heading = "Process")]
    pub step_size: Option<f64>,

    /// First epsilon is T * eps_base / eps_ratio.
    #[arg(long, help_heading = "Schedule")]
    pub eps_base: Option<f64>,
    #[arg(long, help_heading = "Schedule")]
    pub eps_ratio: Option<f64>,
    #[arg(long, help_heading = "Schedule")]
    pub eps_count: Option<usize>,
    /// Relative Cauchy tolerance of the u.c.p. limit.
    #[arg(long, help_heading = "Schedule")]
    pub tol: Option<f64>,
    /// Small/big jump split.
    #[arg(long, help_heading = "Schedule")]
    pub threshold: Option<f64>,
    /// Number of Brownian test martingales in the orthogonality battery.
    #[arg(long, help_heading = "Schedule")]
    pub test_seeds: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub label: String,
    pub scenario: Scenario,
    pub spec: SimSpec,
    pub schedule: EpsilonSchedule,
    pub tol: f64,
    pub threshold: f64,
    pub test_seeds: Vec<u64>,
    pub out: PathBuf,
}

struct Resolver<'a> {
    args: &'a ExperimentArgs,
    cfg: &'a ConfigFile,
}

macro_rules! pick {
    ($r:expr, $field:ident) => {
        $r.cfg.pick($r.args.$field.clone(), stringify!($field))?
    };
}

fn default_kind(name: &str) -> Result<ProcessKind, CliError> {
    let normal = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
    Ok(match name {
        "brownian" => ProcessKind::Brownian { sigma: 1.0 },
        "poisson" => ProcessKind::Poisson { rate: 5.0 },
        "compound_poisson" => ProcessKind::CompoundPoisson { rate: 5.0, law: normal },
        "jump_diffusion" => ProcessKind::JumpDiffusion { drift: 0.0, sigma: 1.0, rate: 3.0, law: normal },
        "fbm" => ProcessKind::Fbm { hurst: 0.7 },
        "convolution_martingale" => ProcessKind::ConvolutionMartingale,
        "pdp" => ProcessKind::Pdp { rate: 3.0, regime: Regime::Linear { slope: 1.0 }, law: normal },
        "deterministic" => ProcessKind::Deterministic { shape: Deterministic::Step { at: 0.5, size: 1.0 } },
        other => return Err(CliError::Unknown { what: "process kind", id: other.into() }),
    })
}

impl Resolver<'_> {
    fn law(&self, current: JumpLaw) -> Result<JumpLaw, CliError> {
        let name: Option<String> = pick!(self, law);
        let base = match (name.as_deref(), current) {
            (None, law) => law,
            (Some("normal"), law @ JumpLaw::Normal { .. }) => law,
            (Some("dirac"), law @ JumpLaw::Dirac { .. }) => law,
            (Some("uniform"), law @ JumpLaw::Uniform { .. }) => law,
            (Some("normal"), _) => JumpLaw::Normal { mean: 0.0, sd: 1.0 },
            (Some("dirac"), _) => JumpLaw::Dirac { at: 1.0 },
            (Some("uniform"), _) => JumpLaw::Uniform { lo: -1.0, hi: 1.0 },
            (Some(other), _) => return Err(CliError::Unknown { what: "jump law", id: other.into() }),
        };
        Ok(match base {
            JumpLaw::Normal { mean, sd } => {
                JumpLaw::Normal { mean: pick!(self, jump_mean).unwrap_or(mean), sd: pick!(self, jump_sd).unwrap_or(sd) }
            }
            JumpLaw::Dirac { at } => JumpLaw::Dirac { at: pick!(self, jump_at).unwrap_or(at) },
            JumpLaw::Uniform { lo, hi } => {
                JumpLaw::Uniform { lo: pick!(self, jump_lo).unwrap_or(lo), hi: pick!(self, jump_hi).unwrap_or(hi) }
            }
        })
    }

    fn regime(&self, current: Regime) -> Result<Regime, CliError> {
        let name: Option<String> = pick!(self, regime);
        let slope: Option<f64> = pick!(self, slope);
        Ok(match (name.as_deref(), current) {
            (None | Some("linear"), Regime::Linear { slope: s }) => Regime::Linear { slope: slope.unwrap_or(s) },
            (Some("linear"), Regime::Constant) => Regime::Linear { slope: slope.unwrap_or(1.0) },
            (None | Some("constant"), _) => Regime::Constant,
            (Some(other), _) => return Err(CliError::Unknown { what: "regime", id: other.into() }),
        })
    }

    fn shape(&self, current: Deterministic) -> Result<Deterministic, CliError> {
        let name: Option<String> = pick!(self, shape);
        let current = match (name.as_deref(), current) {
            (None, s) => s,
            (Some("constant"), _) => Deterministic::Constant,
            (Some("linear"), s @ Deterministic::Linear { .. }) | (Some("step"), s @ Deterministic::Step { .. }) => s,
            (Some("linear"), _) => Deterministic::Linear { slope: 1.0 },
            (Some("step"), _) => Deterministic::Step { at: 0.5, size: 1.0 },
            (Some(other), _) => return Err(CliError::Unknown { what: "shape", id: other.into() }),
        };
        Ok(match current {
            Deterministic::Constant => Deterministic::Constant,
            Deterministic::Linear { slope } => Deterministic::Linear { slope: pick!(self, slope).unwrap_or(slope) },
            Deterministic::Step { at, size } => {
                Deterministic::Step { at: pick!(self, step_at).unwrap_or(at), size: pick!(self, step_size).unwrap_or(size) }
            }
        })
    }

    /// Applies the per-kind flags on top of `kind`.
    fn kind(&self, kind: ProcessKind) -> Result<ProcessKind, CliError> {
        let sigma = |s: f64| -> Result<f64, CliError> { Ok(pick!(self, sigma).unwrap_or(s)) };
        let rate = |r: f64| -> Result<f64, CliError> { Ok(pick!(self, rate).unwrap_or(r)) };
        Ok(match kind {
            ProcessKind::Brownian { sigma: s } => ProcessKind::Brownian { sigma: sigma(s)? },
            ProcessKind::Poisson { rate: r } => ProcessKind::Poisson { rate: rate(r)? },
            ProcessKind::CompoundPoisson { rate: r, law } => ProcessKind::CompoundPoisson { rate: rate(r)?, law: self.law(law)? },
            ProcessKind::JumpDiffusion { drift, sigma: s, rate: r, law } => ProcessKind::JumpDiffusion {
                drift: pick!(self, drift).unwrap_or(drift),
                sigma: sigma(s)?,
                rate: rate(r)?,
                law: self.law(law)?,
            },
            ProcessKind::Fbm { hurst } => ProcessKind::Fbm { hurst: pick!(self, hurst).unwrap_or(hurst) },
            ProcessKind::ConvolutionMartingale => ProcessKind::ConvolutionMartingale,
            ProcessKind::Pdp { rate: r, regime, law } => {
                ProcessKind::Pdp { rate: rate(r)?, regime: self.regime(regime)?, law: self.law(law)? }
            }
            ProcessKind::Deterministic { shape } => ProcessKind::Deterministic { shape: self.shape(shape)? },
        })
    }
}

impl Experiment {
    pub fn resolve(args: &ExperimentArgs, cfg: &ConfigFile, out: PathBuf) -> Result<Self, CliError> {
        let r = Resolver { args, cfg };
        let scenario_id: Option<String> = pick!(r, scenario);
        let kind_name: Option<String> = pick!(r, kind);
        let mut scenario = match (scenario_id.as_deref(), kind_name.as_deref()) {
            (Some(id), _) => *catalog::scenario(id).ok_or_else(|| CliError::Unknown { what: "scenario", id: id.into() })?,
            (None, Some(kind)) => Scenario {
                id: "custom",
                kind: default_kind(kind)?,
                n: DEFAULT_N,
                eps_base: DEFAULT_EPS_BASE,
                eps_ratio: 2.0,
                eps_count: DEFAULT_EPS_COUNT,
                plus_brownian: false,
                expected_fail: false,
                anchor: "user-defined process",
            },
            (None, None) => return Err(CliError::Config("give --scenario or --kind".into())),
        };
        if let (Some(_), Some(kind)) = (&scenario_id, &kind_name) {
            if kind != scenario.kind.name() {
                return Err(CliError::Config(format!(
                    "scenario {} is a {} process, not {kind}",
                    scenario.id,
                    scenario.kind.name()
                )));
            }
        }
        scenario.kind = r.kind(scenario.kind)?;
        scenario.n = pick!(r, n).unwrap_or(scenario.n);
        scenario.eps_base = pick!(r, eps_base).unwrap_or(scenario.eps_base);
        scenario.eps_ratio = pick!(r, eps_ratio).unwrap_or(scenario.eps_ratio);
        scenario.eps_count = pick!(r, eps_count).unwrap_or(scenario.eps_count);
        let seed = pick!(r, seed).unwrap_or(DEFAULT_SEED);
        let mut spec = scenario.spec(seed);
        spec.horizon = pick!(r, horizon).unwrap_or(spec.horizon);
        spec.x0 = pick!(r, x0).unwrap_or(spec.x0);
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let schedule = EpsilonSchedule::geometric(spec.horizon * scenario.eps_base, scenario.eps_ratio, scenario.eps_count)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let tol = pick!(r, tol).unwrap_or(DEFAULT_TOLERANCE);
        let threshold = pick!(r, threshold).unwrap_or(regcalc::ito::JUMP_THRESHOLD);
        let test_seeds = seed_sequence(seed, pick!(r, test_seeds).unwrap_or(DEFAULT_TEST_SEEDS));
        let label = if scenario.id == "custom" { scenario.kind.name().to_string() } else { scenario.id.to_string() };
        Ok(Self { label, scenario, spec, schedule, tol, threshold, test_seeds, out })
    }

    /// Simulates without looking at the schedule.
    pub fn sample(&self) -> Result<ScenarioRun, CliError> {
        Ok(self.scenario.run_spec(&self.spec)?)
    }

    /// Simulates after checking that the schedule fits the grid.
    pub fn run(&self) -> Result<ScenarioRun, CliError> {
        let probe = CadlagPath::from_fn(uniform_grid(self.spec.horizon, self.spec.n.max(1)), |t| t)
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.schedule
            .validate_for(&probe)
            .map_err(|e| CliError::Config(format!("schedule does not fit n = {}: {e}", self.spec.n)))?;
        self.sample()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: ExperimentArgs, cfg: &str) -> Result<Experiment, CliError> {
        Experiment::resolve(&args, &cfg.parse().unwrap(), PathBuf::from("out"))
    }

    #[test]
    fn flags_override_config_and_scenario() {
        let args = ExperimentArgs { scenario: Some("cp".into()), rate: Some(2.0), ..Default::default() };
        let e = resolve(args, "rate=9\nlaw=dirac\njump_at=0.5\nn=70000").unwrap();
        assert_eq!(e.spec.n, 70_000);
        assert_eq!(e.spec.kind, ProcessKind::CompoundPoisson { rate: 2.0, law: JumpLaw::Dirac { at: 0.5 } });
    }

    #[test]
    fn bad_references_and_schedules() {
        let unknown = resolve(ExperimentArgs { scenario: Some("nope".into()), ..Default::default() }, "");
        assert_eq!(unknown.unwrap_err().exit_code(), 2);
        let coarse = resolve(ExperimentArgs { kind: Some("brownian".into()), n: Some(100), ..Default::default() }, "").unwrap();
        assert!(coarse.sample().is_ok());
        assert!(matches!(coarse.run(), Err(CliError::Config(_))));
        let mismatch =
            resolve(ExperimentArgs { scenario: Some("bm".into()), kind: Some("fbm".into()), ..Default::default() }, "");
        assert!(matches!(mismatch, Err(CliError::Config(_))));
    }
}
