//! Built-in scenarios: a process, a grid size, an ε-schedule and, for the
//! orthogonality suite, an optional independent Brownian summand.

use serde::Serialize;

use crate::error::SimError;
use crate::jumps::JumpLaw;
use crate::paths::CadlagPath;
use crate::regularize::{EpsilonSchedule, DEFAULT_EPS_BASE, DEFAULT_EPS_COUNT};
use crate::simulate::{self, BracketLaw, Deterministic, LabeledDecomposition, ProcessKind, Regime, Role, SimSpec, Simulation};

/// Stream offset for the added Brownian summand, so it never coincides with the base path.
const SUMMAND_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Scenario {
    pub id: &'static str,
    pub kind: ProcessKind,
    pub n: usize,
    pub eps_base: f64,
    pub eps_ratio: f64,
    pub eps_count: usize,
    /// Adds an independent standard Brownian motion to the base process.
    pub plus_brownian: bool,
    /// Quadratic variation is expected not to converge.
    pub expected_fail: bool,
    pub anchor: &'static str,
}

const N: usize = 65_536;
const NORMAL: JumpLaw = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
const FBM_N: usize = 4096;
/// Jumps against Brownian increments leave a sqrt(eps) cross term, so these need a finer grid.
const JUMP_BM_N: usize = 1 << 18;
const STEP: ProcessKind = ProcessKind::Deterministic { shape: Deterministic::Step { at: 0.5, size: 1.0 } };
const CP: ProcessKind = ProcessKind::CompoundPoisson { rate: 5.0, law: NORMAL };
const PDP: ProcessKind = ProcessKind::Pdp { rate: 3.0, regime: Regime::Linear { slope: 1.0 }, law: NORMAL };
const FBM07: ProcessKind = ProcessKind::Fbm { hurst: 0.7 };

const fn base(id: &'static str, kind: ProcessKind, anchor: &'static str) -> Scenario {
    Scenario {
        id,
        kind,
        n: N,
        eps_base: DEFAULT_EPS_BASE,
        eps_ratio: 2.0,
        eps_count: DEFAULT_EPS_COUNT,
        plus_brownian: false,
        expected_fail: false,
        anchor,
    }
}

const fn with_bm(mut s: Scenario) -> Scenario {
    s.plus_brownian = true;
    s
}

const fn sized(mut s: Scenario, n: usize, eps_base: f64, eps_count: usize) -> Scenario {
    s.n = n;
    s.eps_base = eps_base;
    s.eps_count = eps_count;
    s
}

pub const SCENARIOS: &[Scenario] = &[
    base("bm", ProcessKind::Brownian { sigma: 1.0 }, "Brownian motion: [X,X] = t"),
    base("poisson", ProcessKind::Poisson { rate: 5.0 }, "Poisson process: [X,X] = number of jumps"),
    base("cp", CP, "compound Poisson, N(0,1) sizes: bracket jumps equal squared jumps"),
    base(
        "jd",
        ProcessKind::JumpDiffusion { drift: 0.5, sigma: 1.0, rate: 3.0, law: JumpLaw::Normal { mean: 0.1, sd: 0.5 } },
        "jump diffusion: semimartingale with both martingale parts",
    ),
    sized(base("fbm07", FBM07, "fBm H = 0.7: zero quadratic variation, weak Dirichlet"), FBM_N, 0.3, 6),
    Scenario {
        expected_fail: true,
        eps_ratio: 4.0,
        ..sized(base("fbm02", ProcessKind::Fbm { hurst: 0.2 }, "fBm H = 0.2: infinite quadratic variation"), FBM_N, 0.4, 3)
    },
    sized(
        base(
            "convolution_martingale",
            ProcessKind::ConvolutionMartingale,
            "convolution martingale: not a semimartingale, [X,X] = t^2/2",
        ),
        8192,
        0.05,
        5,
    ),
    base("pdp", PDP, "piecewise deterministic process: special weak Dirichlet"),
    base("step", STEP, "cadlag deterministic function: orthogonal and bounded variation"),
    with_bm(sized(base("step_bm", STEP, "step+BM: deterministic cadlag function plus Brownian motion"), JUMP_BM_N, 0.05, 10)),
    with_bm(sized(base("fbm_bm", FBM07, "fBm+BM: fBm H = 0.7 plus an independent Brownian motion"), FBM_N, 0.3, 6)),
    with_bm(sized(base("cp_bm", CP, "pure-jump+BM: compound Poisson plus Brownian motion"), JUMP_BM_N, 0.05, 10)),
    with_bm(sized(base("pdp_bm", PDP, "PDP+BM: piecewise deterministic process plus Brownian motion"), JUMP_BM_N, 0.05, 10)),
];

/// Process generators by kind name, with what each exercises.
pub const PROCESSES: &[(&str, &str)] = &[
    ("brownian", "sigma W: continuous martingale, [X,X] = sigma^2 t"),
    ("poisson", "counting process with compensator rate t"),
    ("compound_poisson", "exact jump times, sizes from a Dirac, normal or uniform law"),
    ("jump_diffusion", "drift, Brownian part and compound Poisson jumps"),
    ("fbm", "fractional Brownian motion, exact covariance; weak Dirichlet for H > 1/2"),
    ("convolution_martingale", "integral of B(t - s) against dW for an independent Brownian B: [X,X] = t^2/2"),
    ("pdp", "piecewise deterministic regimes switched at exponential times"),
    ("deterministic", "constant, linear or step function: bounded variation and orthogonal"),
];

pub fn scenario(id: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.id == id)
}

/// A simulated scenario together with the pieces the orthogonality suite needs.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub sim: Simulation,
    /// X minus its continuous martingale part.
    pub candidate: CadlagPath,
    /// The continuous martingale part minus X_0, when it is not identically zero.
    pub control: Option<CadlagPath>,
}

impl Scenario {
    pub fn spec(&self, seed: u64) -> SimSpec {
        SimSpec::new(self.kind, self.n, seed)
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule::geometric(self.eps_base, self.eps_ratio, self.eps_count).expect("catalog schedules are valid")
    }

    pub fn run(&self, seed: u64) -> Result<ScenarioRun, SimError> {
        self.run_spec(&self.spec(seed))
    }

    /// Runs the scenario on a caller-adjusted spec (grid size, horizon, start).
    pub fn run_spec(&self, spec: &SimSpec) -> Result<ScenarioRun, SimError> {
        let mut sim = simulate::simulate(spec)?;
        if self.plus_brownian {
            let w = simulate::brownian_on_grid(sim.path.grid(), spec.seed ^ SUMMAND_SALT)?;
            add_brownian(&mut sim, &w)?;
        }
        let x0 = sim.path.values()[0];
        let mc = sim.truth.decomposition.as_ref().and_then(|d| d.get(Role::Mc)).cloned();
        let candidate = match &mc {
            Some(mc) => sim.path.sub(mc)?,
            None => sim.path.map(|_, v| v - x0),
        };
        let control = mc.map(|m| m.map(|_, v| v - x0)).filter(|m| m.sup_norm() > 0.0);
        Ok(ScenarioRun { sim, candidate, control })
    }
}

fn add_brownian(sim: &mut Simulation, w: &CadlagPath) -> Result<(), SimError> {
    sim.path = sim.path.add(w)?;
    let truth = &mut sim.truth;
    truth.bracket = match truth.bracket {
        BracketLaw::Linear { sigma2 } => BracketLaw::Linear { sigma2: sigma2 + 1.0 },
        BracketLaw::Zero => BracketLaw::Linear { sigma2: 1.0 },
        other => other,
    };
    if let Some(d) = truth.decomposition.as_mut() {
        let mut components = Vec::with_capacity(d.components.len());
        for (role, p) in d.components.drain(..) {
            components.push(if role == Role::Mc { (role, p.add(w)?) } else { (role, p) });
        }
        *d = LabeledDecomposition { components, ..d.clone() };
    }
    Ok(())
}
