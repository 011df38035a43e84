//! Seeded path generators with ground-truth metadata.
//!
//! Brownian drivers are built coarse-to-fine: with `n = m·2^L` (m odd) the
//! `m` base cells and any inserted jump times are filled by a sequential walk,
//! then each dyadic level adds Brownian-bridge midpoints from its own stream.
//! Doubling `n` therefore only appends a level and leaves every shared grid
//! value untouched.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DirichletError, SimError};
use crate::jumps::{self, CompensatorSpec, IntegrandField, JumpLaw, UserCompensator};
use crate::paths::{uniform_grid, CadlagPath, Interpolation};
use crate::rng::{self, Rng};

/// Largest grid accepted by the exact-covariance fBm generator.
pub const FBM_MAX_N: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// R_n ≡ c_n.
    Constant,
    /// R_n(t) = c_n + slope·(t − T_n).
    Linear { slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Deterministic {
    Constant,
    Linear { slope: f64 },
    Step { at: f64, size: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    Brownian {
        sigma: f64,
    },
    Poisson {
        rate: f64,
    },
    CompoundPoisson {
        rate: f64,
        law: JumpLaw,
    },
    JumpDiffusion {
        drift: f64,
        sigma: f64,
        rate: f64,
        law: JumpLaw,
    },
    Fbm {
        hurst: f64,
    },
    ConvolutionMartingale,
    /// Switches at exponential times of the given rate to a level drawn from `law`.
    Pdp {
        rate: f64,
        regime: Regime,
        law: JumpLaw,
    },
    Deterministic {
        shape: Deterministic,
    },
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Brownian { .. } => "brownian",
            Self::Poisson { .. } => "poisson",
            Self::CompoundPoisson { .. } => "compound_poisson",
            Self::JumpDiffusion { .. } => "jump_diffusion",
            Self::Fbm { .. } => "fbm",
            Self::ConvolutionMartingale => "convolution_martingale",
            Self::Pdp { .. } => "pdp",
            Self::Deterministic { .. } => "deterministic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub kind: ProcessKind,
    /// Number of uniform cells; jump times are inserted on top.
    pub n: usize,
    pub horizon: f64,
    pub x0: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(kind: ProcessKind, n: usize, seed: u64) -> Self {
        Self { kind, n, horizon: 1.0, x0: 0.0, seed }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        fn nonneg(name: &'static str, v: f64) -> Result<(), SimError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SimError::Parameter { name, value: v })
            }
        }
        fn finite(name: &'static str, v: f64) -> Result<(), SimError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Parameter { name, value: v })
            }
        }
        nonneg("T", self.horizon)?;
        finite("x0", self.x0)?;
        if self.n < 2 && self.horizon > 0.0 {
            return Err(SimError::Resolution(self.n));
        }
        let jump_law = |law: &JumpLaw| -> Result<(), SimError> {
            law.validate()?;
            if let JumpLaw::Dirac { at: 0.0 } = law {
                return Err(SimError::Parameter { name: "jump size", value: 0.0 });
            }
            Ok(())
        };
        match &self.kind {
            ProcessKind::Brownian { sigma } => nonneg("sigma", *sigma),
            ProcessKind::Poisson { rate } => {
                if *rate > 0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::Parameter { name: "rate", value: *rate })
                }
            }
            ProcessKind::CompoundPoisson { rate, law } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(SimError::Parameter { name: "rate", value: *rate });
                }
                jump_law(law)
            }
            ProcessKind::JumpDiffusion { drift, sigma, rate, law } => {
                finite("drift", *drift)?;
                nonneg("sigma", *sigma)?;
                nonneg("rate", *rate)?;
                jump_law(law)
            }
            ProcessKind::Fbm { hurst } => {
                if *hurst > 0.0 && *hurst < 1.0 {
                    Ok(())
                } else {
                    Err(SimError::Parameter { name: "hurst", value: *hurst })
                }
            }
            ProcessKind::ConvolutionMartingale => Ok(()),
            ProcessKind::Pdp { rate, regime, law } => {
                nonneg("rate", *rate)?;
                if let Regime::Linear { slope } = regime {
                    finite("slope", *slope)?;
                }
                Ok(law.validate()?)
            }
            ProcessKind::Deterministic { shape } => match *shape {
                Deterministic::Constant => Ok(()),
                Deterministic::Linear { slope } => finite("slope", slope),
                Deterministic::Step { at, size } => {
                    finite("step size", size)?;
                    if at > 0.0 && at < self.horizon {
                        Ok(())
                    } else {
                        Err(SimError::Parameter { name: "step time", value: at })
                    }
                }
            },
        }
    }
}

/// Closed form of [X,X], where one is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "bracket", rename_all = "snake_case")]
pub enum BracketLaw {
    /// σ²t + Σ_{s≤t} (ΔX_s)².
    Linear {
        sigma2: f64,
    },
    /// t²/2.
    HalfSquare,
    Zero,
    /// Infinite quadratic variation.
    Divergent,
}

impl BracketLaw {
    /// The bracket as a path on the grid of `x`, or `None` when divergent.
    pub fn bracket_path(&self, x: &CadlagPath) -> Option<CadlagPath> {
        let g = x.grid().to_vec();
        match *self {
            Self::Linear { sigma2 } => {
                let mut acc = 0.0;
                let (mut v, mut l) = (Vec::with_capacity(g.len()), Vec::with_capacity(g.len()));
                for (i, &t) in g.iter().enumerate() {
                    let base = sigma2 * t;
                    l.push(base + acc);
                    if x.is_jump(i) {
                        acc += (x.values()[i] - x.left_values()[i]).powi(2);
                    }
                    v.push(base + acc);
                }
                CadlagPath::from_limits(g, v, l).ok()
            }
            Self::HalfSquare => CadlagPath::from_fn(g, |t| 0.5 * t * t).ok(),
            Self::Zero => CadlagPath::from_fn(g, |_| 0.0).ok(),
            Self::Divergent => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Mc,
    Md,
    A,
    V,
    APrime,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Self::Mc => "M_c",
            Self::Md => "M_d",
            Self::A => "A",
            Self::V => "V",
            Self::APrime => "A_prime",
        }
    }
}

/// Named components whose sum is the simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDecomposition {
    pub components: Vec<(Role, CadlagPath)>,
    pub a_predictable: bool,
    pub v_bounded_variation: bool,
}

impl LabeledDecomposition {
    pub fn get(&self, role: Role) -> Option<&CadlagPath> {
        self.components.iter().find(|c| c.0 == role).map(|c| &c.1)
    }

    pub fn require(&self, role: Role) -> Result<&CadlagPath, DirichletError> {
        self.get(role).ok_or(DirichletError::MissingLabel(role.label()))
    }

    pub fn roles(&self) -> Vec<Role> {
        self.components.iter().map(|c| c.0).collect()
    }

    pub fn sum(&self) -> Option<CadlagPath> {
        let mut it = self.components.iter();
        let first = it.next()?.1.clone();
        it.try_fold(first, |acc, c| acc.add(&c.1).ok())
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub spec: SimSpec,
    /// (time, size) for every marked jump.
    pub jumps: Vec<(f64, f64)>,
    pub bracket: BracketLaw,
    pub decomposition: Option<LabeledDecomposition>,
    pub compensator: CompensatorSpec,
    pub regime_boundaries: Vec<f64>,
    pub semimartingale: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundTruthJson<'a> {
    pub schema_version: u32,
    pub spec: &'a SimSpec,
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
    pub bracket: BracketLaw,
    pub decomposition_roles: Vec<Role>,
    pub a_predictable: Option<bool>,
    pub compensator: &'a CompensatorSpec,
    pub regime_boundaries: &'a [f64],
    pub semimartingale: bool,
}

impl GroundTruth {
    pub fn to_json(&self) -> GroundTruthJson<'_> {
        GroundTruthJson {
            schema_version: 1,
            spec: &self.spec,
            jump_times: self.jumps.iter().map(|j| j.0).collect(),
            jump_sizes: self.jumps.iter().map(|j| j.1).collect(),
            bracket: self.bracket,
            decomposition_roles: self.decomposition.as_ref().map(|d| d.roles()).unwrap_or_default(),
            a_predictable: self.decomposition.as_ref().map(|d| d.a_predictable),
            compensator: &self.compensator,
            regime_boundaries: &self.regime_boundaries,
            semimartingale: self.semimartingale,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub path: CadlagPath,
    pub truth: GroundTruth,
}

/// Dispatches on the process kind.
pub fn simulate(spec: &SimSpec) -> Result<Simulation, SimError> {
    spec.validate()?;
    match spec.kind {
        ProcessKind::Brownian { .. } => brownian(spec),
        ProcessKind::Poisson { .. } | ProcessKind::CompoundPoisson { .. } => compound_poisson(spec),
        ProcessKind::JumpDiffusion { .. } => jump_diffusion(spec),
        ProcessKind::Fbm { .. } => fbm(spec),
        ProcessKind::ConvolutionMartingale => convolution_martingale(spec),
        ProcessKind::Pdp { .. } => pdp(spec),
        ProcessKind::Deterministic { .. } => deterministic(spec),
    }
}

fn wrong_kind(expected: &'static str, spec: &SimSpec) -> SimError {
    SimError::Kind { expected, got: spec.kind.name() }
}

fn truth(spec: &SimSpec, path: &CadlagPath, bracket: BracketLaw) -> GroundTruth {
    GroundTruth {
        spec: *spec,
        jumps: path.jumps_of(),
        bracket,
        decomposition: None,
        compensator: CompensatorSpec::Zero,
        regime_boundaries: Vec::new(),
        semimartingale: true,
    }
}

fn trivial(spec: &SimSpec, bracket: BracketLaw) -> Result<Simulation, SimError> {
    let path = CadlagPath::constant(0.0, 0, spec.x0)?;
    let truth = truth(spec, &path, bracket);
    Ok(Simulation { path, truth })
}

fn normal(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Event times of a rate-`rate` Poisson process on (0, horizon).
fn arrival_times(rate: f64, horizon: f64, r: &mut Rng) -> Vec<f64> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp.sample(r);
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

/// Sorted union of the uniform grid and `extra` times in (0, T).
fn merged_grid(horizon: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let base = uniform_grid(horizon, n);
    let mut out = Vec::with_capacity(base.len() + extra.len());
    let (mut i, mut j) = (0, 0);
    while i < base.len() || j < extra.len() {
        let next = match (base.get(i), extra.get(j)) {
            (Some(&b), Some(&e)) if e < b => {
                j += 1;
                e
            }
            (Some(&b), Some(&e)) if e == b => {
                j += 1;
                i += 1;
                b
            }
            (Some(&b), _) => {
                i += 1;
                b
            }
            (None, Some(&e)) => {
                j += 1;
                e
            }
            (None, None) => unreachable!(),
        };
        if out.last().is_none_or(|&l| next > l) {
            out.push(next);
        }
    }
    out
}

/// Standard Brownian motion at every point of `merged_grid(horizon, n, extra)`.
fn brownian_skeleton(horizon: f64, n: usize, extra: &[f64], seed: u64) -> (Vec<f64>, Vec<f64>) {
    let levels = n.trailing_zeros();
    let m = n >> levels;
    let at = |j: usize| if j == n { horizon } else { horizon * j as f64 / n as f64 };
    let base: Vec<f64> = (0..=m).map(|k| at(k << levels)).collect();
    let mut times = merged_grid_from(&base, extra);
    let mut walk = rng::stream(seed, rng::STREAM_BROWNIAN);
    let mut w = Vec::with_capacity(times.len());
    w.push(0.0);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        w.push(w[k - 1] + dt.sqrt() * normal(&mut walk));
    }
    for level in 1..=levels {
        let step = 1usize << (levels - level);
        let count = m << (level - 1);
        let mut r = rng::stream(seed, rng::STREAM_BRIDGE_BASE + level as u64);
        let mut new = Vec::with_capacity(count);
        let mut hint = 0;
        for k in 0..count {
            let t = at((2 * k + 1) * step);
            while times[hint + 1] < t {
                hint += 1;
            }
            let (a, b) = (times[hint], times[hint + 1]);
            if b == t {
                // an inserted time coincides with the midpoint; it is already known
                continue;
            }
            let (wa, wb) = (w[hint], w[hint + 1]);
            let s = (t - a) / (b - a);
            let mean = wa + s * (wb - wa);
            let sd = ((t - a) * (b - t) / (b - a)).sqrt();
            new.push((t, mean + sd * normal(&mut r)));
        }
        let mut t2 = Vec::with_capacity(times.len() + new.len());
        let mut w2 = Vec::with_capacity(times.len() + new.len());
        let mut j = 0;
        for (k, &t) in times.iter().enumerate() {
            while j < new.len() && new[j].0 < t {
                t2.push(new[j].0);
                w2.push(new[j].1);
                j += 1;
            }
            t2.push(t);
            w2.push(w[k]);
        }
        times = t2;
        w = w2;
    }
    (times, w)
}

fn merged_grid_from(base: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = base.iter().chain(extra).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

pub fn brownian(spec: &SimSpec) -> Result<Simulation, SimError> {
    let ProcessKind::Brownian { sigma } = spec.kind else {
        return Err(wrong_kind("brownian", spec));
    };
    spec.validate()?;
    let bracket = BracketLaw::Linear { sigma2: sigma * sigma };
    if spec.horizon == 0.0 {
        return trivial(spec, bracket);
    }
    let (grid, w) = brownian_skeleton(spec.horizon, spec.n, &[], spec.seed);
    let values = w.iter().map(|w| spec.x0 + sigma * w).collect();
    let path = CadlagPath::with_rule(grid, values, &[], Interpolation::Linear)?;
    let mut truth = truth(spec, &path, bracket);
    truth.decomposition =
        Some(LabeledDecomposition { components: vec![(Role::Mc, path.clone())], a_predictable: true, v_bounded_variation: true });
    Ok(Simulation { path, truth })
}

/// Jump times and sizes of a compound Poisson process.
fn cp_jumps(rate: f64, law: &JumpLaw, horizon: f64, seed: u64) -> Vec<(f64, f64)> {
    let times = arrival_times(rate, horizon, &mut rng::stream(seed, rng::STREAM_JUMP_TIMES));
    let mut sizes = rng::stream(seed, rng::STREAM_JUMP_SIZES);
    times.into_iter().map(|t| (t, law.sample(&mut sizes))).collect()
}

/// Running jump sum on `grid`: (right values, left values).
fn jump_sums(grid: &[f64], jumps: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut acc = 0.0;
    let mut k = 0;
    let (mut v, mut l) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for &t in grid {
        l.push(acc);
        while k < jumps.len() && jumps[k].0 <= t {
            acc += jumps[k].1;
            k += 1;
        }
        v.push(acc);
    }
    (v, l)
}

fn linear_path(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<CadlagPath, SimError> {
    Ok(CadlagPath::from_fn(grid.to_vec(), f)?)
}

/// Poisson and compound Poisson paths: piecewise constant with exact jump times.
pub fn compound_poisson(spec: &SimSpec) -> Result<Simulation, SimError> {
    let (rate, law) = match spec.kind {
        ProcessKind::Poisson { rate } => (rate, JumpLaw::Dirac { at: 1.0 }),
        ProcessKind::CompoundPoisson { rate, law } => (rate, law),
        _ => return Err(wrong_kind("compound_poisson", spec)),
    };
    spec.validate()?;
    let bracket = BracketLaw::Linear { sigma2: 0.0 };
    if spec.horizon == 0.0 {
        return trivial(spec, bracket);
    }
    let jumps = cp_jumps(rate, &law, spec.horizon, spec.seed);
    let times: Vec<f64> = jumps.iter().map(|j| j.0).collect();
    let grid = merged_grid(spec.horizon, spec.n, &times);
    let (sums, _) = jump_sums(&grid, &jumps);
    let values: Vec<f64> = sums.iter().map(|s| spec.x0 + s).collect();
    let path = CadlagPath::piecewise_constant(grid.clone(), values)?;
    let mean = law.mean();
    let md = path.sub(&linear_path(&grid, |t| spec.x0 + rate * mean * t)?)?;
    let mut truth = truth(spec, &path, bracket);
    truth.compensator = match spec.kind {
        ProcessKind::Poisson { rate } => CompensatorSpec::Poisson { rate },
        _ => CompensatorSpec::CompoundPoisson { rate, law },
    };
    truth.decomposition = Some(LabeledDecomposition {
        components: vec![
            (Role::Mc, CadlagPath::with_rule(grid.clone(), vec![spec.x0; grid.len()], &[], Interpolation::Linear)?),
            (Role::Md, md),
            (Role::A, linear_path(&grid, |t| rate * mean * t)?),
        ],
        a_predictable: true,
        v_bounded_variation: true,
    });
    Ok(Simulation { path, truth })
}

pub fn poisson(spec: &SimSpec) -> Result<Simulation, SimError> {
    if !matches!(spec.kind, ProcessKind::Poisson { .. }) {
        return Err(wrong_kind("poisson", spec));
    }
    compound_poisson(spec)
}

/// x0 + b·t + σW + compound Poisson, with the Brownian part bridged at jump times.
pub fn jump_diffusion(spec: &SimSpec) -> Result<Simulation, SimError> {
    let ProcessKind::JumpDiffusion { drift, sigma, rate, law } = spec.kind else {
        return Err(wrong_kind("jump_diffusion", spec));
    };
    spec.validate()?;
    let bracket = BracketLaw::Linear { sigma2: sigma * sigma };
    if spec.horizon == 0.0 {
        return trivial(spec, bracket);
    }
    let jumps = cp_jumps(rate, &law, spec.horizon, spec.seed);
    let times: Vec<f64> = jumps.iter().map(|j| j.0).collect();
    let (grid, w) = brownian_skeleton(spec.horizon, spec.n, &times, spec.seed);
    let (sums, left_sums) = jump_sums(&grid, &jumps);
    let cont: Vec<f64> = grid.iter().zip(&w).map(|(t, w)| spec.x0 + drift * t + sigma * w).collect();
    let values = cont.iter().zip(&sums).map(|(c, s)| c + s).collect();
    let left = cont.iter().zip(&left_sums).map(|(c, s)| c + s).collect();
    let path = CadlagPath::from_limits(grid.clone(), values, left)?;
    let comp_drift = rate * law.mean();
    let mc = CadlagPath::with_rule(grid.clone(), w.iter().map(|w| spec.x0 + sigma * w).collect(), &[], Interpolation::Linear)?;
    let jumps_path = CadlagPath::from_limits(grid.clone(), sums, left_sums)?;
    let md = jumps_path.sub(&linear_path(&grid, |t| comp_drift * t)?)?;
    let mut truth = truth(spec, &path, bracket);
    truth.compensator = if rate > 0.0 { CompensatorSpec::CompoundPoisson { rate, law } } else { CompensatorSpec::Zero };
    truth.decomposition = Some(LabeledDecomposition {
        components: vec![(Role::Mc, mc), (Role::Md, md), (Role::A, linear_path(&grid, |t| (drift + comp_drift) * t)?)],
        a_predictable: true,
        v_bounded_variation: true,
    });
    Ok(Simulation { path, truth })
}

/// Dot product over eight independent lanes, so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    lanes.iter().sum::<f64>() + tail
}

/// Largest uniform grid accepted by the stationary-increment generator.
pub const FBM_UNIFORM_MAX_N: usize = 1 << 16;

#[derive(Debug, Clone)]
enum Factor {
    /// Row-major packed lower Cholesky triangle of the covariance at the grid points after 0.
    Cholesky(Vec<f64>),
    /// Durbin–Levinson reflection coefficients and innovation variances of
    /// the increment sequence on a uniform grid.
    Stationary { reflection: Vec<f64>, variance: Vec<f64> },
}

/// Exact Gaussian sampler for fBm on a fixed grid.
#[derive(Debug, Clone)]
pub struct FbmFactor {
    grid: Vec<f64>,
    hurst: f64,
    factor: Factor,
}

fn is_uniform(grid: &[f64]) -> bool {
    let h = grid[grid.len() - 1] / (grid.len() - 1) as f64;
    grid.iter().enumerate().all(|(i, &t)| (t - i as f64 * h).abs() <= 1e-12 * h.max(1.0))
}

impl FbmFactor {
    pub fn new(grid: Vec<f64>, hurst: f64) -> Result<Self, SimError> {
        let n = grid.len().saturating_sub(1);
        let uniform = n > 0 && is_uniform(&grid);
        let max = if uniform { FBM_UNIFORM_MAX_N } else { FBM_MAX_N };
        if n > max {
            return Err(SimError::FbmSize { n, max });
        }
        let factor = if uniform { Self::stationary(&grid, hurst)? } else { Self::cholesky(&grid, hurst)? };
        Ok(Self { grid, hurst, factor })
    }

    fn cholesky(grid: &[f64], hurst: f64) -> Result<Factor, SimError> {
        let n = grid.len().saturating_sub(1);
        let h2 = 2.0 * hurst;
        let cov = |s: f64, t: f64| 0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2));
        let row = |i: usize| i * (i + 1) / 2;
        let mut lower = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            for j in 0..=i {
                let mut s = cov(grid[i + 1], grid[j + 1]);
                let (ri, rj) = (row(i), row(j));
                s -= dot(&lower[ri..ri + j], &lower[rj..rj + j]);
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(SimError::Covariance);
                    }
                    lower[ri + i] = s.sqrt();
                } else {
                    lower[ri + j] = s / lower[rj + j];
                }
            }
        }
        Ok(Factor::Cholesky(lower))
    }

    fn stationary(grid: &[f64], hurst: f64) -> Result<Factor, SimError> {
        let n = grid.len() - 1;
        let h2 = 2.0 * hurst;
        let scale = (grid[n] / n as f64).powf(h2);
        let autocov: Vec<f64> = (0..n)
            .map(|k| {
                let k = k as f64;
                0.5 * scale * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
            })
            .collect();
        let mut reflection = vec![0.0; n];
        let mut variance = vec![autocov[0]; n];
        let mut phi: Vec<f64> = Vec::with_capacity(n);
        let mut prev = Vec::with_capacity(n);
        for k in 1..n {
            let acc: f64 = phi.iter().enumerate().map(|(j, p)| p * autocov[k - 1 - j]).sum();
            let kappa = (autocov[k] - acc) / variance[k - 1];
            prev.clone_from(&phi);
            for j in 0..phi.len() {
                phi[j] -= kappa * prev[prev.len() - 1 - j];
            }
            phi.push(kappa);
            reflection[k] = kappa;
            variance[k] = variance[k - 1] * (1.0 - kappa * kappa);
            if variance[k] <= 0.0 || !variance[k].is_finite() {
                return Err(SimError::Covariance);
            }
        }
        Ok(Factor::Stationary { reflection, variance })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// One fBm sample started at `x0`, drawing from the seed's fBm stream.
    pub fn sample(&self, x0: f64, seed: u64) -> Result<CadlagPath, SimError> {
        let n = self.grid.len() - 1;
        let mut r = rng::stream(seed, rng::STREAM_FBM);
        let z: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let mut values = Vec::with_capacity(n + 1);
        values.push(x0);
        match &self.factor {
            Factor::Cholesky(lower) => {
                for i in 0..n {
                    let start = i * (i + 1) / 2;
                    values.push(x0 + dot(&lower[start..=start + i], &z[..=i]));
                }
            }
            Factor::Stationary { reflection, variance, .. } => {
                // phi[j] multiplies the increment j + 1 steps back.
                let mut phi: Vec<f64> = Vec::with_capacity(n);
                let mut prev = Vec::with_capacity(n);
                let mut incs: Vec<f64> = Vec::with_capacity(n);
                for k in 0..n {
                    if k > 0 {
                        let kappa = reflection[k];
                        prev.clone_from(&phi);
                        for j in 0..phi.len() {
                            phi[j] -= kappa * prev[prev.len() - 1 - j];
                        }
                        phi.push(kappa);
                    }
                    let mean: f64 = phi.iter().zip(incs.iter().rev()).map(|(p, d)| p * d).sum();
                    let d = mean + variance[k].sqrt() * z[k];
                    incs.push(d);
                    values.push(values[k] + d);
                }
            }
        }
        Ok(CadlagPath::with_rule(self.grid.clone(), values, &[], Interpolation::Linear)?)
    }
}

pub fn fbm(spec: &SimSpec) -> Result<Simulation, SimError> {
    let ProcessKind::Fbm { hurst } = spec.kind else {
        return Err(wrong_kind("fbm", spec));
    };
    spec.validate()?;
    let bracket = if hurst > 0.5 {
        BracketLaw::Zero
    } else if hurst == 0.5 {
        BracketLaw::Linear { sigma2: 1.0 }
    } else {
        BracketLaw::Divergent
    };
    if spec.horizon == 0.0 {
        return trivial(spec, bracket);
    }
    let factor = FbmFactor::new(uniform_grid(spec.horizon, spec.n), hurst)?;
    let path = factor.sample(spec.x0, spec.seed)?;
    let mut truth = truth(spec, &path, bracket);
    truth.semimartingale = hurst == 0.5;
    let start = CadlagPath::with_rule(path.grid().to_vec(), vec![spec.x0; path.len()], &[], Interpolation::Linear)?;
    truth.decomposition = if hurst > 0.5 {
        Some(LabeledDecomposition {
            components: vec![(Role::Mc, start.clone()), (Role::A, path.sub(&start)?)],
            a_predictable: true,
            v_bounded_variation: false,
        })
    } else if hurst == 0.5 {
        Some(LabeledDecomposition { components: vec![(Role::Mc, path.clone())], a_predictable: true, v_bounded_variation: true })
    } else {
        None
    };
    Ok(Simulation { path, truth })
}

/// X(t_i) = x0 + Σ_{j<i} B(t_i − t_j)·(W(t_{j+1}) − W(t_j)) for independent Brownian W, B.
pub fn convolution_martingale(spec: &SimSpec) -> Result<Simulation, SimError> {
    if spec.kind != ProcessKind::ConvolutionMartingale {
        return Err(wrong_kind("convolution_martingale", spec));
    }
    spec.validate()?;
    if spec.horizon == 0.0 {
        return trivial(spec, BracketLaw::HalfSquare);
    }
    let n = spec.n;
    let grid = uniform_grid(spec.horizon, n);
    let sd = (spec.horizon / n as f64).sqrt();
    let mut rw = rng::stream(spec.seed, rng::STREAM_BROWNIAN);
    let dw: Vec<f64> = (0..n).map(|_| sd * normal(&mut rw)).collect();
    let mut rb = rng::stream(spec.seed, rng::STREAM_SECOND_DRIVER);
    let mut b = Vec::with_capacity(n + 1);
    b.push(0.0);
    for k in 0..n {
        b.push(b[k] + sd * normal(&mut rb));
    }
    let values: Vec<f64> = (0..=n).map(|i| spec.x0 + (0..i).map(|j| b[i - j] * dw[j]).sum::<f64>()).collect();
    let path = CadlagPath::with_rule(grid.clone(), values, &[], Interpolation::Linear)?;
    let mut truth = truth(spec, &path, BracketLaw::HalfSquare);
    truth.semimartingale = false;
    let start = CadlagPath::with_rule(grid, vec![spec.x0; n + 1], &[], Interpolation::Linear)?;
    truth.decomposition = Some(LabeledDecomposition {
        components: vec![(Role::Mc, start.clone()), (Role::A, path.sub(&start)?)],
        a_predictable: true,
        v_bounded_variation: false,
    });
    Ok(Simulation { path, truth })
}

/// Piecewise-deterministic path: regime k runs from T_k with level c_k, c_0 = x0.
pub fn pdp(spec: &SimSpec) -> Result<Simulation, SimError> {
    let ProcessKind::Pdp { rate, regime, law } = spec.kind else {
        return Err(wrong_kind("pdp", spec));
    };
    spec.validate()?;
    let bracket = BracketLaw::Linear { sigma2: 0.0 };
    if spec.horizon == 0.0 {
        return trivial(spec, bracket);
    }
    let switches = arrival_times(rate, spec.horizon, &mut rng::stream(spec.seed, rng::STREAM_JUMP_TIMES));
    if switches.windows(2).any(|w| w[1] <= w[0]) || switches.first().is_some_and(|&t| t <= 0.0) {
        return Err(SimError::SwitchTimes);
    }
    let mut rl = rng::stream(spec.seed, rng::STREAM_REGIMES);
    let mut starts = vec![0.0];
    starts.extend_from_slice(&switches);
    let levels: Vec<f64> = std::iter::once(spec.x0).chain(switches.iter().map(|_| law.sample(&mut rl))).collect();
    let slope = match regime {
        Regime::Constant => 0.0,
        Regime::Linear { slope } => slope,
    };
    let regime_at = |k: usize, t: f64| levels[k] + slope * (t - starts[k]);
    let grid = merged_grid(spec.horizon, spec.n, &switches);
    let mut k = 0;
    let (mut values, mut left) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for &t in &grid {
        let before = regime_at(k, t);
        while k + 1 < starts.len() && starts[k + 1] <= t {
            k += 1;
        }
        left.push(if starts[k] == t && k > 0 { regime_at(k - 1, t) } else { before });
        values.push(regime_at(k, t));
    }
    let path = if slope == 0.0 {
        CadlagPath::piecewise_constant(grid.clone(), values)?
    } else {
        CadlagPath::from_limits(grid.clone(), values, left)?
    };
    let compensator = CompensatorSpec::PostJumpLevel { rate, law };
    let md = jumps::compensated_integral(&IntegrandField::identity(), &path, &compensator)?;
    let start = CadlagPath::with_rule(grid, vec![spec.x0; path.len()], &[], Interpolation::Linear)?;
    let a = path.sub(&start)?.sub(&md)?;
    let mut truth = truth(spec, &path, bracket);
    truth.compensator = compensator;
    truth.regime_boundaries = switches;
    truth.decomposition = Some(LabeledDecomposition {
        components: vec![(Role::Mc, start), (Role::Md, md), (Role::A, a)],
        a_predictable: true,
        v_bounded_variation: true,
    });
    Ok(Simulation { path, truth })
}

pub fn deterministic(spec: &SimSpec) -> Result<Simulation, SimError> {
    let ProcessKind::Deterministic { shape } = spec.kind else {
        return Err(wrong_kind("deterministic", spec));
    };
    spec.validate()?;
    let bracket = match shape {
        Deterministic::Step { .. } => BracketLaw::Linear { sigma2: 0.0 },
        _ => BracketLaw::Zero,
    };
    if spec.horizon == 0.0 {
        return trivial(spec, bracket);
    }
    let x0 = spec.x0;
    let path = match shape {
        Deterministic::Constant => CadlagPath::constant(spec.horizon, spec.n, x0)?,
        Deterministic::Linear { slope } => linear_path(&uniform_grid(spec.horizon, spec.n), |t| x0 + slope * t)?,
        Deterministic::Step { at, size } => {
            let grid = merged_grid(spec.horizon, spec.n, &[at]);
            let values = grid.iter().map(|&t| if t >= at { x0 + size } else { x0 }).collect();
            CadlagPath::piecewise_constant(grid, values)?
        }
    };
    let mut truth = truth(spec, &path, bracket);
    let start = CadlagPath::with_rule(path.grid().to_vec(), vec![x0; path.len()], &[], Interpolation::Linear)?;
    let mut components = vec![(Role::Mc, start.clone())];
    if let Deterministic::Step { at, size } = shape {
        // A jump at a known time is its own compensator, so M_d vanishes.
        if at > 0.0 && at <= spec.horizon && size != 0.0 {
            truth.compensator = CompensatorSpec::UserSupplied(UserCompensator {
                rate: Arc::new(|_| 0.0),
                density: Arc::new(|_| 0.0),
                support: (0.0, 0.0),
                atoms: vec![(at, size, 1.0)],
            });
        }
        components.push((Role::Md, start.map(|_, _| 0.0)));
        components.push((Role::V, path.sub(&start)?));
    } else {
        components.push((Role::A, path.sub(&start)?));
    }
    truth.decomposition = Some(LabeledDecomposition { components, a_predictable: true, v_bounded_variation: true });
    Ok(Simulation { path, truth })
}

/// A fresh standard Brownian motion on an arbitrary grid, for test martingales.
pub fn brownian_on_grid(grid: &[f64], seed: u64) -> Result<CadlagPath, SimError> {
    let mut r = rng::stream(seed, rng::STREAM_BROWNIAN);
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    for w in grid.windows(2) {
        let last = *values.last().expect("nonempty");
        values.push(last + (w[1] - w[0]).sqrt() * normal(&mut r));
    }
    Ok(CadlagPath::with_rule(grid.to_vec(), values, &[], Interpolation::Linear)?)
}

/// Derived seeds for Monte Carlo drivers.
pub fn seed_sequence(master: u64, count: usize) -> Vec<u64> {
    let mut r = rng::stream(master, rng::STREAM_REGIMES + 1);
    (0..count).map(|_| r.random()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ProcessKind, n: usize) -> SimSpec {
        SimSpec::new(kind, n, 7)
    }

    #[test]
    fn brownian_basics() {
        let s = simulate(&spec(ProcessKind::Brownian { sigma: 1.0 }, 1000)).unwrap();
        assert_eq!(s.path.len(), 1001);
        assert_eq!(s.path.sum_squared_jumps(), 0.0);
        assert_eq!(s.path.grid(), uniform_grid(1.0, 1000).as_slice());
        let flat = simulate(&spec(ProcessKind::Brownian { sigma: 0.0 }, 10)).unwrap();
        assert_eq!(flat.path.sup_norm(), 0.0);
    }

    #[test]
    fn refinement_keeps_shared_points() {
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let kinds = [
            ProcessKind::Brownian { sigma: 1.0 },
            ProcessKind::Poisson { rate: 3.0 },
            ProcessKind::CompoundPoisson { rate: 3.0, law },
            ProcessKind::JumpDiffusion { drift: 0.5, sigma: 1.0, rate: 3.0, law },
        ];
        for kind in kinds {
            let coarse = simulate(&spec(kind, 48)).unwrap().path;
            let fine = simulate(&spec(kind, 96)).unwrap().path;
            for (i, &t) in coarse.grid().iter().enumerate() {
                let k = fine.grid().iter().position(|&g| g == t).unwrap();
                assert_eq!(fine.values()[k], coarse.values()[i], "{kind:?} at {t}");
                assert_eq!(fine.left_values()[k], coarse.left_values()[i]);
            }
        }
    }

    #[test]
    fn poisson_unit_jumps() {
        let s = simulate(&spec(ProcessKind::Poisson { rate: 2.0 }, 50)).unwrap();
        let count = s.path.terminal();
        assert_eq!(s.path.sum_squared_jumps(), count);
        assert_eq!(s.truth.jumps, s.path.jumps_of());
        assert!(s.truth.jumps.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn jump_diffusion_degenerate() {
        let k = ProcessKind::JumpDiffusion { drift: 1.0, sigma: 0.0, rate: 0.0, law: JumpLaw::Dirac { at: 1.0 } };
        let s = simulate(&spec(k, 20).with_x0(2.0)).unwrap();
        for (t, v) in s.path.grid().iter().zip(s.path.values()) {
            assert!((v - (2.0 + t)).abs() < 1e-15);
        }
    }

    #[test]
    fn decompositions_sum_to_path() {
        let law = JumpLaw::Uniform { lo: -1.0, hi: 2.0 };
        let kinds = [
            ProcessKind::Brownian { sigma: 1.0 },
            ProcessKind::CompoundPoisson { rate: 3.0, law },
            ProcessKind::JumpDiffusion { drift: 0.5, sigma: 1.0, rate: 3.0, law },
            ProcessKind::Fbm { hurst: 0.7 },
            ProcessKind::ConvolutionMartingale,
            ProcessKind::Pdp { rate: 4.0, regime: Regime::Linear { slope: -1.0 }, law },
            ProcessKind::Deterministic { shape: Deterministic::Step { at: 0.5, size: 1.0 } },
        ];
        for kind in kinds {
            let s = simulate(&spec(kind, 64).with_x0(0.3)).unwrap();
            let d = s.truth.decomposition.unwrap();
            assert!(d.sum().unwrap().sup_distance(&s.path).unwrap() < 1e-12, "{kind:?}");
            if let Some(md) = d.get(Role::Md) {
                let predictable = d.get(Role::V).map_or(0, |v| v.jumps_of().len());
                assert_eq!(md.jumps_of().len() + predictable, s.path.jumps_of().len(), "{kind:?}");
            }
        }
    }

    #[test]
    fn pdp_shapes() {
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let step = simulate(&spec(ProcessKind::Pdp { rate: 5.0, regime: Regime::Constant, law }, 40)).unwrap();
        assert_eq!(step.path.rule(), Interpolation::PiecewiseConstant);
        assert_eq!(step.truth.regime_boundaries.len(), step.truth.jumps.len());
        let line = simulate(&spec(ProcessKind::Pdp { rate: 0.0, regime: Regime::Linear { slope: 1.0 }, law }, 40)).unwrap();
        assert!(!line.path.has_jumps());
        assert!((line.path.terminal() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fbm_half_is_brownian_covariance() {
        let f = FbmFactor::new(uniform_grid(1.0, 8), 0.5).unwrap();
        let Factor::Stationary { reflection, variance } = &f.factor else { panic!("uniform grid") };
        assert!(reflection.iter().all(|k| k.abs() < 1e-14));
        assert!(variance.iter().all(|v| (v - 0.125).abs() < 1e-14));
        let ragged = vec![0.0, 0.1, 0.3, 0.35, 1.0];
        assert!(matches!(FbmFactor::new(ragged, 0.5).unwrap().factor, Factor::Cholesky(_)));
        assert!(matches!(FbmFactor::new(uniform_grid(1.0, FBM_UNIFORM_MAX_N + 1), 0.3), Err(SimError::FbmSize { .. })));
    }

    #[test]
    fn stationary_sampler_equals_cholesky() {
        for hurst in [0.2, 0.5, 0.8] {
            let grid = uniform_grid(2.0, 300);
            let fast = FbmFactor::new(grid.clone(), hurst).unwrap();
            let slow = FbmFactor { grid: grid.clone(), hurst, factor: FbmFactor::cholesky(&grid, hurst).unwrap() };
            let (a, b) = (fast.sample(0.5, 4).unwrap(), slow.sample(0.5, 4).unwrap());
            assert!(a.sup_distance(&b).unwrap() < 1e-10, "H={hurst}");
        }
    }

    #[test]
    fn errors_and_trivial_horizon() {
        assert!(simulate(&spec(ProcessKind::Poisson { rate: 0.0 }, 10)).is_err());
        assert!(simulate(&spec(ProcessKind::Fbm { hurst: 1.0 }, 10)).is_err());
        assert!(simulate(&spec(ProcessKind::Brownian { sigma: -1.0 }, 10)).is_err());
        assert!(matches!(simulate(&spec(ProcessKind::ConvolutionMartingale, 1)), Err(SimError::Resolution(1))));
        assert!(matches!(brownian(&spec(ProcessKind::ConvolutionMartingale, 4)), Err(SimError::Kind { .. })));
        let t0 = simulate(&spec(ProcessKind::ConvolutionMartingale, 10).with_horizon(0.0)).unwrap();
        assert_eq!(t0.path.len(), 1);
    }

    #[test]
    fn bracket_closed_forms() {
        let law = JumpLaw::Dirac { at: 2.0 };
        let s = simulate(&spec(ProcessKind::JumpDiffusion { drift: 0.0, sigma: 0.5, rate: 2.0, law }, 30)).unwrap();
        let b = s.truth.bracket.bracket_path(&s.path).unwrap();
        let expected = 0.25 + 4.0 * s.truth.jumps.len() as f64;
        assert!((b.terminal() - expected).abs() < 1e-12);
        assert!(BracketLaw::Divergent.bracket_path(&s.path).is_none());
    }
}
