//! ε-regularized forward integrals and covariations, and the schedule driver
//! that follows them as ε decreases.
//!
//! The kernels integrate the interpolated paths exactly. The time axis is cut
//! at every grid point and at every grid point shifted back by ε; on each
//! resulting sub-cell both X(s) and X(s+ε) are linear, so Simpson's rule is
//! exact for every integrand used here (at most cubic). For each output time
//! t the integral splits into a bulk part over ]0, t−ε] and a boundary window
//! ]t−ε, t]. Two walkers sweep the sub-cells once each, one trailing at t−ε
//! and one leading at t, so all n outputs cost O(n).

use serde::Serialize;

use crate::error::RegError;
use crate::paths::CadlagPath;

pub const DEFAULT_TOLERANCE: f64 = 0.05;
pub const DEFAULT_EPS_BASE: f64 = 0.05;
pub const DEFAULT_EPS_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    eps: Vec<f64>,
}

impl EpsilonSchedule {
    pub fn new(eps: Vec<f64>) -> Result<Self, RegError> {
        if eps.len() < 2 {
            return Err(RegError::ShortSchedule);
        }
        if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(RegError::BadSchedule);
        }
        Ok(Self { eps })
    }

    /// `base · 2^{-k}` for `k = 1..=m`.
    pub fn dyadic(base: f64, m: usize) -> Result<Self, RegError> {
        Self::geometric(base, 2.0, m)
    }

    /// ε_k = base · ratio^{−k} for k = 1..m.
    pub fn geometric(base: f64, ratio: f64, m: usize) -> Result<Self, RegError> {
        Self::new((1..=m).map(|k| base * ratio.powi(-(k as i32))).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eps
    }

    pub fn last(&self) -> f64 {
        *self.eps.last().expect("schedule has at least two entries")
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest ε below `horizon` and smallest at least ten grid cells wide.
    pub fn validate_for(&self, path: &CadlagPath) -> Result<(), RegError> {
        let horizon = path.horizon();
        if self.eps[0] >= horizon {
            return Err(RegError::EpsilonRange { eps: self.eps[0], horizon });
        }
        let spacing = path.max_spacing();
        if self.last() < 10.0 * spacing * (1.0 - 1e-12) {
            return Err(RegError::ScheduleGrid { eps: self.last(), spacing });
        }
        Ok(())
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::dyadic(DEFAULT_EPS_BASE, DEFAULT_EPS_COUNT).expect("default schedule is valid")
    }
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.c
    }

    #[inline]
    fn minus(&self, o: &Self) -> f64 {
        (self.sum - o.sum) + (self.c - o.c)
    }
}

/// Sub-cell samples at the left end, midpoint and right end.
#[derive(Clone, Copy)]
struct Samples {
    w: f64,
    x: [f64; 3],
    xe: [f64; 3],
    y: [f64; 3],
    ye: [f64; 3],
}

#[inline]
fn simpson(w: f64, v: [f64; 3]) -> f64 {
    w / 6.0 * (v[0] + 4.0 * v[1] + v[2])
}

struct Nodes {
    t: Vec<f64>,
    lead: Vec<usize>,
    lag: Vec<usize>,
}

fn build_nodes(grid: &[f64], eps: f64) -> Nodes {
    let n = grid.len();
    let mut t = Vec::with_capacity(2 * n);
    let mut lead = vec![0usize; n];
    let mut lag = vec![0usize; n];
    let first_shift = grid.partition_point(|&g| g - eps <= 0.0);
    let (mut i, mut j) = (0usize, first_shift);
    while i < n || j < n {
        let gi = if i < n { grid[i] } else { f64::INFINITY };
        let sj = if j < n { grid[j] - eps } else { f64::INFINITY };
        let v = gi.min(sj);
        if t.last() != Some(&v) {
            t.push(v);
        }
        let k = t.len() - 1;
        if gi == v {
            lead[i] = k;
            i += 1;
        }
        if sj == v {
            lag[j] = k;
            j += 1;
        }
    }
    Nodes { t, lead, lag }
}

struct Walker<'a> {
    x: &'a CadlagPath,
    y: &'a CadlagPath,
    nodes: &'a [f64],
    eps: f64,
    cx: f64,
    cy: f64,
    k: usize,
    seg: usize,
    seg_e: usize,
}

impl<'a> Walker<'a> {
    fn new(x: &'a CadlagPath, y: &'a CadlagPath, nodes: &'a [f64], eps: f64, cx: f64, cy: f64) -> Self {
        Self { x, y, nodes, eps, cx, cy, k: 0, seg: 0, seg_e: 0 }
    }

    #[inline]
    fn next(&mut self) -> Samples {
        let (a, b) = (self.nodes[self.k], self.nodes[self.k + 1]);
        self.k += 1;
        let m = 0.5 * (a + b);
        let grid = self.x.grid();
        let last_cell = grid.len() - 2;
        while self.seg < last_cell && grid[self.seg + 1] <= m {
            self.seg += 1;
        }
        let s = self.seg;
        let x = [self.x.piece(s, a) - self.cx, self.x.piece(s, m) - self.cx, self.x.piece(s, b) - self.cx];
        let y = [self.y.piece(s, a) - self.cy, self.y.piece(s, m) - self.cy, self.y.piece(s, b) - self.cy];
        let me = m + self.eps;
        let (xe, ye) = if me >= self.x.horizon() {
            let (xt, yt) = (self.x.terminal() - self.cx, self.y.terminal() - self.cy);
            ([xt; 3], [yt; 3])
        } else {
            while self.seg_e < last_cell && grid[self.seg_e + 1] <= me {
                self.seg_e += 1;
            }
            let s = self.seg_e;
            let (ae, be) = (a + self.eps, b + self.eps);
            (
                [self.x.piece(s, ae) - self.cx, self.x.piece(s, me) - self.cx, self.x.piece(s, be) - self.cx],
                [self.y.piece(s, ae) - self.cy, self.y.piece(s, me) - self.cy, self.y.piece(s, be) - self.cy],
            )
        };
        Samples { w: b - a, x, xe, y, ye }
    }
}

fn check_eps(path: &CadlagPath, eps: f64) -> Result<(), RegError> {
    let horizon = path.horizon();
    if !(eps > 0.0 && eps < horizon) {
        return Err(RegError::EpsilonRange { eps, horizon });
    }
    let spacing = path.min_spacing();
    if eps < spacing {
        return Err(RegError::EpsilonBelowSpacing { eps, spacing });
    }
    Ok(())
}

/// Generic truncated-window kernel.
///
/// `bulk` gives the integrand of the un-truncated part at the three sample
/// points; `moments` the K window integrands; `boundary` combines window
/// integrals with the current (centered) values of X and Y at t.
fn window_kernel<const K: usize>(
    x: &CadlagPath,
    y: &CadlagPath,
    eps: f64,
    center: (f64, f64),
    bulk: impl Fn(&Samples) -> [f64; 3],
    moments: impl Fn(&Samples) -> [[f64; 3]; K],
    boundary: impl Fn(&[f64; K], f64, f64) -> f64,
) -> Result<CadlagPath, RegError> {
    let nodes = build_nodes(x.grid(), eps);
    let (cx, cy) = center;
    let mut lead = Walker::new(x, y, &nodes.t, eps, cx, cy);
    let mut lag = Walker::new(x, y, &nodes.t, eps, cx, cy);
    let mut s_lead = [Neumaier::default(); K];
    let mut s_lag = [Neumaier::default(); K];
    let mut b = Neumaier::default();
    let n = x.len();
    let mut values = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut window = [0.0; K];
    for m in 0..n {
        while lead.k < nodes.lead[m] {
            let s = lead.next();
            for (acc, v) in s_lead.iter_mut().zip(moments(&s)) {
                acc.add(simpson(s.w, v));
            }
        }
        while lag.k < nodes.lag[m] {
            let s = lag.next();
            b.add(simpson(s.w, bulk(&s)));
            for (acc, v) in s_lag.iter_mut().zip(moments(&s)) {
                acc.add(simpson(s.w, v));
            }
        }
        for q in 0..K {
            window[q] = s_lead[q].minus(&s_lag[q]);
        }
        let bv = b.value();
        values.push((bv + boundary(&window, x.values()[m] - cx, y.values()[m] - cy)) / eps);
        left.push((bv + boundary(&window, x.left_values()[m] - cx, y.left_values()[m] - cy)) / eps);
    }
    Ok(CadlagPath::from_limits(x.grid().to_vec(), values, left)?)
}

/// t ↦ ∫_{]0,t]} Y(s) (X((s+ε)∧t) − X(s)) / ε ds.
pub fn forward_integral(y: &CadlagPath, x: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
    let (x, y) = x.align(y)?;
    check_eps(&x, eps)?;
    let cx = x.values()[0];
    window_kernel::<2>(
        &x,
        &y,
        eps,
        (cx, 0.0),
        |s| [s.y[0] * (s.xe[0] - s.x[0]), s.y[1] * (s.xe[1] - s.x[1]), s.y[2] * (s.xe[2] - s.x[2])],
        |s| [s.y, [s.y[0] * s.x[0], s.y[1] * s.x[1], s.y[2] * s.x[2]]],
        |w, xt, _| xt * w[0] - w[1],
    )
}

/// t ↦ ∫_{]0,t]} (X((s+ε)∧t) − X(s)) (Y((s+ε)∧t) − Y(s)) / ε ds.
pub fn covariation(x: &CadlagPath, y: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
    let (x, y) = x.align(y)?;
    check_eps(&x, eps)?;
    let (cx, cy) = (x.values()[0], y.values()[0]);
    window_kernel::<4>(
        &x,
        &y,
        eps,
        (cx, cy),
        |s| {
            let f = |k: usize| (s.xe[k] - s.x[k]) * (s.ye[k] - s.y[k]);
            [f(0), f(1), f(2)]
        },
        |s| [[1.0; 3], s.x, s.y, [s.x[0] * s.y[0], s.x[1] * s.y[1], s.x[2] * s.y[2]]],
        |w, xt, yt| xt * yt * w[0] - xt * w[2] - yt * w[1] + w[3],
    )
}

/// ∫_{]0,t]} g(s) (X((s+ε)∧t) − X(s))² / ε ds for càglàd weights g.
pub fn weighted_qv(g: &CadlagPath, x: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
    let (x, g) = x.align(g)?;
    check_eps(&x, eps)?;
    let cx = x.values()[0];
    window_kernel::<3>(
        &x,
        &g,
        eps,
        (cx, 0.0),
        |s| {
            let f = |k: usize| s.y[k] * (s.xe[k] - s.x[k]).powi(2);
            [f(0), f(1), f(2)]
        },
        |s| {
            [
                s.y,
                [s.y[0] * s.x[0], s.y[1] * s.x[1], s.y[2] * s.x[2]],
                [s.y[0] * s.x[0] * s.x[0], s.y[1] * s.x[1] * s.x[1], s.y[2] * s.x[2] * s.x[2]],
            ]
        },
        |w, xt, _| xt * xt * w[0] - 2.0 * xt * w[1] + w[2],
    )
}

/// C_ε(X,Y)(t) = ∫_{]0,t]} (X(s+ε) − X(s)) (Y(s+ε) − Y(s)) / ε ds, paths extended past T by X(T).
pub fn covariation_continuous(x: &CadlagPath, y: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
    let (x, y) = x.align(y)?;
    check_eps(&x, eps)?;
    let (cx, cy) = (x.values()[0], y.values()[0]);
    let nodes = build_nodes(x.grid(), eps);
    let mut walk = Walker::new(&x, &y, &nodes.t, eps, cx, cy);
    let mut acc = Neumaier::default();
    let mut values = Vec::with_capacity(x.len());
    for m in 0..x.len() {
        while walk.k < nodes.lead[m] {
            let s = walk.next();
            let f = |k: usize| (s.xe[k] - s.x[k]) * (s.ye[k] - s.y[k]);
            acc.add(simpson(s.w, [f(0), f(1), f(2)]));
        }
        values.push(acc.value() / eps);
    }
    Ok(CadlagPath::from_limits(x.grid().to_vec(), values.clone(), values)?)
}

/// Prepends a constant piece of length ε at the start value, shifting time by ε.
fn extend_before_origin(p: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
    let mut grid = Vec::with_capacity(p.len() + 1);
    grid.push(0.0);
    grid.extend(p.grid().iter().map(|t| t + eps));
    let mut values = Vec::with_capacity(p.len() + 1);
    values.push(p.values()[0]);
    values.extend_from_slice(p.values());
    let mut left = Vec::with_capacity(p.len() + 1);
    left.push(p.values()[0]);
    left.push(p.values()[0]);
    left.extend_from_slice(&p.left_values()[1..]);
    Ok(CadlagPath::from_limits(grid, values, left)?)
}

/// The windowing with f and g frozen at f(0+), g(0+) before the origin:
/// ∫_ℝ Y_{t]}(s) (X_{t]}(s+ε) − X_{t]}(s)) / ε ds.
pub fn forward_integral_rv(y: &CadlagPath, x: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
    let (x, y) = x.align(y)?;
    check_eps(&x, eps)?;
    let (xe, ye) = (extend_before_origin(&x, eps)?, extend_before_origin(&y, eps)?);
    let shifted = forward_integral(&ye, &xe, eps)?;
    let values = shifted.values()[1..].to_vec();
    let mut left = shifted.left_values()[1..].to_vec();
    left[0] = values[0];
    Ok(CadlagPath::from_limits(x.grid().to_vec(), values, left)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RvGap {
    pub eps: f64,
    /// sup over t ≥ ε of I^{-RV} − I^{-ucp}; the difference is constant there.
    pub measured: f64,
    /// Y(0+) · (1/ε) ∫_0^ε (X(s) − X(0+)) ds.
    pub closed_form: f64,
    /// sup over t ≥ ε of |(I^{-RV} − I^{-ucp})(t) − closed_form|.
    pub deviation: f64,
    /// Same comparison for t < ε against Y(0+)(1/ε)∫_0^ε (X(s∧t) − X(0+)) ds.
    pub deviation_early: f64,
}

pub fn rv_ucp_gap(y: &CadlagPath, x: &CadlagPath, eps: f64) -> Result<RvGap, RegError> {
    let (x, y) = x.align(y)?;
    let ucp = forward_integral(&y, &x, eps)?;
    let rv = forward_integral_rv(&y, &x, eps)?;
    let diff = rv.sub(&ucp)?;
    let y0 = y.values()[0];
    let x0 = x.values()[0];
    let centered = x.map(|_, v| v - x0);
    let running = centered.running_integral();
    let closed_form = y0 * running.value_at(eps) / eps;
    let (mut measured, mut deviation, mut deviation_early) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for (i, &t) in x.grid().iter().enumerate() {
        let d = diff.values()[i];
        if t >= eps {
            measured = measured.max(d);
            deviation = deviation.max((d - closed_form).abs());
        } else {
            let c = y0 * (running.values()[i] + (eps - t) * centered.values()[i]) / eps;
            deviation_early = deviation_early.max((d - c).abs());
        }
    }
    Ok(RvGap { eps, measured, closed_form, deviation, deviation_early })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Covariation,
    CovariationContinuous,
    Forward,
    ForwardRv,
    WeightedQv,
}

impl Estimator {
    /// Evaluates the estimator; `second` is Y for covariations, the integrand
    /// for forward integrals and the weights for the weighted bracket.
    pub fn eval(self, x: &CadlagPath, second: &CadlagPath, eps: f64) -> Result<CadlagPath, RegError> {
        match self {
            Self::Covariation => covariation(x, second, eps),
            Self::CovariationContinuous => covariation_continuous(x, second, eps),
            Self::Forward => forward_integral(second, x, eps),
            Self::ForwardRv => forward_integral_rv(second, x, eps),
            Self::WeightedQv => weighted_qv(second, x, eps),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub epsilons: Vec<f64>,
    pub estimates: Vec<CadlagPath>,
    /// sup_t |E_{ε_{k+1}}(t) − E_{ε_k}(t)|, length m − 1.
    pub gaps: Vec<f64>,
    pub tolerance: f64,
    /// tolerance · max(1, sup|E_last|).
    pub threshold: f64,
    pub converged: bool,
    pub limit: Option<CadlagPath>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSummary {
    pub epsilons: Vec<f64>,
    pub gaps: Vec<f64>,
    pub tolerance: f64,
    pub threshold: f64,
    pub converged: bool,
    pub terminal_estimates: Vec<f64>,
}

impl LimitReport {
    pub fn last(&self) -> &CadlagPath {
        self.estimates.last().expect("schedule is non-empty")
    }

    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().expect("at least one gap")
    }

    /// Whether the gaps never decrease along the schedule.
    pub fn gaps_non_decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn summary(&self) -> LimitSummary {
        LimitSummary {
            epsilons: self.epsilons.clone(),
            gaps: self.gaps.clone(),
            tolerance: self.tolerance,
            threshold: self.threshold,
            converged: self.converged,
            terminal_estimates: self.estimates.iter().map(|e| e.terminal()).collect(),
        }
    }

    pub fn into_limit(self) -> Result<CadlagPath, RegError> {
        let gap = self.final_gap();
        self.limit.ok_or(RegError::NotConverged { gap })
    }
}

#[cfg(feature = "parallel")]
fn map_schedule<F>(eps: &[f64], f: F) -> Result<Vec<CadlagPath>, RegError>
where
    F: Fn(f64) -> Result<CadlagPath, RegError> + Sync,
{
    use rayon::prelude::*;
    eps.par_iter().map(|&e| f(e)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_schedule<F>(eps: &[f64], f: F) -> Result<Vec<CadlagPath>, RegError>
where
    F: Fn(f64) -> Result<CadlagPath, RegError> + Sync,
{
    eps.iter().map(|&e| f(e)).collect()
}

/// Runs an arbitrary ε-indexed estimator along the schedule.
pub fn ucp_limit_with<F>(schedule: &EpsilonSchedule, tol: f64, f: F) -> Result<LimitReport, RegError>
where
    F: Fn(f64) -> Result<CadlagPath, RegError> + Sync,
{
    let estimates = map_schedule(schedule.as_slice(), f)?;
    let gaps = estimates.windows(2).map(|w| w[1].sup_distance(&w[0])).collect::<Result<Vec<_>, _>>()?;
    let last = estimates.last().expect("schedule is non-empty");
    let threshold = tol * last.sup_norm().max(1.0);
    let converged = gaps.last().is_some_and(|&g| g < threshold);
    let limit = converged.then(|| last.clone());
    Ok(LimitReport { epsilons: schedule.as_slice().to_vec(), estimates, gaps, tolerance: tol, threshold, converged, limit })
}

pub fn ucp_limit(
    est: Estimator,
    x: &CadlagPath,
    second: Option<&CadlagPath>,
    schedule: &EpsilonSchedule,
    tol: f64,
) -> Result<LimitReport, RegError> {
    schedule.validate_for(x)?;
    let unit;
    let second = match second {
        Some(s) => {
            schedule.validate_for(s)?;
            s
        }
        None => {
            unit = match est {
                Estimator::Covariation | Estimator::CovariationContinuous => x.clone(),
                _ => x.map(|_, _| 1.0),
            };
            &unit
        }
    };
    ucp_limit_with(schedule, tol, |e| est.eval(x, second, e))
}
