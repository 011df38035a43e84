//! Jump measures, their compensators, and integrals of jump fields against both.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::JumpError;
use crate::functions::FunctionBundle;
use crate::paths::CadlagPath;
use crate::quadrature;
use crate::rng::Rng;

const SIZE_REL_TOL: f64 = 1e-8;
const SIZE_ABS_TOL: f64 = 1e-14;
const NORMAL_SPAN: f64 = 12.0;

/// Distribution of jump sizes (or of post-switch levels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Dirac { at: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<(), JumpError> {
        let ok = match *self {
            Self::Dirac { at } => at.is_finite(),
            Self::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(JumpError::Law(format!("{self:?}")))
        }
    }

    pub fn sample(&self, r: &mut Rng) -> f64 {
        match *self {
            Self::Dirac { at } => at,
            Self::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(r),
            Self::Uniform { lo, hi } => r.random_range(lo..hi),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Dirac { at } => at,
            Self::Normal { mean, .. } => mean,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Dirac { at } => at * at,
            Self::Normal { mean, sd } => mean * mean + sd * sd,
            Self::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
        }
    }

    /// ∫ h(y − shift) law(dy) over the y with |y − shift| in the truncation set.
    fn integrate(&self, shift: f64, trunc: Truncation, h: impl Fn(f64) -> f64) -> Result<f64, JumpError> {
        let (lo, hi, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *self {
            Self::Dirac { at } => {
                let x = at - shift;
                return Ok(if trunc.includes(x) { h(x) } else { 0.0 });
            }
            Self::Normal { mean, sd } => {
                let c = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
                (
                    mean - NORMAL_SPAN * sd,
                    mean + NORMAL_SPAN * sd,
                    Box::new(move |y: f64| c * (-0.5 * ((y - mean) / sd).powi(2)).exp()),
                )
            }
            Self::Uniform { lo, hi } => (lo, hi, Box::new(move |_| 1.0 / (hi - lo))),
        };
        integrate_pieces(lo, hi, shift, trunc, |y| density(y) * h(y - shift))
    }
}

/// Integrates `g(y)` over `[lo, hi]` restricted to the truncation set of `x = y − shift`.
fn integrate_pieces(lo: f64, hi: f64, shift: f64, trunc: Truncation, g: impl Fn(f64) -> f64) -> Result<f64, JumpError> {
    let mut cuts = vec![lo, hi];
    if let Some(thr) = trunc.threshold() {
        for c in [shift - thr, shift + thr] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let mid = if a.is_finite() && b.is_finite() {
            0.5 * (a + b)
        } else if a.is_finite() {
            a + 1.0
        } else if b.is_finite() {
            b - 1.0
        } else {
            0.0
        };
        if !trunc.includes(mid - shift) {
            continue;
        }
        total += quadrature::integrate_any(&g, a, b, SIZE_REL_TOL, SIZE_ABS_TOL)
            .map_err(|e| JumpError::Quadrature { a: e.a, b: e.b })?;
    }
    Ok(total)
}

pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// ν(ds, dx) = rate(s) ds · density(x) dx, plus optional time atoms (t, x, mass).
#[derive(Clone)]
pub struct UserCompensator {
    pub rate: RateFn,
    pub density: DensityFn,
    pub support: (f64, f64),
    pub atoms: Vec<(f64, f64, f64)>,
}

/// Predictable compensator ν of a jump measure.
#[derive(Clone)]
pub enum CompensatorSpec {
    Zero,
    Poisson {
        rate: f64,
    },
    CompoundPoisson {
        rate: f64,
        law: JumpLaw,
    },
    /// Switches at rate λ to a fresh level drawn from `law`; the jump size
    /// from state x₋ is y − x₋, so ν depends on X_{s−}.
    PostJumpLevel {
        rate: f64,
        law: JumpLaw,
    },
    UserSupplied(UserCompensator),
}

impl fmt::Debug for CompensatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Poisson { rate } => write!(f, "Poisson({rate})"),
            Self::CompoundPoisson { rate, law } => write!(f, "CompoundPoisson({rate}, {law:?})"),
            Self::PostJumpLevel { rate, law } => write!(f, "PostJumpLevel({rate}, {law:?})"),
            Self::UserSupplied(u) => write!(f, "UserSupplied(support {:?}, {} atoms)", u.support, u.atoms.len()),
        }
    }
}

impl Serialize for CompensatorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(None)?;
        match self {
            Self::Zero => m.serialize_entry("kind", "zero")?,
            Self::Poisson { rate } => {
                m.serialize_entry("kind", "poisson")?;
                m.serialize_entry("rate", rate)?;
            }
            Self::CompoundPoisson { rate, law } => {
                m.serialize_entry("kind", "compound_poisson")?;
                m.serialize_entry("rate", rate)?;
                m.serialize_entry("jump_law", law)?;
            }
            Self::PostJumpLevel { rate, law } => {
                m.serialize_entry("kind", "post_jump_level")?;
                m.serialize_entry("rate", rate)?;
                m.serialize_entry("level_law", law)?;
            }
            Self::UserSupplied(u) => {
                m.serialize_entry("kind", "user_supplied")?;
                m.serialize_entry("support", &[u.support.0, u.support.1])?;
                m.serialize_entry("atoms", &u.atoms)?;
            }
        }
        m.end()
    }
}

impl CompensatorSpec {
    pub fn is_time_homogeneous(&self) -> bool {
        !matches!(self, Self::UserSupplied(_))
    }

    pub fn is_state_free(&self) -> bool {
        !matches!(self, Self::PostJumpLevel { .. })
    }

    /// ∫ h(x) ν_t(dx) per unit time at state `x_minus`, truncation applied.
    pub fn size_integral(&self, t: f64, x_minus: f64, trunc: Truncation, h: impl Fn(f64) -> f64) -> Result<f64, JumpError> {
        match self {
            Self::Zero => Ok(0.0),
            Self::Poisson { rate } => Ok(if trunc.includes(1.0) { rate * h(1.0) } else { 0.0 }),
            Self::CompoundPoisson { rate, law } => Ok(rate * law.integrate(0.0, trunc, h)?),
            Self::PostJumpLevel { rate, law } => Ok(rate * law.integrate(x_minus, trunc, h)?),
            Self::UserSupplied(u) => {
                let r = (u.rate)(t);
                if r == 0.0 {
                    return Ok(0.0);
                }
                let d = u.density.clone();
                Ok(r * integrate_pieces(u.support.0, u.support.1, 0.0, trunc, |x| d(x) * h(x))?)
            }
        }
    }

    /// Time atoms ν({t}, dx) integrated against h; zero for the built-in models.
    pub fn atom_integral(&self, t: f64, trunc: Truncation, h: impl Fn(f64) -> f64) -> f64 {
        match self {
            Self::UserSupplied(u) => u.atoms.iter().filter(|a| a.0 == t && trunc.includes(a.1)).map(|a| a.2 * h(a.1)).sum(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum Truncation {
    None,
    /// |x| ≤ threshold.
    Small(f64),
    /// |x| > threshold.
    Big(f64),
}

impl Truncation {
    #[inline]
    pub fn includes(&self, x: f64) -> bool {
        match *self {
            Self::None => true,
            Self::Small(c) => x.abs() <= c,
            Self::Big(c) => x.abs() > c,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Self::None => None,
            Self::Small(c) | Self::Big(c) => Some(c),
        }
    }
}

/// Where a field is evaluated: time and the pre-jump state X_{s−}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpContext {
    pub t: f64,
    pub x_minus: f64,
}

pub type FieldFn = Arc<dyn Fn(JumpContext, f64) -> f64 + Send + Sync>;

/// W(s, x), possibly reading X_{s−}, with an optional size truncation.
#[derive(Clone)]
pub struct IntegrandField {
    w: FieldFn,
    pub truncation: Truncation,
    /// W ignores s.
    pub time_free: bool,
    /// W ignores X_{s−}.
    pub state_free: bool,
}

impl fmt::Debug for IntegrandField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegrandField").field("truncation", &self.truncation).finish()
    }
}

impl IntegrandField {
    pub fn new(w: impl Fn(JumpContext, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { w: Arc::new(w), truncation: Truncation::None, time_free: false, state_free: false }
    }

    /// A field depending on the size only.
    pub fn of_size(w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { w: Arc::new(move |_, x| w(x)), truncation: Truncation::None, time_free: true, state_free: true }
    }

    pub fn identity() -> Self {
        Self::of_size(|x| x)
    }

    pub fn truncated(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn small(self, threshold: f64) -> Self {
        self.truncated(Truncation::Small(threshold))
    }

    pub fn big(self, threshold: f64) -> Self {
        self.truncated(Truncation::Big(threshold))
    }

    /// W with the truncation indicator applied.
    #[inline]
    pub fn eval(&self, ctx: JumpContext, x: f64) -> f64 {
        if self.truncation.includes(x) {
            (self.w)(ctx, x)
        } else {
            0.0
        }
    }

    /// K(s,x) = F(s, X_{s−} + x) − F(s, X_{s−}).
    pub fn k_field(f: &FunctionBundle) -> Self {
        let g = f.f_field().clone();
        Self {
            w: Arc::new(move |c, x| g(c.t, c.x_minus + x) - g(c.t, c.x_minus)),
            truncation: Truncation::None,
            time_free: false,
            state_free: false,
        }
    }

    /// Y(s,x) = x ∂ₓF(s, X_{s−}).
    pub fn y_field(f: &FunctionBundle) -> Option<Self> {
        let d = f.dx()?.clone();
        Some(Self {
            w: Arc::new(move |c, x| x * d(c.t, c.x_minus)),
            truncation: Truncation::None,
            time_free: false,
            state_free: false,
        })
    }

    /// W(s,x) = F(s, X_{s−} + x) − F(s, X_{s−}) − x ∂ₓF(s, X_{s−}).
    pub fn w_field(f: &FunctionBundle) -> Option<Self> {
        let g = f.f_field().clone();
        let d = f.dx()?.clone();
        Some(Self {
            w: Arc::new(move |c, x| g(c.t, c.x_minus + x) - g(c.t, c.x_minus) - x * d(c.t, c.x_minus)),
            truncation: Truncation::None,
            time_free: false,
            state_free: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpMeasure {
    /// (time, size), sorted by time.
    pub atoms: Vec<(f64, f64)>,
}

pub fn jump_measure(x: &CadlagPath) -> JumpMeasure {
    JumpMeasure { atoms: x.jumps_of() }
}

/// t ↦ Σ_{s ≤ t} W(s, ΔX_s), truncation applied.
pub fn integrate_mu(w: &IntegrandField, x: &CadlagPath) -> Result<CadlagPath, JumpError> {
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        if x.is_jump(i) {
            let (t, xm) = (x.grid()[i], x.left_values()[i]);
            let v = w.eval(JumpContext { t, x_minus: xm }, x.values()[i] - xm);
            if !v.is_finite() {
                return Err(JumpError::NonFiniteAtom(t));
            }
            acc += v;
        }
        values.push(acc);
    }
    Ok(CadlagPath::piecewise_constant(x.grid().to_vec(), values)?)
}

/// t ↦ ∫_0^t ∫ W(s, x) ν(ds, dx), trapezoidal in time with X_{s−} read
/// from the path, adaptive Gauss–Kronrod in size.
pub fn integrate_nu(w: &IntegrandField, nu: &CompensatorSpec, x: &CadlagPath) -> Result<CadlagPath, JumpError> {
    let cacheable_state = w.state_free && nu.is_state_free();
    let cacheable_time = w.time_free && nu.is_time_homogeneous();
    let mut cache: Option<(f64, f64, f64)> = None;
    let mut density_at = |t: f64, xm: f64| -> Result<f64, JumpError> {
        if let Some((ct, cx, v)) = cache {
            if (cacheable_time || ct == t) && (cacheable_state || cx == xm) {
                return Ok(v);
            }
        }
        let ctx = JumpContext { t, x_minus: xm };
        let v = nu.size_integral(t, xm, w.truncation, |size| (w.w)(ctx, size))?;
        cache = Some((t, xm, v));
        Ok(v)
    };
    let grid = x.grid();
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(x.len());
    values.push(0.0);
    let mut g_left = density_at(grid[0], x.values()[0])?;
    for i in 0..x.len() - 1 {
        let g_right = density_at(grid[i + 1], x.left_values()[i + 1])?;
        acc += 0.5 * (g_left + g_right) * (grid[i + 1] - grid[i]);
        if !acc.is_finite() {
            return Err(JumpError::Quadrature { a: grid[i], b: grid[i + 1] });
        }
        let t = grid[i + 1];
        let atoms = nu.atom_integral(t, w.truncation, |size| (w.w)(JumpContext { t, x_minus: x.left_values()[i + 1] }, size));
        acc += atoms;
        values.push(acc);
        g_left = if x.is_jump(i + 1) { density_at(grid[i + 1], x.values()[i + 1])? } else { g_right };
    }
    Ok(CadlagPath::from_limits(grid.to_vec(), values.clone(), values)?)
}

/// W ∗ (μ − ν). Refuses when Σ W(ΔX)² over the path is not finite.
pub fn compensated_integral(w: &IntegrandField, x: &CadlagPath, nu: &CompensatorSpec) -> Result<CadlagPath, JumpError> {
    let sq = {
        let w2 = w.clone();
        let f = w2.w.clone();
        IntegrandField { w: Arc::new(move |c, s| f(c, s).powi(2)), ..w2 }
    };
    let total = integrate_mu(&sq, x)?.terminal();
    if !total.is_finite() {
        return Err(JumpError::Integrability(format!("sum of squared field values is {total}")));
    }
    let mu = integrate_mu(w, x)?;
    let nu_path = integrate_nu(w, nu, x)?;
    Ok(mu.sub(&nu_path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub schema_version: u32,
    pub jump_count: usize,
    /// Σ (ΔX)².
    pub sum_squared_jumps: f64,
    /// Σ |ΔX| 1_{|ΔX|>1}.
    pub sum_abs_big_jumps: f64,
    /// Σ_{|ΔX|>1} |F(s, X_{s−}+ΔX) − F(s, X_{s−}) − ΔX ∂ₓF(s, X_{s−})|, when F is supplied.
    pub big_jump_taylor_sum: Option<f64>,
    pub finite_quadratic_jumps: bool,
    pub big_jumps_summable: bool,
    pub taylor_condition: Option<bool>,
    /// Statements whose path-level surrogate holds on this path.
    pub witnessed: Vec<String>,
}

pub fn integrability_report(x: &CadlagPath, f: Option<&FunctionBundle>) -> IntegrabilityReport {
    let jumps = x.jumps_of();
    let sum_sq: f64 = jumps.iter().map(|j| j.1 * j.1).sum();
    let sum_big: f64 = jumps.iter().filter(|j| j.1.abs() > 1.0).map(|j| j.1.abs()).sum();
    let taylor = f.and_then(|f| {
        let d = f.dx()?;
        Some(
            x.jump_indices()
                .map(|i| {
                    let (t, xm, xv) = (x.grid()[i], x.left_values()[i], x.values()[i]);
                    let dx = xv - xm;
                    if dx.abs() > 1.0 {
                        (f.f(t, xv) - f.f(t, xm) - dx * d(t, xm)).abs()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>(),
        )
    });
    let mut witnessed = Vec::new();
    if sum_sq.is_finite() {
        witnessed.push("sum of squared jumps is finite".to_string());
        witnessed.push("small-jump fields are square summable".to_string());
    }
    if sum_big.is_finite() {
        witnessed.push("big jumps are absolutely summable".to_string());
    }
    if taylor.is_some_and(f64::is_finite) {
        witnessed.push("big-jump Taylor remainders are summable".to_string());
    }
    IntegrabilityReport {
        schema_version: 1,
        jump_count: jumps.len(),
        sum_squared_jumps: sum_sq,
        sum_abs_big_jumps: sum_big,
        big_jump_taylor_sum: taylor,
        finite_quadratic_jumps: sum_sq.is_finite(),
        big_jumps_summable: sum_big.is_finite(),
        taylor_condition: taylor.map(f64::is_finite),
        witnessed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::lookup;
    use crate::paths::{make_path, uniform_grid};

    fn two_jumps() -> CadlagPath {
        make_path(vec![0.0, 0.25, 0.5, 1.0], vec![0.0, 0.5, 2.5, 2.5], &[(1, 0.0), (2, 0.5)]).unwrap()
    }

    #[test]
    fn measure_atoms() {
        assert!(jump_measure(&CadlagPath::constant(1.0, 4, 1.0).unwrap()).atoms.is_empty());
        assert_eq!(jump_measure(&two_jumps()).atoms, vec![(0.25, 0.5), (0.5, 2.0)]);
    }

    #[test]
    fn mu_integrals() {
        let x = two_jumps();
        assert_eq!(integrate_mu(&IntegrandField::of_size(|s| s * s), &x).unwrap().terminal(), 4.25);
        let big = integrate_mu(&IntegrandField::identity().big(1.0), &x).unwrap();
        assert_eq!(big.jumps_of(), vec![(0.5, 2.0)]);
        let small = integrate_mu(&IntegrandField::identity().small(1.0), &x).unwrap();
        assert_eq!(small.terminal() + big.terminal(), integrate_mu(&IntegrandField::identity(), &x).unwrap().terminal());
    }

    #[test]
    fn nu_integrals() {
        let x = CadlagPath::constant(1.0, 10, 0.0).unwrap();
        let p = integrate_nu(&IntegrandField::identity().small(1.0), &CompensatorSpec::Poisson { rate: 3.0 }, &x).unwrap();
        for (v, t) in p.values().iter().zip(x.grid()) {
            assert!((v - 3.0 * t).abs() < 1e-14);
        }
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let cp = CompensatorSpec::CompoundPoisson { rate: 2.0, law };
        let z = integrate_nu(&IntegrandField::identity(), &cp, &x).unwrap();
        assert!(z.sup_norm() < 1e-12);
        let m2 = integrate_nu(&IntegrandField::of_size(|s| s * s), &cp, &x).unwrap();
        assert!((m2.terminal() - 2.0).abs() < 1e-8);
        let zero = integrate_nu(&IntegrandField::of_size(|_| 0.0), &cp, &x).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
    }

    #[test]
    fn truncated_normal_mass() {
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let cp = CompensatorSpec::CompoundPoisson { rate: 1.0, law };
        let small = cp.size_integral(0.0, 0.0, Truncation::Small(1.0), |_| 1.0).unwrap();
        let big = cp.size_integral(0.0, 0.0, Truncation::Big(1.0), |_| 1.0).unwrap();
        assert!((small - 0.682_689_492_137_085_9).abs() < 1e-9);
        assert!((small + big - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_poisson() {
        let grid = uniform_grid(1.0, 100);
        let vals: Vec<f64> = grid.iter().map(|&t| (t * 3.0).floor()).collect();
        let x = CadlagPath::piecewise_constant(grid.clone(), vals.clone()).unwrap();
        let c = compensated_integral(&IntegrandField::identity(), &x, &CompensatorSpec::Poisson { rate: 2.0 }).unwrap();
        for i in 0..grid.len() {
            assert!((c.values()[i] - (vals[i] - 2.0 * grid[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn post_jump_level_density() {
        // from state 0.5, jump to U[0,1]: mean jump size 0
        let nu = CompensatorSpec::PostJumpLevel { rate: 1.0, law: JumpLaw::Uniform { lo: 0.0, hi: 1.0 } };
        let m = nu.size_integral(0.0, 0.5, Truncation::None, |x| x).unwrap();
        assert!(m.abs() < 1e-14);
        let mass = nu.size_integral(0.0, 2.0, Truncation::Small(1.0), |_| 1.0).unwrap();
        assert!((mass - 0.0).abs() < 1e-14);
        let mass = nu.size_integral(0.0, 1.5, Truncation::Small(1.0), |_| 1.0).unwrap();
        assert!((mass - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrability() {
        let r = integrability_report(&two_jumps(), Some(&lookup("sin").unwrap()));
        assert_eq!(r.sum_abs_big_jumps, 2.0);
        assert_eq!(r.jump_count, 2);
        assert!(r.taylor_condition.unwrap());
        let c = integrability_report(&CadlagPath::from_fn(uniform_grid(1.0, 10), |t| t).unwrap(), None);
        assert_eq!(c.sum_squared_jumps, 0.0);
        assert!(c.finite_quadratic_jumps && c.big_jumps_summable);
    }
}
