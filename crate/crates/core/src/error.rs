use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid must start at 0, got {0}")]
    GridStart(f64),
    #[error("grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("length mismatch: grid has {grid} points, values have {values}")]
    LengthMismatch { grid: usize, values: usize },
    #[error("jump index {0} out of range")]
    JumpIndex(usize),
    #[error("jump at index {0} has zero size")]
    ZeroJump(usize),
    #[error("piecewise-constant path changes value at unmarked index {0}")]
    UnmarkedDiscontinuity(usize),
    #[error("piecewise-constant left value at index {0} differs from previous grid value")]
    InconsistentLeftValue(usize),
    #[error("left limit is undefined at t = {0}")]
    LeftLimitAtOrigin(f64),
    #[error("paths have different horizons: {0} vs {1}")]
    HorizonMismatch(f64, f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("epsilon {eps} must be positive and below the horizon {horizon}")]
    EpsilonRange { eps: f64, horizon: f64 },
    #[error("epsilon {eps} is below the minimal grid spacing {spacing}")]
    EpsilonBelowSpacing { eps: f64, spacing: f64 },
    #[error("schedule must be strictly decreasing and positive")]
    BadSchedule,
    #[error("schedule needs at least two epsilons")]
    ShortSchedule,
    #[error("smallest epsilon {eps} is below 10x the grid spacing {spacing}")]
    ScheduleGrid { eps: f64, spacing: f64 },
    #[error("bracket did not converge along the schedule (final gap {gap:.3e})")]
    NotConverged { gap: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("switch times are not strictly increasing")]
    SwitchTimes,
    #[error("fbm covariance is not positive definite")]
    Covariance,
    #[error("fbm grid of {n} cells exceeds the exact-covariance cap {max}")]
    FbmSize { n: usize, max: usize },
    #[error("generator {expected} called with a {got} spec")]
    Kind { expected: &'static str, got: &'static str },
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JumpError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("size quadrature failed to converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("integrand is not finite at an atom (t = {0})")]
    NonFiniteAtom(f64),
    #[error("integrability surrogate failed: {0}")]
    Integrability(String),
    #[error("invalid jump law: {0}")]
    Law(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ItoError {
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("function {name}: missing evaluator {which} for class {class}")]
    MissingDerivative { name: String, which: &'static str, class: String },
    #[error("function {name}: {which} disagrees with finite differences at (t={t}, x={x})")]
    Derivative { name: String, which: &'static str, t: f64, x: f64 },
    #[error("function {name} has class {class}, required {required}")]
    Class { name: String, class: String, required: &'static str },
    #[error("jump summability diagnostic failed: {0}")]
    Summability(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirichletError {
    #[error(transparent)]
    Ito(#[from] ItoError),
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("test martingale has marked jumps")]
    TestMartingaleJumps,
    #[error("missing decomposition label {0}")]
    MissingLabel(&'static str),
    #[error("finite-variation accounting failed: {0}")]
    Variation(String),
    #[error("jump-sum diagnostic failed: {0}")]
    JumpSum(String),
}
