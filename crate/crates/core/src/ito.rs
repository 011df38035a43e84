//! Term-by-term Itô formulas on a path and their pathwise residuals.

use serde::Serialize;

use crate::error::{ItoError, PathError};
use crate::functions::{FunctionBundle, Smoothness};
use crate::jumps::{self, CompensatorSpec, IntegrandField, Truncation};
use crate::paths::CadlagPath;
use crate::regularize::{self, EpsilonSchedule, Estimator, LimitReport, LimitSummary};

/// Default split between small and big jumps.
pub const JUMP_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItoForm {
    C12,
    Measure,
    C1Lambda,
}

#[derive(Debug, Clone)]
pub struct Term {
    pub name: &'static str,
    pub path: CadlagPath,
}

/// Atom-level comparison of the random-measure jump terms with the plain jump sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reassembly {
    /// sup_t |K∗ν − Y∗ν − W_small∗ν| over the small-jump ν terms, which cancel exactly in theory.
    pub nu_quadrature_defect: f64,
    /// sup_t |(four jump terms) − (jump sum) − (ν defect path)|.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ItoReport {
    pub function: String,
    pub form: ItoForm,
    pub eps: f64,
    /// F(t, X_t) − F(0, X_0).
    pub lhs: CadlagPath,
    pub terms: Vec<Term>,
    pub residual: CadlagPath,
    pub residual_sup: f64,
    /// sup_t |F(t, X_t)|.
    pub f_sup: f64,
    pub reassembly: Option<Reassembly>,
}

impl ItoReport {
    fn assemble(function: &FunctionBundle, form: ItoForm, eps: f64, x: &CadlagPath, terms: Vec<Term>) -> Result<Self, ItoError> {
        let fx = x.map(|t, v| function.f(t, v));
        let f0 = fx.values()[0];
        let lhs = fx.map(|_, v| v - f0);
        let mut residual = lhs.clone();
        for term in &terms {
            residual = residual.sub(&term.path)?;
        }
        Ok(Self {
            function: function.name.clone(),
            form,
            eps,
            residual_sup: residual.sup_norm(),
            f_sup: fx.sup_norm(),
            lhs,
            terms,
            residual,
            reassembly: None,
        })
    }

    pub fn term(&self, name: &str) -> Option<&CadlagPath> {
        self.terms.iter().find(|t| t.name == name).map(|t| &t.path)
    }

    /// residual_sup / max(sup|F|, tiny).
    pub fn relative_residual(&self) -> f64 {
        self.residual_sup / self.f_sup.max(f64::MIN_POSITIVE)
    }

    pub fn summary(&self) -> ItoSummary {
        ItoSummary {
            function: self.function.clone(),
            form: self.form,
            eps: self.eps,
            terms: self
                .terms
                .iter()
                .map(|t| TermSummary { name: t.name, terminal: t.path.terminal(), sup: t.path.sup_norm() })
                .collect(),
            lhs_terminal: self.lhs.terminal(),
            residual_sup: self.residual_sup,
            f_sup: self.f_sup,
            reassembly: self.reassembly,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TermSummary {
    pub name: &'static str,
    pub terminal: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItoSummary {
    pub function: String,
    pub form: ItoForm,
    pub eps: f64,
    pub terms: Vec<TermSummary>,
    pub lhs_terminal: f64,
    pub residual_sup: f64,
    pub f_sup: f64,
    pub reassembly: Option<Reassembly>,
}

/// ∫_0^t h(s) dc(s): trapezoid on each cell with the left-limit integrand at
/// the right end, plus h(s−)Δc(s) at jumps of c.
pub fn stieltjes(h: &CadlagPath, c: &CadlagPath) -> Result<CadlagPath, PathError> {
    let (h, c) = h.align(c)?;
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(c.len());
    let mut left = Vec::with_capacity(c.len());
    values.push(0.0);
    left.push(0.0);
    for i in 0..c.len() - 1 {
        acc += 0.5 * (h.values()[i] + h.left_values()[i + 1]) * (c.left_values()[i + 1] - c.values()[i]);
        left.push(acc);
        acc += h.left_values()[i + 1] * (c.values()[i + 1] - c.left_values()[i + 1]);
        values.push(acc);
    }
    CadlagPath::from_limits(c.grid().to_vec(), values, left)
}

/// Left-point sum Σ h(t_i)(m(t_{i+1}−) − m(t_i)) + h(t_{i+1}−)Δm(t_{i+1}).
pub fn left_point_integral(h: &CadlagPath, m: &CadlagPath) -> Result<CadlagPath, PathError> {
    let (h, m) = h.align(m)?;
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(m.len());
    let mut left = Vec::with_capacity(m.len());
    values.push(0.0);
    left.push(0.0);
    for i in 0..m.len() - 1 {
        acc += h.values()[i] * (m.left_values()[i + 1] - m.values()[i]);
        left.push(acc);
        acc += h.left_values()[i + 1] * (m.values()[i + 1] - m.left_values()[i + 1]);
        values.push(acc);
    }
    CadlagPath::from_limits(m.grid().to_vec(), values, left)
}

/// Running Σ_{s ≤ t} w(s, X_{s−}, X_s) over marked jumps, as a step path.
pub fn jump_sum(x: &CadlagPath, w: impl Fn(f64, f64, f64) -> f64) -> Result<CadlagPath, PathError> {
    let mut acc = 0.0;
    let values = (0..x.len())
        .map(|i| {
            if x.is_jump(i) {
                acc += w(x.grid()[i], x.left_values()[i], x.values()[i]);
            }
            acc
        })
        .collect();
    CadlagPath::piecewise_constant(x.grid().to_vec(), values)
}

/// Bracket limit along the schedule together with its continuous part.
pub fn continuous_bracket(x: &CadlagPath, schedule: &EpsilonSchedule, tol: f64) -> Result<(LimitReport, CadlagPath), ItoError> {
    let report = regularize::ucp_limit(Estimator::Covariation, x, None, schedule, tol)?;
    let limit = report.clone().into_limit()?;
    let jumps = jump_sum(x, |_, l, v| (v - l).powi(2))?;
    let cont = limit.sub(&jumps)?.running_max();
    Ok((report, cont))
}

/// [X,X]^c: converged bracket minus the running sum of squared jumps,
/// raised to its running maximum.
pub fn qv_continuous_part(x: &CadlagPath, schedule: &EpsilonSchedule, tol: f64) -> Result<CadlagPath, ItoError> {
    Ok(continuous_bracket(x, schedule, tol)?.1)
}

fn time_integral(f: &FunctionBundle, x: &CadlagPath) -> Result<CadlagPath, ItoError> {
    let dt = f.require_dt()?.clone();
    Ok(x.map(|t, v| dt(t, v)).running_integral())
}

fn dx_path(f: &FunctionBundle, x: &CadlagPath) -> Result<CadlagPath, ItoError> {
    let dx = f.require_dx()?.clone();
    Ok(x.map(|t, v| dx(t, v)))
}

/// Shared C^{1,2} terms: time integral, forward integral, half bracket term.
fn c12_core(f: &FunctionBundle, x: &CadlagPath, eps: f64, cont_bracket: &CadlagPath) -> Result<Vec<Term>, ItoError> {
    f.require_class(&[Smoothness::C12], "C12")?;
    let dxx = f.require_dxx()?.clone();
    let forward = regularize::forward_integral(&dx_path(f, x)?, x, eps)?;
    let second = x.map(|t, v| 0.5 * dxx(t, v));
    Ok(vec![
        Term { name: "time_integral", path: time_integral(f, x)? },
        Term { name: "forward_integral", path: forward },
        Term { name: "bracket_term", path: stieltjes(&second, cont_bracket)? },
    ])
}

/// Σ_{s≤t} [F(s,X_s) − F(s,X_{s−}) − ∂ₓF(s,X_{s−})ΔX_s].
pub fn taylor_jump_sum(f: &FunctionBundle, x: &CadlagPath) -> Result<CadlagPath, ItoError> {
    let dx = f.require_dx()?.clone();
    Ok(jump_sum(x, |t, l, v| f.f(t, v) - f.f(t, l) - dx(t, l) * (v - l))?)
}

/// The C^{1,2} formula at one ε against a supplied continuous bracket.
pub fn ito_terms_c12(f: &FunctionBundle, x: &CadlagPath, eps: f64, cont_bracket: &CadlagPath) -> Result<ItoReport, ItoError> {
    let mut terms = c12_core(f, x, eps, cont_bracket)?;
    terms.push(Term { name: "jump_sum", path: taylor_jump_sum(f, x)? });
    ItoReport::assemble(f, ItoForm::C12, eps, x, terms)
}

/// The random-measure form: jump sum replaced by compensated small-jump
/// integrals of K and Y, the big-jump μ integral of W and the small-jump ν
/// integral of W, all split at `threshold`.
pub fn ito_terms_measure_form(
    f: &FunctionBundle,
    x: &CadlagPath,
    nu: &CompensatorSpec,
    eps: f64,
    cont_bracket: &CadlagPath,
    threshold: f64,
) -> Result<ItoReport, ItoError> {
    let mut terms = c12_core(f, x, eps, cont_bracket)?;
    let small = Truncation::Small(threshold);
    let big = Truncation::Big(threshold);
    let k = IntegrandField::k_field(f).truncated(small);
    let y = IntegrandField::y_field(f).ok_or_else(|| ItoError::Class {
        name: f.name.clone(),
        class: f.class.to_string(),
        required: "C12",
    })?;
    let w = IntegrandField::w_field(f).expect("dx present");
    let y = y.truncated(small);
    let k_mu = jumps::integrate_mu(&k, x)?;
    let k_nu = jumps::integrate_nu(&k, nu, x)?;
    let y_mu = jumps::integrate_mu(&y, x)?;
    let y_nu = jumps::integrate_nu(&y, nu, x)?;
    let w_big = jumps::integrate_mu(&w.clone().truncated(big), x)?;
    let w_small_nu = jumps::integrate_nu(&w.truncated(small), nu, x)?;
    let k_comp = k_mu.sub(&k_nu)?;
    let y_comp = y_mu.sub(&y_nu)?;
    let four = k_comp.sub(&y_comp)?.add(&w_big)?.add(&w_small_nu)?;
    let defect = w_small_nu.sub(&k_nu)?.add(&y_nu)?;
    let plain = taylor_jump_sum(f, x)?;
    let reassembly = Reassembly { nu_quadrature_defect: defect.sup_norm(), gap: four.sub(&plain)?.sub(&defect)?.sup_norm() };
    terms.push(Term { name: "k_small_compensated", path: k_comp });
    terms.push(Term { name: "y_small_compensated_neg", path: y_comp.scale(-1.0) });
    terms.push(Term { name: "w_big_mu", path: w_big });
    terms.push(Term { name: "w_small_nu", path: w_small_nu });
    let mut report = ItoReport::assemble(f, ItoForm::Measure, eps, x, terms)?;
    report.reassembly = Some(reassembly);
    Ok(report)
}

/// The C^{1+λ} formula: left-point Itô integral, half the covariation of
/// ∂ₓF(·,X) with X, and the symmetric jump correction. Meant for paths whose
/// generator is a semimartingale in both time directions.
pub fn ito_c1_lambda(f: &FunctionBundle, x: &CadlagPath, eps: f64) -> Result<ItoReport, ItoError> {
    let lambda = match f.class {
        Smoothness::C1Lambda(l) => l,
        Smoothness::C12 => 1.0,
        _ => {
            return Err(ItoError::Class { name: f.name.clone(), class: f.class.to_string(), required: "C1+lambda" });
        }
    };
    let summable: f64 = x.jumps_of().iter().map(|j| j.1.abs().powf(1.0 + lambda)).sum();
    if !summable.is_finite() {
        return Err(ItoError::Summability(format!("sum of |jump|^(1+{lambda}) is {summable}")));
    }
    let dx = f.require_dx()?.clone();
    let grad = dx_path(f, x)?;
    let ito = left_point_integral(&grad, x)?;
    let half = regularize::covariation(&grad, x, eps)?.scale(0.5);
    let sym = jump_sum(x, |t, l, v| f.f(t, v) - f.f(t, l) - 0.5 * (dx(t, v) + dx(t, l)) * (v - l))?;
    let terms = vec![
        Term { name: "time_integral", path: time_integral(f, x)? },
        Term { name: "ito_integral", path: ito },
        Term { name: "half_covariation", path: half },
        Term { name: "symmetric_jump_term", path: sym },
    ];
    ItoReport::assemble(f, ItoForm::C1Lambda, eps, x, terms)
}

/// Residuals of the C^{1,2} formula along a whole schedule.
#[derive(Debug, Clone)]
pub struct ItoCheck {
    pub bracket: LimitSummary,
    pub reports: Vec<ItoReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItoCheckSummary {
    pub schema_version: u32,
    pub function: String,
    pub bracket: LimitSummary,
    pub epsilons: Vec<f64>,
    pub residual_sups: Vec<f64>,
    pub f_sup: f64,
    pub final_relative_residual: f64,
    pub final_report: ItoSummary,
}

impl ItoCheck {
    pub fn residual_sups(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.residual_sup).collect()
    }

    pub fn final_report(&self) -> &ItoReport {
        self.reports.last().expect("schedule is non-empty")
    }

    /// Each residual at most `1 + slack` times its predecessor.
    pub fn residuals_non_increasing(&self, slack: f64) -> bool {
        self.residual_sups().windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
    }

    pub fn summary(&self) -> ItoCheckSummary {
        let last = self.final_report();
        ItoCheckSummary {
            schema_version: 1,
            function: last.function.clone(),
            bracket: self.bracket.clone(),
            epsilons: self.reports.iter().map(|r| r.eps).collect(),
            residual_sups: self.residual_sups(),
            f_sup: last.f_sup,
            final_relative_residual: last.relative_residual(),
            final_report: last.summary(),
        }
    }
}

/// Validates `f`, estimates [X,X]^c along the schedule, and evaluates the
/// formula at every ε of the schedule; with `nu` the measure form is used.
pub fn ito_check(
    f: &FunctionBundle,
    x: &CadlagPath,
    nu: Option<&CompensatorSpec>,
    schedule: &EpsilonSchedule,
    tol: f64,
    threshold: f64,
) -> Result<ItoCheck, ItoError> {
    f.validate()?;
    f.require_class(&[Smoothness::C12], "C12")?;
    let (bracket, cont) = continuous_bracket(x, schedule, tol)?;
    let reports = schedule
        .as_slice()
        .iter()
        .map(|&eps| match nu {
            Some(nu) => ito_terms_measure_form(f, x, nu, eps, &cont, threshold),
            None => ito_terms_c12(f, x, eps, &cont),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ItoCheck { bracket: bracket.summary(), reports })
}
