//! Orthogonality tests and chain rules for weak Dirichlet processes.
//!
//! Orthogonality to continuous martingales is decided statistically: the
//! ε-bracket of the candidate against independent Brownian test paths must
//! fall below a tolerance at the end of the schedule.

use serde::Serialize;

use crate::error::DirichletError;
use crate::functions::{FunctionBundle, Smoothness};
use crate::ito::{self, left_point_integral, stieltjes};
use crate::jumps::{self, CompensatorSpec, IntegrabilityReport, IntegrandField, Truncation};
use crate::paths::CadlagPath;
use crate::regularize::{self, EpsilonSchedule, Estimator, LimitSummary};
use crate::simulate;

pub use crate::simulate::{LabeledDecomposition, Role};

#[derive(Debug, Clone, Serialize)]
pub struct OrthReport {
    pub epsilons: Vec<f64>,
    /// sup_t |[A, N]_ε(t)| for each ε.
    pub sups: Vec<f64>,
    /// Cauchy gaps between consecutive ε.
    pub gaps: Vec<f64>,
    pub tolerance: f64,
    pub final_sup: f64,
    pub decision: bool,
}

pub fn orthogonality_test(
    a: &CadlagPath,
    n: &CadlagPath,
    schedule: &EpsilonSchedule,
    tol: f64,
) -> Result<OrthReport, DirichletError> {
    if n.has_jumps() {
        return Err(DirichletError::TestMartingaleJumps);
    }
    let report = regularize::ucp_limit(Estimator::Covariation, a, Some(n), schedule, tol)?;
    let sups: Vec<f64> = report.estimates.iter().map(CadlagPath::sup_norm).collect();
    let final_sup = *sups.last().expect("schedule is non-empty");
    Ok(OrthReport { epsilons: report.epsilons, sups, gaps: report.gaps, tolerance: tol, final_sup, decision: final_sup < tol })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub seeds: Vec<u64>,
    pub reports: Vec<OrthReport>,
    pub decision: bool,
}

/// Orthogonality against independent standard Brownian motions on the grid of `a`.
pub fn orthogonality_battery(
    a: &CadlagPath,
    seeds: &[u64],
    schedule: &EpsilonSchedule,
    tol: f64,
) -> Result<BatteryReport, DirichletError> {
    let reports = seeds
        .iter()
        .map(|&s| orthogonality_test(a, &simulate::brownian_on_grid(a.grid(), s)?, schedule, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let decision = reports.iter().all(|r| r.decision);
    Ok(BatteryReport { seeds: seeds.to_vec(), reports, decision })
}

fn zero_like(x: &CadlagPath) -> CadlagPath {
    x.map(|_, _| 0.0)
}

/// M = M_c + M_d from the labels; M_d may be omitted for continuous paths.
fn martingale_part(x: &CadlagPath, d: &LabeledDecomposition) -> Result<CadlagPath, DirichletError> {
    let mc = d.require(Role::Mc)?;
    match d.get(Role::Md) {
        Some(md) => Ok(mc.add(md)?),
        None if x.has_jumps() => Err(DirichletError::MissingLabel(Role::Md.label())),
        None => Ok(mc.clone()),
    }
}

/// The pathwise pieces of the C^{0,1} chain rule.
#[derive(Debug, Clone)]
pub struct GammaParts {
    /// ∫ ∂ₓF(s, X_{s−}) dM_s.
    pub martingale_integral: CadlagPath,
    /// (K − Y)·1_{|x|≤c} ∗ (μ − ν).
    pub small_compensated: CadlagPath,
    /// W·1_{|x|>c} ∗ μ.
    pub big_mu: CadlagPath,
    /// W·1_{|x|>c} ∗ ν.
    pub big_nu: CadlagPath,
    pub gamma: CadlagPath,
}

/// Γ^F = F(t,X_t) − F(0,X_0) − ∫∂ₓF dM − W_small∗(μ−ν) − W_big∗μ.
pub fn gamma_c01(
    f: &FunctionBundle,
    x: &CadlagPath,
    decomposition: &LabeledDecomposition,
    nu: &CompensatorSpec,
    threshold: f64,
) -> Result<GammaParts, DirichletError> {
    let dx = f.require_dx().map_err(DirichletError::from)?.clone();
    let m = martingale_part(x, decomposition)?;
    let grad = x.map(|t, v| dx(t, v));
    let martingale_integral = left_point_integral(&grad, &m)?;
    let k = IntegrandField::k_field(f).truncated(Truncation::Small(threshold));
    let y = IntegrandField::y_field(f).expect("dx present").truncated(Truncation::Small(threshold));
    let w_big = IntegrandField::w_field(f).expect("dx present").truncated(Truncation::Big(threshold));
    let small_compensated = jumps::compensated_integral(&k, x, nu)?.sub(&jumps::compensated_integral(&y, x, nu)?)?;
    let big_mu = jumps::integrate_mu(&w_big, x)?;
    let big_nu = jumps::integrate_nu(&w_big, nu, x)?;
    let fx = x.map(|t, v| f.f(t, v));
    let f0 = fx.values()[0];
    let gamma = fx.map(|_, v| v - f0).sub(&martingale_integral)?.sub(&small_compensated)?.sub(&big_mu)?;
    Ok(GammaParts { martingale_integral, small_compensated, big_mu, big_nu, gamma })
}

#[derive(Debug, Clone)]
pub struct ChainRuleReport {
    pub function: String,
    pub bracket: LimitSummary,
    pub integrability: IntegrabilityReport,
    /// F(0,X_0) + ∫∂ₓF dM + W∗(μ − ν).
    pub m_f: CadlagPath,
    /// Γ^F + W_big∗ν.
    pub a_f: CadlagPath,
    pub gamma: CadlagPath,
    pub orthogonality: BatteryReport,
    /// sup_t |F(t,X_t) − M^F − A^F|.
    pub assembly_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRuleSummary {
    pub schema_version: u32,
    pub function: String,
    pub bracket: LimitSummary,
    pub integrability: IntegrabilityReport,
    pub m_f_terminal: f64,
    pub a_f_terminal: f64,
    pub gamma_terminal: f64,
    pub gamma_sup: f64,
    pub assembly_gap: f64,
    pub orthogonality: BatteryReport,
}

impl ChainRuleReport {
    pub fn summary(&self) -> ChainRuleSummary {
        ChainRuleSummary {
            schema_version: 1,
            function: self.function.clone(),
            bracket: self.bracket.clone(),
            integrability: self.integrability.clone(),
            m_f_terminal: self.m_f.terminal(),
            a_f_terminal: self.a_f.terminal(),
            gamma_terminal: self.gamma.terminal(),
            gamma_sup: self.gamma.sup_norm(),
            assembly_gap: self.assembly_gap,
            orthogonality: self.orthogonality.clone(),
        }
    }
}

/// Settings shared by the chain-rule harnesses.
#[derive(Debug, Clone)]
pub struct Harness {
    pub schedule: EpsilonSchedule,
    pub tolerance: f64,
    /// Small/big jump split.
    pub threshold: f64,
    /// Seeds of the Brownian test martingales.
    pub test_seeds: Vec<u64>,
}

impl Default for Harness {
    fn default() -> Self {
        Self {
            schedule: EpsilonSchedule::default(),
            tolerance: regularize::DEFAULT_TOLERANCE,
            threshold: ito::JUMP_THRESHOLD,
            test_seeds: simulate::seed_sequence(0x0b5e55ed, 3),
        }
    }
}

/// F(t,X_t) = M^F + A^F for F ∈ C^{0,1}, with A^F tested for orthogonality.
pub fn chain_rule_c01(
    f: &FunctionBundle,
    x: &CadlagPath,
    decomposition: &LabeledDecomposition,
    nu: &CompensatorSpec,
    h: &Harness,
) -> Result<ChainRuleReport, DirichletError> {
    f.require_class(&[Smoothness::C12, Smoothness::C01, Smoothness::C1Lambda(0.0)], "C01")?;
    f.validate()?;
    let bracket = regularize::ucp_limit(Estimator::Covariation, x, None, &h.schedule, h.tolerance)?;
    if !bracket.converged {
        return Err(regularize_error(bracket.final_gap()));
    }
    let integrability = jumps::integrability_report(x, Some(f));
    if integrability.taylor_condition == Some(false) {
        return Err(DirichletError::JumpSum("big-jump Taylor remainders are not summable".into()));
    }
    let parts = gamma_c01(f, x, decomposition, nu, h.threshold)?;
    let fx = x.map(|t, v| f.f(t, v));
    let f0 = fx.values()[0];
    let big_comp = parts.big_mu.sub(&parts.big_nu)?;
    let m_f = parts.martingale_integral.add(&parts.small_compensated)?.add(&big_comp)?.map(|_, v| v + f0);
    let a_f = parts.gamma.add(&parts.big_nu)?;
    let assembly_gap = fx.sub(&m_f)?.sub(&a_f)?.sup_norm();
    let orthogonality = orthogonality_battery(&a_f, &h.test_seeds, &h.schedule, h.tolerance)?;
    Ok(ChainRuleReport {
        function: f.name.clone(),
        bracket: bracket.summary(),
        integrability,
        m_f,
        a_f,
        gamma: parts.gamma,
        orthogonality,
        assembly_gap,
    })
}

fn regularize_error(gap: f64) -> DirichletError {
    DirichletError::Reg(crate::error::RegError::NotConverged { gap })
}

/// Γ^F for F ∈ C^{1,2}: ∫∂ₛF ds + ∫∂ₓF(s,X_s) d⁻A_s + ½∫∂²ₓₓF d[X,X]^c + W_small∗ν,
/// with the forward integral at the last ε of the schedule.
pub fn gamma_c12_reference(
    f: &FunctionBundle,
    x: &CadlagPath,
    decomposition: &LabeledDecomposition,
    nu: &CompensatorSpec,
    h: &Harness,
) -> Result<CadlagPath, DirichletError> {
    f.require_class(&[Smoothness::C12], "C12")?;
    let dt = f.require_dt()?.clone();
    let dx = f.require_dx()?.clone();
    let dxx = f.require_dxx()?.clone();
    let cont = ito::qv_continuous_part(x, &h.schedule, h.tolerance)?;
    let zero = zero_like(x);
    let a = decomposition.get(Role::A).unwrap_or(&zero);
    let time = x.map(|t, v| dt(t, v)).running_integral();
    let forward = regularize::forward_integral(&x.map(|t, v| dx(t, v)), a, h.schedule.last())?;
    let bracket = stieltjes(&x.map(|t, v| 0.5 * dxx(t, v)), &cont)?;
    let w_small = IntegrandField::w_field(f).expect("dx present").truncated(Truncation::Small(h.threshold));
    let remainder = jumps::integrate_nu(&w_small, nu, x)?;
    Ok(time.add(&forward)?.add(&bracket)?.add(&remainder)?)
}

/// sup_t |Γ^{aF+bG} − aΓ^F − bΓ^G|.
pub fn gamma_linearity_gap(
    (a, f): (f64, &FunctionBundle),
    (b, g): (f64, &FunctionBundle),
    x: &CadlagPath,
    decomposition: &LabeledDecomposition,
    nu: &CompensatorSpec,
    threshold: f64,
) -> Result<f64, DirichletError> {
    let combo = FunctionBundle::linear_combination(a, f, b, g);
    let gc = gamma_c01(&combo, x, decomposition, nu, threshold)?.gamma;
    let gf = gamma_c01(f, x, decomposition, nu, threshold)?.gamma;
    let gg = gamma_c01(g, x, decomposition, nu, threshold)?.gamma;
    Ok(gc.sub(&CadlagPath::linear_combination(a, &gf, b, &gg)?)?.sup_norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct ParticularReport {
    pub schema_version: u32,
    /// sup_t |[X,X] − ([M,M] + Σ(ΔV)² + 2ΣΔVΔM)|.
    pub bracket_gap: f64,
    pub bracket_threshold: f64,
    pub bracket_ok: bool,
    /// sup_t |X − (M_c + α + x1_{small}∗(μ−ν) + x1_{big}∗μ)|.
    pub grouping_gap: f64,
    /// Largest jump of α; zero when ν has no time atoms.
    pub alpha_max_jump: f64,
    pub alpha_jumps_ok: bool,
    /// Total variation of α − A′.
    pub alpha_bv_variation: f64,
    pub bracket: LimitSummary,
}

/// X = M + V + A′ with M = M_c + M_d.
pub fn particular_wd_check(
    m_c: &CadlagPath,
    m_d: &CadlagPath,
    v: &CadlagPath,
    a_prime: &CadlagPath,
    nu: &CompensatorSpec,
    h: &Harness,
) -> Result<ParticularReport, DirichletError> {
    let tv = v.total_variation();
    if !tv.is_finite() {
        return Err(DirichletError::Variation(format!("total variation of V is {tv}")));
    }
    if a_prime.has_jumps() || a_prime.values()[0] != 0.0 {
        return Err(DirichletError::Variation("A' must be continuous and start at 0".into()));
    }
    let m = m_c.add(m_d)?;
    let x = m.add(v)?.add(a_prime)?;
    let xx = regularize::ucp_limit(Estimator::Covariation, &x, None, &h.schedule, h.tolerance)?;
    let mm = if m.sup_norm() == 0.0 {
        zero_like(&x)
    } else {
        regularize::ucp_limit(Estimator::Covariation, &m, None, &h.schedule, h.tolerance)?.last().clone()
    };
    let (v_al, m_al) = v.align(&m)?;
    let cross = ito::jump_sum(&v_al, |t, l, r| {
        let dv = r - l;
        let dm = m_al.value_at(t) - m_al.left_limit(t).unwrap_or(m_al.value_at(t));
        dv * dv + 2.0 * dv * dm
    })?;
    let expected = mm.add(&cross)?;
    let bracket_gap = xx.last().sup_distance(&expected)?;
    let bracket_threshold = xx.threshold;
    let ident = IntegrandField::identity();
    let small = jumps::compensated_integral(&ident.clone().small(h.threshold), &x, nu)?;
    let big = jumps::integrate_mu(&ident.big(h.threshold), &x)?;
    let alpha = x.sub(m_c)?.sub(&small)?.sub(&big)?;
    let grouping_gap = x.sub(&m_c.add(&alpha)?.add(&small)?.add(&big)?)?.sup_norm();
    let alpha_max_jump = alpha.jumps_of().iter().map(|j| j.1.abs()).fold(0.0, f64::max);
    let alpha_bv_variation = alpha.sub(a_prime)?.total_variation();
    Ok(ParticularReport {
        schema_version: 1,
        bracket_gap,
        bracket_threshold,
        bracket_ok: bracket_gap < bracket_threshold,
        grouping_gap,
        alpha_max_jump,
        alpha_jumps_ok: alpha_max_jump <= 1e-9 * x.sup_norm().max(1.0),
        alpha_bv_variation,
        bracket: xx.summary(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MdReport {
    pub schema_version: u32,
    /// sup_t |M_d − x∗(μ − ν)|.
    pub sup_gap: f64,
    /// max over atoms of |ΔM_d − ΔX|.
    pub jump_identity_gap: f64,
}

/// Compares the labeled M_d with the compensated identity field.
pub fn md_representation_check(
    x: &CadlagPath,
    decomposition: &LabeledDecomposition,
    nu: &CompensatorSpec,
) -> Result<MdReport, DirichletError> {
    let diag = jumps::integrability_report(x, None);
    if !diag.big_jumps_summable {
        return Err(DirichletError::JumpSum("big jumps are not absolutely summable".into()));
    }
    let zero = zero_like(x);
    let md = match decomposition.get(Role::Md) {
        Some(md) => md,
        None if !x.has_jumps() => &zero,
        None => return Err(DirichletError::MissingLabel(Role::Md.label())),
    };
    let comp = jumps::compensated_integral(&IntegrandField::identity(), x, nu)?;
    let sup_gap = md.sup_distance(&comp)?;
    let jump_identity_gap = x
        .jump_indices()
        .map(|i| {
            let t = x.grid()[i];
            let dmd = md.value_at(t) - md.left_limit(t).unwrap_or(0.0);
            (dmd - (x.values()[i] - x.left_values()[i])).abs()
        })
        .fold(0.0, f64::max);
    Ok(MdReport { schema_version: 1, sup_gap, jump_identity_gap })
}

#[derive(Debug, Clone)]
pub struct C0ChainReport {
    pub function: String,
    /// Σ|ΔF(s, X_s)|.
    pub jump_variation: f64,
    /// K∗(μ − ν) with K(s,x) = F(s, X_{s−}+x) − F(s, X_{s−}).
    pub compensated: CadlagPath,
    pub a_f: CadlagPath,
    pub orthogonality: BatteryReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct C0ChainSummary {
    pub schema_version: u32,
    pub function: String,
    pub jump_variation: f64,
    pub compensated_terminal: f64,
    pub a_f_terminal: f64,
    pub orthogonality: BatteryReport,
}

impl C0ChainReport {
    pub fn summary(&self) -> C0ChainSummary {
        C0ChainSummary {
            schema_version: 1,
            function: self.function.clone(),
            jump_variation: self.jump_variation,
            compensated_terminal: self.compensated.terminal(),
            a_f_terminal: self.a_f.terminal(),
            orthogonality: self.orthogonality.clone(),
        }
    }
}

/// F(t,X_t) = F(0,X_0) + K∗(μ−ν) + A^F for continuous F; A^F is the residual.
pub fn special_wd_c0_chain(
    f: &FunctionBundle,
    x: &CadlagPath,
    nu: &CompensatorSpec,
    h: &Harness,
) -> Result<C0ChainReport, DirichletError> {
    let jump_variation: f64 = ito::jump_sum(x, |t, l, v| (f.f(t, v) - f.f(t, l)).abs())?.terminal();
    if !jump_variation.is_finite() {
        return Err(DirichletError::JumpSum(format!("sum of |jumps of F(X)| is {jump_variation}")));
    }
    let compensated = jumps::compensated_integral(&IntegrandField::k_field(f), x, nu)?;
    let fx = x.map(|t, v| f.f(t, v));
    let f0 = fx.values()[0];
    let a_f = fx.map(|_, v| v - f0).sub(&compensated)?;
    let orthogonality = orthogonality_battery(&a_f, &h.test_seeds, &h.schedule, h.tolerance)?;
    Ok(C0ChainReport { function: f.name.clone(), jump_variation, compensated, a_f, orthogonality })
}
