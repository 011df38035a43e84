use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use regcalc::catalog::{PROCESSES, SCENARIOS};
use regcalc::dirichlet::{self, BatteryReport, C0ChainSummary, ChainRuleSummary, Harness, MdReport, OrthReport, Role};
use regcalc::functions::{self, FunctionBundle, Smoothness, CATALOG};
use regcalc::ito::{self, ItoCheckSummary, ItoSummary};
use regcalc::regularize::{self, LimitReport, LimitSummary};
use regcalc::report::{to_json, SCHEMA_VERSION};
use regcalc::{CadlagPath, Estimator};
use serde::Serialize;

use crate::error::CliError;
use crate::experiment::Experiment;

/// Relative reassembly tolerance for the measure form of the Ito formula.
const REASSEMBLY_TOL: f64 = 1e-8;

/// Collects artifacts and writes them from one place.
struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    fn new(e: &Experiment) -> Result<Self, CliError> {
        fs::create_dir_all(&e.out).map_err(|source| CliError::Io { path: e.out.clone(), source })?;
        Ok(Self { dir: e.out.clone() })
    }

    fn text(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.text(name, &to_json(value))
    }

    fn path_csv(&self, name: &str, p: &CadlagPath) -> Result<(), CliError> {
        let mut buf = Vec::new();
        p.to_csv(&mut buf)?;
        self.text(name, &String::from_utf8_lossy(&buf))
    }
}

fn lookup_fn(id: &str) -> Result<FunctionBundle, CliError> {
    functions::lookup(id).ok_or_else(|| CliError::Unknown { what: "function", id: id.into() })
}

fn verdict(label: &str, pass: bool) -> bool {
    println!("{label}: {}", if pass { "pass" } else { "FAIL" });
    pass
}

pub fn simulate(e: &Experiment) -> Result<bool, CliError> {
    let run = e.sample()?;
    let out = Artifacts::new(e)?;
    out.path_csv(&format!("{}_path.csv", e.label), &run.sim.path)?;
    out.json(&format!("{}_truth.json", e.label), &run.sim.truth.to_json())?;
    Ok(true)
}

#[derive(Serialize)]
struct LimitJson<'a> {
    schema_version: u32,
    scenario: &'a str,
    estimator: Estimator,
    expected_fail: bool,
    /// sup_t |limit − closed form| when the bracket has a closed form.
    closed_form_gap: Option<f64>,
    report: LimitSummary,
}

fn limit_json<'a>(
    e: &'a Experiment,
    estimator: Estimator,
    r: &LimitReport,
    closed: Option<&CadlagPath>,
) -> Result<LimitJson<'a>, CliError> {
    let closed_form_gap = closed.map(|c| r.last().sup_distance(c)).transpose()?;
    Ok(LimitJson {
        schema_version: SCHEMA_VERSION,
        scenario: &e.label,
        estimator,
        expected_fail: e.scenario.expected_fail,
        closed_form_gap,
        report: r.summary(),
    })
}

fn print_gaps(r: &LimitReport) {
    let gaps: Vec<String> = r.gaps.iter().map(|g| format!("{g:.4e}")).collect();
    println!("gaps [{}], threshold {:.4e}, converged {}", gaps.join(", "), r.threshold, r.converged);
}

pub fn qv(e: &Experiment) -> Result<bool, CliError> {
    let run = e.run()?;
    let x = &run.sim.path;
    let r = regularize::ucp_limit(Estimator::Covariation, x, None, &e.schedule, e.tol)?;
    let closed = run.sim.truth.bracket.bracket_path(x);
    let out = Artifacts::new(e)?;
    out.path_csv(&format!("{}_qv.csv", e.label), r.last())?;
    out.json(&format!("{}_qv.json", e.label), &limit_json(e, Estimator::Covariation, &r, closed.as_ref())?)?;
    print_gaps(&r);
    if e.scenario.expected_fail && !r.converged {
        println!("non-convergence is the expected outcome for {}", e.label);
    }
    Ok(verdict("qv", r.converged))
}

pub fn forward(e: &Experiment, function: Option<String>) -> Result<bool, CliError> {
    let run = e.run()?;
    let x = &run.sim.path;
    let (y, tag) = match &function {
        Some(id) => {
            let f = lookup_fn(id)?;
            let dx = f.require_dx()?.clone();
            (x.map(|t, v| dx(t, v)), id.as_str())
        }
        None => (x.clone(), "x"),
    };
    let r = regularize::ucp_limit(Estimator::Forward, x, Some(&y), &e.schedule, e.tol)?;
    let out = Artifacts::new(e)?;
    out.path_csv(&format!("{}_forward_{tag}.csv", e.label), r.last())?;
    out.json(&format!("{}_forward_{tag}.json", e.label), &limit_json(e, Estimator::Forward, &r, None)?)?;
    print_gaps(&r);
    Ok(verdict("forward", r.converged))
}

pub fn convergence(e: &Experiment, estimator: &str) -> Result<bool, CliError> {
    let est = match estimator {
        "covariation" => Estimator::Covariation,
        "covariation_continuous" => Estimator::CovariationContinuous,
        "forward" => Estimator::Forward,
        "forward_rv" => Estimator::ForwardRv,
        other => return Err(CliError::Unknown { what: "estimator", id: other.into() }),
    };
    let run = e.run()?;
    let r = regularize::ucp_limit(est, &run.sim.path, None, &e.schedule, e.tol)?;
    let mut csv = String::from("epsilon,sup_gap\n");
    for (eps, gap) in r.epsilons[1..].iter().zip(&r.gaps) {
        writeln!(csv, "{eps:.12e},{gap:.12e}").expect("writing to a String");
    }
    let out = Artifacts::new(e)?;
    out.text(&format!("{}_convergence_{estimator}.csv", e.label), &csv)?;
    out.json(&format!("{}_convergence_{estimator}.json", e.label), &limit_json(e, est, &r, None)?)?;
    print_gaps(&r);
    Ok(true)
}

#[derive(Serialize)]
struct C1LambdaJson<'a> {
    schema_version: u32,
    scenario: &'a str,
    relative_residual: f64,
    report: ItoSummary,
}

#[derive(Serialize)]
struct ItoJson<'a> {
    scenario: &'a str,
    #[serde(flatten)]
    check: ItoCheckSummary,
}

pub fn ito_check(e: &Experiment, function: &str, form: &str, max_residual: f64) -> Result<bool, CliError> {
    let f = lookup_fn(function)?;
    let run = e.run()?;
    let (x, nu) = (&run.sim.path, &run.sim.truth.compensator);
    let out = Artifacts::new(e)?;
    let stem = format!("{}_{function}", e.label);
    let pass = match form {
        "c12" | "measure" => {
            let check = ito::ito_check(&f, x, (form == "measure").then_some(nu), &e.schedule, e.tol, e.threshold)?;
            let last = check.final_report();
            let rel = last.relative_residual();
            let reassembled = last.reassembly.is_none_or(|r| r.gap <= REASSEMBLY_TOL * last.f_sup.max(1.0));
            out.path_csv(&format!("{stem}_residual.csv"), &last.residual)?;
            out.json(&format!("{stem}_ito.json"), &ItoJson { scenario: &e.label, check: check.summary() })?;
            println!("relative residual {rel:.4e} (limit {max_residual:.1e})");
            if let Some(re) = last.reassembly {
                println!("reassembly gap {:.3e}, nu quadrature defect {:.3e}", re.gap, re.nu_quadrature_defect);
            }
            rel < max_residual && reassembled
        }
        "c1lambda" => {
            let report = ito::ito_c1_lambda(&f, x, e.schedule.last())?;
            let rel = report.relative_residual();
            out.path_csv(&format!("{stem}_residual.csv"), &report.residual)?;
            out.json(
                &format!("{stem}_ito.json"),
                &C1LambdaJson {
                    schema_version: SCHEMA_VERSION,
                    scenario: &e.label,
                    relative_residual: rel,
                    report: report.summary(),
                },
            )?;
            println!("relative residual {rel:.4e} (limit {max_residual:.1e})");
            rel < max_residual
        }
        other => return Err(CliError::Unknown { what: "Ito form", id: other.into() }),
    };
    Ok(verdict("ito-check", pass))
}

#[derive(Serialize)]
struct DirichletJson<'a> {
    schema_version: u32,
    scenario: &'a str,
    anchor: &'a str,
    battery: BatteryReport,
    negative_control: Option<OrthReport>,
    md_representation: Option<MdReport>,
    chain_rule: Option<ChainRuleSummary>,
    c0_chain_rule: Option<C0ChainSummary>,
    pass: bool,
}

pub fn dirichlet_check(e: &Experiment, function: Option<String>) -> Result<bool, CliError> {
    let run = e.run()?;
    let (x, truth) = (&run.sim.path, &run.sim.truth);
    let h = Harness { schedule: e.schedule.clone(), tolerance: e.tol, threshold: e.threshold, test_seeds: e.test_seeds.clone() };
    let out = Artifacts::new(e)?;
    let battery = dirichlet::orthogonality_battery(&run.candidate, &h.test_seeds, &h.schedule, h.tolerance)?;
    println!("candidate orthogonal to {} test martingales: {}", battery.reports.len(), battery.decision);
    let mut pass = battery.decision;
    let negative_control =
        run.control.as_ref().map(|n| dirichlet::orthogonality_test(n, n, &h.schedule, h.tolerance)).transpose()?;
    if let Some(nc) = &negative_control {
        println!("negative control (A = N) orthogonal: {} (sup {:.3})", nc.decision, nc.final_sup);
        pass &= !nc.decision;
    }
    let decomposition = truth.decomposition.as_ref();
    let md_representation = match decomposition {
        Some(d) if d.get(Role::Md).is_some() => Some(dirichlet::md_representation_check(x, d, &truth.compensator)?),
        _ => None,
    };
    let (mut chain_rule, mut c0_chain_rule) = (None, None);
    if let Some(id) = &function {
        let f = lookup_fn(id)?;
        if f.class == Smoothness::C0 {
            let r = dirichlet::special_wd_c0_chain(&f, x, &truth.compensator, &h)?;
            println!("C0 chain rule: A^F orthogonal {}", r.orthogonality.decision);
            pass &= r.orthogonality.decision;
            out.path_csv(&format!("{}_{id}_a_f.csv", e.label), &r.a_f)?;
            c0_chain_rule = Some(r.summary());
        } else {
            let d = decomposition.ok_or(regcalc::DirichletError::MissingLabel(Role::Mc.label()))?;
            let r = dirichlet::chain_rule_c01(&f, x, d, &truth.compensator, &h)?;
            println!("C01 chain rule: A^F orthogonal {}, assembly gap {:.2e}", r.orthogonality.decision, r.assembly_gap);
            pass &= r.orthogonality.decision;
            out.path_csv(&format!("{}_{id}_a_f.csv", e.label), &r.a_f)?;
            chain_rule = Some(r.summary());
        }
    }
    out.path_csv(&format!("{}_candidate.csv", e.label), &run.candidate)?;
    let report = DirichletJson {
        schema_version: SCHEMA_VERSION,
        scenario: &e.label,
        anchor: e.scenario.anchor,
        battery,
        negative_control,
        md_representation,
        chain_rule,
        c0_chain_rule,
        pass,
    };
    out.json(&format!("{}_dirichlet.json", e.label), &report)?;
    Ok(verdict("dirichlet-check", pass))
}

pub fn list(filter: &str) {
    let keep = |id: &str, anchor: &str| filter.is_empty() || id.contains(filter) || anchor.contains(filter);
    println!("scenarios:");
    for s in SCENARIOS.iter().filter(|s| keep(s.id, s.anchor)) {
        let flag = if s.expected_fail { " [expected-fail]" } else { "" };
        println!("  {:<24} {} -> {}{flag}", s.id, s.kind.name(), s.anchor);
    }
    println!("functions:");
    for f in CATALOG.iter().filter(|f| keep(f.id, f.anchor)) {
        println!("  {:<24} {} -> {}", f.id, f.formula, f.anchor);
    }
    println!("processes:");
    for (id, anchor) in PROCESSES.iter().filter(|(id, a)| keep(id, a)) {
        println!("  {id:<24} -> {anchor}");
    }
}
