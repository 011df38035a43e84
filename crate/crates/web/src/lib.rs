//! Browser bindings. Each exported call takes a catalog scenario id and a
//! seed, runs one check and returns a JSON string for the page to plot.

use regcalc::catalog::{self, Scenario, ScenarioRun, SCENARIOS};
use regcalc::dirichlet;
use regcalc::functions;
use regcalc::regularize::{self, DEFAULT_TOLERANCE};
use regcalc::report::{to_json, SCHEMA_VERSION};
use regcalc::simulate::seed_sequence;
use regcalc::{ito, CadlagPath, Estimator};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Points kept per plotted series.
const PLOT_POINTS: usize = 600;
const TEST_MARTINGALES: usize = 3;

#[derive(Debug, Serialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Series {
    fn of(path: &CadlagPath) -> Self {
        let (grid, values) = (path.grid(), path.values());
        let stride = grid.len().div_ceil(PLOT_POINTS).max(1);
        let mut idx: Vec<usize> = (0..grid.len()).step_by(stride).collect();
        if idx.last() != Some(&(grid.len() - 1)) {
            idx.push(grid.len() - 1);
        }
        Self { t: idx.iter().map(|&i| grid[i]).collect(), v: idx.iter().map(|&i| values[i]).collect() }
    }
}

#[derive(Debug, Serialize)]
pub struct QvView {
    pub schema_version: u32,
    pub scenario: &'static str,
    pub path: Series,
    pub estimate: Series,
    pub closed_form: Option<Series>,
    pub epsilons: Vec<f64>,
    pub gaps: Vec<f64>,
    pub threshold: f64,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct ItoView {
    pub schema_version: u32,
    pub scenario: &'static str,
    pub function: String,
    pub path: Series,
    pub residual: Series,
    pub relative_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct OrthView {
    pub schema_version: u32,
    pub scenario: &'static str,
    pub candidate: Series,
    pub epsilons: Vec<f64>,
    /// One row of sup|[A, N]_eps| per test martingale.
    pub sups: Vec<Vec<f64>>,
    pub decision: bool,
    pub control_sup: Option<f64>,
    pub control_decision: Option<bool>,
}

fn find(id: &str) -> Result<&'static Scenario, String> {
    catalog::scenario(id).ok_or_else(|| format!("unknown scenario '{id}'"))
}

fn simulate(s: &Scenario, seed: u64) -> Result<ScenarioRun, String> {
    s.run(seed).map_err(|e| e.to_string())
}

/// Quadratic variation of one scenario path along its schedule.
pub fn qv_view(id: &str, seed: u64) -> Result<QvView, String> {
    let s = find(id)?;
    let run = simulate(s, seed)?;
    let x = &run.sim.path;
    let r =
        regularize::ucp_limit(Estimator::Covariation, x, None, &s.schedule(), DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    Ok(QvView {
        schema_version: SCHEMA_VERSION,
        scenario: s.id,
        path: Series::of(x),
        estimate: Series::of(r.last()),
        closed_form: run.sim.truth.bracket.bracket_path(x).as_ref().map(Series::of),
        epsilons: r.epsilons.clone(),
        gaps: r.gaps.clone(),
        threshold: r.threshold,
        converged: r.converged,
    })
}

/// Residual of the Ito formula for a catalog function at the finest epsilon.
pub fn ito_view(id: &str, function: &str, seed: u64) -> Result<ItoView, String> {
    let s = find(id)?;
    let f = functions::lookup(function).ok_or_else(|| format!("unknown function '{function}'"))?;
    let run = simulate(s, seed)?;
    let x = &run.sim.path;
    let check = ito::ito_check(&f, x, None, &s.schedule(), DEFAULT_TOLERANCE, ito::JUMP_THRESHOLD).map_err(|e| e.to_string())?;
    let last = check.final_report();
    Ok(ItoView {
        schema_version: SCHEMA_VERSION,
        scenario: s.id,
        function: function.to_string(),
        path: Series::of(x),
        residual: Series::of(&last.residual),
        relative_residual: last.relative_residual(),
    })
}

/// Orthogonality of X minus its continuous martingale part, plus the A = N control.
pub fn orth_view(id: &str, seed: u64) -> Result<OrthView, String> {
    let s = find(id)?;
    let run = simulate(s, seed)?;
    let schedule = s.schedule();
    let seeds = seed_sequence(seed, TEST_MARTINGALES);
    let battery =
        dirichlet::orthogonality_battery(&run.candidate, &seeds, &schedule, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    let control = run
        .control
        .as_ref()
        .map(|n| dirichlet::orthogonality_test(n, n, &schedule, DEFAULT_TOLERANCE))
        .transpose()
        .map_err(|e| e.to_string())?;
    Ok(OrthView {
        schema_version: SCHEMA_VERSION,
        scenario: s.id,
        candidate: Series::of(&run.candidate),
        epsilons: schedule.as_slice().to_vec(),
        sups: battery.reports.iter().map(|r| r.sups.clone()).collect(),
        decision: battery.decision,
        control_sup: control.as_ref().map(|c| c.final_sup),
        control_decision: control.map(|c| c.decision),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
}

/// `[{id, anchor, expected_fail}]` for the scenario picker.
#[wasm_bindgen]
pub fn scenarios() -> String {
    #[derive(Serialize)]
    struct Entry {
        id: &'static str,
        anchor: &'static str,
        expected_fail: bool,
    }
    let list: Vec<Entry> =
        SCENARIOS.iter().map(|s| Entry { id: s.id, anchor: s.anchor, expected_fail: s.expected_fail }).collect();
    to_json(&list)
}

#[wasm_bindgen]
pub fn quadratic_variation(scenario: &str, seed: u64) -> Result<String, JsError> {
    to_js(qv_view(scenario, seed))
}

#[wasm_bindgen]
pub fn ito_residual(scenario: &str, function: &str, seed: u64) -> Result<String, JsError> {
    to_js(ito_view(scenario, function, seed))
}

#[wasm_bindgen]
pub fn orthogonality(scenario: &str, seed: u64) -> Result<String, JsError> {
    to_js(orth_view(scenario, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_keeps_endpoints_and_caps_length() {
        let p = CadlagPath::from_fn(regcalc::uniform_grid(1.0, 10_000), |t| t * t).unwrap();
        let s = Series::of(&p);
        assert!(s.t.len() <= PLOT_POINTS + 1);
        assert_eq!((s.t[0], *s.t.last().unwrap()), (0.0, 1.0));
        assert_eq!(*s.v.last().unwrap(), 1.0);
    }

    #[test]
    fn views_report_catalog_outcomes() {
        assert!(qv_view("poisson", 3).unwrap().converged);
        assert!(!qv_view("fbm02", 3).unwrap().converged);
        assert!(ito_view("bm", "square", 3).unwrap().relative_residual < 1e-2);
        let o = orth_view("cp_bm", 3).unwrap();
        assert!(o.decision);
        assert_eq!(o.control_decision, Some(false));
        assert!(qv_view("nope", 1).unwrap_err().contains("nope"));
    }
}
