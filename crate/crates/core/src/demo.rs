//! End-to-end boundary-control run: certify, solve, extract the feedback, roll it
//! out, and compare with the dynamic-programming oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certificates::{certify, log_grid, CertificateReport};
use crate::control::{
    evaluate_policy, feedback_policy, solve_hjb, ControlProblem, HjbConfig, RolloutConfig, StateCost,
};
use crate::dp::{dp_oracle, DpConfig};
use crate::error::Result;
use crate::field::Grid;
use crate::mild::SolveReport;
use crate::neumann::{neumann_estimate_check, neumann_model, NeumannEstimateReport};
use crate::rng::derive_seed;
use crate::sde::DiscountedCost;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannDemoConfig {
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_modes")]
    pub modes: usize,
    /// Noise intensity of every retained mode.
    #[serde(default = "d_one")]
    pub q: f64,
    #[serde(default = "d_one")]
    pub radius: f64,
    #[serde(default = "d_one")]
    pub state_weight: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_xmax")]
    pub x_max: f64,
    #[serde(default = "d_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub hjb: HjbConfig,
    #[serde(default = "d_control_mesh")]
    pub dp_control_mesh: usize,
    #[serde(default = "d_probes")]
    pub probes: Vec<f64>,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_count")]
    pub paths: usize,
    /// Modes used for the standalone envelope estimate.
    #[serde(default = "d_estimate_modes")]
    pub estimate_modes: usize,
}

fn d_delta() -> f64 {
    1.0
}
fn d_eps() -> f64 {
    0.1
}
fn d_modes() -> usize {
    1
}
fn d_one() -> f64 {
    1.0
}
fn d_lambda() -> f64 {
    10.0
}
fn d_xmax() -> f64 {
    6.0
}
fn d_nodes() -> usize {
    241
}
fn d_control_mesh() -> usize {
    41
}
fn d_probes() -> Vec<f64> {
    vec![-2.0, -1.0, 0.0, 1.0, 2.0]
}
fn d_horizon() -> f64 {
    1.0
}
fn d_dt() -> f64 {
    1e-3
}
fn d_count() -> usize {
    20_000
}
fn d_estimate_modes() -> usize {
    10_000
}

impl Default for NeumannDemoConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRow {
    pub x: f64,
    pub hjb: f64,
    pub dp: f64,
    pub feedback_cost: DiscountedCost,
    pub dp_policy_cost: DiscountedCost,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannDemoReport {
    pub certificate: CertificateReport,
    pub estimate: NeumannEstimateReport,
    pub solve: SolveReport,
    pub dp_iterations: usize,
    pub dp_error_bound: f64,
    pub dp_dt: f64,
    pub probes: Vec<ProbeRow>,
    /// `max_i |u(x_i) - V(x_i)| / max_i |V(x_i)|`.
    pub relative_error: f64,
    /// Largest `J(feedback) - J(dp policy) - 3·stderr` over the probes, in units of `max_i |V(x_i)|`.
    pub rollout_excess: f64,
    pub value_pass: bool,
    pub rollout_pass: bool,
    pub seconds: f64,
}

/// Runs the pipeline along the first mode, other coordinates at `0`.
pub fn neumann_demo(cfg: &NeumannDemoConfig, seed: u64) -> Result<(NeumannDemoReport, crate::control::HjbSolution)> {
    let start = Instant::now();
    let nm = neumann_model(cfg.delta, cfg.eps, cfg.modes, vec![cfg.q; cfg.modes])?;
    let problem = ControlProblem::neumann(
        &nm,
        cfg.radius,
        StateCost::Quadratic {
            weight: cfg.state_weight,
            cap: None,
        },
        cfg.lambda,
    )?;
    let params = crate::control::contraction_params(&problem)?;
    let certificate = certify(
        &problem.model,
        params.l,
        params.c_growth,
        params.a,
        Some(params.a_g),
        &log_grid(1e-4, 10.0, 41),
        &[cfg.lambda],
    )?;
    let estimate = neumann_estimate_check(cfg.delta, cfg.eps, cfg.estimate_modes, &log_grid(1e-4, 10.0, 41), 1.0);

    let grid = Grid::cube(problem.model.dim, cfg.x_max, cfg.nodes)?;
    let sol = solve_hjb(&problem, &grid, &cfg.hjb)?;
    let policy = feedback_policy(&problem, &sol.v)?;
    let dp = dp_oracle(
        &problem,
        &DpConfig {
            control_mesh: cfg.dp_control_mesh,
            ..DpConfig::new(cfg.x_max, cfg.nodes)
        },
    )?;

    let rollout = RolloutConfig {
        horizon: cfg.horizon,
        dt: cfg.dt,
        count: cfg.paths,
        seed: derive_seed(seed, "rollout"),
    };
    let dp_shared = std::sync::Arc::new(dp.clone());
    let mut rows = Vec::new();
    for &x0 in &cfg.probes {
        let mut x = vec![0.0; problem.model.dim];
        x[0] = x0;
        let fb = policy.clone();
        let feedback_cost = evaluate_policy(&problem, move |y: &[f64]| fb.eval(y), &x, &rollout)?;
        let dpp = dp_shared.clone();
        let dp_policy_cost = evaluate_policy(&problem, move |y: &[f64]| dpp.policy_at(y), &x, &rollout)?;
        rows.push(ProbeRow {
            x: x0,
            hjb: sol.u.eval_scalar(&x),
            dp: dp.value.eval_scalar(&x),
            feedback_cost,
            dp_policy_cost,
        });
    }
    let scale = rows.iter().map(|r| r.dp.abs()).fold(0.0, f64::max);
    let relative_error = rows.iter().map(|r| (r.hjb - r.dp).abs()).fold(0.0, f64::max) / scale;
    let rollout_excess = rows
        .iter()
        .map(|r| {
            let se = r.feedback_cost.stderr.hypot(r.dp_policy_cost.stderr);
            (r.feedback_cost.mean - r.dp_policy_cost.mean - 3.0 * se) / scale
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let report = NeumannDemoReport {
        certificate,
        estimate,
        solve: sol.report.clone(),
        dp_iterations: dp.iterations,
        dp_error_bound: dp.error_bound,
        dp_dt: dp.dt,
        probes: rows,
        relative_error,
        rollout_excess,
        value_pass: relative_error <= 5e-2,
        rollout_pass: rollout_excess <= 5e-2,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_reject_unknown_keys() {
        let cfg = NeumannDemoConfig::default();
        assert_eq!(cfg.probes.len(), 5);
        assert!(serde_json::from_str::<NeumannDemoConfig>(r#"{"lamda": 3}"#).is_err());
    }

    #[test]
    fn small_demo_runs() {
        let cfg = NeumannDemoConfig {
            nodes: 121,
            paths: 2000,
            estimate_modes: 200,
            dp_control_mesh: 21,
            ..Default::default()
        };
        let (report, _) = neumann_demo(&cfg, 3).unwrap();
        assert!(report.certificate.passed(), "{:?}", report.certificate.checks);
        assert!(report.estimate.pass);
        assert!(report.solve.converged);
        assert!(report.value_pass, "relative error {}", report.relative_error);
        assert!(report.rollout_pass, "excess {}", report.rollout_excess);
    }
}
