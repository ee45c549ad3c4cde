//! Dynamic-programming oracle on a Markov-chain approximation of the controlled diffusion.
//!
//! Per axis the chain jumps to the neighbouring node with probabilities
//! `(q/2 ± hμ/2)dt/h²` when `q ≥ h|μ|` and `(q/2 + hμ^±)dt/h²` otherwise, so the
//! first two conditional moments match the diffusion. Jumps across the box are
//! reflected back onto the boundary node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlProblem, ControlSet};
use crate::error::{invalid, Error, Result};
use crate::field::{Grid, GridField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    pub x_max: f64,
    pub nodes: usize,
    /// Points per control axis on `[-ρ, ρ]` (ball controls only).
    #[serde(default = "default_control_mesh")]
    pub control_mesh: usize,
    /// Time step; defaults to `0.9` of the stability limit.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_control_mesh() -> usize {
    41
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    200_000
}

impl DpConfig {
    pub fn new(x_max: f64, nodes: usize) -> Self {
        Self {
            x_max,
            nodes,
            control_mesh: default_control_mesh(),
            dt: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DpSolution {
    pub value: GridField,
    /// Minimizing control at every node.
    pub policy: Vec<Vec<f64>>,
    pub iterations: usize,
    pub last_delta: f64,
    /// `last_delta · γ/(1-γ)` with `γ = e^{-λdt}`: distance to the chain's fixed point.
    pub error_bound: f64,
    pub dt: f64,
    pub dt_max: f64,
    pub controls: usize,
}

impl DpSolution {
    /// Control of the nearest node (piecewise constant policy).
    pub fn policy_at(&self, x: &[f64]) -> Vec<f64> {
        let grid = &self.value.grid;
        let idx: Vec<usize> = (0..grid.dim())
            .map(|a| {
                let pos = (x[a] + grid.x_max[a]) / grid.spacing(a);
                (pos.round().max(0.0) as usize).min(grid.nodes[a] - 1)
            })
            .collect();
        self.policy[grid.flat_index(&idx)].clone()
    }
}

/// Candidate controls: the grid itself, or a square mesh clipped to the ball.
pub fn control_candidates(control: &ControlSet, mesh: usize) -> Result<Vec<Vec<f64>>> {
    match control {
        ControlSet::Grid { points } => {
            if points.is_empty() {
                return invalid("control grid is empty");
            }
            Ok(points.clone())
        }
        ControlSet::Ball { radius, dim } => {
            if *radius == 0.0 {
                return Ok(vec![vec![0.0; *dim]]);
            }
            if mesh < 2 || *dim > 3 {
                return invalid("ball control mesh needs >= 2 points per axis and dim <= 3");
            }
            let axis: Vec<f64> = (0..mesh)
                .map(|i| -radius + 2.0 * radius * i as f64 / (mesh - 1) as f64)
                .collect();
            let total = mesh.pow(*dim as u32);
            let mut out = Vec::new();
            for k in 0..total {
                let mut rem = k;
                let mut p = vec![0.0; *dim];
                for c in p.iter_mut().rev() {
                    *c = axis[rem % mesh];
                    rem /= mesh;
                }
                if p.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12) {
                    out.push(p);
                }
            }
            Ok(out)
        }
    }
}

/// Per-axis jump probabilities `(down, up)` for drift `mu`, diffusion `q`, mesh `h`.
fn jump_probs(mu: f64, q: f64, h: f64, dt: f64) -> (f64, f64) {
    let scale = dt / (h * h);
    if q >= h * mu.abs() {
        ((0.5 * q - 0.5 * h * mu) * scale, (0.5 * q + 0.5 * h * mu) * scale)
    } else {
        (
            (0.5 * q + h * (-mu).max(0.0)) * scale,
            (0.5 * q + h * mu.max(0.0)) * scale,
        )
    }
}

/// Value iteration `V ← min_η [l(x,η)(1-e^{-λdt})/λ + e^{-λdt} E V(next)]` to `sup |ΔV| ≤ tol`.
pub fn dp_oracle(problem: &ControlProblem, cfg: &DpConfig) -> Result<DpSolution> {
    problem.validate()?;
    let d = problem.model.dim;
    if d > 2 {
        return invalid(format!(
            "the dynamic-programming oracle handles at most 2 modes, got {d}"
        ));
    }
    if cfg.nodes < 3 || !(cfg.x_max > 0.0) {
        return invalid("state mesh needs >= 3 nodes and a positive half-width");
    }
    if !(cfg.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let grid = Grid::cube(d, cfg.x_max, cfg.nodes)?;
    let h = grid.spacing(0);
    let controls = control_candidates(&problem.control, cfg.control_mesh)?;
    let actions: Vec<Vec<f64>> = controls.iter().map(|c| problem.drift_action(c)).collect();
    let control_cost: Vec<f64> = controls
        .iter()
        .map(|c| problem.running_cost(&vec![0.0; d], c) - problem.state_cost.eval(&vec![0.0; d]))
        .collect();
    let points = grid.points();

    // Stability: total jump probability ≤ 1 for every state and control.
    let mut rate_max = 0.0f64;
    for x in &points {
        for b in &actions {
            let r: f64 = (0..d)
                .map(|n| problem.model.q[n] + h * (b[n] - problem.model.alpha[n] * x[n]).abs())
                .sum();
            rate_max = rate_max.max(r);
        }
    }
    let dt_max = if rate_max > 0.0 {
        h * h / rate_max
    } else {
        f64::INFINITY
    };
    let dt = match cfg.dt {
        Some(dt) if dt > dt_max => {
            return invalid(format!(
                "time step {dt} violates the stability limit {dt_max:.6e}; suggested dt = {:.6e}",
                0.9 * dt_max
            ));
        }
        Some(dt) if !(dt > 0.0) => return invalid("time step must be positive"),
        Some(dt) => dt,
        None if dt_max.is_finite() => 0.9 * dt_max,
        None => return invalid("degenerate chain: no diffusion and no drift"),
    };
    let discount = (-problem.lambda * dt).exp();
    let weight = -(-problem.lambda * dt).exp_m1() / problem.lambda;

    let neighbours: Vec<Vec<(usize, usize)>> = (0..grid.len())
        .map(|k| {
            let idx = grid.multi_index(k);
            (0..d)
                .map(|a| {
                    let mut lo = idx.clone();
                    let mut hi = idx.clone();
                    lo[a] = idx[a].saturating_sub(1);
                    hi[a] = (idx[a] + 1).min(grid.nodes[a] - 1);
                    (grid.flat_index(&lo), grid.flat_index(&hi))
                })
                .collect()
        })
        .collect();
    let state_cost: Vec<f64> = points.iter().map(|x| problem.state_cost.eval(x)).collect();

    let mut v = vec![0.0; grid.len()];
    let mut choice = vec![0usize; grid.len()];
    let mut last_delta = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let sweep: Vec<(f64, usize)> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let x = &points[k];
                let mut best = (f64::INFINITY, 0usize);
                for (c, b) in actions.iter().enumerate() {
                    let mut stay = 1.0;
                    let mut ev = 0.0;
                    for a in 0..d {
                        let mu = b[a] - problem.model.alpha[a] * x[a];
                        let (pd, pu) = jump_probs(mu, problem.model.q[a], h, dt);
                        let (lo, hi) = neighbours[k][a];
                        ev += pd * v[lo] + pu * v[hi];
                        stay -= pd + pu;
                    }
                    let val = (state_cost[k] + control_cost[c]) * weight + discount * (ev + stay * v[k]);
                    if val < best.0 {
                        best = (val, c);
                    }
                }
                best
            })
            .collect();
        let delta = sweep
            .iter()
            .zip(&v)
            .map(|((n, _), o)| (n - o).abs())
            .fold(0.0, f64::max);
        for (k, (val, c)) in sweep.into_iter().enumerate() {
            v[k] = val;
            choice[k] = c;
        }
        iterations += 1;
        last_delta = delta;
        if delta <= cfg.tol {
            let value = GridField::from_values(grid, 1, v, problem.growth_order())?;
            return Ok(DpSolution {
                value,
                policy: choice.iter().map(|c| controls[*c].clone()).collect(),
                iterations,
                last_delta,
                error_bound: last_delta * discount / (1.0 - discount),
                dt,
                dt_max,
                controls: controls.len(),
            });
        }
    }
    Err(Error::NotConverged { iterations, last_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::StateCost;
    use crate::model::DiagonalModel;

    fn ou_problem(alpha: f64, cost: StateCost, rho: f64) -> ControlProblem {
        let model = DiagonalModel::scalar(alpha, 1.0, 1.0).unwrap();
        ControlProblem::new(
            model,
            ControlSet::Ball { radius: rho, dim: 1 },
            vec![vec![1.0]],
            cost,
            1.0,
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_cost_gives_zero_value() {
        let p = ou_problem(1.0, StateCost::Constant { value: 0.0 }, 1.0);
        let sol = dp_oracle(
            &p,
            &DpConfig {
                control_mesh: 5,
                ..DpConfig::new(3.0, 31)
            },
        )
        .unwrap();
        assert!(sol.value.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_cost_gives_c_over_lambda() {
        let p = ou_problem(1.0, StateCost::Constant { value: 2.0 }, 0.0);
        let sol = dp_oracle(&p, &DpConfig::new(3.0, 31)).unwrap();
        assert!(sol
            .value
            .values
            .iter()
            .all(|v| (v - 0.5).abs() <= sol.error_bound + 1e-12));
        assert!(sol.error_bound < 1e-4);
    }

    #[test]
    fn uncontrolled_ou_second_moment() {
        // ∫ e^{-λs} E X_s² ds = x²/(λ+2α) + q/(λ(λ+2α))
        let p = ou_problem(1.0, StateCost::Quadratic { weight: 1.0, cap: None }, 0.0);
        let sol = dp_oracle(&p, &DpConfig::new(6.0, 481)).unwrap();
        for k in 0..sol.value.grid.len() {
            let x = sol.value.grid.point(k)[0];
            if x.abs() <= 2.0 {
                let exact = x * x / 6.0 + 1.0 / 24.0;
                assert!(
                    (sol.value.values[k] - exact).abs() < 1e-3,
                    "x={x}: {} vs {exact}",
                    sol.value.values[k]
                );
            }
        }
    }

    #[test]
    fn unstable_step_is_rejected_with_suggestion() {
        let p = ou_problem(1.0, StateCost::Constant { value: 1.0 }, 0.0);
        let err = dp_oracle(
            &p,
            &DpConfig {
                dt: Some(1.0),
                ..DpConfig::new(3.0, 31)
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("suggested dt"), "{err}");
    }

    #[test]
    fn refinement_changes_value_little() {
        let p = ou_problem(0.5, StateCost::Quadratic { weight: 1.0, cap: None }, 1.0);
        let coarse = dp_oracle(
            &p,
            &DpConfig {
                control_mesh: 21,
                ..DpConfig::new(5.0, 101)
            },
        )
        .unwrap();
        let fine = dp_oracle(
            &p,
            &DpConfig {
                control_mesh: 41,
                ..DpConfig::new(5.0, 201)
            },
        )
        .unwrap();
        for x in [-1.5, -0.5, 0.0, 0.5, 1.5] {
            let a = coarse.value.eval_scalar(&[x]);
            let b = fine.value.eval_scalar(&[x]);
            assert!((a - b).abs() <= 1e-2, "x={x}: {a} vs {b}");
        }
        assert_eq!(fine.policy_at(&[0.0]).len(), 1);
    }

    #[test]
    fn ball_candidates_stay_inside() {
        let c = control_candidates(&ControlSet::Ball { radius: 2.0, dim: 2 }, 11).unwrap();
        assert!(c.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 4.0 + 1e-12));
        assert!(c.contains(&vec![0.0, 0.0]));
        assert!(control_candidates(&ControlSet::Grid { points: vec![] }, 3).is_err());
    }
}
