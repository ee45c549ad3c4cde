//! Mild solutions of `λu - Lu = F_0(x, u, D^G u)` as the fixed point of `Υ = (Υ_1, Υ_2)`.
//!
//! `Υ_1[u,v](x) = ∫_0^∞ e^{-λs} R_s[ψ](x) ds` and `Υ_2[u,v](x) = ∫_0^∞ e^{-λs} D^G R_s[ψ](x) ds`
//! with `ψ = F_0(·, u(·), v(·))` sampled on the grid.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::ContractionParams;
use crate::error::{invalid, Result};
use crate::field::{g_pair_norm, growth_weight, Grid, GridField};
use crate::model::DiagonalModel;
use crate::quadrature::QuadratureRule;
use crate::rng::stream;
use crate::semigroup::SemigroupStep;
use crate::timequad::{TimeQuadSpec, TimeQuadrature};

type F0Fn = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;

/// Hamiltonian `F_0(x, y, z)` with its declared constants.
#[derive(Clone)]
pub struct HamiltonianSpec {
    pub name: String,
    /// Lipschitz constant in `(y, z)` for the norm `|y| + |z|_K`.
    pub lipschitz: f64,
    pub growth_order: f64,
    /// `|F_0(x,y,z)| ≤ L'(1 + |x|^m + |y| + |z|)`.
    pub growth_const: f64,
    f0: Arc<F0Fn>,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("growth_order", &self.growth_order)
            .field("growth_const", &self.growth_const)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSpec {
    pub fn new<F>(name: impl Into<String>, lipschitz: f64, growth_order: f64, growth_const: f64, f0: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz >= 0.0 && growth_order >= 0.0 && growth_const >= 0.0) {
            return invalid("Hamiltonian constants must be non-negative");
        }
        Ok(Self {
            name: name.into(),
            lipschitz,
            growth_order,
            growth_const,
            f0: Arc::new(f0),
        })
    }

    pub fn eval(&self, x: &[f64], y: f64, z: &[f64]) -> f64 {
        (self.f0)(x, y, z)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), 0.0, 0.0, c.abs(), move |_, _, _| c).expect("valid constants")
    }

    /// `F_0(x, y, z) = ⟨c, x⟩`.
    pub fn linear(c: Vec<f64>) -> Self {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self::new("linear", 0.0, 1.0, norm.max(1.0), move |x, _, _| {
            c.iter().zip(x).map(|(a, b)| a * b).sum()
        })
        .expect("valid constants")
    }

    /// Largest observed ratios of the Lipschitz and growth inequalities on random probes.
    pub fn sampled_check(&self, dim: usize, probes: usize, radius: f64, seed: u64) -> HamiltonianCheck {
        let mut lip = 0.0f64;
        let mut growth = 0.0f64;
        for i in 0..probes {
            let mut rng = stream(seed, i as u64);
            let mut draw =
                |n: usize| -> Vec<f64> { (0..n).map(|_| radius * rng.sample::<f64, _>(StandardNormal)).collect() };
            let x = draw(dim);
            let y = draw(2);
            let z1 = draw(dim);
            let z2 = draw(dim);
            let f1 = self.eval(&x, y[0], &z1);
            let f2 = self.eval(&x, y[1], &z2);
            let dz = z1.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dist = (y[0] - y[1]).abs() + dz;
            if dist > 0.0 {
                lip = lip.max((f1 - f2).abs() / dist);
            }
            let zn = z1.iter().map(|a| a * a).sum::<f64>().sqrt();
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let scale = 1.0 + r.powf(self.growth_order) + y[0].abs() + zn;
            growth = growth.max(f1.abs() / scale);
        }
        HamiltonianCheck {
            max_lipschitz_ratio: lip,
            max_growth_ratio: growth,
            pass: lip <= self.lipschitz * (1.0 + 1e-9) + 1e-12 && growth <= self.growth_const * (1.0 + 1e-9) + 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianCheck {
    pub max_lipschitz_ratio: f64,
    pub max_growth_ratio: f64,
    pub pass: bool,
}

/// Discretized `Υ` for one model, Hamiltonian and discount.
pub struct MildSolver {
    pub model: DiagonalModel,
    pub hamiltonian: HamiltonianSpec,
    pub lambda: f64,
    pub tq: TimeQuadrature,
    pub rule: QuadratureRule,
    steps: Vec<SemigroupStep>,
}

impl MildSolver {
    pub fn new(
        model: &DiagonalModel,
        hamiltonian: &HamiltonianSpec,
        lambda: f64,
        tq: TimeQuadrature,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if (tq.lambda - lambda).abs() > 1e-12 * lambda.abs().max(1.0) {
            return invalid("time quadrature was built for a different discount");
        }
        if model.dim > crate::field::MAX_GRID_DIM {
            return invalid(format!(
                "grid solver supports at most {} modes",
                crate::field::MAX_GRID_DIM
            ));
        }
        let steps = tq
            .nodes
            .iter()
            .map(|n| SemigroupStep::new(model, n.s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: model.clone(),
            hamiltonian: hamiltonian.clone(),
            lambda,
            tq,
            rule,
            steps,
        })
    }

    /// Solver whose time quadrature is derived from the contraction constants.
    pub fn from_params(
        model: &DiagonalModel,
        hamiltonian: &HamiltonianSpec,
        lambda: f64,
        params: &ContractionParams,
        time_tol: f64,
        spec: &TimeQuadSpec,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if !(lambda > params.left_edge()) {
            return invalid(format!(
                "lambda = {lambda} must exceed max(a, a_G) = {}",
                params.left_edge()
            ));
        }
        let theta = if params.envelope.c == 0.0 {
            0.0
        } else {
            params.envelope.theta
        };
        if !(theta < 1.0) {
            return invalid(format!("envelope exponent theta = {theta} is not integrable at 0"));
        }
        let tq = TimeQuadrature::with_spec(lambda, params.left_edge(), theta, time_tol, spec)?;
        Self::new(model, hamiltonian, lambda, tq, rule)
    }

    /// `ψ = F_0(x, u(x), v(x))` at every node.
    pub fn psi_field(&self, u: &GridField, v: &GridField) -> Result<GridField> {
        check_pair(&self.model, u, v)?;
        let values = (0..u.grid.len())
            .into_par_iter()
            .map(|k| {
                let x = u.grid.point(k);
                self.hamiltonian.eval(&x, u.node_value(k)[0], v.node_value(k))
            })
            .collect();
        GridField::from_values(u.grid.clone(), 1, values, u.growth_order)
    }

    /// `(Υ_1, Υ_2)` for an arbitrary `ψ` at one point.
    pub fn upsilon_point<F>(&self, psi: F, x: &[f64]) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut value = 0.0;
        let mut grad = vec![0.0; self.model.dim];
        for (node, step) in self.tq.nodes.iter().zip(&self.steps) {
            if node.w_grad != 0.0 {
                let (r, d) = step.apply_with_gradient(&psi, x, &self.rule)?;
                value += node.w_value * r;
                for (g, di) in grad.iter_mut().zip(d) {
                    *g += node.w_grad * di;
                }
            } else {
                value += node.w_value * step.apply(&psi, x, &self.rule)?;
            }
        }
        Ok((value, grad))
    }

    /// `Υ_1[u,v]` and `Υ_2[u,v]` on the grid of `u`.
    pub fn upsilon(&self, u: &GridField, v: &GridField) -> Result<(GridField, GridField)> {
        let psi = self.psi_field(u, v)?;
        self.upsilon_of_psi(&psi)
    }

    pub fn upsilon_of_psi(&self, psi: &GridField) -> Result<(GridField, GridField)> {
        let grid = psi.grid.clone();
        let results = (0..grid.len())
            .into_par_iter()
            .map(|k| self.upsilon_point(|p| psi.eval_scalar(p), &grid.point(k)))
            .collect::<Result<Vec<_>>>()?;
        let k = self.model.dim;
        let mut u = Vec::with_capacity(grid.len());
        let mut v = Vec::with_capacity(grid.len() * k);
        for (val, grad) in results {
            u.push(val);
            v.extend(grad);
        }
        Ok((
            GridField::from_values(grid.clone(), 1, u, psi.growth_order)?,
            GridField::from_values(grid, k, v, psi.growth_order)?,
        ))
    }

    /// Bound on the part of the time integrals beyond `T_max`.
    pub fn tail_estimate(&self, psi: &GridField, params: &ContractionParams) -> f64 {
        let sup = psi.weighted_norm();
        let grad_scale = params.envelope.c.max(0.0);
        self.tq.tail_bound(sup * params.c_growth.max(1.0)) * (1.0 + grad_scale)
    }
}

fn check_pair(model: &DiagonalModel, u: &GridField, v: &GridField) -> Result<()> {
    if !u.same_grid(v) {
        return invalid("u and v must share a grid");
    }
    if u.components != 1 || v.components != model.dim {
        return invalid(format!("u must be scalar and v must have {} components", model.dim));
    }
    if u.grid.dim() != model.dim {
        return invalid("grid dimension does not match the model");
    }
    Ok(())
}

pub fn upsilon1(solver: &MildSolver, u: &GridField, v: &GridField) -> Result<GridField> {
    Ok(solver.upsilon(u, v)?.0)
}

pub fn upsilon2(solver: &MildSolver, u: &GridField, v: &GridField) -> Result<GridField> {
    Ok(solver.upsilon(u, v)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub lambda: f64,
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Tolerance of the time quadrature, defaults to `tol / 10`.
    #[serde(default)]
    pub time_tol: Option<f64>,
}

fn default_max_iter() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub hamiltonian: String,
    pub iterations: usize,
    pub deltas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub stop_threshold: f64,
    pub residual: f64,
    pub quadrature_estimate: f64,
    pub lambda: f64,
    pub lambda0: f64,
    pub alpha: f64,
    /// Max over interior nodes of `|v_n - g_n ∂_n u|` with `∂_n` by central differences.
    pub gradient_fd_error: f64,
}

#[derive(Debug, Clone)]
pub struct MildSolution {
    pub u: GridField,
    pub v: GridField,
    pub report: SolveReport,
}

/// Picard iteration `(u, v) ← Υ(u, v)` from `init` (default `(0, 0)`).
pub fn solve_picard(
    solver: &MildSolver,
    params: &ContractionParams,
    grid: &Grid,
    cfg: &PicardConfig,
    init: Option<(GridField, GridField)>,
) -> Result<MildSolution> {
    if !(cfg.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if cfg.max_iter == 0 {
        return invalid("max_iter must be >= 1");
    }
    let alpha = params.alpha(cfg.lambda)?;
    let lambda0 = params.lambda0()?;
    if alpha >= 1.0 {
        return invalid(format!(
            "lambda = {} gives contraction constant {alpha} >= 1 (threshold {lambda0})",
            cfg.lambda
        ));
    }
    let m = solver.model.m;
    let (mut u, mut v) = match init {
        Some((u, v)) => (u, v),
        None => (
            GridField::zeros(grid.clone(), 1, m)?,
            GridField::zeros(grid.clone(), solver.model.dim, m)?,
        ),
    };
    check_pair(&solver.model, &u, &v)?;
    let stop_threshold = if alpha == 0.0 {
        cfg.tol
    } else {
        cfg.tol * (1.0 - alpha) / alpha
    };
    let mut deltas = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (nu, nv) = solver.upsilon(&u, &v)?;
        let delta = g_pair_norm(&nu.sub(&u)?, &nv.sub(&v)?)?;
        deltas.push(delta);
        u = nu;
        v = nv;
        if delta <= stop_threshold {
            converged = true;
            break;
        }
    }
    let ratios = deltas
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let psi = solver.psi_field(&u, &v)?;
    let quadrature_estimate = solver.tail_estimate(&psi, params);
    let residual = residual_check(solver, &u, &v)?;
    let gradient_fd_error = gradient_fd_error(&solver.model, &u, &v);
    Ok(MildSolution {
        report: SolveReport {
            hamiltonian: solver.hamiltonian.name.clone(),
            iterations: deltas.len(),
            deltas,
            ratios,
            converged,
            stop_threshold,
            residual,
            quadrature_estimate,
            lambda: cfg.lambda,
            lambda0,
            alpha,
            gradient_fd_error,
        },
        u,
        v,
    })
}

/// `|u - Υ_1[u, v]|_{C_m}` over the grid.
pub fn residual_check(solver: &MildSolver, u: &GridField, v: &GridField) -> Result<f64> {
    let (u1, _) = solver.upsilon(u, v)?;
    Ok(u.sub(&u1)?.weighted_norm())
}

fn gradient_fd_error(model: &DiagonalModel, u: &GridField, v: &GridField) -> f64 {
    let grid = &u.grid;
    let d = grid.dim();
    let mut worst = 0.0f64;
    for k in 0..grid.len() {
        let idx = grid.multi_index(k);
        if idx.iter().zip(&grid.nodes).any(|(i, n)| *i == 0 || *i + 1 == *n) {
            continue;
        }
        for axis in 0..d {
            let mut up = idx.clone();
            let mut down = idx.clone();
            up[axis] += 1;
            down[axis] -= 1;
            let h = grid.spacing(axis);
            let fd = (u.node_value(grid.flat_index(&up))[0] - u.node_value(grid.flat_index(&down))[0]) / (2.0 * h);
            let err =
                (v.node_value(k)[axis] - model.g[axis] * fd).abs() / growth_weight(&grid.point(k), u.growth_order);
            worst = worst.max(err);
        }
    }
    worst
}

/// Smooth bounded random pair used to test initialization independence.
pub fn random_pair(model: &DiagonalModel, grid: &Grid, amplitude: f64, seed: u64) -> Result<(GridField, GridField)> {
    let k = model.dim;
    let mut rng = stream(seed, 0);
    let n = grid.len();
    let uvals: Vec<f64> = (0..n).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect();
    let vvals: Vec<f64> = (0..n * k).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect();
    Ok((
        GridField::from_values(grid.clone(), 1, uvals, model.m)?,
        GridField::from_values(grid.clone(), k, vvals, model.m)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver_for(
        model: &DiagonalModel,
        ham: &HamiltonianSpec,
        lambda: f64,
        params: &ContractionParams,
        gh: usize,
    ) -> MildSolver {
        MildSolver::from_params(
            model,
            ham,
            lambda,
            params,
            1e-9,
            &TimeQuadSpec::default(),
            QuadratureRule::gauss_hermite(gh).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_hamiltonian_gives_c_over_lambda() {
        let model = DiagonalModel::scalar(1.0, 1.0, 1.0).unwrap();
        let ham = HamiltonianSpec::constant(3.0);
        let params = ContractionParams::bounded(&model, 0.0);
        let solver = solver_for(&model, &ham, 2.0, &params, 8);
        let grid = Grid::cube(1, 4.0, 21).unwrap();
        let cfg = PicardConfig {
            lambda: 2.0,
            tol: 1e-8,
            max_iter: 10,
            time_tol: None,
        };
        let sol = solve_picard(&solver, &params, &grid, &cfg, None).unwrap();
        assert_eq!(sol.report.iterations, 2);
        assert!(sol.report.converged);
        assert!(sol.u.values.iter().all(|v| (v - 1.5).abs() < 1e-9));
        assert!(sol.v.values.iter().all(|v| v.abs() < 1e-9));
        assert!(sol.report.residual < 1e-9);
    }

    #[test]
    fn linear_hamiltonian_resolvent() {
        let model = DiagonalModel::scalar(1.0, 1.0, 1.0).unwrap().with_growth(1.0).unwrap();
        let ham = HamiltonianSpec::linear(vec![1.0]);
        let params = ContractionParams::bounded(&model, 0.0);
        let solver = solver_for(&model, &ham, 2.0, &params, 16);
        let grid = Grid::cube(1, 8.0, 33).unwrap();
        let psi = GridField::scalar_from_fn(grid.clone(), 1.0, |x| x[0]).unwrap();
        let (u1, u2) = solver.upsilon_of_psi(&psi).unwrap();
        for k in 0..grid.len() {
            let x = grid.point(k)[0];
            if x.abs() <= 4.0 {
                assert!((u1.values[k] - x / 3.0).abs() < 1e-6, "x={x}: {}", u1.values[k]);
                assert!((u2.values[k] - 1.0 / 3.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn upsilon1_is_linear_in_psi() {
        let model = DiagonalModel::scalar(0.5, 1.0, 1.0).unwrap();
        let ham = HamiltonianSpec::constant(0.0);
        let params = ContractionParams::bounded(&model, 0.0);
        let solver = solver_for(&model, &ham, 3.0, &params, 8);
        let grid = Grid::cube(1, 3.0, 13).unwrap();
        let a = GridField::scalar_from_fn(grid.clone(), 0.0, |x| x[0].sin()).unwrap();
        let b = GridField::scalar_from_fn(grid.clone(), 0.0, |x| (0.3 * x[0]).cos()).unwrap();
        let (ua, _) = solver.upsilon_of_psi(&a).unwrap();
        let (ub, _) = solver.upsilon_of_psi(&b).unwrap();
        let (uab, _) = solver.upsilon_of_psi(&a.add(&b).unwrap()).unwrap();
        for k in 0..grid.len() {
            assert!((uab.values[k] - ua.values[k] - ub.values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn upsilon2_is_g_gradient_of_upsilon1() {
        let model = DiagonalModel::new(vec![1.0, 0.3], vec![1.0, 0.5], vec![1.5, 0.7], 0.0).unwrap();
        let ham = HamiltonianSpec::constant(0.0);
        let params = ContractionParams::bounded(&model, 0.0);
        let solver = solver_for(&model, &ham, 3.0, &params, 16);
        let psi = |p: &[f64]| p[0].sin() * (0.5 * p[1]).cos();
        let x = [0.4, -0.8];
        let (_, grad) = solver.upsilon_point(psi, &x).unwrap();
        for n in 0..2 {
            let h = f64::EPSILON.cbrt() * (1.0 + 0.8944);
            let mut xp = x;
            let mut xm = x;
            xp[n] += h * model.g[n];
            xm[n] -= h * model.g[n];
            let fd =
                (solver.upsilon_point(psi, &xp).unwrap().0 - solver.upsilon_point(psi, &xm).unwrap().0) / (2.0 * h);
            assert!((fd - grad[n]).abs() < 1e-6, "n={n}: {fd} vs {}", grad[n]);
        }
    }

    #[test]
    fn rejects_subcritical_discount() {
        let model = DiagonalModel::scalar(0.0, 1.0, 1.0).unwrap();
        let ham = HamiltonianSpec::new("sin", 1.0, 0.0, 1.0, |_, y, _| y.sin()).unwrap();
        let params = ContractionParams::bounded(&model, 1.0);
        let solver = solver_for(&model, &ham, 2.0, &params, 8);
        let grid = Grid::cube(1, 2.0, 5).unwrap();
        let cfg = PicardConfig {
            lambda: 2.0,
            tol: 1e-6,
            max_iter: 10,
            time_tol: None,
        };
        assert!(solve_picard(&solver, &params, &grid, &cfg, None).is_err());
        assert!(MildSolver::from_params(
            &model,
            &ham,
            0.0,
            &params,
            1e-8,
            &TimeQuadSpec::default(),
            QuadratureRule::gauss_hermite(4).unwrap()
        )
        .is_err());
    }

    #[test]
    fn nonlinear_contraction_and_residual() {
        let model = DiagonalModel::scalar(1.0, 1.0, 1.0).unwrap();
        let ham = HamiltonianSpec::new("sin+tanh", 1.0, 0.0, 1.5, |x, y, z| {
            y.sin() + 0.5 * z[0].tanh() + x[0].cos()
        })
        .unwrap();
        let params = ContractionParams::bounded(&model, ham.lipschitz);
        let lambda = 20.0;
        let solver = solver_for(&model, &ham, lambda, &params, 12);
        let grid = Grid::cube(1, 4.0, 41).unwrap();
        let cfg = PicardConfig {
            lambda,
            tol: 1e-8,
            max_iter: 60,
            time_tol: None,
        };
        let sol = solve_picard(&solver, &params, &grid, &cfg, None).unwrap();
        assert!(sol.report.converged);
        for r in sol.report.ratios.iter().skip(2) {
            assert!(*r <= sol.report.alpha + 0.05, "{r} vs {}", sol.report.alpha);
        }
        assert!(sol.report.residual <= 2.0 * cfg.tol + sol.report.quadrature_estimate);
        let (ru, rv) = random_pair(&model, &grid, 2.0, 9).unwrap();
        let other = solve_picard(&solver, &params, &grid, &cfg, Some((ru, rv))).unwrap();
        let gap = g_pair_norm(&sol.u.sub(&other.u).unwrap(), &sol.v.sub(&other.v).unwrap()).unwrap();
        assert!(gap <= 2.0 * cfg.tol, "{gap}");
    }

    #[test]
    fn hamiltonian_sampled_checks() {
        let ham = HamiltonianSpec::new("sin+tanh", 1.0, 0.0, 1.5, |_, y, z| y.sin() + 0.5 * z[0].tanh()).unwrap();
        assert!(ham.sampled_check(1, 500, 3.0, 1).pass);
        let liar = HamiltonianSpec::new("2y", 1.0, 0.0, 10.0, |_, y, _| 2.0 * y).unwrap();
        assert!(!liar.sampled_check(1, 500, 3.0, 1).pass);
    }
}
