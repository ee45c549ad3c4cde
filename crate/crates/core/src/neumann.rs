//! Neumann boundary control of the heat equation on `(0, π)`.
//!
//! The Neumann map `N_δ η` solves `w'' = δw` with `-w'(0) = η_0`, `w'(π) = η_1`.
//! It is computed by a second-order finite-difference solve and projected on the
//! orthonormal cosine basis `ê_0 = 1/√π`, `ê_n = √(2/π) cos(nξ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{DiagonalModel, RateLaw, Rates};

/// Boundary points of `(0, π)`, hence the control dimension.
pub const BOUNDARY_POINTS: usize = 2;

/// Solves `-a_i x_{i-1} + b_i x_i - c_i x_{i+1} = d_i` (Thomas algorithm).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return invalid("singular tridiagonal system");
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return invalid("singular tridiagonal system");
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Nodal values of `N_δ η` on `ξ_i = iπ/M`, `i = 0..=M`.
pub fn neumann_map_fd(delta: f64, eta: [f64; 2], mesh: usize) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    if mesh < 2 {
        return invalid("mesh needs at least two intervals");
    }
    let h = std::f64::consts::PI / mesh as f64;
    let n = mesh + 1;
    // Ghost points w_{-1} = w_1 + 2hη_0 and w_{M+1} = w_{M-1} + 2hη_1, rows scaled by h².
    let mut lower = vec![-1.0; n];
    let mut upper = vec![-1.0; n];
    let diag = vec![2.0 + delta * h * h; n];
    let mut rhs = vec![0.0; n];
    upper[0] = -2.0;
    lower[n - 1] = -2.0;
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    rhs[0] = 2.0 * h * eta[0];
    rhs[n - 1] = 2.0 * h * eta[1];
    thomas(&lower, &diag, &upper, &rhs)
}

/// Trapezoid projections `⟨w, ê_n⟩` for `n < modes`, several nodal vectors at once.
fn cosine_coefficients(nodal: &[Vec<f64>], modes: usize) -> Vec<Vec<f64>> {
    let mesh = nodal[0].len() - 1;
    let h = std::f64::consts::PI / mesh as f64;
    let period = 2 * mesh;
    let table: Vec<f64> = (0..period).map(|k| (k as f64 * h).cos()).collect();
    let per_mode: Vec<Vec<f64>> = (0..modes)
        .into_par_iter()
        .map(|n| {
            let mut sums = vec![0.0; nodal.len()];
            let step = n % period;
            let mut idx = 0usize;
            for i in 0..=mesh {
                let w = if i == 0 || i == mesh { 0.5 } else { 1.0 };
                let c = w * table[idx];
                for (s, v) in sums.iter_mut().zip(nodal) {
                    *s += c * v[i];
                }
                idx += step;
                if idx >= period {
                    idx -= period;
                }
            }
            let norm = if n == 0 {
                (1.0 / std::f64::consts::PI).sqrt()
            } else {
                (2.0 / std::f64::consts::PI).sqrt()
            };
            sums.iter().map(|s| s * h * norm).collect()
        })
        .collect();
    (0..nodal.len())
        .map(|j| per_mode.iter().map(|row| row[j]).collect())
        .collect()
}

/// Mesh used for the boundary-value solve with `modes` retained modes.
pub fn default_mesh(modes: usize) -> usize {
    10_000.max(8 * modes)
}

/// Spectral truncation of the boundary-controlled heat equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannModel {
    pub delta: f64,
    pub eps: f64,
    pub mesh: usize,
    pub model: DiagonalModel,
    /// `Lcoef[j][n] = ⟨L η^{(j)}, ê_n⟩` for the unit boundary datum at point `j`.
    pub lcoef: Vec<Vec<f64>>,
    /// `⟨G L η^{(j)}, ê_n⟩`.
    pub composed: Vec<Vec<f64>>,
    /// `⟨N_δ η^{(j)}, ê_n⟩`.
    pub map_coef: Vec<Vec<f64>>,
}

impl NeumannModel {
    /// `⟨G L η, ê_n⟩` for arbitrary boundary data by linearity.
    pub fn composed_action(&self, eta: [f64; 2]) -> Vec<f64> {
        (0..self.model.dim)
            .map(|n| eta[0] * self.composed[0][n] + eta[1] * self.composed[1][n])
            .collect()
    }

    pub fn control_action(&self, eta: [f64; 2]) -> Vec<f64> {
        (0..self.model.dim)
            .map(|n| eta[0] * self.lcoef[0][n] + eta[1] * self.lcoef[1][n])
            .collect()
    }
}

pub fn neumann_model(delta: f64, eps: f64, modes: usize, q: Vec<f64>) -> Result<NeumannModel> {
    neumann_model_with_mesh(delta, eps, modes, q, default_mesh(modes))
}

/// `α_n = n²`, `g_n = (δ+n²)^{1/4+ε}`, `L = (δ-A)^{3/4-ε} N_δ` on `n = 0..modes-1`.
pub fn neumann_model_with_mesh(delta: f64, eps: f64, modes: usize, q: Vec<f64>, mesh: usize) -> Result<NeumannModel> {
    if !(eps > 0.0 && eps < 0.25) {
        return invalid(format!("epsilon must lie in (0, 1/4), got {eps}"));
    }
    if !(delta > 0.0) {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    if modes == 0 {
        return invalid("need at least one mode");
    }
    if q.len() != modes {
        return invalid(format!("noise has {} entries for {modes} modes", q.len()));
    }
    let beta = 0.25 + eps;
    let lam: Vec<f64> = (0..modes).map(|n| delta + (n * n) as f64).collect();
    let alpha = (0..modes).map(|n| (n * n) as f64).collect();
    let g = lam.iter().map(|l| l.powf(beta)).collect();
    let q_rate = if q.iter().all(|v| *v == q[0]) {
        Some(RateLaw::power(q[0], 0.0))
    } else {
        None
    };
    let model = DiagonalModel::new(alpha, q, g, 0.0)?.with_rates(Rates {
        alpha: Some(RateLaw::power(1.0, 2.0)),
        q: q_rate,
        g: Some(RateLaw::power((1.0 + delta).powf(beta), 2.0 * beta)),
    });
    let nodal = vec![
        neumann_map_fd(delta, [1.0, 0.0], mesh)?,
        neumann_map_fd(delta, [0.0, 1.0], mesh)?,
    ];
    let map_coef = cosine_coefficients(&nodal, modes);
    let lcoef = map_coef
        .iter()
        .map(|row| row.iter().zip(&lam).map(|(c, l)| c * l.powf(0.75 - eps)).collect())
        .collect();
    let composed = map_coef
        .iter()
        .map(|row| row.iter().zip(&lam).map(|(c, l)| c * l).collect())
        .collect();
    Ok(NeumannModel {
        delta,
        eps,
        mesh,
        model,
        lcoef,
        composed,
        map_coef,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannEstimateSample {
    pub t: f64,
    /// `sup_{n≥1} 2n²(δ+n²)^{2β}/(e^{2tn²}-1)` over the retained modes.
    pub sup: f64,
    pub argmax: usize,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannEstimateReport {
    pub delta: f64,
    pub eps: f64,
    pub modes: usize,
    pub c0: f64,
    pub samples: Vec<NeumannEstimateSample>,
    pub pass: bool,
}

/// `sup_{s>0} s^p/(e^{2s}-1)` by a log scan and golden-section refinement.
pub fn sup_power_over_expm1(p: f64) -> f64 {
    let f = |s: f64| s.powf(p) / (2.0 * s).exp_m1();
    let grid = crate::certificates::log_grid(1e-6, 50.0, 2000);
    let (i, _) = grid.iter().enumerate().fold((0, f64::MIN), |(bi, bv), (i, s)| {
        let v = f(*s);
        if v > bv {
            (i, v)
        } else {
            (bi, bv)
        }
    });
    let mut a = grid[i.saturating_sub(1)];
    let mut b = grid[(i + 1).min(grid.len() - 1)];
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b)).max(f(grid[i]))
}

/// Checks `sup_n 2n²(δ+n²)^{2β}/(e^{2tn²}-1) ≤ C_0 t^{-(1+2β)}` with `β = 1/4+ε`.
/// `c0_scale` multiplies `C_0` (use `1` for the honest constant).
pub fn neumann_estimate_check(
    delta: f64,
    eps: f64,
    modes: usize,
    t_grid: &[f64],
    c0_scale: f64,
) -> NeumannEstimateReport {
    let beta = 0.25 + eps;
    let p = 1.0 + 2.0 * beta;
    let c0 = c0_scale * 2.0 * (1.0 + delta).powf(2.0 * beta) * sup_power_over_expm1(p);
    let samples: Vec<NeumannEstimateSample> = t_grid
        .iter()
        .map(|&t| {
            let (argmax, sup) = (1..modes.max(2)).fold((1, 0.0f64), |(bn, bv), n| {
                let n2 = (n * n) as f64;
                let v = 2.0 * n2 * (delta + n2).powf(2.0 * beta) / (2.0 * t * n2).exp_m1();
                if v > bv {
                    (n, v)
                } else {
                    (bn, bv)
                }
            });
            let bound = c0 * t.powf(-p);
            NeumannEstimateSample {
                t,
                sup,
                argmax,
                bound,
                pass: sup <= bound * (1.0 + 1e-12),
            }
        })
        .collect();
    let pass = samples.iter().all(|s| s.pass);
    NeumannEstimateReport {
        delta,
        eps,
        modes,
        c0,
        samples,
        pass,
    }
}
