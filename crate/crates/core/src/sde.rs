//! Monte Carlo for `dX = (AX + b(X))dt + σ(X)dW` in mild form.
//!
//! Steps are exponential Euler, `X_{k+1} = e^{dtA}X_k + Φ(dt)b(X_k) + η_k`.
//! For constant `σ` the pair `(η_k, ΔW_k)` is drawn from its exact joint law, so
//! the stochastic convolution has covariance `Q_dt` and the Brownian increments
//! used by the gradient weight are the ones that drove the path.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::variance_factor;
use crate::model::{phi1, DiagonalModel};
use crate::rng::stream;

type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Diagonal diffusion coefficient.
#[derive(Clone)]
pub enum Sigma {
    Constant(Vec<f64>),
    /// `σ(x)` diagonal, with `|σ(x)^{-1}| ≤ inv_bound`.
    Diagonal {
        f: Arc<VecFn>,
        inv_bound: f64,
    },
}

#[derive(Clone)]
pub struct DriftSpec {
    b: Option<Arc<VecFn>>,
    pub lipschitz: f64,
    pub sigma: Sigma,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sigma = match &self.sigma {
            Sigma::Constant(s) => format!("constant {s:?}"),
            Sigma::Diagonal { inv_bound, .. } => format!("state-dependent, inverse bound {inv_bound}"),
        };
        f.debug_struct("DriftSpec")
            .field("has_drift", &self.b.is_some())
            .field("lipschitz", &self.lipschitz)
            .field("sigma", &sigma)
            .finish()
    }
}

impl DriftSpec {
    /// `b = 0`, `σ = √Q`.
    pub fn ou(model: &DiagonalModel) -> Self {
        Self {
            b: None,
            lipschitz: 0.0,
            sigma: Sigma::Constant(model.q.iter().map(|q| q.sqrt()).collect()),
        }
    }

    pub fn with_drift<F>(mut self, lipschitz: f64, b: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.b = Some(Arc::new(b));
        self.lipschitz = lipschitz;
        self
    }

    pub fn with_sigma(mut self, sigma: Sigma) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        match &self.b {
            Some(b) => b(x),
            None => vec![0.0; x.len()],
        }
    }

    pub fn sigma_at(&self, x: &[f64]) -> Vec<f64> {
        match &self.sigma {
            Sigma::Constant(s) => s.clone(),
            Sigma::Diagonal { f, .. } => f(x),
        }
    }

    /// Largest observed `|b(x)-b(y)|/|x-y|` on random probes.
    pub fn sampled_lipschitz(&self, dim: usize, probes: usize, radius: f64, seed: u64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..probes {
            let mut rng = stream(seed, i as u64);
            let x: Vec<f64> = (0..dim)
                .map(|_| radius * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let y: Vec<f64> = (0..dim)
                .map(|_| radius * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let d = norm(&sub(&x, &y));
            if d > 0.0 {
                worst = worst.max(norm(&sub(&self.drift(&x), &self.drift(&y))) / d);
            }
        }
        worst
    }

    fn check(&self, model: &DiagonalModel) -> Result<()> {
        if let Sigma::Constant(s) = &self.sigma {
            if s.len() != model.dim {
                return invalid("sigma has the wrong dimension");
            }
        }
        Ok(())
    }

    /// `σ(x)^{-1}` applied to `y`, or an error if `σ(x)` is singular or beyond the declared bound.
    fn sigma_inv(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let s = self.sigma_at(x);
        let bound = match &self.sigma {
            Sigma::Constant(_) => f64::INFINITY,
            Sigma::Diagonal { inv_bound, .. } => *inv_bound,
        };
        let mut out = Vec::with_capacity(s.len());
        for (si, yi) in s.iter().zip(y) {
            if *si == 0.0 || (1.0 / si.abs()) > bound * (1.0 + 1e-12) {
                return invalid("sigma is not invertible within the declared bound");
            }
            out.push(yi / si);
        }
        Ok(out)
    }

    /// `∇b(x) y` by a forward difference with step `1e-6 (1+|x|)`.
    fn drift_derivative(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let Some(b) = &self.b else {
            return vec![0.0; x.len()];
        };
        let ny = norm(y);
        if ny == 0.0 {
            return vec![0.0; x.len()];
        }
        let h = 1e-6 * (1.0 + norm(x));
        let shifted: Vec<f64> = x.iter().zip(y).map(|(a, d)| a + h * d / ny).collect();
        let b0 = b(x);
        b(&shifted).iter().zip(&b0).map(|(p, q)| (p - q) / h * ny).collect()
    }

    /// `(∇σ(x) y)_n` for diagonal `σ`.
    fn sigma_derivative(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        let Sigma::Diagonal { f, .. } = &self.sigma else {
            return None;
        };
        let ny = norm(y);
        if ny == 0.0 {
            return Some(vec![0.0; x.len()]);
        }
        let h = 1e-6 * (1.0 + norm(x));
        let shifted: Vec<f64> = x.iter().zip(y).map(|(a, d)| a + h * d / ny).collect();
        let s0 = f(x);
        Some(f(&shifted).iter().zip(&s0).map(|(p, q)| (p - q) / h * ny).collect())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Sample mean and its standard error.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-step coefficients at a fixed `dt`.
struct Stepper<'a> {
    drift: &'a DriftSpec,
    sqrt_dt: f64,
    decay: Vec<f64>,
    phi: Vec<f64>,
    /// Noise loading on `ΔW` and on the independent normal, per unit `σ`.
    load_w: Vec<f64>,
    load_free: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &DiagonalModel, drift: &'a DriftSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        drift.check(model)?;
        let phi: Vec<f64> = model.alpha.iter().map(|a| phi1(*a, dt)).collect();
        let load_w = phi.iter().map(|p| p / dt).collect();
        let load_free = model
            .alpha
            .iter()
            .zip(&phi)
            .map(|(a, p)| (variance_factor(*a, dt) - p * p / dt).max(0.0).sqrt())
            .collect();
        Ok(Self {
            drift,
            sqrt_dt: dt.sqrt(),
            decay: model.semigroup_diag(dt),
            phi,
            load_w,
            load_free,
        })
    }

    /// Advances `x` in place and writes the Brownian increments into `dw`.
    fn step(&self, x: &mut [f64], dw: &mut [f64], rng: &mut ChaCha12Rng) {
        let b = self.drift.drift(x);
        let sigma = self.drift.sigma_at(x);
        let constant = matches!(self.drift.sigma, Sigma::Constant(_));
        for n in 0..x.len() {
            let xi1: f64 = rng.sample(StandardNormal);
            let xi2: f64 = rng.sample(StandardNormal);
            dw[n] = self.sqrt_dt * xi1;
            let eta = if constant {
                sigma[n] * (self.load_w[n] * dw[n] + self.load_free[n] * xi2)
            } else {
                self.decay[n] * sigma[n] * dw[n]
            };
            x[n] = self.decay[n] * x[n] + self.phi[n] * b[n] + eta;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExponentialEuler,
}

/// Stored paths, `count × points × dim`, point `k` at time `k·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBatch {
    pub dim: usize,
    pub points: usize,
    pub count: usize,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub data: Vec<f64>,
}

impl PathBatch {
    pub fn state(&self, path: usize, point: usize) -> &[f64] {
        let start = (path * self.points + point) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn endpoint(&self, path: usize) -> &[f64] {
        self.state(path, self.points - 1)
    }

    /// Per point: time, then mean and variance of every coordinate.
    pub fn summary(&self) -> Vec<Vec<f64>> {
        (0..self.points)
            .map(|k| {
                let mut row = vec![k as f64 * self.dt];
                for n in 0..self.dim {
                    let v: Vec<f64> = (0..self.count).map(|p| self.state(p, k)[n]).collect();
                    let (m, se) = mean_stderr(&v);
                    row.push(m);
                    row.push(se * se * self.count as f64);
                }
                row
            })
            .collect()
    }

    /// Header `u64 dim, u64 points, f64 dt, u64 count`, then little-endian `f64` data.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.points as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.count as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path, seed: u64) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < 32 {
            return invalid("path file is shorter than its header");
        }
        let word = |i: usize| <[u8; 8]>::try_from(&bytes[8 * i..8 * i + 8]).expect("8 bytes");
        let dim = u64::from_le_bytes(word(0)) as usize;
        let points = u64::from_le_bytes(word(1)) as usize;
        let dt = f64::from_le_bytes(word(2));
        let count = u64::from_le_bytes(word(3)) as usize;
        let n = dim * points * count;
        if bytes.len() != 32 + 8 * n {
            return invalid("path file size does not match its header");
        }
        let data = (0..n).map(|i| f64::from_le_bytes(word(4 + i))).collect();
        Ok(Self {
            dim,
            points,
            count,
            dt,
            seed,
            scheme: Scheme::ExponentialEuler,
            data,
        })
    }
}

fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    if !(t >= dt * (1.0 - 1e-12)) {
        return invalid(format!("horizon {t} must be at least one step {dt}"));
    }
    Ok(((t / dt) - 1e-9).ceil().max(1.0) as usize)
}

/// Simulates `count` paths from `x` up to `t` (rounded up to a whole number of steps).
#[allow(clippy::too_many_arguments)]
pub fn simulate_mild(
    model: &DiagonalModel,
    drift: &DriftSpec,
    x: &[f64],
    t: f64,
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<PathBatch> {
    if x.len() != model.dim {
        return invalid("initial state has the wrong dimension");
    }
    if count == 0 {
        return invalid("need at least one path");
    }
    let steps = step_count(t, dt)?;
    let stepper = Stepper::new(model, drift, dt)?;
    let d = model.dim;
    let per_path: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p as u64);
            let mut state = x.to_vec();
            let mut dw = vec![0.0; d];
            let mut out = Vec::with_capacity((steps + 1) * d);
            out.extend_from_slice(&state);
            for _ in 0..steps {
                stepper.step(&mut state, &mut dw, &mut rng);
                out.extend_from_slice(&state);
            }
            out
        })
        .collect();
    Ok(PathBatch {
        dim: d,
        points: steps + 1,
        count,
        dt,
        seed,
        scheme: Scheme::ExponentialEuler,
        data: per_path.concat(),
    })
}

/// Runs every path and maps it to one number; results are in path order.
fn per_path<F>(count: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..count).into_par_iter().map(&f).collect()
}

/// `E[φ(X(s, x))]` with standard error.
#[allow(clippy::too_many_arguments)]
pub fn mc_semigroup<F>(
    model: &DiagonalModel,
    drift: &DriftSpec,
    s: f64,
    phi: F,
    x: &[f64],
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if count < 2 {
        return invalid("need at least two paths for a standard error");
    }
    if !(s > 0.0) {
        return invalid("time must be positive");
    }
    if x.len() != model.dim {
        return invalid("initial state has the wrong dimension");
    }
    let steps = step_count(s, dt)?;
    let stepper = Stepper::new(model, drift, s / steps as f64)?;
    let values = per_path(count, |p| {
        let mut rng = stream(seed, p as u64);
        let mut state = x.to_vec();
        let mut dw = vec![0.0; x.len()];
        for _ in 0..steps {
            stepper.step(&mut state, &mut dw, &mut rng);
        }
        phi(&state)
    });
    Ok(mean_stderr(&values))
}

/// Discounted running cost `E Σ_k c(X_k) ∫_{t_k}^{t_{k+1}} e^{-λs} ds` up to `t`, with standard error.
///
/// The step weights are exact for a cost frozen over each step, so a constant
/// cost `c` returns `c(1 - e^{-λT})/λ` on every path.
#[allow(clippy::too_many_arguments)]
pub fn mc_discounted_cost<F>(
    model: &DiagonalModel,
    drift: &DriftSpec,
    cost: F,
    lambda: f64,
    x: &[f64],
    t: f64,
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<DiscountedCost>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if count < 2 {
        return invalid("need at least two paths for a standard error");
    }
    if !(lambda > 0.0) {
        return invalid("discount must be positive");
    }
    if x.len() != model.dim {
        return invalid("initial state has the wrong dimension");
    }
    let steps = step_count(t, dt)?;
    let h = t / steps as f64;
    let stepper = Stepper::new(model, drift, h)?;
    let step_weight = -(-lambda * h).exp_m1() / lambda;
    let outcome: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p as u64);
            let mut state = x.to_vec();
            let mut dw = vec![0.0; x.len()];
            let mut total = 0.0;
            for k in 0..steps {
                total += cost(&state) * (-lambda * k as f64 * h).exp() * step_weight;
                stepper.step(&mut state, &mut dw, &mut rng);
            }
            (total, cost(&state))
        })
        .collect();
    let totals: Vec<f64> = outcome.iter().map(|o| o.0).collect();
    let finals: Vec<f64> = outcome.iter().map(|o| o.1.abs()).collect();
    let (mean, stderr) = mean_stderr(&totals);
    let horizon = steps as f64 * h;
    let final_cost = pairwise_sum(&finals) / count as f64;
    Ok(DiscountedCost {
        mean,
        stderr,
        horizon,
        tail_estimate: (-lambda * horizon).exp() * final_cost / lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountedCost {
    pub mean: f64,
    pub stderr: f64,
    pub horizon: f64,
    /// `e^{-λT} E|c(X_T)| / λ`: the remainder if the cost stayed at its final level.
    pub tail_estimate: f64,
}

/// Variational process `Y` with `Y(0) = h`, driven by the same noise as `X`.
#[allow(clippy::too_many_arguments)]
pub fn variational_process(
    model: &DiagonalModel,
    drift: &DriftSpec,
    x: &[f64],
    h: &[f64],
    t: f64,
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<PathBatch> {
    if x.len() != model.dim || h.len() != model.dim {
        return invalid("initial state or direction has the wrong dimension");
    }
    if count == 0 {
        return invalid("need at least one path");
    }
    let steps = step_count(t, dt)?;
    let stepper = Stepper::new(model, drift, dt)?;
    let d = model.dim;
    let per: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p as u64);
            let mut state = x.to_vec();
            let mut y = h.to_vec();
            let mut dw = vec![0.0; d];
            let mut out = Vec::with_capacity((steps + 1) * d);
            out.extend_from_slice(&y);
            for _ in 0..steps {
                let prev = state.clone();
                stepper.step(&mut state, &mut dw, &mut rng);
                advance_variation(&stepper, &prev, &mut y, &dw);
                out.extend_from_slice(&y);
            }
            out
        })
        .collect();
    Ok(PathBatch {
        dim: d,
        points: steps + 1,
        count,
        dt,
        seed,
        scheme: Scheme::ExponentialEuler,
        data: per.concat(),
    })
}

/// `Y_{k+1} = e^{dtA}Y_k + Φ(dt)∇b(X_k)Y_k + e^{dtA}(∇σ(X_k)Y_k)ΔW_k`.
fn advance_variation(stepper: &Stepper<'_>, x_prev: &[f64], y: &mut [f64], dw: &[f64]) {
    let db = stepper.drift.drift_derivative(x_prev, y);
    let ds = stepper.drift.sigma_derivative(x_prev, y);
    for n in 0..y.len() {
        let mut next = stepper.decay[n] * y[n] + stepper.phi[n] * db[n];
        if let Some(ds) = &ds {
            next += stepper.decay[n] * ds[n] * dw[n];
        }
        y[n] = next;
    }
}

/// Bismut–Elworthy–Li estimate of `⟨∇P_s[φ](x), h⟩` with `steps` time steps.
///
/// The weight is the left-point Itô sum `U = (1/s) Σ_k ⟨σ(X_k)^{-1} Y_k, ΔW_k⟩`.
#[allow(clippy::too_many_arguments)]
pub fn bel_gradient<F>(
    model: &DiagonalModel,
    drift: &DriftSpec,
    s: f64,
    phi: F,
    x: &[f64],
    h: &[f64],
    steps: usize,
    count: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if count < 2 {
        return invalid("need at least two paths for a standard error");
    }
    if !(s > 0.0) || steps == 0 {
        return invalid("need s > 0 and at least one step");
    }
    if x.len() != model.dim || h.len() != model.dim {
        return invalid("initial state or direction has the wrong dimension");
    }
    let stepper = Stepper::new(model, drift, s / steps as f64)?;
    drift.sigma_inv(x, &vec![1.0; model.dim])?;
    let results: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p as u64);
            let mut state = x.to_vec();
            let mut y = h.to_vec();
            let mut dw = vec![0.0; x.len()];
            let mut weight = 0.0;
            for _ in 0..steps {
                let prev = state.clone();
                stepper.step(&mut state, &mut dw, &mut rng);
                let sy = drift.sigma_inv(&prev, &y)?;
                weight += sy.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>();
                advance_variation(&stepper, &prev, &mut y, &dw);
            }
            Ok(phi(&state) * weight / s)
        })
        .collect();
    let values = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mean_stderr(&values))
}

/// Which moment estimate a probe measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MomentKind {
    /// `E|X(t,x)|^p / ((1+|x|^p) e^{a t})`.
    Growth { p: f64, rate: f64 },
    /// `E|X(t,x)-X(t,x+offset)|^2 / (|offset|^2 e^{a t})` with common noise.
    InitialDatum { rate: f64, offset: f64 },
    /// `E|X(t,x)-x|^2 / (t + |e^{tA}x - x|)`.
    SmallTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub t: f64,
    pub probe: usize,
    pub ratio: f64,
    pub stderr: f64,
}

/// Normalized moment ratios at every `(t, x)`; every `t` must be a multiple of `dt`.
#[allow(clippy::too_many_arguments)]
pub fn moment_ratios(
    model: &DiagonalModel,
    drift: &DriftSpec,
    kind: MomentKind,
    probes: &[Vec<f64>],
    times: &[f64],
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<MomentSample>> {
    if count < 2 || times.is_empty() {
        return invalid("need at least two paths and one time");
    }
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let steps = step_count(t_end, dt)?;
    let marks: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
    if marks
        .iter()
        .zip(times)
        .any(|(k, t)| *k == 0 || (*k as f64 * dt - t).abs() > 1e-9 * t.max(1.0))
    {
        return invalid("moment times must be positive multiples of dt");
    }
    let stepper = Stepper::new(model, drift, dt)?;
    let mut out = Vec::new();
    for (pi, x) in probes.iter().enumerate() {
        if x.len() != model.dim {
            return invalid("probe has the wrong dimension");
        }
        let shifted: Vec<f64> = match kind {
            MomentKind::InitialDatum { offset, .. } => x.iter().map(|v| v + offset).collect(),
            _ => x.clone(),
        };
        let per: Vec<Vec<f64>> = (0..count)
            .into_par_iter()
            .map(|p| {
                let mut rng_a = stream(seed, p as u64);
                let mut rng_b = stream(seed, p as u64);
                let mut a = x.clone();
                let mut b = shifted.clone();
                let mut dw = vec![0.0; x.len()];
                let mut vals = Vec::with_capacity(marks.len());
                let mut next = 0;
                let mut order: Vec<usize> = (0..marks.len()).collect();
                order.sort_by_key(|i| marks[*i]);
                let mut slots = vec![0.0; marks.len()];
                for k in 1..=steps {
                    stepper.step(&mut a, &mut dw, &mut rng_a);
                    if matches!(kind, MomentKind::InitialDatum { .. }) {
                        stepper.step(&mut b, &mut dw, &mut rng_b);
                    }
                    while next < order.len() && marks[order[next]] == k {
                        let v = match kind {
                            MomentKind::Growth { p, .. } => norm(&a).powf(p),
                            MomentKind::InitialDatum { .. } => norm(&sub(&a, &b)).powi(2),
                            MomentKind::SmallTime => norm(&sub(&a, x)).powi(2),
                        };
                        slots[order[next]] = v;
                        next += 1;
                    }
                }
                vals.extend(slots);
                vals
            })
            .collect();
        for (ti, &t) in times.iter().enumerate() {
            let column: Vec<f64> = per.iter().map(|v| v[ti]).collect();
            let (mean, se) = mean_stderr(&column);
            let denom = match kind {
                MomentKind::Growth { p, rate } => (1.0 + norm(x).powf(p)) * (rate * t).exp(),
                MomentKind::InitialDatum { rate, offset } => offset * offset * model.dim as f64 * (rate * t).exp(),
                MomentKind::SmallTime => t + norm(&sub(&model.semigroup_apply(t, x), x)),
            };
            out.push(MomentSample {
                t,
                probe: pi,
                ratio: mean / denom,
                stderr: se / denom,
            });
        }
    }
    Ok(out)
}

/// Constant fitted on one seed and asserted on another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentFit {
    pub constant: f64,
    pub se_slack: f64,
    pub rel_slack: f64,
}

impl MomentFit {
    /// `C = max (ratio + se_slack·stderr) · (1 + rel_slack)`.
    pub fn fit(samples: &[MomentSample], se_slack: f64, rel_slack: f64) -> Self {
        let best = samples
            .iter()
            .map(|s| s.ratio + se_slack * s.stderr)
            .fold(0.0, f64::max);
        Self {
            constant: best * (1.0 + rel_slack),
            se_slack,
            rel_slack,
        }
    }

    pub fn violations(&self, samples: &[MomentSample]) -> usize {
        samples.iter().filter(|s| s.ratio > self.constant).count()
    }
}
