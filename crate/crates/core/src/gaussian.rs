//! Diagonal Gaussian machinery: `Q_t`, sampling and expectations under `N(shift, Q_t)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::DiagonalModel;
use crate::quadrature::QuadratureRule;
use crate::rng;

/// `|ω|` below this is treated as `ω = 0`.
pub const OMEGA_ZERO_TOL: f64 = 1e-12;

/// Diagonal covariance with entries `λ_n ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagCovariance {
    pub lambda: Vec<f64>,
}

impl DiagCovariance {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return invalid("covariance needs at least one entry");
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return invalid("covariance entries must be finite and >= 0");
        }
        Ok(Self { lambda })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn trace(&self) -> f64 {
        self.lambda.iter().sum()
    }

    pub fn sqrt(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l.sqrt()).collect()
    }

    /// Pseudoinverse square root: `λ^{-1/2}` on the range, 0 on the kernel.
    pub fn pinv_sqrt(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|&l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 })
            .collect()
    }
}

/// `(1 - e^{-2αt}) / (2α)`, equal to `t` at `α = 0`.
pub fn variance_factor(alpha: f64, t: f64) -> f64 {
    let x = 2.0 * alpha * t;
    if x < 1e-4 {
        t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        -(-x).exp_m1() / (2.0 * alpha)
    }
}

/// `Q_t = ∫_0^t e^{sA} Q e^{sA*} ds`, diagonal in the model basis.
pub fn qt_diagonal(model: &DiagonalModel, t: f64) -> Result<DiagCovariance> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    let lambda = model
        .alpha
        .iter()
        .zip(&model.q)
        .map(|(&a, &q)| q * variance_factor(a, t))
        .collect();
    Ok(DiagCovariance { lambda })
}

pub fn trace_qt(model: &DiagonalModel, t: f64) -> Result<f64> {
    Ok(qt_diagonal(model, t)?.trace())
}

/// Upper bound `Tr[Q_1] M² (e^{2ω([t]+1)} - 1)/(e^{2ω} - 1)` for `Tr[Q_t]`, with the
/// factor replaced by `[t] + 1` when `ω = 0`.
pub fn trace_qt_bound(model: &DiagonalModel, t: f64) -> Result<f64> {
    let tr1 = trace_qt(model, 1.0)?;
    let m = model.semigroup_m();
    let omega = model.omega();
    let n = t.floor() + 1.0;
    let factor = if omega.abs() < OMEGA_ZERO_TOL {
        n
    } else {
        (2.0 * omega * n).exp_m1() / (2.0 * omega).exp_m1()
    };
    Ok(tr1 * m * m * factor)
}

/// `count` draws from `N(0, cov)`; draw `i` uses the stream `(seed, i)`.
pub fn sample_gaussian(cov: &DiagCovariance, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return invalid("sample count must be >= 1");
    }
    let sd = cov.sqrt();
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            sd.iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    s * z
                })
                .collect()
        })
        .collect())
}

/// Visits the nodes of `rule` for `N(shift, cov)`.
///
/// The callback receives the point `shift + √λ z`, the standardized
/// coordinates `z` (zero on axes with `λ_n = 0`) and the node weight.
/// Axes with `λ_n = 0` carry no quadrature nodes. Visiting order is fixed.
pub fn for_each_node<F>(cov: &DiagCovariance, shift: &[f64], rule: &QuadratureRule, mut f: F) -> Result<()>
where
    F: FnMut(&[f64], &[f64], f64),
{
    let d = cov.dim();
    if shift.len() != d {
        return invalid(format!("shift has dimension {}, covariance {}", shift.len(), d));
    }
    let sd = cov.sqrt();
    let mut point = shift.to_vec();
    let mut z = vec![0.0; d];
    match rule {
        QuadratureRule::GaussHermite(gh) => {
            let active: Vec<usize> = (0..d).filter(|&n| sd[n] > 0.0).collect();
            if active.len() > 8 {
                return invalid(format!(
                    "tensor Gauss-Hermite over {} active axes is intractable; use monte-carlo",
                    active.len()
                ));
            }
            let order = gh.len();
            let mut idx = vec![0usize; active.len()];
            loop {
                let mut w = 1.0;
                for (slot, &n) in active.iter().enumerate() {
                    let zi = gh.nodes[idx[slot]];
                    z[n] = zi;
                    point[n] = shift[n] + sd[n] * zi;
                    w *= gh.weights[idx[slot]];
                }
                f(&point, &z, w);
                // odometer increment
                let mut slot = active.len();
                loop {
                    if slot == 0 {
                        return Ok(());
                    }
                    slot -= 1;
                    idx[slot] += 1;
                    if idx[slot] < order {
                        break;
                    }
                    idx[slot] = 0;
                }
            }
        }
        QuadratureRule::MonteCarlo { samples, seed } => {
            let w = 1.0 / *samples as f64;
            for i in 0..*samples {
                let mut r = rng::stream(*seed, i as u64);
                for n in 0..d {
                    let zi: f64 = StandardNormal.sample(&mut r);
                    z[n] = if sd[n] > 0.0 { zi } else { 0.0 };
                    point[n] = shift[n] + sd[n] * zi;
                }
                f(&point, &z, w);
            }
            Ok(())
        }
    }
}

/// `∫ φ(shift + y) N(0, cov)(dy)`.
pub fn expectation<F>(cov: &DiagCovariance, shift: &[f64], phi: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut acc = 0.0;
    for_each_node(cov, shift, rule, |p, _, w| acc += w * phi(p))?;
    Ok(acc)
}

/// Cameron–Martin density `d(s, y; k) = exp{⟨sΓ_G(t)k, Q_t^{-1/2}y⟩ - ½s²|Γ_G(t)k|²}`.
pub fn cameron_martin_density(model: &DiagonalModel, t: f64, k: &[f64], s: f64, y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return invalid("Cameron-Martin density needs t > 0");
    }
    if k.len() != model.dim || y.len() != model.dim {
        return invalid("k and y must have the model dimension");
    }
    let gamma = crate::semigroup::gamma_g(model, t)?;
    let pinv = qt_diagonal(model, t)?.pinv_sqrt();
    let mut inner = 0.0;
    let mut norm2 = 0.0;
    for n in 0..model.dim {
        let gk = gamma.entries[n] * k[n];
        inner += gk * pinv[n] * y[n];
        norm2 += gk * gk;
    }
    Ok((s * inner - 0.5 * s * s * norm2).exp())
}

/// Time factor of the polynomial-moment bound: `e^{mωt}` for `ω > 0`, `1 + t^p`
/// for `ω = 0` and `1` for `ω < 0` (the Gaussian part of the moment stays
/// bounded when the semigroup is exponentially stable).
pub fn growth_time_factor(m: f64, omega: f64, t: f64, zero_case_power: f64) -> f64 {
    if omega.abs() < OMEGA_ZERO_TOL {
        1.0 + t.powf(zero_case_power)
    } else if omega > 0.0 {
        (m * omega * t).exp()
    } else {
        1.0
    }
}

/// `∫ |y + e^{tA}x|^m N_{Q_t}(dy)`.
pub fn shifted_moment(model: &DiagonalModel, t: f64, x: &[f64], m: f64, rule: &QuadratureRule) -> Result<f64> {
    let cov = qt_diagonal(model, t)?;
    let shift = model.semigroup_apply(t, x);
    expectation(
        &cov,
        &shift,
        |p| p.iter().map(|v| v * v).sum::<f64>().powf(0.5 * m),
        rule,
    )
}

/// Ratio of the shifted moment to `(1+|x|^m)` times the time factor.
pub fn moment_ratio(model: &DiagonalModel, t: f64, x: &[f64], m: f64, rule: &QuadratureRule) -> Result<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = (1.0 + r.powf(m)) * growth_time_factor(m, model.omega(), t, m);
    Ok(shifted_moment(model, t, x, m, rule)? / denom)
}

/// Fitted `κ` of the moment bound: the largest ratio over a probe set, inflated by `slack`.
pub fn fit_moment_kappa(
    model: &DiagonalModel,
    m: f64,
    times: &[f64],
    points: &[Vec<f64>],
    rule: &QuadratureRule,
    slack: f64,
) -> Result<f64> {
    let mut best = 0.0f64;
    for &t in times {
        for x in points {
            best = best.max(moment_ratio(model, t, x, m, rule)?);
        }
    }
    Ok(best * (1.0 + slack))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model1(alpha: f64, q: f64) -> DiagonalModel {
        DiagonalModel::scalar(alpha, q, 1.0).unwrap()
    }

    #[test]
    fn qt_zero_alpha_agreement() {
        let cov = qt_diagonal(&model1(0.0, 2.0), 3.0).unwrap();
        assert_eq!(cov.lambda, vec![6.0]);
    }

    #[test]
    fn qt_closed_form_at_ln2() {
        let cov = qt_diagonal(&model1(1.0, 1.0), 2f64.ln()).unwrap();
        assert!((cov.lambda[0] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn qt_at_zero_and_negative_time() {
        let m = DiagonalModel::new(vec![0.0, 1.0, 5.0], vec![1.0, 2.0, 3.0], vec![1.0; 3], 0.0).unwrap();
        assert!(qt_diagonal(&m, 0.0).unwrap().lambda.iter().all(|l| *l == 0.0));
        assert!(qt_diagonal(&m, -1.0).is_err());
    }

    #[test]
    fn variance_factor_is_continuous_across_series_switch() {
        let a = 1.0;
        let below = variance_factor(a, 0.499_999e-4);
        let above = variance_factor(a, 0.500_001e-4);
        assert!((above - below) > 0.0 && (above - below) < 1e-9);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace_qt(&model1(1.0, 1.0), 0.0).unwrap(), 0.0);
        let tr = trace_qt(&model1(1.0, 1.0), 1.0).unwrap();
        assert!((tr - 0.432_332_358_381_693_6).abs() < 1e-15);
    }

    #[test]
    fn zero_covariance_samples_are_zero() {
        let cov = DiagCovariance::new(vec![0.0, 0.0]).unwrap();
        let s = sample_gaussian(&cov, 10, 1).unwrap();
        assert!(s.iter().flatten().all(|v| *v == 0.0));
        assert!(sample_gaussian(&cov, 0, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let cov = DiagCovariance::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(
            sample_gaussian(&cov, 50, 9).unwrap(),
            sample_gaussian(&cov, 50, 9).unwrap()
        );
    }

    #[test]
    fn expectation_of_constant_and_second_moment() {
        let cov = DiagCovariance::new(vec![0.7]).unwrap();
        let gh = QuadratureRule::gauss_hermite(2).unwrap();
        let c = expectation(&cov, &[0.3], |_| 4.2, &gh).unwrap();
        assert!((c - 4.2).abs() < 1e-15);
        let m2 = expectation(&cov, &[0.0], |y| y[0] * y[0], &gh).unwrap();
        assert!((m2 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn expectation_of_sine_matches_characteristic_function() {
        let gh = QuadratureRule::gauss_hermite(32).unwrap();
        for (s, v) in [(0.3, 0.2), (1.7, 1.1), (-2.0, 0.5)] {
            let cov = DiagCovariance::new(vec![v]).unwrap();
            let q = expectation(&cov, &[s], |y| y[0].sin(), &gh).unwrap();
            let exact = s.sin() * (-v / 2.0).exp();
            assert!((q - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let cov = DiagCovariance::new(vec![1.0, 1.0]).unwrap();
        let gh = QuadratureRule::gauss_hermite(4).unwrap();
        assert!(expectation(&cov, &[0.0], |_| 1.0, &gh).is_err());
    }

    #[test]
    fn cameron_martin_trivial_cases() {
        let m = DiagonalModel::new(vec![1.0, 2.0], vec![1.0, 0.5], vec![1.0, 3.0], 0.0).unwrap();
        assert_eq!(
            cameron_martin_density(&m, 0.5, &[1.0, 2.0], 0.0, &[0.3, -1.0]).unwrap(),
            1.0
        );
        assert_eq!(
            cameron_martin_density(&m, 0.5, &[0.0, 0.0], 1.3, &[0.3, -1.0]).unwrap(),
            1.0
        );
        assert!(cameron_martin_density(&m, 0.0, &[1.0, 0.0], 1.0, &[0.0, 0.0]).is_err());
        assert!(cameron_martin_density(&m, 1.0, &[1.0, 0.0], 2.0, &[5.0, -5.0]).unwrap() > 0.0);
    }

    #[test]
    fn second_moment_identity() {
        let m = DiagonalModel::new(vec![0.5, 1.5], vec![1.0, 2.0], vec![1.0; 2], 0.0).unwrap();
        let gh = QuadratureRule::gauss_hermite(4).unwrap();
        let x = [1.2, -0.7];
        for t in [0.1, 1.0, 4.0] {
            let lhs = shifted_moment(&m, t, &x, 2.0, &gh).unwrap();
            let ex = m.semigroup_apply(t, &x);
            let rhs = ex.iter().map(|v| v * v).sum::<f64>() + trace_qt(&m, t).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }
}
