//! One-dimensional Gauss rules and the Gaussian quadrature configuration.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Affine map of a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }
}

/// Golub–Welsch: eigen-decomposition of the Jacobi matrix of a three-term recurrence.
fn golub_welsch(diag: &[f64], offdiag_sq: &[f64], mu0: f64) -> GaussRule {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            let b = offdiag_sq[i].sqrt();
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`, `a, b > -1`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> GaussRule {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let d = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        diag.push(d);
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            off.push(4.0 * m * (m + a) * (m + b) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0)));
        }
    }
    let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0);
    golub_welsch(&diag, &off, ln_mu0.exp())
}

pub fn gauss_legendre(n: usize) -> GaussRule {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Probabilists' Gauss–Hermite rule: `Σ w_i f(z_i) ≈ E[f(Z)]`, `Z ~ N(0,1)`.
///
/// Weights sum to 1. Nodes from Golub–Welsch are polished by Newton steps on
/// the orthonormal Hermite recurrence, and weights come from the Christoffel
/// function `1 / Σ_k p_k(z)^2`.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let mut rule = golub_welsch(&diag, &off, 1.0);
    for x in rule.nodes.iter_mut() {
        for _ in 0..3 {
            let (pn, pn1, _) = orthonormal_hermite(n, *x);
            let dp = (n as f64).sqrt() * pn1;
            if dp == 0.0 {
                break;
            }
            *x -= pn / dp;
        }
    }
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
        let (_, _, sumsq) = orthonormal_hermite(n, *x);
        *w = 1.0 / sumsq;
    }
    // Exact symmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    let total: f64 = rule.weights.iter().sum();
    rule.weights.iter_mut().for_each(|w| *w /= total);
    rule
}

/// `(p_n(x), p_{n-1}(x), Σ_{k<n} p_k(x)^2)` for orthonormal probabilists' Hermite polynomials.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sumsq = 0.0;
    for k in 0..n {
        sumsq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sumsq)
}

/// Serialized quadrature configuration, `{method, order | samples, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuadratureSpec {
    GaussHermite {
        order: usize,
    },
    MonteCarlo {
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
}

/// Expectation rule under a diagonal Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadratureRule {
    /// Tensor Gauss–Hermite with `rule.len()` nodes per active axis.
    GaussHermite(GaussRule),
    /// Plain Monte Carlo; sample `i` uses the stream `(seed, i)`.
    MonteCarlo { samples: usize, seed: u64 },
}

pub const DEFAULT_GH_ORDER: usize = 16;
pub const DEFAULT_MC_SAMPLES: usize = 20_000;

impl QuadratureRule {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return invalid("Gauss-Hermite order must be >= 1");
        }
        Ok(Self::GaussHermite(gauss_hermite(order)))
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return invalid("Monte Carlo sample count must be >= 1");
        }
        Ok(Self::MonteCarlo { samples, seed })
    }

    pub fn from_spec(spec: &QuadratureSpec) -> Result<Self> {
        match *spec {
            QuadratureSpec::GaussHermite { order } => Self::gauss_hermite(order),
            QuadratureSpec::MonteCarlo { samples, seed } => Self::monte_carlo(samples, seed),
        }
    }

    pub fn spec(&self) -> QuadratureSpec {
        match self {
            Self::GaussHermite(r) => QuadratureSpec::GaussHermite { order: r.len() },
            Self::MonteCarlo { samples, seed } => QuadratureSpec::MonteCarlo {
                samples: *samples,
                seed: *seed,
            },
        }
    }

    /// Gauss–Hermite of order 16 up to three active dimensions, Monte Carlo beyond.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim <= 3 {
            Self::GaussHermite(gauss_hermite(DEFAULT_GH_ORDER))
        } else {
            Self::MonteCarlo {
                samples: DEFAULT_MC_SAMPLES,
                seed: 0,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(k: u32) -> f64 {
        (1..=k).step_by(2).map(|v| v as f64).product()
    }

    #[test]
    fn hermite_weights_sum_to_one() {
        for n in [1, 2, 5, 16, 32, 64] {
            let r = gauss_hermite(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n={n}");
            assert!(r.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn hermite_moments_exact_below_degree_2n() {
        let n = 12;
        let r = gauss_hermite(n);
        for p in 0..(2 * n as u32) {
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p as i32)).sum();
            let exact = if p % 2 == 1 {
                0.0
            } else {
                double_factorial_odd(p.saturating_sub(1))
            };
            let scale = double_factorial_odd(p.max(1) | 1);
            assert!((q - exact).abs() <= 1e-13 * scale, "p={p}: {q} vs {exact}");
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(8);
        for p in 0..16 {
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_singular_weight() {
        let r = gauss_jacobi(10, 0.0, -0.5);
        let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
        // ∫_0^2 u^{-1/2}(u-1)^2 du = [2/5 u^{5/2} - 4/3 u^{3/2} + 2 u^{1/2}]_0^2
        let s2 = 2f64.sqrt();
        let exact = 0.4 * 4.0 * s2 - 4.0 / 3.0 * 2.0 * s2 + 2.0 * s2;
        assert!((q - exact).abs() < 1e-13, "{q} vs {exact}");
    }

    #[test]
    fn spec_round_trip_and_errors() {
        let text = r#"{"method":"gauss-hermite","order":8}"#;
        let spec: QuadratureSpec = serde_json::from_str(text).unwrap();
        assert_eq!(QuadratureRule::from_spec(&spec).unwrap().spec(), spec);
        let mc: QuadratureSpec = serde_json::from_str(r#"{"method":"monte-carlo","samples":10,"seed":3}"#).unwrap();
        assert_eq!(mc, QuadratureSpec::MonteCarlo { samples: 10, seed: 3 });
        assert!(QuadratureRule::gauss_hermite(0).is_err());
        assert!(QuadratureRule::monte_carlo(0, 1).is_err());
        assert!(serde_json::from_str::<QuadratureSpec>(r#"{"method":"gauss-hermite","order":8,"x":1}"#).is_err());
    }
}
