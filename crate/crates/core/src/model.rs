//! Diagonal spectral models of `(A, Q = σσ*, G)`.
//!
//! Every operator is diagonal in a common orthonormal basis `e_n`:
//! `A e_n = -α_n e_n`, `Q e_n = q_n e_n`, `G e_n = g_n e_n`. Only the first
//! `dim` modes are stored; behaviour beyond the truncation is described by
//! optional asymptotic [`Rates`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Asymptotic law `a_n ~ coef · n^power · exp(exp_rate · n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLaw {
    #[serde(default = "one")]
    pub coef: f64,
    #[serde(default)]
    pub power: f64,
    #[serde(default)]
    pub exp_rate: f64,
}

fn one() -> f64 {
    1.0
}

impl RateLaw {
    pub fn power(coef: f64, power: f64) -> Self {
        Self {
            coef,
            power,
            exp_rate: 0.0,
        }
    }

    pub fn exponential(coef: f64, exp_rate: f64) -> Self {
        Self {
            coef,
            power: 0.0,
            exp_rate,
        }
    }

    /// Law of the quotient `self / other`.
    pub fn ratio(&self, other: &RateLaw) -> RateLaw {
        RateLaw {
            coef: self.coef / other.coef,
            power: self.power - other.power,
            exp_rate: self.exp_rate - other.exp_rate,
        }
    }

    /// `Σ_n a_n < ∞` for a law with positive coefficient.
    pub fn is_summable(&self) -> bool {
        self.exp_rate < 0.0 || (self.exp_rate == 0.0 && self.power < -1.0)
    }
}

/// Declared tail behaviour of the spectral sequences.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<RateLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<RateLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<RateLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalModel {
    pub dim: usize,
    pub alpha: Vec<f64>,
    pub q: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(default)]
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Rates>,
}

impl DiagonalModel {
    pub fn new(alpha: Vec<f64>, q: Vec<f64>, g: Vec<f64>, m: f64) -> Result<Self> {
        let model = Self {
            dim: alpha.len(),
            alpha,
            q,
            g,
            m,
            rates: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// One-mode model, handy for closed-form checks.
    pub fn scalar(alpha: f64, q: f64, g: f64) -> Result<Self> {
        Self::new(vec![alpha], vec![q], vec![g], 0.0)
    }

    pub fn with_rates(mut self, rates: Rates) -> Self {
        self.rates = Some(rates);
        self
    }

    pub fn with_growth(mut self, m: f64) -> Result<Self> {
        self.m = m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("model dimension must be at least 1");
        }
        if self.alpha.len() != self.dim || self.q.len() != self.dim || self.g.len() != self.dim {
            return invalid(format!(
                "sequence lengths (alpha {}, q {}, g {}) must equal dim {}",
                self.alpha.len(),
                self.q.len(),
                self.g.len(),
                self.dim
            ));
        }
        if let Some(n) = self.alpha.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return invalid(format!("alpha[{n}] must be finite and >= 0"));
        }
        if let Some(n) = self.q.iter().position(|q| !(q.is_finite() && *q > 0.0)) {
            return invalid(format!("q[{n}] must be finite and > 0"));
        }
        if let Some(n) = self.g.iter().position(|g| !g.is_finite()) {
            return invalid(format!("g[{n}] must be finite"));
        }
        if !(self.m.is_finite() && self.m >= 0.0) {
            return invalid("growth order m must be >= 0");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DiagonalModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }

    /// Constant `M` of `‖e^{tA}‖ ≤ M e^{ωt}`; exactly 1 for a self-adjoint diagonal `A`.
    pub fn semigroup_m(&self) -> f64 {
        1.0
    }

    /// Growth rate `ω = -min_n α_n`.
    pub fn omega(&self) -> f64 {
        -self.alpha.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `e^{tA} x`, componentwise `e^{-tα_n} x_n`.
    pub fn semigroup_apply(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.alpha.iter().zip(x).map(|(a, xi)| (-t * a).exp() * xi).collect()
    }

    /// Diagonal of `e^{tA}`.
    pub fn semigroup_diag(&self, t: f64) -> Vec<f64> {
        self.alpha.iter().map(|a| (-t * a).exp()).collect()
    }

    /// Diagonal of `∫_0^t e^{sA} ds`, i.e. `(1 - e^{-α t})/α` (`t` when `α = 0`).
    pub fn integrated_semigroup_diag(&self, t: f64) -> Vec<f64> {
        self.alpha.iter().map(|&a| phi1(a, t)).collect()
    }
}

/// `(1 - e^{-a t}) / a`, with the limit `t` at `a = 0`.
pub(crate) fn phi1(a: f64, t: f64) -> f64 {
    let x = a * t;
    if x.abs() < 1e-4 {
        t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        -(-x).exp_m1() / a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sequences() {
        assert!(DiagonalModel::new(vec![], vec![], vec![], 0.0).is_err());
        assert!(DiagonalModel::new(vec![1.0], vec![0.0], vec![1.0], 0.0).is_err());
        assert!(DiagonalModel::new(vec![-1.0], vec![1.0], vec![1.0], 0.0).is_err());
        assert!(DiagonalModel::new(vec![1.0, 2.0], vec![1.0], vec![1.0], 0.0).is_err());
        assert!(DiagonalModel::new(vec![1.0], vec![1.0], vec![1.0], -1.0).is_err());
    }

    #[test]
    fn omega_is_minus_min_alpha() {
        let m = DiagonalModel::new(vec![3.0, 0.5, 2.0], vec![1.0; 3], vec![1.0; 3], 0.0).unwrap();
        assert_eq!(m.omega(), -0.5);
        assert_eq!(m.semigroup_m(), 1.0);
    }

    #[test]
    fn semigroup_law_holds() {
        let m = DiagonalModel::new(vec![0.0, 0.3, 1.7, 12.0], vec![1.0; 4], vec![1.0; 4], 0.0).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        for (t, s) in [(0.1, 0.2), (1.3, 0.01), (2.0, 3.5)] {
            let composed = m.semigroup_apply(t, &m.semigroup_apply(s, &x));
            let direct = m.semigroup_apply(t + s, &x);
            for (a, b) in composed.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-13 * b.abs().max(f64::MIN_POSITIVE));
            }
        }
    }

    #[test]
    fn json_round_trip_keeps_rates() {
        let m = DiagonalModel::new(vec![1.0, 4.0], vec![1.0, 1.0], vec![1.0, 2.0], 1.0)
            .unwrap()
            .with_rates(Rates {
                alpha: Some(RateLaw::power(1.0, 2.0)),
                ..Default::default()
            });
        let back = DiagonalModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let text = r#"{"dim":1,"alpha":[1],"q":[1],"g":[1],"m":0,"bogus":1}"#;
        assert!(DiagonalModel::from_json(text).is_err());
    }

    #[test]
    fn phi1_series_matches_closed_form() {
        for a in [1e-9, 1e-6, 1e-3, 0.1, 2.0] {
            let t: f64 = 0.7;
            let exact = -(-a * t).exp_m1() / a;
            assert!((phi1(a, t) - exact).abs() <= 1e-9 * exact);
        }
        assert_eq!(phi1(0.0, 2.5), 2.5);
    }
}
