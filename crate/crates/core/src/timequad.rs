//! Quadrature in time for the discounted integrals `∫_0^∞ e^{-λs} h(s) ds`.
//!
//! The interval is cut into a bottom panel `[0, ε]`, dyadic panels from `ε` up
//! to `1`, and uniform panels on `[1, T_max]`. The bottom panel carries two
//! rules: Gauss–Legendre for integrands bounded at `0` and Gauss–Jacobi with
//! weight `s^{-θ}` for integrands that may blow up like the `Γ_G` envelope.
//! Each node therefore has a value weight and a gradient weight; bottom nodes
//! have exactly one of them non-zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeNode {
    pub s: f64,
    /// Weight for bounded integrands, discount included.
    pub w_value: f64,
    /// Weight for integrands with an `s^{-θ}` singularity, discount included.
    pub w_grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeQuadSpec {
    /// Number of dyadic panels between the bottom panel and `1`.
    #[serde(default = "default_levels")]
    pub dyadic_levels: usize,
    #[serde(default = "default_order")]
    pub panel_order: usize,
    #[serde(default = "default_bottom")]
    pub bottom_order: usize,
    #[serde(default = "default_tail")]
    pub tail_order: usize,
}

fn default_levels() -> usize {
    24
}
fn default_order() -> usize {
    6
}
fn default_bottom() -> usize {
    8
}
fn default_tail() -> usize {
    8
}

impl Default for TimeQuadSpec {
    fn default() -> Self {
        Self {
            dyadic_levels: default_levels(),
            panel_order: default_order(),
            bottom_order: default_bottom(),
            tail_order: default_tail(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub lambda: f64,
    /// Exponential growth rate of the integrand, `|h(s)| ≲ e^{a s}`.
    pub growth_rate: f64,
    pub theta: f64,
    pub t_max: f64,
    pub tol: f64,
    pub nodes: Vec<TimeNode>,
}

impl TimeQuadrature {
    pub fn new(lambda: f64, growth_rate: f64, theta: f64, tol: f64) -> Result<Self> {
        Self::with_spec(lambda, growth_rate, theta, tol, &TimeQuadSpec::default())
    }

    pub fn with_spec(lambda: f64, growth_rate: f64, theta: f64, tol: f64, spec: &TimeQuadSpec) -> Result<Self> {
        if !(lambda > growth_rate) || !lambda.is_finite() {
            return invalid(format!("discount {lambda} must exceed the growth rate {growth_rate}"));
        }
        if !(0.0..1.0).contains(&theta) {
            return invalid(format!("singularity exponent theta = {theta} must lie in [0, 1)"));
        }
        if !(tol > 0.0) {
            return invalid("time-quadrature tolerance must be positive");
        }
        if spec.panel_order == 0 || spec.bottom_order == 0 || spec.tail_order == 0 {
            return invalid("quadrature orders must be positive");
        }
        let mu = lambda - growth_rate;
        let t_max = (10.0 / (tol * mu)).ln().max(0.0) / mu;
        let t_max = t_max.max(1.0);

        let mut nodes = Vec::new();
        let eps = 0.5f64.powi(spec.dyadic_levels as i32);
        let disc = |s: f64| (-lambda * s).exp();

        let gl = gauss_legendre(spec.bottom_order).mapped(0.0, eps);
        for (&s, &w) in gl.nodes.iter().zip(&gl.weights) {
            nodes.push(TimeNode {
                s,
                w_value: w * disc(s),
                w_grad: 0.0,
            });
        }
        // ∫_0^ε s^{-θ} f(s) ds with s = ε(1+x)/2: weight (1+x)^{-θ} on [-1, 1].
        let gj = gauss_jacobi(spec.bottom_order, 0.0, -theta);
        let scale = (0.5 * eps).powf(1.0 - theta);
        for (&x, &w) in gj.nodes.iter().zip(&gj.weights) {
            let s = 0.5 * eps * (1.0 + x);
            nodes.push(TimeNode {
                s,
                w_value: 0.0,
                w_grad: w * scale * s.powf(theta) * disc(s),
            });
        }

        let panel = gauss_legendre(spec.panel_order);
        let push_panel = |a: f64, b: f64, rule: &crate::quadrature::GaussRule, nodes: &mut Vec<TimeNode>| {
            let r = rule.mapped(a, b);
            for (&s, &w) in r.nodes.iter().zip(&r.weights) {
                nodes.push(TimeNode {
                    s,
                    w_value: w * disc(s),
                    w_grad: w * disc(s),
                });
            }
        };
        let mut lo = eps;
        while lo < 1.0 {
            let hi = (2.0 * lo).min(1.0);
            push_panel(lo, hi, &panel, &mut nodes);
            lo = hi;
        }
        let tail_rule = gauss_legendre(spec.tail_order);
        let len = (2.0 / lambda).min(1.0);
        let count = ((t_max - 1.0) / len).ceil() as usize;
        let step = if count > 0 { (t_max - 1.0) / count as f64 } else { 0.0 };
        for k in 0..count {
            let a = 1.0 + k as f64 * step;
            push_panel(a, a + step, &tail_rule, &mut nodes);
        }
        Ok(Self {
            lambda,
            growth_rate,
            theta,
            t_max,
            tol,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_0^{T_max} e^{-λs} h(s) ds` for bounded `h`.
    pub fn integrate_value<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.w_value != 0.0)
            .map(|n| n.w_value * h(n.s))
            .sum()
    }

    /// `∫_0^{T_max} e^{-λs} h(s) ds` for `h(s) = O(s^{-θ})` at `0`.
    pub fn integrate_singular<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.w_grad != 0.0)
            .map(|n| n.w_grad * h(n.s))
            .sum()
    }

    /// Bound on `∫_{T_max}^∞ e^{-λs} |h(s)| ds` when `|h(s)| ≤ scale · e^{a s}`.
    pub fn tail_bound(&self, scale: f64) -> f64 {
        let mu = self.lambda - self.growth_rate;
        scale * (-mu * self.t_max).exp() / mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_parameters() {
        assert!(TimeQuadrature::new(1.0, 1.0, 0.5, 1e-8).is_err());
        assert!(TimeQuadrature::new(2.0, 0.0, 1.0, 1e-8).is_err());
        assert!(TimeQuadrature::new(2.0, 0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn discounted_constant() {
        for lambda in [0.5, 2.0, 20.0] {
            let tq = TimeQuadrature::new(lambda, 0.0, 0.5, 1e-10).unwrap();
            let v = tq.integrate_value(|_| 1.0);
            assert!((v - 1.0 / lambda).abs() < 1e-9, "{v}");
            let g = tq.integrate_singular(|_| 1.0);
            assert!((g - 1.0 / lambda).abs() < 1e-9, "{g}");
        }
    }

    #[test]
    fn laplace_of_inverse_sqrt() {
        for lambda in [1.0, 4.0, 30.0] {
            let tq = TimeQuadrature::new(lambda, 0.0, 0.5, 1e-10).unwrap();
            let v = tq.integrate_singular(|s| s.powf(-0.5));
            assert!((v - (PI / lambda).sqrt()).abs() < 1e-9, "{lambda}: {v}");
        }
    }

    #[test]
    fn resolvent_of_decaying_mode() {
        // ∫ e^{-λs} e^{-s} ds = 1/(λ+1)
        let tq = TimeQuadrature::new(2.0, 0.0, 0.5, 1e-10).unwrap();
        assert!((tq.integrate_value(|s| (-s).exp()) - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn growing_integrand_and_tail() {
        let tq = TimeQuadrature::new(3.0, 1.0, 0.5, 1e-9).unwrap();
        let v = tq.integrate_value(|s| s.exp());
        assert!((v - 0.5).abs() < 1e-9 + tq.tail_bound(1.0));
        assert!(tq.tail_bound(1.0) <= 1e-10 * 1.0001);
    }
}
