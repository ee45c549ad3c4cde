//! Run configuration, validated before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControlSet, HjbConfig, StateCost};
use crate::demo::NeumannDemoConfig;
use crate::error::{invalid, Result};
use crate::model::DiagonalModel;
use crate::neumann::neumann_model;
use crate::quadrature::QuadratureSpec;
use crate::timequad::TimeQuadSpec;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<DiagonalModel>,
    /// JSON file holding a model, relative to the config file.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub neumann: Option<NeumannSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub certify: Option<CertifyParams>,
    #[serde(default)]
    pub semigroup: Option<SemigroupParams>,
    #[serde(default)]
    pub grad: Option<GradParams>,
    #[serde(default)]
    pub solve: Option<SolveParams>,
    #[serde(default)]
    pub simulate: Option<SimulateParams>,
    #[serde(default)]
    pub neumann_demo: Option<NeumannDemoConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannSpec {
    pub delta: f64,
    pub eps: f64,
    pub modes: usize,
    #[serde(default = "one")]
    pub q: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub from: f64,
    pub to: f64,
    pub n: usize,
}

impl LogRange {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.from > 0.0 && self.to > self.from) || self.n < 2 {
            return invalid("log range needs 0 < from < to and n >= 2");
        }
        Ok(crate::certificates::log_grid(self.from, self.to, self.n))
    }
}

fn default_t_grid() -> LogRange {
    LogRange {
        from: 1e-4,
        to: 10.0,
        n: 41,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyParams {
    #[serde(default, rename = "L")]
    pub l: f64,
    #[serde(default = "one", rename = "C")]
    pub c_growth: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub a_g: Option<f64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: LogRange,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Modes used for the boundary-control envelope estimate.
    #[serde(default = "default_estimate_modes")]
    pub estimate_modes: usize,
}

fn default_estimate_modes() -> usize {
    10_000
}

impl Default for CertifyParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Test functions with known behaviour under the Gaussian semigroup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// `sin(⟨k, x⟩)`.
    Sin { k: Vec<f64> },
    /// `cos(⟨k, x⟩)`.
    Cos { k: Vec<f64> },
    /// `tanh(⟨k, x⟩)`.
    Tanh { k: Vec<f64> },
    /// `|x|²`.
    Quadratic,
}

impl TestFunction {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Sin { k } | Self::Cos { k } | Self::Tanh { k } if k.len() != dim => {
                invalid(format!("frequency vector has {} entries for {dim} modes", k.len()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dot = |k: &[f64]| k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        match self {
            Self::Sin { k } => dot(k).sin(),
            Self::Cos { k } => dot(k).cos(),
            Self::Tanh { k } => dot(k).tanh(),
            Self::Quadratic => x.iter().map(|v| v * v).sum(),
        }
    }

    /// `sup |φ|`, infinite for unbounded functions.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Quadratic => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// `R_t[φ](x)` in closed form where it is available.
    pub fn semigroup_closed_form(&self, model: &DiagonalModel, t: f64, x: &[f64]) -> Option<f64> {
        let qt = crate::gaussian::qt_diagonal(model, t).ok()?.lambda;
        let mx = model.semigroup_apply(t, x);
        match self {
            Self::Sin { k } | Self::Cos { k } => {
                let damp = (-0.5 * k.iter().zip(&qt).map(|(a, l)| a * a * l).sum::<f64>()).exp();
                let arg: f64 = k.iter().zip(&mx).map(|(a, b)| a * b).sum();
                Some(
                    damp * if matches!(self, Self::Sin { .. }) {
                        arg.sin()
                    } else {
                        arg.cos()
                    },
                )
            }
            Self::Quadratic => Some(mx.iter().map(|v| v * v).sum::<f64>() + qt.iter().sum::<f64>()),
            Self::Tanh { .. } => None,
        }
    }
}

/// Evaluation points: an explicit list or a cube grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points {
    List(Vec<Vec<f64>>),
    Cube { x_max: f64, nodes: usize },
}

impl Points {
    pub fn resolve(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            Self::List(v) => {
                if v.is_empty() || v.iter().any(|p| p.len() != dim) {
                    return invalid(format!("points must be non-empty vectors of length {dim}"));
                }
                Ok(v.clone())
            }
            Self::Cube { x_max, nodes } => Ok(crate::field::Grid::cube(dim, *x_max, *nodes)?.points()),
        }
    }
}

fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec::GaussHermite { order: 32 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupParams {
    pub t: f64,
    pub function: TestFunction,
    pub points: Points,
    #[serde(default = "default_quadrature")]
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GradMethod {
    Exact,
    Bel,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradParams {
    pub t: f64,
    pub function: TestFunction,
    pub points: Points,
    /// Direction `k`; the derivative is taken along `Gk`.
    pub direction: Vec<f64>,
    #[serde(default = "default_method")]
    pub method: GradMethod,
    #[serde(default = "default_quadrature")]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_method() -> GradMethod {
    GradMethod::Exact
}
fn default_paths() -> usize {
    100_000
}
fn default_steps() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianChoice {
    Constant {
        c: f64,
    },
    Linear {
        c: Vec<f64>,
    },
    /// `a sin(y) + b Σ_n tanh(z_n) + β(x)` with `β(x) = cos(x_0)` scaled by `c`.
    SinTanh {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    Control {
        control: ControlSet,
        lcoef: Vec<Vec<f64>>,
        state_cost: StateCost,
        #[serde(default = "one")]
        control_weight: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub lambda: f64,
    pub hamiltonian: HamiltonianChoice,
    pub x_max: f64,
    pub nodes: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub time_tol: Option<f64>,
    #[serde(default = "default_gh")]
    pub gh_order: usize,
    #[serde(default)]
    pub time_quadrature: TimeQuadSpec,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100
}
fn default_gh() -> usize {
    16
}

impl SolveParams {
    pub fn hjb_config(&self) -> HjbConfig {
        HjbConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            time_tol: self.time_tol,
            gh_order: self.gh_order,
            time_quadrature: self.time_quadrature,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub x0: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
    /// Also write every path to `paths.bin`.
    #[serde(default)]
    pub write_paths: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves the model source; `base` is the directory of the config file.
    pub fn resolve_model(&self, base: &Path) -> Result<DiagonalModel> {
        let given = [self.model.is_some(), self.model_path.is_some(), self.neumann.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if given != 1 {
            return invalid("exactly one of 'model', 'model_path' or 'neumann' must be given");
        }
        if let Some(m) = &self.model {
            m.validate()?;
            return Ok(m.clone());
        }
        if let Some(p) = &self.model_path {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            return DiagonalModel::from_json(&std::fs::read_to_string(path)?);
        }
        let n = self.neumann.as_ref().expect("counted above");
        Ok(neumann_model(n.delta, n.eps, n.modes, vec![n.q; n.modes])?.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"mdoel": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"certify": {"L": 1, "extra": 2}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"certify": {"L": 1}}"#).is_ok());
    }

    #[test]
    fn exactly_one_model_source() {
        let cfg = RunConfig::default();
        assert!(cfg.resolve_model(Path::new(".")).is_err());
        let cfg = RunConfig::from_json(
            r#"{"neumann": {"delta": 1, "eps": 0.1, "modes": 3}, "model": {"dim": 1, "alpha": [1], "q": [1], "g": [1]}}"#,
        )
        .unwrap();
        assert!(cfg.resolve_model(Path::new(".")).is_err());
    }

    #[test]
    fn sine_closed_form_matches_one_mode_helper() {
        let m = DiagonalModel::scalar(0.7, 1.3, 1.0).unwrap();
        let f = TestFunction::Sin { k: vec![1.0] };
        let a = f.semigroup_closed_form(&m, 0.4, &[0.9]).unwrap();
        let b = crate::semigroup::sine_semigroup_1d(&m, 0.4, 0.9).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
