//! Bismut-Elworthy-Li Monte Carlo gradient against the exact OU gradient.

use mildhjb::model::DiagonalModel;
use mildhjb::quadrature::QuadratureRule;
use mildhjb::sde::{bel_gradient, DriftSpec};
use mildhjb::semigroup::g_gradient_semigroup;

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::scalar(1.0, 1.0, 1.0)?;
    let drift = DriftSpec::ou(&model);
    let rule = QuadratureRule::gauss_hermite(32)?;
    let x = [0.4];
    for s in [0.01, 0.1, 1.0] {
        let exact = g_gradient_semigroup(&model, s, |y| y[0].sin(), &x, &rule)?[0];
        let (est, se) = bel_gradient(&model, &drift, s, |y| y[0].sin(), &x, &[1.0], 400, 100_000, 11)?;
        println!(
            "s={s:<5} exact={exact:.6} bel={est:.6} stderr={se:.2e} z={:+.2}",
            (est - exact) / se
        );
    }
    Ok(())
}
