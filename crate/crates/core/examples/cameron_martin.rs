//! Shifting the starting point along G equals reweighting by the Cameron-Martin density.

use mildhjb::gaussian::{cameron_martin_density, expectation, qt_diagonal};
use mildhjb::model::DiagonalModel;
use mildhjb::quadrature::QuadratureRule;
use mildhjb::semigroup::apply_semigroup;

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::scalar(0.6, 1.2, 0.9)?;
    let rule = QuadratureRule::gauss_hermite(48)?;
    let (t, s, k, x) = (0.7, 0.5, [0.8], [0.3]);
    let phi = |y: &[f64]| (1.3 * y[0]).cos() + 0.2 * y[0];
    let shifted = [x[0] + s * model.g[0] * k[0]];
    let direct = apply_semigroup(&model, t, phi, &shifted, &rule)?;
    let cov = qt_diagonal(&model, t)?;
    let mean = model.semigroup_apply(t, &x);
    let weighted = expectation(
        &cov,
        &[0.0],
        |y| phi(&[y[0] + mean[0]]) * cameron_martin_density(&model, t, &k, s, y).unwrap_or(f64::NAN),
        &rule,
    )?;
    println!("R_t[phi](x + sGk) = {direct:.12}");
    println!("E[phi(y + e^tA x) d(s,y;k)] = {weighted:.12}");
    Ok(())
}
