//! G-gradient of the semigroup: Cameron-Martin form, derivative form and finite differences.

use mildhjb::model::DiagonalModel;
use mildhjb::quadrature::QuadratureRule;
use mildhjb::semigroup::{apply_semigroup, g_gradient_from_derivative, g_gradient_semigroup, gamma_g};

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::new(vec![1.0, 2.5], vec![1.0, 0.4], vec![0.7, 1.3], 0.0)?;
    let rule = QuadratureRule::gauss_hermite(24)?;
    let phi = |y: &[f64]| (y[0] + 0.5 * y[1]).sin();
    let dphi = |y: &[f64]| {
        let c = (y[0] + 0.5 * y[1]).cos();
        vec![c, 0.5 * c]
    };
    let x = [0.4, -0.3];
    let t = 0.3;
    let cm = g_gradient_semigroup(&model, t, phi, &x, &rule)?;
    let dv = g_gradient_from_derivative(&model, t, dphi, &x, &rule)?;
    let h = 1e-5;
    for n in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[n] += h * model.g[n];
        xm[n] -= h * model.g[n];
        let fd =
            (apply_semigroup(&model, t, phi, &xp, &rule)? - apply_semigroup(&model, t, phi, &xm, &rule)?) / (2.0 * h);
        println!(
            "n={n}: cameron-martin {:+.12} derivative {:+.12} finite-diff {:+.12}",
            cm[n], dv[n], fd
        );
    }
    println!("|Gamma_G({t})| = {:.6}", gamma_g(&model, t)?.op_norm);
    Ok(())
}
