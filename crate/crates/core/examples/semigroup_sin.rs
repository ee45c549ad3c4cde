//! R_t[sin](x) by Gauss-Hermite quadrature against its closed form.

use mildhjb::model::DiagonalModel;
use mildhjb::quadrature::QuadratureRule;
use mildhjb::semigroup::{apply_semigroup, sine_semigroup_1d};

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::scalar(0.8, 1.5, 1.0)?;
    let rule = QuadratureRule::gauss_hermite(32)?;
    for t in [0.01, 0.1, 1.0, 5.0] {
        for x in [-2.0, 0.3, 1.7] {
            let quad = apply_semigroup(&model, t, |y| y[0].sin(), &[x], &rule)?;
            let exact = sine_semigroup_1d(&model, t, x)?;
            println!(
                "t={t:<5} x={x:<5} quadrature={quad:+.15} closed={exact:+.15} err={:.1e}",
                (quad - exact).abs()
            );
        }
    }
    Ok(())
}
