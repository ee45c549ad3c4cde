//! Exponential-Euler OU paths: sample moments against the exact mean and variance.

use mildhjb::gaussian::variance_factor;
use mildhjb::model::DiagonalModel;
use mildhjb::sde::{simulate_mild, DriftSpec};

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::new(vec![0.5, 3.0], vec![1.0, 0.25], vec![1.0, 1.0], 0.0)?;
    let batch = simulate_mild(&model, &DriftSpec::ou(&model), &[2.0, -1.0], 2.0, 0.05, 20_000, 3)?;
    for row in batch.summary().iter().step_by(10) {
        let t = row[0];
        let m0 = 2.0 * (-0.5 * t).exp();
        let v0 = variance_factor(0.5, t);
        println!(
            "t={t:.2} mean0={:.4} (exact {m0:.4}) var0={:.4} (exact {v0:.4})",
            row[1], row[2]
        );
    }
    Ok(())
}
