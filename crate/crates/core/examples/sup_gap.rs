//! R_t[sin] is not continuous in t for the sup norm on the whole line, only locally.

use mildhjb::gaussian::qt_diagonal;
use mildhjb::model::DiagonalModel;
use mildhjb::semigroup::sup_gap_demo;

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::scalar(1.0, 1.0, 1.0)?;
    let s = 1.0;
    let floor = 0.4 * (-0.5 * qt_diagonal(&model, s)?.lambda[0]).exp();
    for k in 1..=6 {
        let gap = 10f64.powi(-k);
        let window = 10f64.powi(k + 1);
        let growing = sup_gap_demo(&model, s + gap, s, window)?;
        let fixed = sup_gap_demo(&model, s + gap, s, 10.0)?;
        println!("|t-s|=1e-{k}: window {window:.0e} gap {growing:.4} (floor {floor:.4}), window 10 gap {fixed:.2e}");
    }
    Ok(())
}
