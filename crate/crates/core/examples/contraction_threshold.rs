//! alpha(lambda) in closed form and by time quadrature, and the threshold lambda_0.

use mildhjb::certificates::{ContractionParams, Envelope};

fn main() -> mildhjb::Result<()> {
    let params = ContractionParams::new(1.0, 1.0, 0.0, 0.0, Envelope { c: 1.0, theta: 0.5 });
    for lambda in [5.0, 8.0, 20.0] {
        let a = params.alpha(lambda)?;
        let b = params.alpha_numeric(lambda, 1e-12)?;
        println!(
            "lambda={lambda:<5} alpha={a:.12} quadrature={b:.12} diff={:.1e}",
            (a - b).abs()
        );
    }
    println!("lambda_0 = {:.9}", params.lambda0()?);
    Ok(())
}
