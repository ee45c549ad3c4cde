//! Certificates for the fractional-G example: alpha_n = n, Q = I, G = (-A)^beta.

use mildhjb::certificates::{certify, log_grid, ExampleCase};

fn main() -> mildhjb::Result<()> {
    let case = ExampleCase::FractionalG { beta: 0.2 };
    let model = case.model((1..=2000).map(|n| n as f64).collect())?;
    let report = certify(&model, 1.0, 1.0, 0.0, None, &log_grid(1e-3, 10.0, 41), &[5.0, 10.0])?;
    for c in &report.checks {
        println!("{:<16} {:?}", c.name, c.status);
    }
    println!("predicted theta {:.3}", case.predicted_theta());
    println!("{}", report.to_json()?);
    Ok(())
}
