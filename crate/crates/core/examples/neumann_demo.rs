//! Boundary control of the heat equation, one retained mode, against the DP oracle.

use mildhjb::demo::{neumann_demo, NeumannDemoConfig};

fn main() -> mildhjb::Result<()> {
    let cfg = NeumannDemoConfig::default();
    let (report, _) = neumann_demo(&cfg, 7)?;
    println!(
        "picard iterations {} alpha {:.4} lambda0 {:.4}",
        report.solve.iterations, report.solve.alpha, report.solve.lambda0
    );
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "x", "hjb", "dp", "J feedback", "J dp-policy"
    );
    for r in &report.probes {
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.x, r.hjb, r.dp, r.feedback_cost.mean, r.dp_policy_cost.mean
        );
    }
    println!(
        "relative error {:.3e}, rollout excess {:.3e}, {:.1}s",
        report.relative_error, report.rollout_excess, report.seconds
    );
    Ok(())
}
