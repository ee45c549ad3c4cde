//! Value iteration on the Markov-chain approximation: uncontrolled check and a controlled run.

use mildhjb::control::{ControlProblem, ControlSet, StateCost};
use mildhjb::dp::{dp_oracle, DpConfig};
use mildhjb::model::DiagonalModel;

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::scalar(1.0, 1.0, 1.0)?;
    let quad = StateCost::Quadratic { weight: 1.0, cap: None };
    let free = ControlProblem::new(
        model.clone(),
        ControlSet::Ball { radius: 0.0, dim: 1 },
        vec![vec![1.0]],
        quad,
        1.0,
        4.0,
    )?;
    let sol = dp_oracle(&free, &DpConfig::new(6.0, 241))?;
    for x in [0.0, 1.0, 2.0] {
        let exact = x * x / 6.0 + 1.0 / 24.0;
        println!(
            "uncontrolled x={x}: dp={:.6} exact={exact:.6}",
            sol.value.eval_scalar(&[x])
        );
    }
    let ctrl = ControlProblem::new(
        model,
        ControlSet::Ball { radius: 1.0, dim: 1 },
        vec![vec![1.0]],
        quad,
        1.0,
        4.0,
    )?;
    let sol = dp_oracle(&ctrl, &DpConfig::new(6.0, 241))?;
    println!(
        "controlled: {} iterations, dt={:.2e}, {} controls",
        sol.iterations, sol.dt, sol.controls
    );
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        println!(
            "x={x:+}: V={:.6} policy={:+.3}",
            sol.value.eval_scalar(&[x]),
            sol.policy_at(&[x])[0]
        );
    }
    Ok(())
}
