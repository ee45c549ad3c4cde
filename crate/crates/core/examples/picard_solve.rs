//! Picard iteration for a nonlinear Hamiltonian, with the contraction diagnostics.

use mildhjb::certificates::ContractionParams;
use mildhjb::field::Grid;
use mildhjb::mild::{solve_picard, HamiltonianSpec, MildSolver, PicardConfig};
use mildhjb::model::DiagonalModel;
use mildhjb::quadrature::QuadratureRule;
use mildhjb::timequad::TimeQuadSpec;

fn main() -> mildhjb::Result<()> {
    let model = DiagonalModel::scalar(1.0, 1.0, 1.0)?;
    let ham = HamiltonianSpec::new("sin+tanh", 1.0, 0.0, 2.0, |x, y, z| {
        y.sin() + 0.5 * z[0].tanh() + x[0].cos()
    })?;
    let params = ContractionParams::bounded(&model, ham.lipschitz);
    let lambda = 12.0;
    let solver = MildSolver::from_params(
        &model,
        &ham,
        lambda,
        &params,
        1e-9,
        &TimeQuadSpec::default(),
        QuadratureRule::gauss_hermite(16)?,
    )?;
    let grid = Grid::cube(1, 4.0, 41)?;
    let cfg = PicardConfig {
        lambda,
        tol: 1e-8,
        max_iter: 80,
        time_tol: None,
    };
    let sol = solve_picard(&solver, &params, &grid, &cfg, None)?;
    let r = &sol.report;
    println!("alpha({lambda}) = {:.4}, lambda_0 = {:.4}", r.alpha, r.lambda0);
    for (k, d) in r.deltas.iter().enumerate() {
        println!("iter {k:>2} delta {d:.3e}");
    }
    println!(
        "residual {:.2e} (quadrature estimate {:.2e}), gradient fd error {:.2e}",
        r.residual, r.quadrature_estimate, r.gradient_fd_error
    );
    println!("u(0) = {:.10}", sol.u.eval_scalar(&[0.0]));
    Ok(())
}
