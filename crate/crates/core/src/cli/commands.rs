use serde_json::json;

use super::config::{GradMethod, HamiltonianChoice, RunConfig};
use super::output::Artifacts;
use crate::certificates::{certify, Check, CheckStatus, ContractionParams};
use crate::control::{solve_hjb, ControlProblem};
use crate::demo::neumann_demo;
use crate::error::{invalid, Result};
use crate::field::Grid;
use crate::mild::{solve_picard, HamiltonianSpec, MildSolver, PicardConfig};
use crate::model::DiagonalModel;
use crate::neumann::neumann_estimate_check;
use crate::quadrature::QuadratureRule;
use crate::rng::derive_seed;
use crate::sde::{bel_gradient, simulate_mild, DriftSpec};
use crate::semigroup::{apply_semigroup, g_gradient_semigroup};

/// What a command reports back besides its artifacts.
pub struct Outcome {
    pub pass: bool,
    pub derived_seeds: Vec<(String, u64)>,
}

impl Outcome {
    fn deterministic(pass: bool) -> Self {
        Self {
            pass,
            derived_seeds: Vec::new(),
        }
    }
}

fn coord_header(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

pub fn cmd_certify(cfg: &RunConfig, model: &DiagonalModel, out: &mut Artifacts) -> Result<Outcome> {
    let p = cfg.certify.clone().unwrap_or_default();
    let t_grid = p.t_grid.points()?;
    let mut report = certify(model, p.l, p.c_growth, p.a, p.a_g, &t_grid, &p.lambdas)?;
    if let Some(n) = &cfg.neumann {
        let est = neumann_estimate_check(n.delta, n.eps, p.estimate_modes, &t_grid, 1.0);
        let status = if est.pass {
            CheckStatus::VerifiedAtTruncation
        } else {
            CheckStatus::Failed
        };
        report.checks.push(Check::new(
            "neumann-envelope-estimate",
            status,
            serde_json::to_value(&est)?,
        ));
    }
    out.json("certificate.json", &report)?;
    Ok(Outcome::deterministic(report.passed()))
}

pub fn cmd_semigroup(cfg: &RunConfig, model: &DiagonalModel, out: &mut Artifacts) -> Result<Outcome> {
    let Some(p) = &cfg.semigroup else {
        return invalid("config has no 'semigroup' section");
    };
    p.function.validate(model.dim)?;
    let rule = QuadratureRule::from_spec(&p.quadrature)?;
    let points = p.points.resolve(model.dim)?;
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        let value = apply_semigroup(model, p.t, |y| p.function.eval(y), x, &rule)?;
        let exact = p.function.semigroup_closed_form(model, p.t, x).unwrap_or(f64::NAN);
        let mut row = x.clone();
        row.extend([value, exact, (value - exact).abs()]);
        rows.push(row);
    }
    let mut header = coord_header(model.dim);
    header.extend(["value", "closed_form", "abs_error"].map(String::from));
    out.csv("semigroup.csv", &header, &rows)?;
    Ok(Outcome::deterministic(true))
}

pub fn cmd_grad(
    cfg: &RunConfig,
    model: &DiagonalModel,
    method: Option<GradMethod>,
    seed: u64,
    out: &mut Artifacts,
) -> Result<Outcome> {
    let Some(p) = &cfg.grad else {
        return invalid("config has no 'grad' section");
    };
    p.function.validate(model.dim)?;
    if p.direction.len() != model.dim {
        return invalid("direction has the wrong dimension");
    }
    let method = method.unwrap_or(p.method);
    let rule = QuadratureRule::from_spec(&p.quadrature)?;
    let points = p.points.resolve(model.dim)?;
    let h: Vec<f64> = p.direction.iter().zip(&model.g).map(|(k, g)| k * g).collect();
    let bel_seed = derive_seed(seed, "grad-bel");
    let drift = DriftSpec::ou(model);
    let mut rows = Vec::new();
    let mut pass = true;
    for x in &points {
        let exact = if method != GradMethod::Bel {
            let dg = g_gradient_semigroup(model, p.t, |y| p.function.eval(y), x, &rule)?;
            dg.iter().zip(&p.direction).map(|(d, k)| d * k).sum()
        } else {
            f64::NAN
        };
        let (bel, se) = if method != GradMethod::Exact {
            bel_gradient(
                model,
                &drift,
                p.t,
                |y| p.function.eval(y),
                x,
                &h,
                p.steps,
                p.paths,
                bel_seed,
            )?
        } else {
            (f64::NAN, f64::NAN)
        };
        if method == GradMethod::Both {
            pass &= (exact - bel).abs() <= 3.0 * se + 1e-12;
        }
        let mut row = x.clone();
        row.extend([exact, bel, se]);
        rows.push(row);
    }
    let mut header = coord_header(model.dim);
    header.extend(["exact", "bel", "bel_stderr"].map(String::from));
    out.csv("grad.csv", &header, &rows)?;
    let seeds = if method == GradMethod::Exact {
        vec![]
    } else {
        vec![("grad-bel".to_string(), bel_seed)]
    };
    Ok(Outcome {
        pass,
        derived_seeds: seeds,
    })
}

fn generic_hamiltonian(choice: &HamiltonianChoice, dim: usize) -> Result<HamiltonianSpec> {
    match choice {
        HamiltonianChoice::Constant { c } => Ok(HamiltonianSpec::constant(*c)),
        HamiltonianChoice::Linear { c } => {
            if c.len() != dim {
                return invalid("linear Hamiltonian coefficients have the wrong dimension");
            }
            Ok(HamiltonianSpec::linear(c.clone()))
        }
        HamiltonianChoice::SinTanh { a, b, c } => {
            let (a, b, c) = (*a, *b, *c);
            let lip = a.abs().max(b.abs() * (dim as f64).sqrt());
            HamiltonianSpec::new(
                "sin-tanh",
                lip,
                0.0,
                a.abs() + b.abs() * dim as f64 + c.abs(),
                move |x, y, z| a * y.sin() + b * z.iter().map(|v| v.tanh()).sum::<f64>() + c * x[0].cos(),
            )
        }
        HamiltonianChoice::Control { .. } => unreachable!("handled by the control layer"),
    }
}

pub fn cmd_solve(cfg: &RunConfig, model: &DiagonalModel, out: &mut Artifacts) -> Result<Outcome> {
    let Some(p) = &cfg.solve else {
        return invalid("config has no 'solve' section");
    };
    let grid = Grid::cube(model.dim, p.x_max, p.nodes)?;
    let (u, v, report, params) = match &p.hamiltonian {
        HamiltonianChoice::Control {
            control,
            lcoef,
            state_cost,
            control_weight,
        } => {
            let problem = ControlProblem::new(
                model.clone(),
                control.clone(),
                lcoef.clone(),
                *state_cost,
                *control_weight,
                p.lambda,
            )?;
            let sol = solve_hjb(&problem, &grid, &p.hjb_config())?;
            (sol.u, sol.v, sol.report, sol.params)
        }
        other => {
            let ham = generic_hamiltonian(other, model.dim)?;
            let model = model.clone().with_growth(ham.growth_order)?;
            let params = ContractionParams::bounded(&model, ham.lipschitz);
            let time_tol = p.time_tol.unwrap_or(p.tol / 10.0);
            let solver = MildSolver::from_params(
                &model,
                &ham,
                p.lambda,
                &params,
                time_tol,
                &p.time_quadrature,
                QuadratureRule::gauss_hermite(p.gh_order)?,
            )?;
            let picard = PicardConfig {
                lambda: p.lambda,
                tol: p.tol,
                max_iter: p.max_iter,
                time_tol: Some(time_tol),
            };
            let sol = solve_picard(&solver, &params, &grid, &picard, None)?;
            (sol.u, sol.v, sol.report, params)
        }
    };
    out.field_csv("u.csv", &u, "u")?;
    out.field_csv("v.csv", &v, "v")?;
    out.json("solve_report.json", &json!({ "report": report, "contraction": params }))?;
    Ok(Outcome::deterministic(report.converged))
}

pub fn cmd_simulate(cfg: &RunConfig, model: &DiagonalModel, seed: u64, out: &mut Artifacts) -> Result<Outcome> {
    let Some(p) = &cfg.simulate else {
        return invalid("config has no 'simulate' section");
    };
    let sim_seed = derive_seed(seed, "simulate");
    let batch = simulate_mild(model, &DriftSpec::ou(model), &p.x0, p.t, p.dt, p.paths, sim_seed)?;
    let mut header = vec!["t".to_string()];
    for n in 0..model.dim {
        header.push(format!("mean{n}"));
        header.push(format!("var{n}"));
    }
    out.csv("summary.csv", &header, &batch.summary())?;
    if p.write_paths {
        let path = out.path("paths.bin");
        batch.write_binary(&path)?;
    }
    Ok(Outcome {
        pass: true,
        derived_seeds: vec![("simulate".to_string(), sim_seed)],
    })
}

pub fn cmd_neumann_demo(cfg: &RunConfig, seed: u64, out: &mut Artifacts) -> Result<Outcome> {
    let demo = cfg.neumann_demo.clone().unwrap_or_default();
    let (report, sol) = neumann_demo(&demo, seed)?;
    out.json("report.json", &report)?;
    let rows: Vec<Vec<f64>> = report
        .probes
        .iter()
        .map(|r| {
            vec![
                r.x,
                r.hjb,
                r.dp,
                r.feedback_cost.mean,
                r.feedback_cost.stderr,
                r.dp_policy_cost.mean,
                r.dp_policy_cost.stderr,
            ]
        })
        .collect();
    let header = [
        "x",
        "hjb",
        "dp",
        "j_feedback",
        "j_feedback_stderr",
        "j_dp_policy",
        "j_dp_policy_stderr",
    ]
    .map(String::from);
    out.csv("probes.csv", &header, &rows)?;
    out.field_csv("u.csv", &sol.u, "u")?;
    out.field_csv("v.csv", &sol.v, "v")?;
    let pass = report.value_pass && report.rollout_pass && report.certificate.passed() && report.estimate.pass;
    Ok(Outcome {
        pass,
        derived_seeds: vec![("rollout".to_string(), derive_seed(seed, "rollout"))],
    })
}
