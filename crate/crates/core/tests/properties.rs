use proptest::prelude::*;

use mildhjb::certificates::{ContractionParams, Envelope};
use mildhjb::control::{hamiltonian_f0, ControlProblem, ControlSet, StateCost};
use mildhjb::field::{g_pair_norm, Grid, GridField};
use mildhjb::gaussian::{cameron_martin_density, expectation, qt_diagonal, variance_factor};
use mildhjb::model::DiagonalModel;
use mildhjb::neumann::neumann_map_fd;
use mildhjb::quadrature::QuadratureRule;
use mildhjb::rng::derive_seed;
use mildhjb::semigroup::{apply_semigroup, gamma_entry};

fn model_1d() -> impl Strategy<Value = DiagonalModel> {
    (0.0..4.0f64, 0.1..3.0f64, 0.1..2.0f64).prop_map(|(a, q, g)| DiagonalModel::scalar(a, q, g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_factor_is_between_zero_and_t(alpha in 0.0..10.0f64, t in 0.0..20.0f64) {
        let v = variance_factor(alpha, t);
        prop_assert!(v >= 0.0 && v <= t * (1.0 + 1e-15));
    }

    #[test]
    fn covariance_grows_with_time(m in model_1d(), t in 0.01..5.0f64, dt in 0.001..1.0f64) {
        let a = qt_diagonal(&m, t).unwrap().lambda[0];
        let b = qt_diagonal(&m, t + dt).unwrap().lambda[0];
        prop_assert!(b > a);
    }

    #[test]
    fn semigroup_preserves_constants_and_is_linear(m in model_1d(), t in 0.01..3.0f64, x in -3.0..3.0f64, c in -5.0..5.0f64) {
        let rule = QuadratureRule::gauss_hermite(16).unwrap();
        let k = apply_semigroup(&m, t, |_| c, &[x], &rule).unwrap();
        prop_assert!((k - c).abs() <= 1e-12 * (1.0 + c.abs()));
        let f = apply_semigroup(&m, t, |y| y[0].sin(), &[x], &rule).unwrap();
        let g = apply_semigroup(&m, t, |y| y[0].cos(), &[x], &rule).unwrap();
        let fg = apply_semigroup(&m, t, |y| c * y[0].sin() + y[0].cos(), &[x], &rule).unwrap();
        prop_assert!((fg - c * f - g).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn cameron_martin_density_has_unit_mean(m in model_1d(), t in 0.1..3.0f64, s in -1.0..1.0f64, k in -1.0..1.0f64) {
        let rule = QuadratureRule::gauss_hermite(48).unwrap();
        let cov = qt_diagonal(&m, t).unwrap();
        let mean = expectation(&cov, &[0.0], |y| cameron_martin_density(&m, t, &[k], s, y).unwrap(), &rule).unwrap();
        prop_assume!((gamma_entry(m.alpha[0], m.q[0], m.g[0], t) * s * k).abs() < 3.0);
        prop_assert!((mean - 1.0).abs() < 1e-9, "{}", mean);
    }

    #[test]
    fn gamma_entry_decreases_in_time(a in 0.0..3.0f64, q in 0.1..3.0f64, g in 0.1..3.0f64, t in 0.01..5.0f64, dt in 0.01..1.0f64) {
        prop_assert!(gamma_entry(a, q, g, t + dt) < gamma_entry(a, q, g, t));
    }

    #[test]
    fn contraction_constant_decreases_and_threshold_is_consistent(
        l in 0.1..3.0f64, c in 0.1..3.0f64, a in 0.0..2.0f64, ag in 0.0..2.0f64, ce in 0.1..2.0f64, theta in 0.05..0.95f64,
    ) {
        let p = ContractionParams::new(l, c, a, ag, Envelope { c: ce, theta });
        let edge = p.left_edge();
        prop_assert!(p.alpha(edge + 1.0).unwrap() > p.alpha(edge + 2.0).unwrap());
        let l0 = p.lambda0().unwrap();
        if l0 > edge * (1.0 + 1e-3) + 1e-9 {
            prop_assert!(p.alpha(l0 * (1.0 + 1e-6)).unwrap() < 1.0);
            prop_assert!(p.alpha(l0 * (1.0 - 1e-6)).unwrap() > 1.0);
        }
        let doubled = ContractionParams::new(2.0 * l, c, a, ag, Envelope { c: ce, theta });
        prop_assert!(doubled.lambda0().unwrap() > l0);
    }

    #[test]
    fn ball_hamiltonian_is_a_lower_bound_for_sampled_controls(
        w0 in -3.0..3.0f64, w1 in -3.0..3.0f64, radius in 0.1..2.0f64, kappa in 0.0..2.0f64,
        e0 in -1.0..1.0f64, e1 in -1.0..1.0f64,
    ) {
        let model = DiagonalModel::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0], 0.0).unwrap();
        let problem = ControlProblem::new(
            model,
            ControlSet::Ball { radius, dim: 2 },
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            StateCost::Constant { value: 0.0 },
            kappa,
            5.0,
        ).unwrap();
        let (value, eta) = hamiltonian_f0(&problem, &[0.0, 0.0], &[w0, w1]).unwrap();
        prop_assert!(eta.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius * (1.0 + 1e-12));
        let norm = e0.hypot(e1).max(1.0);
        let probe = [radius * e0 / norm, radius * e1 / norm];
        let sampled = w0 * probe[0] + w1 * probe[1] + 0.5 * kappa * (probe[0] * probe[0] + probe[1] * probe[1]);
        prop_assert!(value <= sampled + 1e-12);
    }

    #[test]
    fn neumann_map_is_linear(d in 0.2..5.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let left = neumann_map_fd(d, [1.0, 0.0], 400).unwrap();
        let right = neumann_map_fd(d, [0.0, 1.0], 400).unwrap();
        let both = neumann_map_fd(d, [a, b], 400).unwrap();
        for i in 0..both.len() {
            prop_assert!((both[i] - a * left[i] - b * right[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn pair_norm_obeys_the_triangle_inequality(xs in proptest::collection::vec(-5.0..5.0f64, 18)) {
        let grid = Grid::cube(1, 2.0, 9).unwrap();
        let u1 = GridField::from_values(grid.clone(), 1, xs[..9].to_vec(), 0.0).unwrap();
        let u2 = GridField::from_values(grid.clone(), 1, xs[9..].to_vec(), 0.0).unwrap();
        let v1 = u2.scale(0.5);
        let v2 = u1.scale(-2.0);
        let lhs = g_pair_norm(&u1.add(&u2).unwrap(), &v1.add(&v2).unwrap()).unwrap();
        let rhs = g_pair_norm(&u1, &v1).unwrap() + g_pair_norm(&u2, &v2).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn derived_seeds_depend_on_both_inputs(seed in any::<u64>()) {
        prop_assert_ne!(derive_seed(seed, "rollout"), derive_seed(seed, "simulate"));
        prop_assert_ne!(derive_seed(seed, "rollout"), derive_seed(seed.wrapping_add(1), "rollout"));
        prop_assert_eq!(derive_seed(seed, "grad-bel"), derive_seed(seed, "grad-bel"));
    }
}
