use std::sync::Arc;

use proptest::prelude::*;

use golearn::experiments::quantile;
use golearn::fk::{solve_exit_moments, Grid1D};
use golearn::gradients::{grad_second_moment_from_parts, reweighted_second_moment};
use golearn::io::{load_path_cache, save_path_cache};
use golearn::losses::{go_loss_from_parts, Oracle1D};
use golearn::observables::{model_martingale, simulate_observable_paths, ObservableSpec};
use golearn::optimize::adagrad_step;
use golearn::potentials::{scalar_drift, scalar_value, DoubleWell};
use golearn::rng::derive_seed;
use golearn::sde::{simulate_batch, Region, SdeSystem, StopRule};

fn oracle() -> Oracle1D {
    Oracle1D {
        beta: 1.0,
        x0: -1.0,
        x_exit: 1.0,
        n_grid: 1001,
        n_quad: 100,
        search: (-6.0, 6.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adagrad_moves_each_coordinate_at_most_gamma(
        g in prop::collection::vec(-1e3f64..1e3, 1..6),
        acc0 in 0.0f64..10.0,
        gamma in 1e-3f64..1.0,
    ) {
        let mut theta = vec![0.0; g.len()];
        let mut acc = vec![acc0; g.len()];
        adagrad_step(&mut theta, &g, &mut acc, gamma);
        for ((t, gi), a) in theta.iter().zip(&g).zip(&acc) {
            prop_assert!(t.abs() <= gamma * (1.0 + 1e-12));
            prop_assert!(*a >= acc0);
            prop_assert!(*t == 0.0 || t.signum() == -gi.signum());
        }
    }

    #[test]
    fn exit_moments_satisfy_jensen(theta in -1.0f64..1.0) {
        let v = DoubleWell::new(theta);
        let grid = Grid1D::for_exit(&scalar_value(&v), 1.0, 1.0, 801).unwrap();
        let m = solve_exit_moments(&scalar_drift(&v), 1.0, &grid).unwrap();
        for (a, b) in m.m1.iter().zip(&m.m2) {
            prop_assert!(*a >= 0.0);
            prop_assert!(*b + 1e-9 >= a * a);
        }
        // Moments decrease towards the exit point.
        prop_assert!(m.m1.windows(2).all(|w| w[0] + 1e-9 >= w[1]));
    }

    #[test]
    fn go_loss_dominates_half_squared_error(theta in 0.0f64..1.0) {
        let o = oracle();
        let e = o.evaluate(golearn::losses::Direction::Forward, &DoubleWell::new(0.5), &DoubleWell::new(theta), 1e4).unwrap();
        prop_assert!(e.go_loss >= 0.5 * e.abs_error * e.abs_error - 1e-8);
    }

    #[test]
    fn go_loss_is_linear_in_the_rate(t in 1.0f64..1e4, m in 0.0f64..50.0, m2 in 0.0f64..50.0, h in 0.0f64..5.0) {
        let one = go_loss_from_parts(t, m, m2, h).value;
        let two = go_loss_from_parts(t, m, m2, 2.0 * h).value;
        prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two.abs().max(1.0));
        prop_assert!(one >= 0.0);
    }

    #[test]
    fn quantiles_are_ordered_and_bounded(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let (lo, hi) = (quantile(&v, 0.0), quantile(&v, 1.0));
        let (q1, q2, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        prop_assert!(lo <= q1 && q1 <= q2 && q2 <= q3 && q3 <= hi);
        prop_assert_eq!(lo, v.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn derived_seeds_are_label_sensitive(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(derive_seed(seed, &[a, b]), derive_seed(seed, &[a, b]));
        if a != b {
            prop_assert_ne!(derive_seed(seed, &[a]), derive_seed(seed, &[b]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn path_cache_round_trips(seed in any::<u64>(), n in 1usize..6, keep_noise in any::<bool>()) {
        let sys = SdeSystem::from_potential(Arc::new(DoubleWell::new(0.3)), 1.0, vec![-1.0]).unwrap();
        let rule = StopRule::Exit(Region::Interval { lo: None, hi: Some(1.0) });
        let mut paths = simulate_batch(&sys, &rule, 2.0, 1e-2, n, seed).unwrap();
        if !keep_noise {
            paths.iter_mut().for_each(|p| p.noise = None);
        }
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("p.bin");
        save_path_cache(&paths, &f).unwrap();
        prop_assert_eq!(load_path_cache(&f).unwrap(), paths);
    }

    #[test]
    fn reweighting_at_the_sampling_model_is_the_plain_average(seed in any::<u64>()) {
        let model = DoubleWell::new(0.2);
        let sys = SdeSystem::from_potential(Arc::new(model.clone()), 1.0, vec![-1.0]).unwrap();
        let spec = ObservableSpec::first_exit(Region::Interval { lo: None, hi: Some(1.0) }, 50.0);
        let paths = simulate_observable_paths(&sys, &spec, 2e-2, 40, seed).unwrap();
        let direct: f64 = paths
            .iter()
            .map(|p| golearn::observables::evaluate_functional(&spec, p).unwrap().powi(2))
            .sum::<f64>() / paths.len() as f64;
        let rw = reweighted_second_moment(&spec, &model, &model, &paths, sys.sigma).unwrap();
        prop_assert!((rw - direct).abs() <= 1e-10 * direct.max(1.0));
        // Gradient from parts matches the batch helper's shape.
        let phis: Vec<f64> = paths.iter().map(|p| golearn::observables::evaluate_functional(&spec, p).unwrap()).collect();
        let marts: Vec<Vec<f64>> = paths.iter().map(|p| model_martingale(p, &model, sys.sigma).unwrap()).collect();
        let (g, se) = grad_second_moment_from_parts(&phis, &marts, 1);
        prop_assert_eq!(g.len(), 1);
        prop_assert!(se[0] >= 0.0 && g[0].is_finite());
    }
}
