use proptest::prelude::*;
use scio::covariance::{perturb_to_pd, sample_covariance, DataMatrix};
use scio::matrix::{min_eigenvalue, SymMatrix};
use scio::oracle::{brute_force_column, kkt_residual};
use scio::solver::{
    column_objective, constraint_excess, estimate_from_sigma, fit_path, solve_column, solve_path,
    CoordinateDescent, SolverConfig,
};
use scio::tuning::{argmin_risk, cross_validate, CvPlan};
use scio::Execution;

fn data(n: usize, p: usize) -> impl Strategy<Value = DataMatrix> {
    prop::collection::vec(-3.0f64..3.0, n * p)
        .prop_map(move |v| DataMatrix::from_vec(n, p, v).unwrap())
}

/// Sample covariance of random data, made positive definite.
fn sigma(p: usize) -> impl Strategy<Value = SymMatrix> {
    data(3 * p, p).prop_map(|x| {
        perturb_to_pd(&sample_covariance(&x).unwrap())
            .unwrap()
            .sigma_hat
    })
}

fn tight() -> SolverConfig {
    SolverConfig::default().with_tol(1e-11)
}

proptest! {
    #[test]
    fn sample_covariance_is_psd(x in data(6, 9)) {
        let s = sample_covariance(&x).unwrap();
        let scale = 1.0 + s.sigma().diagonal().iter().fold(0.0f64, |a, b| a.max(*b));
        prop_assert!(min_eigenvalue(s.sigma(), 1e-13).unwrap() >= -1e-10 * scale);
    }

    #[test]
    fn perturbation_is_idempotent_and_pd(x in data(5, 8)) {
        let once = perturb_to_pd(&sample_covariance(&x).unwrap()).unwrap();
        prop_assert!(min_eigenvalue(once.sigma(), 1e-14).unwrap() > 0.0);
        prop_assert_eq!(perturb_to_pd(&once).unwrap(), once);
    }

    #[test]
    fn covariance_scales_quadratically(x in data(10, 4), c in 0.1f64..5.0) {
        let a = sample_covariance(&x).unwrap();
        let b = sample_covariance(&x.scaled(c)).unwrap();
        for (u, v) in a.sigma().as_slice().iter().zip(b.sigma().as_slice()) {
            prop_assert!((v - c * c * u).abs() < 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn converged_columns_satisfy_kkt(s in sigma(6), i in 0usize..6, lambda in 0.01f64..1.0) {
        let cfg = SolverConfig::default();
        let sol = solve_column(&s, i, lambda, &cfg, None).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.kkt_residual <= cfg.tol);
        prop_assert!(kkt_residual(&sol.beta, &s, i, lambda) <= cfg.tol + 1e-12);
        prop_assert!(constraint_excess(&s, &sol) <= cfg.tol + 1e-12);
    }

    #[test]
    fn sweeps_never_increase_the_objective(s in sigma(7), i in 0usize..7, lambda in 0.01f64..0.5) {
        let mut cd = CoordinateDescent::new(&s, i, lambda, None).unwrap();
        let mut last = cd.objective();
        for _ in 0..20 {
            cd.full_sweep();
            let now = cd.objective();
            prop_assert!(now <= last + 1e-12 * (1.0 + last.abs()));
            last = now;
        }
    }

    #[test]
    fn matches_exhaustive_enumeration(s in sigma(5), i in 0usize..5, log_l in (0.01f64).ln()..(2.0f64).ln()) {
        let lambda = log_l.exp();
        let sol = solve_column(&s, i, lambda, &tight(), None).unwrap();
        let exact = brute_force_column(&s, i, lambda).unwrap();
        let gap = column_objective(&s, i, lambda, &sol.beta) - column_objective(&s, i, lambda, &exact);
        prop_assert!(gap.abs() < 1e-9);
        for (a, b) in sol.beta.iter().zip(&exact) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn scaling_sigma_scales_the_solution(s in sigma(5), i in 0usize..5, lambda in 0.02f64..0.5, c in 0.2f64..5.0) {
        let a = solve_column(&s, i, lambda, &tight(), None).unwrap();
        let b = solve_column(&s.scaled(c), i, lambda, &tight(), None).unwrap();
        for (u, v) in a.beta.iter().zip(&b.beta) {
            prop_assert!((v - u / c).abs() < 1e-7 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn identity_path_is_sparse(p in 2usize..8, i in 0usize..8, lambda in 0.01f64..3.0) {
        let i = i % p;
        let sol = solve_column(&SymMatrix::identity(p), i, lambda, &SolverConfig::default(), None).unwrap();
        for (j, b) in sol.beta.iter().enumerate() {
            let want = if j == i { (1.0 - lambda).max(0.0) } else { 0.0 };
            prop_assert_eq!(*b, want);
        }
    }

    #[test]
    fn warm_and_cold_paths_agree(s in sigma(6), i in 0usize..6) {
        let grid = vec![0.8, 0.4, 0.2, 0.1, 0.05];
        let warm = solve_path(&s, i, &tight().with_grid(grid.clone())).unwrap();
        let mut cold_cfg = tight().with_grid(grid);
        cold_cfg.warm_start = false;
        let cold = solve_path(&s, i, &cold_cfg).unwrap();
        for (w, c) in warm.iter().zip(&cold) {
            for (a, b) in w.beta.iter().zip(&c.beta) {
                prop_assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn estimate_is_symmetric_and_keeps_smaller_entries(s in sigma(6), lambda in 0.02f64..0.5) {
        let est = estimate_from_sigma(&s, &[lambda; 6], &SolverConfig::default()).unwrap();
        let o = &est.omega_hat;
        for i in 0..6 {
            let col = solve_column(&s, i, lambda, &SolverConfig::default(), None).unwrap();
            for j in 0..6 {
                prop_assert_eq!(o.get(i, j).to_bits(), o.get(j, i).to_bits());
                if i != j {
                    prop_assert!(o.get(i, j).abs() <= col.beta[j].abs());
                }
            }
        }
    }

    #[test]
    fn execution_modes_are_identical(s in sigma(8)) {
        let grid = vec![0.5, 0.2, 0.05];
        let seq = fit_path(&s, &grid, &SolverConfig::default().with_execution(Execution::Sequential)).unwrap();
        let par = fit_path(&s, &grid, &SolverConfig::default().with_execution(Execution::Parallel)).unwrap();
        for (a, b) in seq.estimates.iter().zip(&par.estimates) {
            prop_assert_eq!(&a.omega_hat, &b.omega_hat);
        }
    }

    #[test]
    fn cv_ties_resolve_to_larger_lambda(risks in prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.0]), 2..12)) {
        let lambdas: Vec<f64> = (1..=risks.len()).map(|j| j as f64).collect();
        let k = argmin_risk(&lambdas, &risks);
        let min = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(risks[k], min);
        prop_assert!(risks[k + 1..].iter().all(|r| *r > min));
    }
}

#[test]
fn cross_validation_is_symmetric_and_reports_every_column() {
    let truth = scio::simgen::two_block_compose(&scio::simgen::gen_decay(5, 0.6).unwrap());
    let x = scio::simgen::sample_gaussian(&truth, 120, &mut scio::simgen::child_rng(2, 0)).unwrap();
    let plan = CvPlan {
        grid_n: 15,
        folds: 2,
        ..CvPlan::default()
    };
    let out = cross_validate(&x, &plan, &SolverConfig::default()).unwrap();
    assert_eq!(out.results.len(), 10);
    assert_eq!(out.estimate.lambda_per_column.len(), 10);
    for (r, l) in out.results.iter().zip(&out.estimate.lambda_per_column) {
        assert_eq!(r.chosen_lambda, *l);
        assert_eq!(r.lambdas.len(), 15);
    }
    let o = &out.estimate.omega_hat;
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(o.get(i, j), o.get(j, i));
        }
    }
    assert!(min_eigenvalue(o, 1e-14).unwrap() > 0.0);
    let again = cross_validate(&x, &plan, &SolverConfig::default()).unwrap();
    assert_eq!(again.estimate, out.estimate);
}
