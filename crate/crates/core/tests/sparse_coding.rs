mod common;

use common::*;
use jdzsl::linalg::DenseMatrix;
use jdzsl::sparse_opt::{
    batch_sparse_code, fista_lasso, lipschitz_step, soft_threshold, LassoProblem, SolverOptions,
};
use nalgebra::SVD;
use proptest::prelude::*;

#[test]
fn step_matches_svd() {
    let mut g = rng(11);
    for w in [0.5, 1.0 / 32.0, 3.0] {
        let d = gaussian(10, 20, &mut g);
        let smax = SVD::new(to_na(&d), false, false).singular_values.max();
        let expected = 1.0 / (2.0 * w * smax * smax);
        let step = lipschitz_step(&d, w).unwrap();
        assert!((step - expected).abs() / expected < 1e-6, "{step} vs {expected}");
    }
}

#[test]
fn matches_coordinate_descent() {
    let mut g = rng(5);
    for _ in 0..20 {
        let d = gaussian(5, 8, &mut g);
        let t = gaussian_vec(5, &mut g);
        let problem = LassoProblem::new(&d, &t, 0.2, 0.05).unwrap();
        let rep = fista_lasso(&problem, &[0.0; 8], 20_000, 1e-15).unwrap();
        let oracle = cd_lasso(&d, &t, 0.2, 0.05);
        let gap = rep.final_objective() - lasso_objective(&d, &t, 0.2, 0.05, &oracle);
        assert!(gap.abs() < 1e-6, "gap {gap}");
    }
}

#[test]
fn objective_agrees_with_loops() {
    let mut g = rng(8);
    let d = gaussian(4, 6, &mut g);
    let t = gaussian_vec(4, &mut g);
    let a = gaussian_vec(6, &mut g);
    let problem = LassoProblem::new(&d, &t, 0.7, 0.3).unwrap();
    assert!((problem.objective(&a) - lasso_objective(&d, &t, 0.7, 0.3, &a)).abs() < 1e-12);
}

#[test]
fn normal_equations_without_penalty() {
    let mut g = rng(21);
    let d = gaussian(8, 4, &mut g);
    let t = gaussian_vec(8, &mut g);
    let dn = to_na(&d);
    let ls = (dn.transpose() * &dn).try_inverse().unwrap() * dn.transpose() * nalgebra::DVector::from_vec(t.clone());
    let problem = LassoProblem::new(&d, &t, 1.0, 0.0).unwrap();
    let rep = fista_lasso(&problem, &[0.0; 4], 50_000, 0.0).unwrap();
    for j in 0..4 {
        assert!((rep.solution[j] - ls[j]).abs() <= 1e-8 * ls[j].abs().max(1.0));
    }
}

#[test]
fn atoms_code_themselves() {
    // Orthonormal columns: each atom is its own sparse code.
    let mut g = rng(2);
    let q = to_na(&gaussian(12, 6, &mut g)).qr().q();
    let d = from_na(&q);
    let opts = SolverOptions::default();
    let codes = batch_sparse_code(&d, &d, 1.0, 1e-6, &opts).unwrap();
    let recon = d.matmul(&codes).unwrap();
    for j in 0..6 {
        let err: f64 = (0..12).map(|i| (recon.get(i, j) - d.get(i, j)).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-3);
        let off: f64 = (0..6).filter(|&k| k != j).map(|k| codes.get(k, j).abs()).sum();
        assert!(off < 1e-6 && codes.get(j, j) > 0.99);
    }
}

#[test]
fn batch_permutation_equivariance() {
    let mut g = rng(4);
    let d = gaussian(6, 10, &mut g);
    let t = gaussian(6, 7, &mut g);
    let perm = [3usize, 0, 6, 2, 5, 1, 4];
    let opts = SolverOptions::default();
    let a = batch_sparse_code(&d, &t, 0.5, 0.1, &opts).unwrap();
    let b = batch_sparse_code(&d, &t.select_columns(&perm), 0.5, 0.1, &opts).unwrap();
    assert_eq!(b, a.select_columns(&perm));
}

#[test]
fn batch_of_one_equals_single_solve() {
    let mut g = rng(9);
    let d = gaussian(5, 9, &mut g);
    let t = gaussian(5, 1, &mut g);
    let opts = SolverOptions::default();
    let batch = batch_sparse_code(&d, &t, 0.4, 0.05, &opts).unwrap();
    let target = t.col(0);
    let problem = LassoProblem::new(&d, &target, 0.4, 0.05).unwrap();
    let single = fista_lasso(&problem, &[0.0; 9], opts.max_iter, opts.tol).unwrap();
    assert_eq!(batch.col(0), single.solution);
}

#[test]
fn rejects_bad_inputs() {
    let d = DenseMatrix::zeros(2, 2);
    assert!(lipschitz_step(&d, 1.0).unwrap_err().to_string().contains("degenerate design"));
    let d = DenseMatrix::identity(2);
    assert!(LassoProblem::new(&d, &[1.0], 1.0, 0.0).is_err());
    assert!(LassoProblem::new(&d, &[1.0, f64::NAN], 1.0, 0.0).is_err());
    assert!(LassoProblem::new(&d, &[1.0, 1.0], 0.0, 0.0).is_err());
    assert!(LassoProblem::new(&d, &[1.0, 1.0], 1.0, -1.0).is_err());
    let problem = LassoProblem::new(&d, &[1.0, 1.0], 1.0, 0.0).unwrap();
    assert!(fista_lasso(&problem, &[0.0], 10, 1e-7).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soft_threshold_is_the_prox(v in -5.0f64..5.0, tau in 0.0f64..3.0) {
        let u = soft_threshold(v, tau);
        let f = |u: f64| 0.5 * (u - v).powi(2) + tau * u.abs();
        let best = (-8000..=8000)
            .map(|i| i as f64 * 1e-3)
            .fold(f64::INFINITY, |m, x| m.min(f(x)));
        prop_assert!(f(u) <= best + 1e-12);
    }

    #[test]
    fn trace_never_increases(seed in any::<u64>(), rows in 1usize..10, cols in 1usize..12, l1 in 0.0f64..0.5) {
        let mut g = rng(seed);
        let d = gaussian(rows, cols, &mut g);
        let t = gaussian_vec(rows, &mut g);
        let init = gaussian_vec(cols, &mut g);
        let problem = LassoProblem::new(&d, &t, 0.5, l1).unwrap();
        let rep = fista_lasso(&problem, &init, 300, 1e-9).unwrap();
        prop_assert!(rep.iterations <= 300);
        prop_assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(rep.final_objective() <= problem.objective(&init));
    }

    #[test]
    fn zero_columns_get_zero_codes(seed in any::<u64>(), dead in 0usize..5) {
        let mut g = rng(seed);
        let mut d = gaussian(4, 5, &mut g);
        d.set_col(dead, &[0.0; 4]);
        let t = gaussian_vec(4, &mut g);
        let problem = LassoProblem::new(&d, &t, 1.0, 0.01).unwrap();
        let rep = fista_lasso(&problem, &[1.0; 5], 200, 1e-9).unwrap();
        prop_assert_eq!(rep.solution[dead], 0.0);
    }
}
