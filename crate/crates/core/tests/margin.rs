use approx::assert_relative_eq;
use imbalance_lab::analytic::{ma_coefficients, mm_coefficients, reduced_optimum};
use imbalance_lab::margin::*;
use imbalance_lab::model::*;
use imbalance_lab::Error;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn two_points() -> Dataset {
    Dataset::new(DMatrix::from_column_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]), vec![0, 1], 2).unwrap()
}

#[test]
fn two_point_max_margin() {
    let sol = solve_primal(&two_points(), &MarginProblem::max_margin(2, Rho::Infinite)).unwrap();
    let w = &sol.predictor.w;
    assert_relative_eq!(w[(0, 0)], 0.5, epsilon = 1e-10);
    assert_relative_eq!(w[(0, 1)], -0.5, epsilon = 1e-10);
    assert!(w.row(1).amax() < 1e-12);
    assert_eq!(sol.training_error, 0.0);
    assert!(sol.kkt.max_residual() <= 1e-8);
    assert_relative_eq!(sol.kkt.objective, 0.5, epsilon = 1e-10);

    let doubled = solve_primal(&two_points(), &MarginProblem::margin_adjust(vec![2.0, 2.0], Rho::Infinite)).unwrap();
    assert!((&doubled.predictor.w - w * 2.0).amax() < 1e-10);
}

#[test]
fn kernel_and_primal_scores_agree() {
    let inst = make_instance(3, 200, &[4, 9, 15], &[1.0, 1.5, 2.0], 11).unwrap();
    let ds = sample_train(&inst);
    let test = sample_test(&inst, 50, 3).unwrap();
    let problem = MarginProblem::margin_adjust(vec![1.4, 1.0, 0.7], Rho::Finite(1.0));
    let primal = solve_primal(&ds, &problem).unwrap();
    let kern = solve_kernel(&kernel_matrix(&ds), &ds.y, &problem).unwrap();
    let cross = ds.x.tr_mul(&test.x);
    let a = kernel_decision_scores(&kern.beta, &kern.b, &cross);
    let b = decision_scores(&primal.predictor, &test.x);
    assert!((a - &b).amax() <= 1e-6 * b.amax());
}

#[test]
fn separable_problems_fit_the_training_set() {
    for seed in 0..5 {
        let inst = make_instance(4, 500, &[3, 10, 20, 40], &[1.0; 4], seed).unwrap();
        let ds = sample_train(&inst);
        for problem in [
            MarginProblem::max_margin(4, Rho::Infinite),
            MarginProblem::max_margin(4, Rho::Finite(0.5)),
            MarginProblem::margin_adjust(vec![2.0, 1.5, 1.0, 0.5], Rho::Infinite),
        ] {
            let sol = solve_primal(&ds, &problem).unwrap();
            assert_eq!(sol.training_error, 0.0);
            assert!(sol.kkt.max_residual() <= 1e-8, "{:?}", sol.kkt);
            if let Rho::Finite(_) = problem.rho {
                assert!(sol.predictor.b.sum().abs() < 1e-8 * sol.predictor.b.amax().max(1e-8));
            }
        }
    }
}

#[test]
fn temperature_scaling_can_misclassify_training_points() {
    // three clusters in the plane at angles 0, 45 and 90 degrees, no bias
    let means = [[3.0, 0.0], [0.0, 3.0], [3.0, 3.0]];
    let sizes = [40, 40, 5];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cols = Vec::new();
    let mut y = Vec::new();
    for (k, mu) in means.iter().enumerate() {
        let q: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
        for _ in 0..sizes[k] {
            let z = [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)];
            cols.push(mu[0] + q[0] * z[0] + q[1] * z[1]);
            cols.push(mu[1] + q[2] * z[0] + q[3] * z[1]);
            y.push(k);
        }
    }
    let ds = Dataset::new(DMatrix::from_column_slice(2, cols.len() / 2, &cols), y, 3).unwrap();
    let mm = solve_primal(&ds, &MarginProblem::max_margin(3, Rho::Infinite)).unwrap();
    assert_eq!(mm.training_error, 0.0);
    let mut errors = vec![];
    for gamma in [0.5, 1.0, 2.0, 3.0] {
        let delta: Vec<f64> = sizes.iter().map(|&n| (n as f64).powf(-gamma)).collect();
        let sol = solve_primal(&ds, &MarginProblem::class_dep_temp(delta, Rho::Infinite)).unwrap();
        assert!(sol.kkt.max_residual() <= 1e-8);
        errors.push(sol.training_error);
    }
    assert!(errors.iter().any(|&e| e > 0.0), "{errors:?}");
}

#[test]
fn rejects_empty_and_infeasible_data() {
    let empty = Dataset::new(DMatrix::zeros(2, 0), vec![], 2).unwrap();
    assert!(matches!(solve_primal(&empty, &MarginProblem::max_margin(2, Rho::Infinite)), Err(Error::InvalidArgument(_))));
    let dup = Dataset::new(DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]), vec![0, 1], 2).unwrap();
    for rho in [Rho::Infinite, Rho::Finite(1.0), Rho::Finite(0.0)] {
        let r = solve_primal(&dup, &MarginProblem::max_margin(2, rho));
        assert!(matches!(r, Err(Error::Infeasible { .. })), "{rho}: {r:?}");
    }
    assert!(solve_primal(&two_points(), &MarginProblem::max_margin(3, Rho::Infinite)).is_err());
    assert!(solve_primal(&two_points(), &MarginProblem::margin_adjust(vec![1.0, 0.0], Rho::Infinite)).is_err());
    assert!(solve_primal(&two_points(), &MarginProblem::max_margin(2, Rho::Finite(-1.0))).is_err());
}

#[test]
fn solution_is_invariant_to_point_order() {
    let inst = make_instance(3, 100, &[3, 6, 9], &[1.0; 3], 2).unwrap();
    let ds = sample_train(&inst);
    let perm: Vec<usize> = (0..ds.len()).rev().collect();
    let shuffled = ds.subset(&perm);
    let problem = MarginProblem::margin_adjust(vec![1.5, 1.0, 0.5], Rho::Finite(2.0));
    let a = solve_primal(&ds, &problem).unwrap().predictor;
    let b = solve_primal(&shuffled, &problem).unwrap().predictor;
    assert!((&a.w - &b.w).amax() <= 1e-8 * a.w.amax());
    assert!((&a.b - &b.b).amax() <= 1e-8 * a.w.amax());
}

#[test]
fn free_bias_is_the_small_rho_limit() {
    let inst = make_instance(3, 100, &[3, 6, 12], &[1.0; 3], 5).unwrap();
    let ds = sample_train(&inst);
    let free = solve_primal(&ds, &MarginProblem::max_margin(3, Rho::Finite(0.0))).unwrap();
    assert!(free.kkt.max_residual() <= 1e-8);
    let small = solve_primal(&ds, &MarginProblem::max_margin(3, Rho::Finite(1e-5))).unwrap();
    let scale = free.predictor.w.amax();
    assert!((&free.predictor.w - &small.predictor.w).amax() <= 1e-3 * scale);
    assert!((&free.predictor.b - &small.predictor.b).amax() <= 1e-3 * free.predictor.b.amax().max(scale));
    // the free bias can only lower the objective
    let fixed = solve_primal(&ds, &MarginProblem::max_margin(3, Rho::Infinite)).unwrap();
    assert!(free.kkt.objective <= fixed.kkt.objective + 1e-12);
}

#[test]
fn class_averaged_coefficients_track_the_reduced_solution() {
    let inst = make_instance(3, 10_000, &[5, 20, 80], &[0.5, 0.8, 1.2], 4).unwrap();
    let ds = sample_train(&inst);
    for (problem, closed) in [
        (MarginProblem::max_margin(3, Rho::Infinite), mm_coefficients(&inst, Rho::Infinite).unwrap()),
        (
            MarginProblem::margin_adjust(vec![1.2, 1.0, 0.8], Rho::Finite(1.0)),
            ma_coefficients(&inst, &[1.2, 1.0, 0.8], Rho::Finite(1.0)).unwrap(),
        ),
    ] {
        let reduced = reduced_optimum(&inst, &closed).unwrap();
        let sol = solve_kernel(&kernel_matrix(&ds), &ds.y, &problem).unwrap();
        let counts = ds.class_counts();
        let mut avg = DMatrix::<f64>::zeros(3, 3);
        for (j, &label) in ds.y.iter().enumerate() {
            for y in 0..3 {
                avg[(y, label)] += sol.beta[(j, y)] / counts[label] as f64;
            }
        }
        let gap = (&avg - &reduced.alpha).amax() / reduced.alpha.amax();
        assert!(gap < 0.1, "{gap}");
        let bgap = (&sol.b - &reduced.b).amax();
        assert!(bgap <= 0.1 * reduced.b.amax().max(1e-12) + 1e-12, "{bgap}");
    }
}

#[test]
fn scores_from_kernel_form() {
    let beta = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 0.0]);
    let b = DVector::from_vec(vec![0.0, 1.0]);
    let cross = DMatrix::from_row_slice(2, 1, &[2.0, 4.0]);
    let s = kernel_decision_scores(&beta, &b, &cross);
    assert_eq!(s, DMatrix::from_row_slice(1, 2, &[4.0, -1.0]));
}
