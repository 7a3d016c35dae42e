mod common;

use imbalance_lab::evaluation::{evaluate, evaluate_scores};
use imbalance_lab::margin::{solve_kernel, solve_primal, MarginProblem};
use imbalance_lab::model::*;
use imbalance_lab::sampler::sample_gram;

#[test]
fn needs_enough_dimensions() {
    let inst = make_instance(3, 10, &[3, 3, 2], &[1.0; 3], 0).unwrap();
    assert!(sample_gram(&inst).is_err());
    let ok = make_instance(3, 11, &[3, 3, 2], &[1.0; 3], 0).unwrap();
    assert_eq!(sample_gram(&ok).unwrap().len(), 8);
}

#[test]
fn deterministic_per_seed() {
    let inst = make_instance(2, 1_000, &[3, 7], &[1.0; 2], 5).unwrap();
    let a = sample_gram(&inst).unwrap();
    let b = sample_gram(&inst).unwrap();
    assert_eq!(a.kernel(), b.kernel());
    assert_eq!(a.labels, vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1]);
    let other = sample_gram(&ProblemInstance { seed: 6, ..inst }).unwrap();
    assert_ne!(a.kernel(), other.kernel());
}

#[test]
fn kernel_has_the_expected_mean() {
    let inst = make_instance(2, 500, &[2, 3], &[2.0, 0.5], 0).unwrap();
    let want = expected_kernel(&inst);
    let runs = 4_000;
    let mut sum = nalgebra::DMatrix::zeros(5, 5);
    let mut sq = nalgebra::DMatrix::zeros(5, 5);
    for seed in 0..runs {
        let k = sample_gram(&ProblemInstance { seed, ..inst.clone() }).unwrap().kernel();
        sq += k.component_mul(&k);
        sum += k;
    }
    let mean = &sum / runs as f64;
    for i in 0..5 {
        for j in 0..5 {
            let var = sq[(i, j)] / runs as f64 - mean[(i, j)].powi(2);
            let se = (var / runs as f64).sqrt();
            assert!((mean[(i, j)] - want[(i, j)]).abs() <= 4.0 * se, "({i},{j}): {} vs {}", mean[(i, j)], want[(i, j)]);
        }
    }
}

#[test]
fn test_errors_match_materialised_data() {
    let n = [4, 15, 40];
    let problem = MarginProblem::max_margin(3, Rho::Infinite);
    let (mut gram, mut data) = (vec![], vec![]);
    for seed in 0..40 {
        let inst = make_instance(3, 1_500, &n, &[1.0, 1.0, 1.0], seed).unwrap();
        let g = sample_gram(&inst).unwrap();
        let sol = solve_kernel(&g.kernel(), &g.labels, &problem).unwrap();
        let (scores, labels) = g.test_scores(&[(&sol.beta, &sol.b)], 200, seed + 1000).unwrap();
        gram.push(evaluate_scores(&scores[0], &labels, 3).unwrap().balanced_error);

        let ds = sample_train(&inst);
        let p = solve_primal(&ds, &problem).unwrap().predictor;
        data.push(evaluate(&p, &sample_test(&inst, 200, seed + 1000).unwrap()).unwrap().balanced_error);
    }
    let (mg, sg) = common::mean_std(&gram);
    let (md, sd) = common::mean_std(&data);
    let se = ((sg * sg + sd * sd) / 40.0).sqrt();
    assert!((mg - md).abs() <= 4.0 * se, "{mg} vs {md} (se {se})");
}

#[test]
fn rejects_mismatched_predictors() {
    let inst = make_instance(2, 100, &[3, 4], &[1.0; 2], 0).unwrap();
    let g = sample_gram(&inst).unwrap();
    let beta = nalgebra::DMatrix::zeros(6, 2);
    let b = nalgebra::DVector::zeros(2);
    assert!(g.test_scores(&[(&beta, &b)], 10, 0).is_err());
    let beta = nalgebra::DMatrix::zeros(7, 2);
    assert!(g.test_scores(&[(&beta, &b)], 0, 0).is_err());
    let (s, labels) = g.test_scores(&[(&beta, &b), (&beta, &b)], 10, 0).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].shape(), (20, 2));
    assert_eq!(labels.len(), 20);
}
