use approx::assert_relative_eq;
use imbalance_lab::evaluation::*;
use imbalance_lab::model::*;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_hot(labels: &[usize], c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), c, |i, k| if labels[i] == k { 1.0 } else { 0.0 })
}

#[test]
fn perfect_scores() {
    let labels = vec![0, 1, 2, 2, 1, 0];
    let r = evaluate_scores(&one_hot(&labels, 3), &labels, 3).unwrap();
    assert_eq!(r.per_class_error, vec![0.0; 3]);
    assert_eq!(r.worst_class_error, 0.0);
    assert_eq!(r.balanced_error, 0.0);
    assert_eq!(r.macro_f1, 1.0);
    assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
    assert_eq!(r.max_pairwise(), 0.0);
}

#[test]
fn constant_predictor() {
    let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
    let scores = DMatrix::from_fn(100, 2, |_, k| if k == 0 { 1.0 } else { 0.0 });
    let r = evaluate_scores(&scores, &labels, 2).unwrap();
    assert_eq!(r.per_class_error, vec![0.0, 1.0]);
    assert_eq!(r.worst_class_error, 1.0);
    assert_eq!(r.balanced_error, 0.5);
    assert_relative_eq!(r.macro_f1, 1.0 / 3.0, max_relative = 1e-15);
    assert_eq!(r.overall_error(), 0.5);
}

#[test]
fn all_ties_go_to_the_first_class() {
    let labels = vec![0, 1, 2];
    let r = evaluate_scores(&DMatrix::zeros(3, 3), &labels, 3).unwrap();
    assert_eq!(r.per_class_error, vec![0.0, 1.0, 1.0]);
    assert_eq!(r.pairwise[1], vec![1.0, 0.0, 0.0]);
    assert_eq!(r.pairwise[2], vec![1.0, 1.0, 0.0]);
    assert!(sandwich_check(&r).holds());
}

#[test]
fn binary_class_error_is_the_pairwise_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels: Vec<usize> = (0..500).map(|_| rng.random_range(0..2)).collect();
    let scores = DMatrix::from_fn(500, 2, |_, _| rng.random::<f64>());
    let r = evaluate_scores(&scores, &labels, 2).unwrap();
    assert_relative_eq!(r.per_class_error[0], r.pairwise[0][1], max_relative = 1e-15);
    assert_relative_eq!(r.per_class_error[1], r.pairwise[1][0], max_relative = 1e-15);
    assert_relative_eq!(r.worst_class_error, r.max_pairwise(), max_relative = 1e-15);
}

#[test]
fn relabeling_classes_permutes_the_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = 4;
    let labels: Vec<usize> = (0..400).map(|_| rng.random_range(0..c)).collect();
    let scores = DMatrix::from_fn(400, c, |_, _| rng.random::<f64>());
    let perm = [2, 0, 3, 1];
    let labels2: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
    let scores2 = DMatrix::from_fn(400, c, |i, k| scores[(i, perm.iter().position(|&p| p == k).unwrap())]);
    let a = evaluate_scores(&scores, &labels, c).unwrap();
    let b = evaluate_scores(&scores2, &labels2, c).unwrap();
    for y in 0..c {
        assert_eq!(a.per_class_error[y], b.per_class_error[perm[y]]);
        for k in 0..c {
            assert_eq!(a.confusion[y][k], b.confusion[perm[y]][perm[k]]);
            assert_eq!(a.pairwise[y][k], b.pairwise[perm[y]][perm[k]]);
        }
    }
    assert_relative_eq!(a.balanced_error, b.balanced_error, max_relative = 1e-14);
    assert_relative_eq!(a.macro_f1, b.macro_f1, max_relative = 1e-14);
}

#[test]
fn confusion_csv() {
    let labels = vec![0, 1, 1];
    let scores = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let r = evaluate_scores(&scores, &labels, 2).unwrap();
    let mut buf = Vec::new();
    r.write_confusion_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "label,pred_1,pred_2\n1,1,0\n2,1,1\n");
}

#[test]
fn predictor_level_helpers() {
    let test = Dataset::new(DMatrix::from_row_slice(1, 4, &[1.0, 2.0, -1.0, 0.5]), vec![0, 0, 1, 1], 2).unwrap();
    let p = Predictor { w: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), b: DVector::zeros(2), beta: None };
    let r = evaluate(&p, &test).unwrap();
    assert_eq!(r.per_class_error, vec![0.0, 0.5]);
    assert_eq!(pairwise_empirical(&p, &test, 1, 0).unwrap(), 0.5);
    assert_eq!(pairwise_empirical(&p, &test, 0, 1).unwrap(), 0.0);
    assert_eq!(pairwise_empirical(&p, &test, 0, 0).unwrap(), 0.0);
    assert!(pairwise_empirical(&p, &test, 0, 2).is_err());
    let wrong = Predictor::zeros(3, 2);
    assert!(evaluate(&wrong, &test).is_err());
}

#[test]
fn rejects_malformed_inputs() {
    assert!(evaluate_scores(&DMatrix::zeros(0, 2), &[], 2).is_err());
    assert!(evaluate_scores(&DMatrix::zeros(2, 2), &[0], 2).is_err());
    assert!(evaluate_scores(&DMatrix::zeros(1, 2), &[2], 2).is_err());
}

#[test]
fn missing_classes_are_left_out_of_averages() {
    let labels = vec![0, 0, 2];
    let scores = one_hot(&labels, 3);
    let r = evaluate_scores(&scores, &labels, 3).unwrap();
    assert_eq!(r.per_class_error[1], 0.0);
    assert_eq!(r.macro_f1, 1.0);
    assert_eq!(r.balanced_error, 0.0);
}

#[test]
fn random_linear_predictors_satisfy_the_metric_identities() {
    let inst = make_instance(4, 20, &[1, 1, 1, 1], &[1.0, 2.0, 0.5, 1.5], 3).unwrap();
    let test = sample_test(&inst, 100, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let p = Predictor {
            w: DMatrix::from_fn(20, 4, |_, _| rng.random_range(-1.0..1.0)),
            b: DVector::from_fn(4, |_, _| rng.random_range(-0.3..0.3)),
            beta: None,
        };
        let r = evaluate(&p, &test).unwrap();
        assert!(sandwich_check(&r).holds());
        assert_eq!(r.worst_class_error, r.per_class_error.iter().cloned().fold(0.0, f64::max));
        assert_relative_eq!(r.balanced_error, r.per_class_error.iter().sum::<f64>() / 4.0, max_relative = 1e-14);
        assert!((0.0..=1.0).contains(&r.macro_f1));
        assert!(r.confusion.iter().all(|row| row.iter().sum::<usize>() == 100));
        for y in 0..4 {
            for k in 0..4 {
                assert_eq!(r.pairwise[y][k], pairwise_empirical(&p, &test, y, k).unwrap());
            }
        }
    }
}
