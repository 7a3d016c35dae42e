use approx::assert_relative_eq;
use imbalance_lab::kernel_lab::*;
use imbalance_lab::margin::MarginProblem;
use imbalance_lab::model::*;
use nalgebra::{DMatrix, SymmetricEigen};
use std::io::Write;

fn block(labels: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), labels.len(), |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 })
}

fn residual(k: &DMatrix<f64>, labels: &[usize], a1: f64, a2: f64) -> f64 {
    let n = labels.len();
    (k - block(labels) * a1 - DMatrix::identity(n, n) * a2).norm()
}

/// Coordinate-refined grid search over (α₁, α₂).
fn grid_minimum(k: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let (mut c1, mut c2, mut width) = (0.0, 0.0, 4.0);
    let mut best = residual(k, labels, c1, c2);
    for _ in 0..200 {
        let (mut b1, mut b2) = (c1, c2);
        for i in -10..=10 {
            for j in -10..=10 {
                let (a1, a2) = (c1 + width * i as f64 / 10.0, c2 + width * j as f64 / 10.0);
                let r = residual(k, labels, a1, a2);
                if r < best {
                    best = r;
                    b1 = a1;
                    b2 = a2;
                }
            }
        }
        c1 = b1;
        c2 = b2;
        width *= 0.5;
    }
    best
}

fn synthetic(n: &[usize], seed: u64) -> Dataset {
    normalize_features(&sample_train(&make_instance(n.len(), 60, n, &vec![20.0; n.len()], seed).unwrap()))
}

#[test]
fn rbf_basic_values() {
    let x = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 1.0, 1.0, 7.0, -3.0]);
    let k = rbf_kernel(&x, 2.0).unwrap();
    for i in 0..3 {
        assert_eq!(k[(i, i)], 1.0);
    }
    assert_eq!(k, k.transpose());
    // distance sqrt(2) = zeta * sqrt(2) with zeta = 1
    let e = rbf_kernel(&x, 1.0).unwrap();
    assert_relative_eq!(e[(0, 1)], (-1.0f64).exp(), max_relative = 1e-15);
    let wide = rbf_kernel(&x, 1e9).unwrap();
    assert!(wide.iter().all(|v| (v - 1.0).abs() < 1e-15));
    assert!(rbf_kernel(&x, 0.0).is_err());
    assert!(rbf_cross(&x, &DMatrix::zeros(3, 1), 1.0).is_err());
    let cross = rbf_cross(&x, &x.columns(1, 2).into_owned(), 1.0).unwrap();
    assert_eq!(cross.shape(), (3, 2));
    assert_relative_eq!(cross[(0, 0)], e[(0, 1)]);
}

#[test]
fn rbf_is_positive_semidefinite() {
    let ds = synthetic(&[10, 20, 30], 1);
    for zeta in [0.1, 1.0, 5.0] {
        let k = rbf_kernel(&ds.x, zeta).unwrap();
        let min = SymmetricEigen::new(k).eigenvalues.min();
        assert!(min >= -1e-8 * 60.0, "{zeta}: {min}");
    }
}

#[test]
fn block_plus_identity_has_zero_distance() {
    let labels = vec![0, 0, 1, 2, 2, 2];
    let k = block(&labels) * 3.0 + DMatrix::identity(6, 6) * 2.0;
    assert!(distance_from_theory(&k, &labels).unwrap() < 1e-12);
    let fit = fit_block_identity(&k, &labels).unwrap();
    assert_relative_eq!(fit.alpha_block, 3.0, max_relative = 1e-12);
    assert_relative_eq!(fit.alpha_identity, 2.0, max_relative = 1e-12);

    // with singleton classes B = I and any multiple of I is fit exactly
    let singles = vec![0, 1, 2];
    assert!(distance_from_theory(&(DMatrix::identity(3, 3) * 4.0), &singles).unwrap() < 1e-12);
    // cross-class entries cannot be fit: all ones leaves the 8 of them
    let d = distance_from_theory(&DMatrix::from_element(4, 4, 1.0), &[0, 0, 1, 1]).unwrap();
    assert_relative_eq!(d, 8f64.sqrt(), max_relative = 1e-12);
    assert!(distance_from_theory(&DMatrix::identity(3, 3), &[0, 1]).is_err());
}

#[test]
fn closed_form_fit_matches_a_grid_search() {
    for seed in 0..3 {
        let ds = synthetic(&[4, 7, 9], seed);
        let k = rbf_kernel(&ds.x, 0.8).unwrap();
        let closed = distance_from_theory(&k, &ds.y).unwrap();
        let grid = grid_minimum(&k, &ds.y);
        assert!((closed - grid).abs() <= 1e-6, "{closed} vs {grid}");
    }
}

#[test]
fn kernel_moves_toward_diagonal_as_bandwidth_shrinks() {
    let ds = synthetic(&[15, 30, 45], 7);
    let dist: Vec<f64> = [0.2, 0.4, 0.8, 1.6]
        .iter()
        .map(|&z| distance_from_theory(&rbf_kernel(&ds.x, z).unwrap(), &ds.y).unwrap())
        .collect();
    assert!(dist.windows(2).all(|w| w[0] < w[1]), "{dist:?}");
}

#[test]
fn feature_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    std::fs::write(&good, "label,f0,f1\n1,3.0,4.0\n2,0.0,2.0\n1,0.0,0.0\n").unwrap();
    let ds = load_features(&good, None).unwrap();
    assert_eq!(ds.c, 2);
    assert_eq!(ds.y, vec![0, 1, 0]);
    let unit = normalize_features(&ds);
    assert_relative_eq!(unit.x[(0, 0)], 0.6);
    assert_relative_eq!(unit.x.column(1).norm(), 1.0);
    assert_eq!(unit.x.column(2).norm(), 0.0);

    for (name, body) in [
        ("ragged.csv", "label,f0,f1\n1,1.0,2.0\n2,1.0\n"),
        ("text.csv", "label,f0\n1,x\n"),
        ("zero.csv", "label,f0\n0,1.0\n"),
    ] {
        let p = dir.path().join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        assert!(load_features(&p, None).is_err(), "{name}");
    }
    assert!(load_features(&good, Some(1)).is_err());
    assert!(load_features(dir.path().join("missing.csv"), None).is_err());
}

#[test]
fn subsampling_is_deterministic() {
    let ds = synthetic(&[20, 20, 20], 3);
    let a = subsample_profile(&ds, &[2, 5, 20], 11).unwrap();
    assert_eq!(a.class_counts(), vec![2, 5, 20]);
    assert_eq!(a, subsample_profile(&ds, &[2, 5, 20], 11).unwrap());
    assert_ne!(a, subsample_profile(&ds, &[2, 5, 20], 12).unwrap());
    assert!(subsample_profile(&ds, &[21, 1, 1], 0).is_err());
    assert!(subsample_profile(&ds, &[1, 1], 0).is_err());
}

#[test]
fn classify_separable_clusters() {
    let train = synthetic(&[5, 20, 40], 0);
    let test = normalize_features(&sample_test(&make_instance(3, 60, &[5, 20, 40], &[20.0; 3], 0).unwrap(), 50, 1).unwrap());
    let run = kernel_classify(&train, &test, DEFAULT_ZETAS[0], &MarginProblem::max_margin(3, Rho::Infinite)).unwrap();
    assert_eq!(run.training_error, 0.0);
    assert!(run.report.worst_class_error < 0.2, "{:?}", run.report.per_class_error);
    assert!(run.distance_from_theory > 0.0);
}
