//! RBF-kernel classification on feature files and the distance-from-theory diagnostic.

use crate::error::{invalid, Result};
use crate::evaluation::{evaluate_scores, ErrorReport};
use crate::margin::{kernel_decision_scores, solve_kernel, MarginProblem};
use crate::model::Dataset;
use crate::rng;
use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use std::path::Path;

/// Bandwidths used when a run does not specify its own.
pub const DEFAULT_ZETAS: [f64; 4] = [5.0, 6.0, 7.0, 8.0];

/// Reads a feature CSV (`label,x1,...,xd`, labels 1..=c).
pub fn load_features(path: impl AsRef<Path>, classes: Option<usize>) -> Result<Dataset> {
    Dataset::load_csv(path, classes)
}

/// Rescales every feature vector to unit Euclidean norm; zero vectors stay zero.
pub fn normalize_features(ds: &Dataset) -> Dataset {
    let mut x = ds.x.clone();
    for mut col in x.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    Dataset { x, y: ds.y.clone(), c: ds.c }
}

/// Draws `n[i]` points of class i without replacement. Indices keep file order.
pub fn subsample_profile(ds: &Dataset, n: &[usize], seed: u64) -> Result<Dataset> {
    if n.len() != ds.c {
        return invalid(format!("profile has {} entries for {} classes", n.len(), ds.c));
    }
    let by_class = ds.class_indices();
    let mut rows = Vec::with_capacity(n.iter().sum());
    for (y, (&want, idx)) in n.iter().zip(&by_class).enumerate() {
        if want > idx.len() {
            return invalid(format!("class {} has {} points, profile asks for {want}", y + 1, idx.len()));
        }
        let mut r = rng::stream(seed, rng::SUBSAMPLE | y as u64);
        let mut chosen: Vec<usize> = index::sample(&mut r, idx.len(), want).into_iter().map(|j| idx[j]).collect();
        chosen.sort_unstable();
        rows.extend(chosen);
    }
    rows.sort_unstable();
    Ok(ds.subset(&rows))
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return invalid("RBF bandwidth must be positive and finite");
    }
    Ok(())
}

/// exp(−‖a_i − b_j‖² / (2ζ²)) for columns a_i of `a` and b_j of `b`; result is
/// a.ncols() × b.ncols().
fn rbf_block(a: &DMatrix<f64>, b: &DMatrix<f64>, zeta: f64) -> DMatrix<f64> {
    let scale = -1.0 / (2.0 * zeta * zeta);
    let cols: Vec<Vec<f64>> = (0..b.ncols())
        .into_par_iter()
        .map(|j| {
            let bj = b.column(j);
            a.column_iter().map(|ai| ((ai - bj).norm_squared() * scale).exp()).collect()
        })
        .collect();
    DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| cols[j][i])
}

/// Gram matrix of the RBF kernel on the columns of `x` (d×N).
pub fn rbf_kernel(x: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    check_zeta(zeta)?;
    Ok(rbf_block(x, x, zeta))
}

/// Train-by-test kernel block, N_train × M.
pub fn rbf_cross(x_train: &DMatrix<f64>, x_test: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    check_zeta(zeta)?;
    if x_train.nrows() != x_test.nrows() {
        return invalid(format!("feature dimensions differ: {} vs {}", x_train.nrows(), x_test.nrows()));
    }
    Ok(rbf_block(x_train, x_test, zeta))
}

/// Least-squares fit K ≈ α₁B + α₂I with B_ij = 1{y_i = y_j}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryFit {
    pub alpha_block: f64,
    pub alpha_identity: f64,
    /// ‖K − α₁B − α₂I‖_F
    pub residual: f64,
}

pub fn fit_block_identity(k: &DMatrix<f64>, labels: &[usize]) -> Result<TheoryFit> {
    let n = labels.len();
    if k.nrows() != n || k.ncols() != n {
        return invalid(format!("kernel is {}x{} but there are {n} labels", k.nrows(), k.ncols()));
    }
    if n == 0 {
        return invalid("empty kernel");
    }
    let same = |i: usize, j: usize| labels[i] == labels[j];
    let mut kb = 0.0;
    let mut bb = 0.0;
    for i in 0..n {
        for j in 0..n {
            if same(i, j) {
                kb += k[(i, j)];
                bb += 1.0;
            }
        }
    }
    let tr = k.trace();
    let nf = n as f64;
    // Normal equations with Gram [[⟨B,B⟩, N], [N, N]]; singular iff B = I.
    let det = bb * nf - nf * nf;
    let (a1, a2) = if det <= 1e-12 * bb * nf {
        (0.0, tr / nf)
    } else {
        ((nf * kb - nf * tr) / det, (bb * tr - nf * kb) / det)
    };
    let mut res = 0.0;
    for i in 0..n {
        for j in 0..n {
            let fit = if same(i, j) { a1 } else { 0.0 } + if i == j { a2 } else { 0.0 };
            res += (k[(i, j)] - fit).powi(2);
        }
    }
    Ok(TheoryFit { alpha_block: a1, alpha_identity: a2, residual: res.sqrt() })
}

/// min over α₁, α₂ of ‖K − α₁B − α₂I‖_F.
pub fn distance_from_theory(k: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    Ok(fit_block_identity(k, labels)?.residual)
}

#[derive(Clone, Debug)]
pub struct KernelRun {
    pub report: ErrorReport,
    pub training_error: f64,
    pub distance_from_theory: f64,
}

/// RBF kernel + exact margin solve + test evaluation.
pub fn kernel_classify(train: &Dataset, test: &Dataset, zeta: f64, problem: &MarginProblem) -> Result<KernelRun> {
    if train.c != test.c || train.c != problem.classes() {
        return invalid("train, test and problem disagree on the number of classes");
    }
    let k = rbf_kernel(&train.x, zeta)?;
    let sol = solve_kernel(&k, &train.y, problem)?;
    let train_scores = kernel_decision_scores(&sol.beta, &sol.b, &k);
    let training_error = evaluate_scores(&train_scores, &train.y, train.c)?.overall_error();
    let cross = rbf_cross(&train.x, &test.x, zeta)?;
    let scores = kernel_decision_scores(&sol.beta, &sol.b, &cross);
    let report = evaluate_scores(&scores, &test.y, test.c)?;
    let distance_from_theory = distance_from_theory(&k, &train.y)?;
    Ok(KernelRun { report, training_error, distance_from_theory })
}
