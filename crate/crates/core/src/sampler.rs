//! Dimension-free sampling for kernel-form predictors.
//!
//! With the means in the first c coordinates, a training matrix splits into
//! a c×N signal block and a (d−c)×N pure-noise block. Kernel solvers only see
//! the noise block through its Gram matrix, which is Wishart and can be drawn
//! with the Bartlett decomposition. Scores of fresh test points are Gaussian
//! given the training draw. Both steps are exact in distribution, so results
//! match `sample_train` + `sample_test` statistically at O(N³) cost for any d.
//! The rotation-invariance of the noise makes the mean frame irrelevant.

use crate::error::{invalid, Result};
use crate::model::ProblemInstance;
use crate::rng;
use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

const STREAM_SIGNAL: u64 = 6 << 32;
const STREAM_WISHART: u64 = 7 << 32;
const STREAM_TEST: u64 = 8 << 32;

#[derive(Clone, Debug)]
pub struct GramSample {
    /// First c coordinates of every training point, c×N, grouped by class.
    pub signal: DMatrix<f64>,
    /// Lower-triangular F with F Fᵀ the Gram matrix of the noise block.
    pub noise_factor: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub c: usize,
    sigma: f64,
    mean_norms: Vec<f64>,
}

/// Draws the sufficient statistics of a training set of `inst`. Needs d ≥ N + c.
pub fn sample_gram(inst: &ProblemInstance) -> Result<GramSample> {
    inst.validate()?;
    let n = inst.total();
    let c = inst.c;
    if inst.d < n + c {
        return invalid(format!("gram sampler needs d >= N + c (d = {}, N + c = {})", inst.d, n + c));
    }
    let sigma = inst.sigma2().sqrt();
    let mean_norms: Vec<f64> = (0..c).map(|k| inst.mean_norm_sq(k).sqrt()).collect();
    let mut labels = Vec::with_capacity(n);
    for (k, &nk) in inst.n.iter().enumerate() {
        labels.extend(std::iter::repeat_n(k, nk));
    }
    let mut r = rng::stream(inst.seed, STREAM_SIGNAL);
    let signal = DMatrix::from_fn(c, n, |j, i| {
        let z: f64 = StandardNormal.sample(&mut r);
        sigma * z + if j == labels[i] { mean_norms[j] } else { 0.0 }
    });
    // Bartlett: L_ii² ~ χ²(m − i), L_ij ~ N(0, 1) below the diagonal.
    let m = (inst.d - c) as f64;
    let mut r = rng::stream(inst.seed, STREAM_WISHART);
    let mut f = DMatrix::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new(m - i as f64).expect("degrees of freedom are positive");
        f[(i, i)] = sigma * chi.sample(&mut r).sqrt();
        for j in 0..i {
            let z: f64 = StandardNormal.sample(&mut r);
            f[(i, j)] = sigma * z;
        }
    }
    Ok(GramSample { signal, noise_factor: f, labels, c, sigma, mean_norms })
}

impl GramSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Linear-kernel Gram matrix of the training set.
    pub fn kernel(&self) -> DMatrix<f64> {
        let k = self.signal.tr_mul(&self.signal) + &self.noise_factor * self.noise_factor.transpose();
        (&k + k.transpose()) * 0.5
    }

    /// Scores of a balanced test set (`per_class` points per class) for several
    /// kernel predictors (β: N×c, b) evaluated on the same test draw. Returns
    /// one M×c score matrix per predictor plus the test labels.
    pub fn test_scores(
        &self,
        predictors: &[(&DMatrix<f64>, &DVector<f64>)],
        per_class: usize,
        seed: u64,
    ) -> Result<(Vec<DMatrix<f64>>, Vec<usize>)> {
        if per_class == 0 {
            return invalid("per_class must be at least 1");
        }
        let n = self.len();
        let c = self.c;
        for (beta, b) in predictors {
            if beta.nrows() != n || beta.ncols() != c || b.len() != c {
                return invalid("predictor shape does not match the gram sample");
            }
        }
        // Per predictor: W_c = X_c β (c×c) and B = σ Fᵀβ (N×c).
        let wc: Vec<DMatrix<f64>> = predictors.iter().map(|(beta, _)| &self.signal * *beta).collect();
        let bn: Vec<DMatrix<f64>> = predictors.iter().map(|(beta, _)| self.noise_factor.tr_mul(beta) * self.sigma).collect();
        let total = per_class * c;
        let mut out: Vec<DMatrix<f64>> = predictors.iter().map(|_| DMatrix::zeros(total, c)).collect();
        let mut labels = Vec::with_capacity(total);
        let mut xc = DVector::zeros(c);
        let mut z = DVector::zeros(n);
        let mut row = 0;
        for k in 0..c {
            let mut r = rng::stream(seed, STREAM_TEST | k as u64);
            for _ in 0..per_class {
                for j in 0..c {
                    let g: f64 = StandardNormal.sample(&mut r);
                    xc[j] = self.sigma * g + if j == k { self.mean_norms[k] } else { 0.0 };
                }
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut r);
                }
                for (p, (_, b)) in predictors.iter().enumerate() {
                    let s = wc[p].tr_mul(&xc) + bn[p].tr_mul(&z) + *b;
                    out[p].row_mut(row).copy_from(&s.transpose());
                }
                labels.push(k);
                row += 1;
            }
        }
        Ok((out, labels))
    }
}
