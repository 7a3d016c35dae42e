//! Multivariate normal sampling for orthant-style probabilities.

use crate::error::{Error, Result};
use crate::rng;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Factor Σ = F Fᵀ through a symmetric eigendecomposition. Eigenvalues in
/// [−1e-10·tr Σ, 0) are clamped to zero; anything more negative is an error.
pub fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("covariance has non-finite entries".into()));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let trace = sym.trace().abs();
    let eig = SymmetricEigen::new(sym);
    let tol = 1e-10 * trace;
    let mut f = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol {
            return Err(Error::Numerical(format!(
                "covariance is not PSD: eigenvalue {lambda:e} below -1e-10 * trace"
            )));
        }
        let root = lambda.max(0.0).sqrt();
        f.column_mut(j).scale_mut(root);
    }
    Ok(f)
}

/// Fraction of draws from N(ν, Σ) with at least one negative coordinate.
///
/// Draws are split into fixed chunks, each with its own stream, so the
/// result does not depend on the thread count.
pub fn prob_any_negative(nu: &DVector<f64>, sigma: &DMatrix<f64>, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one Monte-Carlo sample".into()));
    }
    let n = nu.len();
    if n == 0 {
        return Ok(0.0);
    }
    let f = psd_factor(sigma)?;
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut r = rng::stream(seed, rng::MONTE_CARLO | ci as u64);
            let count = CHUNK.min(samples - ci * CHUNK);
            let mut g = DVector::zeros(n);
            let mut hits = 0;
            for _ in 0..count {
                for v in g.iter_mut() {
                    *v = StandardNormal.sample(&mut r);
                }
                let z = nu + &f * &g;
                if z.iter().any(|&v| v < 0.0) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(hits as f64 / samples as f64)
}
