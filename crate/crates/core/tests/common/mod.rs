//! Helpers shared by the integration tests: an independent reduced-QP solver
//! and a few small statistics utilities.

#![allow(dead_code)]

use imbalance_lab::model::{ProblemInstance, Rho};
use nalgebra::{DMatrix, DVector};

/// min ½ zᵀ diag(h) z subject to A z ≥ r, by Hildreth's dual coordinate
/// ascent followed by an exact solve on the detected active set.
pub fn hildreth(h: &[f64], a: &DMatrix<f64>, r: &[f64]) -> DVector<f64> {
    let m = a.nrows();
    let n = a.ncols();
    let hinv: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
    let norms: Vec<f64> = (0..m).map(|j| (0..n).map(|t| a[(j, t)].powi(2) * hinv[t]).sum()).collect();
    let mut u = vec![0.0; m];
    let mut z = DVector::zeros(n);
    for _sweep in 0..200_000 {
        let mut change: f64 = 0.0;
        for j in 0..m {
            let az: f64 = (0..n).map(|t| a[(j, t)] * z[t]).sum();
            let next = (u[j] + (r[j] - az) / norms[j]).max(0.0);
            let step = next - u[j];
            if step != 0.0 {
                for t in 0..n {
                    z[t] += step * a[(j, t)] * hinv[t];
                }
                u[j] = next;
                change = change.max(step.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    // polish: solve A_S H⁻¹ A_Sᵀ u_S = r_S on the support
    let umax = u.iter().cloned().fold(0.0_f64, f64::max);
    let active: Vec<usize> = (0..m).filter(|&j| u[j] > 1e-9 * umax).collect();
    if active.is_empty() {
        return z;
    }
    let g = DMatrix::from_fn(active.len(), active.len(), |p, q| {
        (0..n).map(|t| a[(active[p], t)] * a[(active[q], t)] * hinv[t]).sum()
    });
    let rhs = DVector::from_fn(active.len(), |p, _| r[active[p]]);
    let Some(us) = g.clone().lu().solve(&rhs) else { return z };
    let polished = DVector::from_fn(n, |t, _| hinv[t] * (0..active.len()).map(|p| us[p] * a[(active[p], t)]).sum::<f64>());
    let feasible = (0..m).all(|j| (0..n).map(|t| a[(j, t)] * polished[t]).sum::<f64>() >= r[j] - 1e-10 * r[j].abs().max(1.0));
    if us.iter().all(|&v| v >= -1e-12 * umax) && feasible {
        polished
    } else {
        z
    }
}

/// Reduced problem under the expected kernel, solved in the primal.
///
/// Class i is a single super-point √ξ_i e_i ∈ R^c. Classifier y has weights
/// v_y ∈ R^c, and α_{y,i} = v_y[i] / (√ξ_i N_i). Returns (α, b).
pub fn reduced_oracle(inst: &ProblemInstance, delta: &[f64], rho: Rho, cdt: bool) -> (DMatrix<f64>, DVector<f64>) {
    let c = inst.c;
    let xi = inst.xis();
    let nf = inst.n_f64();
    let with_bias = !cdt && !rho.is_infinite();
    let nv = c * c + if with_bias { c } else { 0 };
    let var = |y: usize, i: usize| y * c + i;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..c {
        for k in 0..c {
            if k == i {
                continue;
            }
            let mut row = vec![0.0; nv];
            let sx = xi[i].sqrt();
            if cdt {
                row[var(i, i)] = sx / delta[i];
                row[var(k, i)] = -sx / delta[k];
                rhs.push(1.0);
            } else {
                row[var(i, i)] = sx;
                row[var(k, i)] = -sx;
                if with_bias {
                    row[c * c + i] = 1.0;
                    row[c * c + k] = -1.0;
                }
                rhs.push(delta[i]);
            }
            rows.push(row);
        }
    }
    let a = DMatrix::from_fn(rows.len(), nv, |j, t| rows[j][t]);
    let mut h = vec![1.0; nv];
    if let Rho::Finite(r) = rho {
        for v in h.iter_mut().skip(c * c) {
            *v = r;
        }
    }
    let z = hildreth(&h, &a, &rhs);
    let alpha = DMatrix::from_fn(c, c, |y, i| z[var(y, i)] / (xi[i].sqrt() * nf[i]));
    let b = if with_bias { DVector::from_fn(c, |t, _| z[c * c + t]) } else { DVector::zeros(c) };
    (alpha, b)
}

/// Largest coordinatewise gap between two coefficient sets, relative to the
/// largest oracle coefficient.
pub fn coefficient_gap(a1: &DMatrix<f64>, b1: &DVector<f64>, a2: &DMatrix<f64>, b2: &DVector<f64>) -> f64 {
    let scale = a2.amax().max(b2.amax()).max(f64::MIN_POSITIVE);
    (a1 - a2).amax().max((b1 - b2).amax()) / scale
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
