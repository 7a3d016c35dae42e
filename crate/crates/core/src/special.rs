//! Gaussian tail function and its inverse.

use crate::error::{invalid, Error, Result};
use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Q(t) = P(Z > t) for a standard normal Z.
///
/// Infinite arguments map to 0 or 1.
pub fn q_function(t: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * erfc(t * FRAC_1_SQRT_2)
}

fn phi(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_function`] on the open interval (0, 1).
///
/// Starts from the tail asymptote sqrt(-2 ln p) and polishes with Newton steps on log Q,
/// falling back to bisection whenever a step leaves the bracket.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("q_inverse needs p in (0,1), got {p}"));
    }
    // work on the upper tail for accuracy, reflect at the end
    let (target, sign) = if p <= 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    if target == 0.5 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = 40.0_f64;
    let mut t = (-2.0 * target.ln()).sqrt() - 0.5;
    if !t.is_finite() || t <= lo || t >= hi {
        t = 0.5 * (lo + hi);
    }
    let log_target = target.ln();
    for _ in 0..200 {
        let q = q_function(t);
        let g = q.ln() - log_target;
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // d/dt log Q = -phi/Q
        let dg = -phi(t) / q;
        let mut next = t - g / dg;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
            return Ok(sign * next);
        }
        t = next;
    }
    Err(Error::Numerical(format!("q_inverse({p}) did not converge")))
}
