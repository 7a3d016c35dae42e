//! Near-optimal hyperparameters, large-d worst-class lower bounds, class-size
//! profiles and the CDT failure construction.

use crate::analytic::{
    cdt_coefficients, la_coefficients, limit_statistics, ma_coefficients, mm_coefficients, pairwise_error,
    ApproxCoefficients, Expansion, Method,
};
use crate::error::{invalid, Result};
use crate::model::{ProblemInstance, Rho};
use crate::special::{q_function, q_inverse};
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

/// δ*_i = ξ_i / (‖μ_i‖² + 2/(M+ρ)); at ρ = ∞ this is ξ_i/‖μ_i‖².
pub fn ma_delta_star(inst: &ProblemInstance, rho: Rho) -> Vec<f64> {
    let xi = inst.xis();
    let m: f64 = xi.iter().map(|x| 1.0 / x).sum();
    let extra = match rho {
        Rho::Infinite => 0.0,
        Rho::Finite(r) => 2.0 / (m + r),
    };
    (0..inst.c).map(|i| xi[i] / (inst.mean_norm_sq(i) + extra)).collect()
}

/// Expansion of δ* in 1/√d, rescaled so the lead is 1/N_i (ρ < ∞) or 1/(s_i N_i) (ρ = ∞).
pub fn ma_delta_star_expansion(inst: &ProblemInstance, rho: Rho) -> Expansion {
    let n = inst.n_f64();
    let s = &inst.s;
    match rho {
        Rho::Infinite => Expansion {
            lead: (0..inst.c).map(|i| 1.0 / (s[i] * n[i])).collect(),
            slope: vec![1.0; inst.c],
        },
        Rho::Finite(r) => {
            let t: f64 = n.iter().sum::<f64>() + r;
            let big_s: f64 = (0..inst.c).map(|j| s[j] * n[j] * n[j]).sum();
            Expansion {
                lead: n.iter().map(|v| 1.0 / v).collect(),
                slope: (0..inst.c).map(|i| s[i] - t * s[i] / (2.0 * n[i]) - big_s / (t * n[i])).collect(),
            }
        }
    }
}

/// ι*_y = (2 + ‖μ_y‖²(M^{∖y} + ρ)) / (2ξ_y(M + ρ)); at ρ = ∞ this is ‖μ_y‖²/(2ξ_y).
pub fn la_iota_star(inst: &ProblemInstance, rho: Rho) -> Vec<f64> {
    let xi = inst.xis();
    let m: f64 = xi.iter().map(|x| 1.0 / x).sum();
    (0..inst.c)
        .map(|y| {
            let mu2 = inst.mean_norm_sq(y);
            match rho {
                Rho::Infinite => mu2 / (2.0 * xi[y]),
                Rho::Finite(r) => (2.0 + mu2 * (m - 1.0 / xi[y] + r)) / (2.0 * xi[y] * (m + r)),
            }
        })
        .collect()
}

pub fn la_iota_star_expansion(inst: &ProblemInstance, rho: Rho) -> Expansion {
    let n = inst.n_f64();
    let s = &inst.s;
    match rho {
        Rho::Infinite => Expansion { lead: vec![0.0; inst.c], slope: (0..inst.c).map(|i| s[i] * n[i] / 2.0).collect() },
        Rho::Finite(r) => {
            let t: f64 = n.iter().sum::<f64>() + r;
            let big_s: f64 = (0..inst.c).map(|j| s[j] * n[j] * n[j]).sum();
            Expansion {
                lead: n.iter().map(|v| v / t).collect(),
                slope: (0..inst.c)
                    .map(|i| s[i] * n[i] / 2.0 - 1.5 * s[i] * n[i] * n[i] / t + n[i] * big_s / (t * t))
                    .collect(),
            }
        }
    }
}

/// One-parameter hyperparameter families used by sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Schedule {
    Fixed(Vec<f64>),
    /// δ = (δ*)^γ
    MaStarPower(f64),
    /// δ_i = N_i^{−γ}
    SizePower(f64),
    /// ι = τ ι*
    LaStarScaled(f64),
    /// ι_i = τ log N_i
    LogSize(f64),
    /// ι_i = τ N_i / Σ_j N_j
    SizeFraction(f64),
}

impl Schedule {
    pub fn values(&self, inst: &ProblemInstance, rho: Rho) -> Vec<f64> {
        let n = inst.n_f64();
        let total: f64 = n.iter().sum();
        match self {
            Schedule::Fixed(v) => v.clone(),
            Schedule::MaStarPower(g) => ma_delta_star(inst, rho).iter().map(|v| v.powf(*g)).collect(),
            Schedule::SizePower(g) => n.iter().map(|v| v.powf(-g)).collect(),
            Schedule::LaStarScaled(t) => la_iota_star(inst, rho).iter().map(|v| v * t).collect(),
            Schedule::LogSize(t) => n.iter().map(|v| t * v.ln()).collect(),
            Schedule::SizeFraction(t) => n.iter().map(|v| t * v / total).collect(),
        }
    }

    pub fn expansion(&self, inst: &ProblemInstance, rho: Rho) -> Expansion {
        match self {
            Schedule::MaStarPower(g) => ma_delta_star_expansion(inst, rho).powf(*g),
            Schedule::LaStarScaled(t) => la_iota_star_expansion(inst, rho).scaled(*t),
            other => Expansion::constant(&other.values(inst, rho)),
        }
    }
}

/// Coefficients of `method` with its hyperparameter drawn from `schedule`.
/// MM ignores the schedule; CDT always has ρ = ∞.
pub fn method_coefficients(
    inst: &ProblemInstance,
    method: Method,
    schedule: &Schedule,
    rho: Rho,
) -> Result<ApproxCoefficients> {
    match method {
        Method::Mm => mm_coefficients(inst, rho),
        Method::Ma => Ok(ma_coefficients(inst, &schedule.values(inst, rho), rho)?
            .with_delta_expansion(schedule.expansion(inst, rho))),
        Method::La => Ok(la_coefficients(inst, rho, &schedule.values(inst, rho))?
            .with_iota_expansion(schedule.expansion(inst, rho))),
        Method::Cdt => cdt_coefficients(inst, &schedule.values(inst, Rho::Infinite)),
    }
}

fn max_pairwise_limit(inst: &ProblemInstance, coeffs: &ApproxCoefficients) -> Result<f64> {
    let stats = limit_statistics(inst, coeffs)?;
    let mut worst: f64 = 0.0;
    for y in 0..inst.c {
        for k in 0..inst.c {
            if k != y {
                worst = worst.max(pairwise_error(&stats, y, k));
            }
        }
    }
    Ok(worst)
}

/// Worst pairwise error of MM in the large-d limit.
///
/// ρ = ∞: max Q(s_y√N_y/√(1 + N_k/N_y)). ρ < ∞: 1 as soon as two class sizes
/// differ; with all sizes equal the general limit expression is used.
pub fn wcelb_mm(inst: &ProblemInstance, rho: Rho) -> Result<f64> {
    let n = inst.n_f64();
    match rho {
        Rho::Infinite => {
            let mut worst: f64 = 0.0;
            for y in 0..inst.c {
                for k in 0..inst.c {
                    if k != y {
                        worst = worst.max(q_function(inst.s[y] * n[y].sqrt() / (1.0 + n[k] / n[y]).sqrt()));
                    }
                }
            }
            Ok(worst)
        }
        Rho::Finite(_) => {
            if n.iter().any(|&v| v != n[0]) {
                Ok(1.0)
            } else {
                max_pairwise_limit(inst, &mm_coefficients(inst, rho)?)
            }
        }
    }
}

/// Large-d worst pairwise error of MA with fixed margins δ.
pub fn wcelb_ma(inst: &ProblemInstance, delta: &[f64], rho: Rho) -> Result<f64> {
    max_pairwise_limit(inst, &ma_coefficients(inst, delta, rho)?)
}

/// Same as [`wcelb_ma`] for margins that vary with d as described by `delta`.
pub fn wcelb_ma_expansion(inst: &ProblemInstance, delta: &Expansion, rho: Rho) -> Result<f64> {
    let placeholder = vec![1.0; inst.c];
    max_pairwise_limit(inst, &ma_coefficients(inst, &placeholder, rho)?.with_delta_expansion(delta.clone()))
}

/// Optimal large-d worst pairwise error of MA:
/// ρ = ∞: max Q(1/√((s_y²N_y)⁻¹ + (s_k²N_k)⁻¹)); ρ < ∞: max Q((s_y+s_k)/(2√(1/N_y + 1/N_k))).
pub fn wcelb_ma_opt(inst: &ProblemInstance, rho: Rho) -> f64 {
    let n = inst.n_f64();
    let s = &inst.s;
    let mut worst: f64 = 0.0;
    for y in 0..inst.c {
        for k in 0..inst.c {
            if k == y {
                continue;
            }
            let arg = match rho {
                Rho::Infinite => 1.0 / (1.0 / (s[y] * s[y] * n[y]) + 1.0 / (s[k] * s[k] * n[k])).sqrt(),
                Rho::Finite(_) => (s[y] + s[k]) / (2.0 * (1.0 / n[y] + 1.0 / n[k]).sqrt()),
            };
            worst = worst.max(q_function(arg));
        }
    }
    worst
}

/// Large-d worst pairwise error of LA with a fixed offset vector ι.
pub fn wcelb_la(inst: &ProblemInstance, iota: &[f64], rho: Rho) -> Result<f64> {
    max_pairwise_limit(inst, &la_coefficients(inst, rho, iota)?)
}

pub fn wcelb_la_expansion(inst: &ProblemInstance, iota: &Expansion, rho: Rho) -> Result<f64> {
    let placeholder = vec![0.0; inst.c];
    max_pairwise_limit(inst, &la_coefficients(inst, rho, &placeholder)?.with_iota_expansion(iota.clone()))
}

/// Closed form of the LA bound at ι*:
/// max Q([s_yN_yT_{k∖y} + s_kN_kT_{y∖k} − |s_y−s_k|N_yN_k] / (2√((N_k−N_y)²N̄_{yk} + N_yT_{k∖y}² + N_kT_{y∖k}²)))
/// with N̄_{yk} = Σ_{i≠y,k} N_i and T_{i∖j} = 2N_i + N̄_{ij} + ρ.
pub fn wcelb_la_star(inst: &ProblemInstance, rho: Rho) -> Result<f64> {
    let r = match rho {
        Rho::Infinite => return wcelb_la_expansion(inst, &la_iota_star_expansion(inst, rho), rho),
        Rho::Finite(r) => r,
    };
    let n = inst.n_f64();
    let s = &inst.s;
    let total: f64 = n.iter().sum();
    let mut worst: f64 = 0.0;
    for y in 0..inst.c {
        for k in 0..inst.c {
            if k == y {
                continue;
            }
            let rest = total - n[y] - n[k];
            let t_ky = 2.0 * n[k] + rest + r;
            let t_yk = 2.0 * n[y] + rest + r;
            let num = s[y] * n[y] * t_ky + s[k] * n[k] * t_yk - (s[y] - s[k]).abs() * n[y] * n[k];
            let den = 2.0 * ((n[k] - n[y]).powi(2) * rest + n[y] * t_ky * t_ky + n[k] * t_yk * t_yk).sqrt();
            worst = worst.max(q_function(num / den));
        }
    }
    Ok(worst)
}

/// Large-d pairwise error Err_{y→k} of CDT:
/// Q(s_y√N_y / √(1 + (δ_k/δ_y)²(B/A)² N_k/N_y + ζ_kk/(A²δ_y²N_y)))
/// with Δ = Σδ², A = Δ + δ_y(δ_k−δ_y), B = Δ + δ_k(δ_y−δ_k),
/// ζ_kk = Σ_{z≠y,k} δ_z² (δ_z(δ_k−δ_y))² N_z.
pub fn cdt_pairwise_limit(inst: &ProblemInstance, delta: &[f64], y: usize, k: usize) -> f64 {
    let n = inst.n_f64();
    let big: f64 = delta.iter().map(|v| v * v).sum();
    let a = big + delta[y] * (delta[k] - delta[y]);
    let b = big + delta[k] * (delta[y] - delta[k]);
    let zeta: f64 = (0..inst.c)
        .filter(|&z| z != y && z != k)
        .map(|z| delta[z].powi(2) * (delta[z] * (delta[k] - delta[y])).powi(2) * n[z])
        .sum();
    let ratio = delta[k] / delta[y];
    let denom = 1.0 + ratio * ratio * (b / a).powi(2) * n[k] / n[y] + zeta / (a * a * delta[y] * delta[y] * n[y]);
    q_function(inst.s[y] * n[y].sqrt() / denom.sqrt())
}

pub fn wcelb_cdt(inst: &ProblemInstance, delta: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for y in 0..inst.c {
        for k in 0..inst.c {
            if k != y {
                worst = worst.max(cdt_pairwise_limit(inst, delta, y, k));
            }
        }
    }
    worst
}

/// Class sizes and signal strengths of the CDT failure construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureInstance {
    pub n: Vec<usize>,
    pub s: Vec<f64>,
}

impl FailureInstance {
    pub fn instance(&self, d: usize, seed: u64) -> Result<ProblemInstance> {
        ProblemInstance::new(self.n.len(), d, self.n.clone(), self.s.clone(), seed)
    }
}

const FAILURE_SIZE_CAP: f64 = 1e7;

/// N₁ = 1, N_i = ⌈max(1, c²/4)·N_{i−1}·(2Q⁻¹(ε/c)/Q⁻¹(½−ε))² + 1⌉ and s_y = 2Q⁻¹(ε/c)/√N_y.
pub fn cdt_failure_instance(epsilon: f64, c: usize) -> Result<FailureInstance> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}"));
    }
    if c < 2 {
        return invalid("need at least 2 classes");
    }
    let q_small = q_inverse(epsilon / c as f64)?;
    let q_half = q_inverse(0.5 - epsilon)?;
    let growth = (c as f64 * c as f64 / 4.0).max(1.0) * (2.0 * q_small / q_half).powi(2);
    let mut n = vec![1.0_f64];
    for _ in 1..c {
        let next = (growth * n.last().unwrap() + 1.0).ceil();
        if next > FAILURE_SIZE_CAP {
            return invalid(format!("class size {next:e} exceeds the cap of 1e7; epsilon too small for c = {c}"));
        }
        n.push(next);
    }
    let s = n.iter().map(|v| 2.0 * q_small / v.sqrt()).collect();
    Ok(FailureInstance { n: n.iter().map(|&v| v as usize).collect(), s })
}

/// N_i = N_max·(1/R)^{(c−i+1)/c}, i = 1..c, floored (never below 1).
pub fn exp_longtail_profile(c: usize, n_max: usize, ratio: f64) -> Result<Vec<usize>> {
    check_profile(c, n_max, ratio)?;
    Ok((1..=c)
        .map(|i| {
            let v = n_max as f64 * ratio.powf(-((c - i + 1) as f64) / c as f64);
            ((v + 1e-9).floor() as usize).max(1)
        })
        .collect())
}

/// Geometric profile pinned at both ends: N_i = ⌊N_max·R^{−(c−i)/(c−1)}⌋, so
/// N_1 = N_max/R and N_c = N_max. Reproduces [`CIFAR10_LONGTAIL_PRESET`].
pub fn endpoint_longtail_profile(c: usize, n_max: usize, ratio: f64) -> Result<Vec<usize>> {
    check_profile(c, n_max, ratio)?;
    Ok((1..=c)
        .map(|i| {
            let v = n_max as f64 * ratio.powf(-((c - i) as f64) / (c - 1) as f64);
            ((v + 1e-9).floor() as usize).max(1)
        })
        .collect())
}

fn check_profile(c: usize, n_max: usize, ratio: f64) -> Result<()> {
    if c < 2 || n_max < 1 {
        return invalid("profile needs c >= 2 and N_max >= 1");
    }
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return invalid(format!("imbalance ratio must be >= 1, got {ratio}"));
    }
    Ok(())
}

/// Long-tailed CIFAR10 class sizes, minority first.
pub const CIFAR10_LONGTAIL_PRESET: [usize; 10] = [5, 8, 13, 23, 38, 64, 107, 179, 299, 500];

/// Same extremes as the long-tailed preset with the middle classes enlarged.
pub const CIFAR10_MODIFIED_PRESET: [usize; 10] = [5, 100, 120, 140, 160, 180, 200, 220, 300, 500];

/// A random instance following the comparison protocol: c ∈ {3..10},
/// N_i ∈ {1..200}, d ∈ [1e5, 1e7], s ∈ [0.01, 1] (one shared value when
/// `equal_signals`), ρ ∈ [1, 1000].
pub fn random_comparison_instance(seed: u64, equal_signals: bool) -> (ProblemInstance, f64) {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c = r.random_range(3..=10usize);
    let n: Vec<usize> = (0..c).map(|_| r.random_range(1..=200usize)).collect();
    let d = r.random_range(100_000..=10_000_000usize);
    let s: Vec<f64> = if equal_signals {
        vec![r.random_range(0.01..=1.0); c]
    } else {
        (0..c).map(|_| r.random_range(0.01..=1.0)).collect()
    };
    let rho = r.random_range(1.0..=1000.0);
    let inst = ProblemInstance::new(c, d, n, s, seed).expect("sampled instance is valid");
    (inst, rho)
}
