//! Expected-kernel approximation: reduced coefficients, score statistics and
//! analytic error reports at finite dimension and in the d → ∞ limit.

use crate::error::{invalid, Error, Result};
use crate::model::{ProblemInstance, Rho};
use crate::mvn;
use crate::special::q_function;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mm,
    Ma,
    La,
    Cdt,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mm => "mm",
            Method::Ma => "ma",
            Method::La => "la",
            Method::Cdt => "cdt",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mm" => Ok(Method::Mm),
            "ma" => Ok(Method::Ma),
            "la" => Ok(Method::La),
            "cdt" => Ok(Method::Cdt),
            other => invalid(format!("unknown method `{other}`")),
        }
    }
}

/// Large-d behaviour of a per-class hyperparameter: v_i(d) = lead_i + slope_i/√d + o(1/√d).
///
/// Only the limit-mode formulas read this. Vectors fixed independently of d
/// have zero slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub lead: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Expansion {
    pub fn constant(v: &[f64]) -> Self {
        Expansion { lead: v.to_vec(), slope: vec![0.0; v.len()] }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Expansion {
            lead: self.lead.iter().map(|v| v * t).collect(),
            slope: self.slope.iter().map(|v| v * t).collect(),
        }
    }

    /// Elementwise power; needs positive leads.
    pub fn powf(&self, gamma: f64) -> Self {
        let lead: Vec<f64> = self.lead.iter().map(|a| a.powf(gamma)).collect();
        let slope = self
            .lead
            .iter()
            .zip(&self.slope)
            .map(|(a, b)| if gamma == 0.0 { 0.0 } else { gamma * a.powf(gamma - 1.0) * b })
            .collect();
        Expansion { lead, slope }
    }
}

/// Reduced coefficients α̃ (row y = classifier, column i = class weight) and b̃.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxCoefficients {
    pub method: Method,
    pub alpha: DMatrix<f64>,
    pub b: DVector<f64>,
    pub delta: Option<Vec<f64>>,
    pub iota: Option<Vec<f64>>,
    pub rho: Rho,
    pub delta_expansion: Option<Expansion>,
    pub iota_expansion: Option<Expansion>,
}

impl ApproxCoefficients {
    pub fn with_delta_expansion(mut self, e: Expansion) -> Self {
        self.delta_expansion = Some(e);
        self
    }

    pub fn with_iota_expansion(mut self, e: Expansion) -> Self {
        self.iota_expansion = Some(e);
        self
    }

    /// Multipliers λ_{y,k} of the reduced constraints implied by the closed
    /// form, which is derived with every constraint tight. The closed form
    /// solves the inequality-constrained reduced problem exactly when all of
    /// them are ≥ 0. LA inherits the MM multipliers.
    pub fn reduced_multipliers(&self, inst: &ProblemInstance) -> DMatrix<f64> {
        let c = inst.c;
        DMatrix::from_fn(c, c, |y, k| {
            if y == k {
                return 0.0;
            }
            let base = -2.0 * self.alpha[(k, y)] * inst.n[y] as f64;
            match (self.method, &self.delta) {
                (Method::Cdt, Some(d)) => base * d[k],
                _ => base,
            }
        })
    }

    /// Whether the closed form satisfies the sign conditions of the
    /// inequality-constrained reduced problem (up to `tol` relative).
    pub fn closed_form_is_optimal(&self, inst: &ProblemInstance, tol: f64) -> bool {
        let lam = self.reduced_multipliers(inst);
        let scale = lam.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        lam.iter().all(|&v| v >= -tol * scale)
    }
}

fn check_positive(name: &str, v: &[f64], c: usize) -> Result<()> {
    if v.len() != c {
        return invalid(format!("{name} has length {}, expected {c}", v.len()));
    }
    if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return invalid(format!("{name} entries must be positive and finite, got {x}"));
    }
    Ok(())
}

/// K̄ = diag(N_i² ξ_i).
pub fn reduced_kernel(inst: &ProblemInstance) -> DMatrix<f64> {
    let d: Vec<f64> = (0..inst.c).map(|i| (inst.n[i] as f64).powi(2) * inst.xi(i)).collect();
    DMatrix::from_diagonal(&DVector::from_vec(d))
}

/// MA coefficients for margins δ and bias weight ρ.
pub fn ma_coefficients(inst: &ProblemInstance, delta: &[f64], rho: Rho) -> Result<ApproxCoefficients> {
    check_positive("delta", delta, inst.c)?;
    let rho = rho.validate()?;
    let c = inst.c;
    let cf = c as f64;
    let n = inst.n_f64();
    let xi = inst.xis();
    let m: f64 = xi.iter().map(|x| 1.0 / x).sum();
    let ratio: Vec<f64> = (0..c).map(|j| delta[j] / xi[j]).collect();
    let ratio_sum: f64 = ratio.iter().sum();
    let mut alpha = DMatrix::zeros(c, c);
    let mut b = DVector::zeros(c);
    for y in 0..c {
        // Σ_j (δ_j/ξ_j − δ_y/ξ_y)
        let spread = ratio_sum - cf * ratio[y];
        let corr = match rho {
            Rho::Infinite => 0.0,
            Rho::Finite(r) => spread / (m + r),
        };
        for i in 0..c {
            let ind = if i == y { 1.0 } else { 0.0 };
            alpha[(y, i)] = delta[i] / (n[i] * xi[i]) * (ind - 1.0 / cf) + corr / (cf * n[i] * xi[i]);
        }
        b[y] = -corr / cf;
    }
    Ok(ApproxCoefficients {
        method: Method::Ma,
        alpha,
        b,
        delta: Some(delta.to_vec()),
        iota: None,
        rho,
        delta_expansion: Some(Expansion::constant(delta)),
        iota_expansion: None,
    })
}

pub fn mm_coefficients(inst: &ProblemInstance, rho: Rho) -> Result<ApproxCoefficients> {
    let mut out = ma_coefficients(inst, &vec![1.0; inst.c], rho)?;
    out.method = Method::Mm;
    Ok(out)
}

/// Post-hoc logit adjustment: MM coefficients with b̃ shifted by −ι.
pub fn la_coefficients(inst: &ProblemInstance, rho: Rho, iota: &[f64]) -> Result<ApproxCoefficients> {
    if iota.len() != inst.c || iota.iter().any(|v| !v.is_finite()) {
        return invalid("iota must be a finite vector with one entry per class");
    }
    let mut out = mm_coefficients(inst, rho)?;
    for (b, i) in out.b.iter_mut().zip(iota) {
        *b -= i;
    }
    out.method = Method::La;
    out.delta = None;
    out.delta_expansion = Some(Expansion::constant(&vec![1.0; inst.c]));
    out.iota = Some(iota.to_vec());
    out.iota_expansion = Some(Expansion::constant(iota));
    Ok(out)
}

fn cdt_alpha(n: &[f64], xi: &[f64], delta: &[f64]) -> DMatrix<f64> {
    let c = n.len();
    let big_delta: f64 = delta.iter().map(|v| v * v).sum();
    DMatrix::from_fn(c, c, |y, i| {
        let ind = if i == y { 1.0 } else { 0.0 };
        delta[i] / (n[i] * xi[i]) * (ind - delta[y] * delta[i] / big_delta)
    })
}

/// CDT coefficients (bias fixed at zero).
pub fn cdt_coefficients(inst: &ProblemInstance, delta: &[f64]) -> Result<ApproxCoefficients> {
    check_positive("delta", delta, inst.c)?;
    Ok(ApproxCoefficients {
        method: Method::Cdt,
        alpha: cdt_alpha(&inst.n_f64(), &inst.xis(), delta),
        b: DVector::zeros(inst.c),
        delta: Some(delta.to_vec()),
        iota: None,
        rho: Rho::Infinite,
        delta_expansion: Some(Expansion::constant(delta)),
        iota_expansion: None,
    })
}

/// Exact optimum of the reduced problem under the expected kernel, with the
/// reduced constraints kept as inequalities. It equals the closed form
/// whenever [`ApproxCoefficients::closed_form_is_optimal`] holds and differs
/// only when some closed-form multiplier is negative.
pub fn reduced_qp_coefficients(inst: &ProblemInstance, closed: &ApproxCoefficients) -> Result<ApproxCoefficients> {
    use crate::margin::{solve_kernel, MarginProblem};
    let c = inst.c;
    // One super-point per class with kernel ξ_i and β = N_i α.
    let k = DMatrix::from_diagonal(&DVector::from_vec(inst.xis()));
    let labels: Vec<usize> = (0..c).collect();
    let problem = match (closed.method, &closed.delta) {
        (Method::Mm | Method::La, _) => MarginProblem::max_margin(c, closed.rho),
        (Method::Ma, Some(d)) => MarginProblem::margin_adjust(d.clone(), closed.rho),
        (Method::Cdt, Some(d)) => MarginProblem::class_dep_temp(d.clone(), Rho::Infinite),
        _ => return invalid("margin coefficients without delta"),
    };
    let sol = solve_kernel(&k, &labels, &problem)?;
    let n = inst.n_f64();
    let alpha = DMatrix::from_fn(c, c, |y, i| sol.beta[(i, y)] / n[i]);
    let mut b = sol.b;
    if let (Method::La, Some(iota)) = (closed.method, &closed.iota) {
        for (bi, io) in b.iter_mut().zip(iota) {
            *bi -= io;
        }
    }
    Ok(ApproxCoefficients { alpha, b, ..closed.clone() })
}

/// The closed form when it solves the reduced problem, else the exact reduced optimum.
pub fn reduced_optimum(inst: &ProblemInstance, closed: &ApproxCoefficients) -> Result<ApproxCoefficients> {
    if closed.closed_form_is_optimal(inst, 1e-9) {
        Ok(closed.clone())
    } else {
        reduced_qp_coefficients(inst, closed)
    }
}

/// Mean ν̂^(y) and covariance Σ̂^(y) of the score differences for every class y.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreStatistics {
    pub nu: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
}

impl ScoreStatistics {
    pub fn classes(&self) -> usize {
        self.nu.len()
    }
}

/// ν_i = (α_{yy} − α_{iy}) N_y s_y + (b_y − b_i)·bias_scale and
/// Σ_{ij} = Σ_z (α_{yz} − α_{iz})(α_{yz} − α_{jz}) N_z² ξ_z.
fn generic_stats(alpha: &DMatrix<f64>, b: &DVector<f64>, bias_scale: f64, n: &[f64], xi: &[f64], s: &[f64]) -> ScoreStatistics {
    let c = n.len();
    let mut nus = Vec::with_capacity(c);
    let mut sigmas = Vec::with_capacity(c);
    for y in 0..c {
        let nu = DVector::from_fn(c, |i, _| {
            let bias = if bias_scale == 0.0 { 0.0 } else { (b[y] - b[i]) * bias_scale };
            (alpha[(y, y)] - alpha[(i, y)]) * n[y] * s[y] + bias
        });
        // rows of the difference matrix, weighted by sqrt(N_z^2 xi_z)
        let diff = DMatrix::from_fn(c, c, |i, z| (alpha[(y, z)] - alpha[(i, z)]) * n[z] * xi[z].sqrt());
        let sigma = &diff * diff.transpose();
        nus.push(nu);
        sigmas.push((&sigma + sigma.transpose()) * 0.5);
    }
    ScoreStatistics { nu: nus, sigma: sigmas }
}

/// Score statistics at the instance's own dimension.
pub fn score_statistics(inst: &ProblemInstance, coeffs: &ApproxCoefficients) -> ScoreStatistics {
    // ν carries a factor 1/σ = √d; N_y ‖μ_y‖² √d = N_y s_y.
    generic_stats(&coeffs.alpha, &coeffs.b, inst.sqrt_d(), &inst.n_f64(), &inst.xis(), &inst.s)
}

fn nearly_equal(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE)
}

fn divergent(coef: f64) -> f64 {
    // φ ≈ −√d·coef
    if coef > 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

/// Score statistics in the d → ∞ limit. Entries of ν may be ±∞ when a
/// hyperparameter does not scale in the way that keeps the bias term bounded.
pub fn limit_statistics(inst: &ProblemInstance, coeffs: &ApproxCoefficients) -> Result<ScoreStatistics> {
    let c = inst.c;
    let n = inst.n_f64();
    let s = &inst.s;
    let xi_lim: Vec<f64> = n.iter().map(|v| 1.0 / v).collect();
    let sum_n: f64 = n.iter().sum();
    let big_s: f64 = (0..c).map(|j| s[j] * n[j] * n[j]).sum();
    match coeffs.method {
        Method::Cdt => {
            let delta = coeffs.delta.as_ref().ok_or_else(|| Error::InvalidArgument("CDT without delta".into()))?;
            let alpha = cdt_alpha(&n, &xi_lim, delta);
            Ok(generic_stats(&alpha, &DVector::zeros(c), 0.0, &n, &xi_lim, s))
        }
        Method::Ma | Method::Mm => {
            let e = coeffs
                .delta_expansion
                .clone()
                .or_else(|| coeffs.delta.as_ref().map(|d| Expansion::constant(d)))
                .ok_or_else(|| Error::InvalidArgument("MA without delta".into()))?;
            let (a, bsl) = (&e.lead, &e.slope);
            let p: Vec<f64> = (0..c).map(|i| a[i] * n[i]).collect();
            let q: Vec<f64> = (0..c).map(|i| bsl[i] * n[i] - a[i] * s[i] * n[i] * n[i]).collect();
            let pscale = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let mut nus = Vec::new();
            let mut sigmas = Vec::new();
            for y in 0..c {
                let (nu, sigma) = match coeffs.rho {
                    Rho::Infinite => (
                        DVector::from_fn(c, |k, _| if k == y { 0.0 } else { s[y] * p[y] }),
                        DMatrix::from_fn(c, c, |k, l| {
                            if k == y || l == y {
                                0.0
                            } else {
                                a[y] * a[y] * n[y] + if k == l { a[k] * a[k] * n[k] } else { 0.0 }
                            }
                        }),
                    ),
                    Rho::Finite(r) => {
                        let t = sum_n + r;
                        let w = (sum_n + 2.0 * r) / (t * t);
                        let nu = DVector::from_fn(c, |k, _| {
                            if k == y {
                                0.0
                            } else if nearly_equal(p[k], p[y], pscale) {
                                s[y] * p[y] - (q[k] - q[y]) / t
                            } else {
                                divergent((p[k] - p[y]) / t)
                            }
                        });
                        let sigma = DMatrix::from_fn(c, c, |k, l| {
                            if k == y || l == y {
                                return 0.0;
                            }
                            let diag = if k == l { a[k] * a[k] * n[k] } else { 0.0 };
                            a[y] * a[y] * n[y] + diag - w * (p[k] - p[y]) * (p[l] - p[y])
                        });
                        (nu, sigma)
                    }
                };
                nus.push(nu);
                sigmas.push(sigma);
            }
            Ok(ScoreStatistics { nu: nus, sigma: sigmas })
        }
        Method::La => {
            let e = coeffs
                .iota_expansion
                .clone()
                .or_else(|| coeffs.iota.as_ref().map(|d| Expansion::constant(d)))
                .ok_or_else(|| Error::InvalidArgument("LA without iota".into()))?;
            let (l, m) = (&e.lead, &e.slope);
            let mut nus = Vec::new();
            let mut sigmas = Vec::new();
            for y in 0..c {
                let (nu, sigma) = match coeffs.rho {
                    Rho::Infinite => {
                        let lscale = l.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                        let nu = DVector::from_fn(c, |k, _| {
                            if k == y {
                                0.0
                            } else if nearly_equal(l[y], l[k], lscale) {
                                s[y] * n[y] - (m[y] - m[k])
                            } else {
                                divergent(l[y] - l[k])
                            }
                        });
                        let sigma = DMatrix::from_fn(c, c, |k, j| {
                            if k == y || j == y {
                                0.0
                            } else {
                                n[y] + if k == j { n[k] } else { 0.0 }
                            }
                        });
                        (nu, sigma)
                    }
                    Rho::Finite(r) => {
                        let t = sum_n + r;
                        let w = (sum_n + 2.0 * r) / (t * t);
                        let nu = DVector::from_fn(c, |k, _| {
                            if k == y {
                                return 0.0;
                            }
                            let dk = n[k] - n[y];
                            let ek = s[k] * n[k] * n[k] - s[y] * n[y] * n[y];
                            let g = dk / t + l[y] - l[k];
                            let scale = (dk / t).abs() + l[y].abs() + l[k].abs();
                            if nearly_equal(g, 0.0, scale) {
                                s[y] * n[y] + s[y] * n[y] * dk / t - dk * big_s / (t * t) + ek / t - (m[y] - m[k])
                            } else {
                                divergent(g)
                            }
                        });
                        let sigma = DMatrix::from_fn(c, c, |k, j| {
                            if k == y || j == y {
                                return 0.0;
                            }
                            let diag = if k == j { n[k] } else { 0.0 };
                            n[y] + diag - w * (n[k] - n[y]) * (n[j] - n[y])
                        });
                        (nu, sigma)
                    }
                };
                nus.push(nu);
                sigmas.push(sigma);
            }
            Ok(ScoreStatistics { nu: nus, sigma: sigmas })
        }
    }
}

/// Err_{y→k} = Q(ν_k/√Σ_kk), resolving Σ_kk = 0 by the sign of ν_k.
pub fn pairwise_error(stats: &ScoreStatistics, y: usize, k: usize) -> f64 {
    let nu = stats.nu[y][k];
    let var = stats.sigma[y][(k, k)];
    if nu.is_infinite() {
        return if nu > 0.0 { 0.0 } else { 1.0 };
    }
    if var <= 0.0 {
        return if nu > 0.0 {
            0.0
        } else if nu < 0.0 {
            1.0
        } else {
            0.5
        };
    }
    q_function(nu / var.sqrt())
}

/// 1 − P(N(ν̂, Σ̂) > 0) over the coordinates other than y, by Monte Carlo.
pub fn class_error_mc(stats: &ScoreStatistics, y: usize, n_samples: usize, seed: u64) -> Result<f64> {
    let nu = &stats.nu[y];
    if nu.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("score mean contains NaN".into()));
    }
    let mut keep = Vec::new();
    for k in 0..nu.len() {
        if k == y {
            continue;
        }
        if nu[k] == f64::NEG_INFINITY {
            return Ok(1.0);
        }
        if nu[k] < f64::INFINITY {
            keep.push(k);
        }
    }
    if n_samples == 0 {
        return invalid("n_samples must be at least 1");
    }
    let sub_nu = DVector::from_fn(keep.len(), |i, _| nu[keep[i]]);
    let sub_sigma = DMatrix::from_fn(keep.len(), keep.len(), |i, j| stats.sigma[y][(keep[i], keep[j])]);
    mvn::prob_any_negative(&sub_nu, &sub_sigma, n_samples, crate::rng::derive_seed(seed, y as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FiniteD,
    Limit,
}

#[derive(Clone, Copy, Debug)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { samples: 10_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub method: Method,
    pub delta: Option<Vec<f64>>,
    pub iota: Option<Vec<f64>>,
    pub rho: Rho,
    pub per_class_error: Vec<f64>,
    /// pairwise[y][k] = Err_{y→k}; the diagonal is 0.
    pub pairwise: Vec<Vec<f64>>,
    pub worst_class_error: f64,
    pub mode: Mode,
}

impl AnalyticReport {
    pub fn worst_pairwise(&self) -> f64 {
        self.pairwise.iter().flatten().fold(0.0_f64, |a, &v| a.max(v))
    }
}

/// Per-class, pairwise and worst-class errors predicted for `coeffs`.
///
/// Limit mode uses the large-d statistics; for CDT the pairwise entries come
/// from the diagonal closed form and per-class errors from Monte Carlo on the
/// full limit covariance.
pub fn analytic_error_report(
    inst: &ProblemInstance,
    coeffs: &ApproxCoefficients,
    mode: Mode,
    mc: McOptions,
) -> Result<AnalyticReport> {
    let c = inst.c;
    let stats = match mode {
        Mode::FiniteD => score_statistics(inst, coeffs),
        Mode::Limit => limit_statistics(inst, coeffs)?,
    };
    let mut pairwise = vec![vec![0.0; c]; c];
    for y in 0..c {
        for k in 0..c {
            if k == y {
                continue;
            }
            pairwise[y][k] = match (mode, coeffs.method, &coeffs.delta) {
                (Mode::Limit, Method::Cdt, Some(delta)) => crate::tuners::cdt_pairwise_limit(inst, delta, y, k),
                _ => pairwise_error(&stats, y, k),
            };
        }
    }
    let per_class = (0..c)
        .map(|y| class_error_mc(&stats, y, mc.samples, mc.seed))
        .collect::<Result<Vec<_>>>()?;
    let worst = per_class.iter().copied().fold(0.0, f64::max);
    Ok(AnalyticReport {
        method: coeffs.method,
        delta: coeffs.delta.clone(),
        iota: coeffs.iota.clone(),
        rho: coeffs.rho,
        per_class_error: per_class,
        pairwise,
        worst_class_error: worst,
        mode,
    })
}
