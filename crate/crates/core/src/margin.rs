//! Exact margin problems on sample data, solved in kernel form with KKT certificates.

use crate::error::{invalid, Error, Result};
use crate::model::{argmax_rows, decision_scores, kernel_matrix, Dataset, Predictor, Rho};
use crate::qp::{solve_active_set, solve_interior_point, Constraint, DualProblem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    MaxMargin,
    MarginAdjust,
    ClassDepTemp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginProblem {
    pub kind: MarginKind,
    pub delta: Vec<f64>,
    pub rho: Rho,
}

impl MarginProblem {
    pub fn max_margin(c: usize, rho: Rho) -> Self {
        MarginProblem { kind: MarginKind::MaxMargin, delta: vec![1.0; c], rho }
    }

    pub fn margin_adjust(delta: Vec<f64>, rho: Rho) -> Self {
        MarginProblem { kind: MarginKind::MarginAdjust, delta, rho }
    }

    pub fn class_dep_temp(delta: Vec<f64>, rho: Rho) -> Self {
        MarginProblem { kind: MarginKind::ClassDepTemp, delta, rho }
    }

    pub fn classes(&self) -> usize {
        self.delta.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.rho.validate()?;
        if self.delta.len() < 2 {
            return invalid("margin problem needs at least 2 classes");
        }
        if self.delta.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return invalid("margins must be positive and finite");
        }
        if self.kind == MarginKind::MaxMargin && self.delta.iter().any(|&d| d != 1.0) {
            return invalid("max-margin problems use unit margins");
        }
        Ok(())
    }

    fn constraints(&self, labels: &[usize]) -> Vec<Constraint> {
        let c = self.classes();
        let mut out = Vec::with_capacity(labels.len() * (c - 1));
        for (i, &y) in labels.iter().enumerate() {
            for k in 0..c {
                if k == y {
                    continue;
                }
                let (coef, rhs) = match self.kind {
                    MarginKind::ClassDepTemp => ([1.0 / self.delta[y], -1.0 / self.delta[k]], 1.0),
                    _ => ([1.0, -1.0], self.delta[y]),
                };
                out.push(Constraint { point: i, classes: [y, k], coef, rhs });
            }
        }
        out
    }
}

/// Relative KKT residuals of a solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// max_j max(0, r_j − n_jᵀz) / max_j r_j
    pub primal_violation: f64,
    /// max_j max(0, −u_j) relative to the largest multiplier
    pub dual_violation: f64,
    /// max_j u_j |n_jᵀz − r_j| / Σ_j u_j r_j
    pub complementarity: f64,
    /// ‖W − ½ Σ_j u_j a_j ⊗ x_j‖ / ‖W‖ recomputed in the representation returned
    pub stationarity: f64,
    pub objective: f64,
    pub support: usize,
    pub iterations: usize,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal_violation.max(self.dual_violation).max(self.complementarity).max(self.stationarity)
    }
}

#[derive(Clone, Debug)]
pub struct KernelSolution {
    /// N×c; w_y = Σ_i beta[(i, y)] x_i.
    pub beta: DMatrix<f64>,
    pub b: DVector<f64>,
    pub multipliers: Vec<f64>,
    pub kkt: KktReport,
}

const KKT_TOL: f64 = 1e-8;

/// Solves the margin problem for a Gram matrix. Labels are 0-based.
pub fn solve_kernel(k: &DMatrix<f64>, labels: &[usize], problem: &MarginProblem) -> Result<KernelSolution> {
    problem.validate()?;
    let n = labels.len();
    let c = problem.classes();
    if n == 0 {
        return invalid("no training points");
    }
    if k.nrows() != n || k.ncols() != n {
        return invalid(format!("kernel is {}x{} but there are {n} labels", k.nrows(), k.ncols()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return invalid(format!("label {} outside 1..={c}", l + 1));
    }
    // Scale K to unit max diagonal and margins to unit max; both are undone below.
    let kappa = (0..n).map(|i| k[(i, i)]).fold(0.0_f64, f64::max);
    if !(kappa > 0.0) || !kappa.is_finite() {
        return invalid("kernel diagonal must contain a positive finite entry");
    }
    let ks = k / kappa;
    let mut cons = problem.constraints(labels);
    let r_scale = cons.iter().map(|c| c.rhs).fold(0.0_f64, f64::max);
    for c in cons.iter_mut() {
        c.rhs /= r_scale;
    }
    // In scaled units the bias weight becomes ρ·κ.
    let (rho_inv, zero_rho) = match problem.rho {
        Rho::Infinite => (0.0, false),
        Rho::Finite(0.0) => (0.0, true),
        Rho::Finite(r) => (1.0 / (r * kappa), false),
    };
    let prob = DualProblem { kernel: &ks, constraints: &cons, classes: c, rho_inv };

    let (u, bias_scaled, iterations) = if zero_rho {
        let h = prob.dense();
        let r = DVector::from_iterator(cons.len(), cons.iter().map(|c| c.rhs));
        // Σ_j u_j a_j = 0 for every class
        let mut e = DMatrix::zeros(c, cons.len());
        for (j, con) in cons.iter().enumerate() {
            for t in 0..2 {
                e[(con.classes[t], j)] += con.coef[t];
            }
        }
        let (u, y) = match solve_interior_point(&h, &r, Some(&e), 1e-13) {
            Ok(v) => v,
            Err(err) => {
                // A free bias is feasible iff any finite bias weight is; the
                // active-set method certifies infeasibility explicitly.
                solve_active_set(&DualProblem { rho_inv: 1.0, ..prob }, 1e-12)?;
                return Err(err);
            }
        };
        (u.iter().map(|v| v.max(0.0)).collect::<Vec<_>>(), Some(-y), 0)
    } else {
        let sol = solve_active_set(&prob, 1e-12)?;
        (sol.u, None, sol.iterations)
    };

    let agg = prob.aggregate(&u);
    let beta_scaled = &agg * 0.5;
    let mut b_scaled = match (bias_scaled, problem.rho) {
        (Some(b), _) => b,
        (None, Rho::Infinite) => DVector::zeros(c),
        (None, Rho::Finite(_)) => DVector::from_fn(c, |t, _| 0.5 * rho_inv * agg.column(t).sum()),
    };
    if zero_rho && problem.kind != MarginKind::ClassDepTemp {
        let mean = b_scaled.mean();
        b_scaled.add_scalar_mut(-mean);
    }

    // back to original units
    let beta = &beta_scaled * (r_scale / kappa);
    let b = &b_scaled * r_scale;
    let multipliers: Vec<f64> = u.iter().map(|v| v * r_scale / kappa).collect();

    let kkt = certify_kernel(k, labels, problem, &beta, &b, &multipliers, iterations);
    if kkt.max_residual() > KKT_TOL {
        return Err(Error::Numerical(format!("KKT residuals above tolerance: {kkt:?}")));
    }
    Ok(KernelSolution { beta, b, multipliers, kkt })
}

fn certify_kernel(
    k: &DMatrix<f64>,
    labels: &[usize],
    problem: &MarginProblem,
    beta: &DMatrix<f64>,
    b: &DVector<f64>,
    u: &[f64],
    iterations: usize,
) -> KktReport {
    let scores = k * beta;
    let scores = DMatrix::from_fn(scores.nrows(), scores.ncols(), |i, t| scores[(i, t)] + b[t]);
    let cons = problem.constraints(labels);
    let r_max = cons.iter().map(|c| c.rhs).fold(0.0_f64, f64::max);
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj = 0.0;
    for (con, &uj) in cons.iter().zip(u) {
        let lhs = con.coef[0] * scores[(con.point, con.classes[0])] + con.coef[1] * scores[(con.point, con.classes[1])];
        primal = primal.max(con.rhs - lhs);
        comp = comp.max(uj * (lhs - con.rhs).abs());
        dual_obj += uj * con.rhs;
    }
    let u_max = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let dual = u.iter().fold(0.0_f64, |a, v| a.max(-v)) / u_max.max(f64::MIN_POSITIVE);
    // stationarity of the bias block: ρ b = ½ Σ_j u_j a_j
    let c = problem.classes();
    let mut agg_bias = vec![0.0; c];
    let mut agg_beta = DMatrix::zeros(labels.len(), c);
    for (con, &uj) in cons.iter().zip(u) {
        for t in 0..2 {
            agg_bias[con.classes[t]] += uj * con.coef[t];
            agg_beta[(con.point, con.classes[t])] += 0.5 * uj * con.coef[t];
        }
    }
    let w_norm = (beta.transpose() * k * beta).trace().max(0.0);
    let diff = beta - &agg_beta;
    let w_gap = (diff.transpose() * k * &diff).trace().max(0.0);
    let mut stationarity = if w_norm > 0.0 { (w_gap / w_norm).sqrt() } else { w_gap.sqrt() };
    if let Rho::Finite(r) = problem.rho {
        if r > 0.0 {
            let b_norm = b.norm().max(f64::MIN_POSITIVE);
            let gap = (0..c).map(|t| (r * b[t] - 0.5 * agg_bias[t]).powi(2)).sum::<f64>().sqrt();
            stationarity = stationarity.max(gap / (r * b_norm).max(0.5 * agg_bias.iter().map(|v| v * v).sum::<f64>().sqrt()).max(f64::MIN_POSITIVE));
        } else {
            let scale = u_max.max(f64::MIN_POSITIVE) * labels.len() as f64;
            let gap = agg_bias.iter().map(|v| v.abs()).fold(0.0, f64::max) / scale;
            stationarity = stationarity.max(gap);
        }
    }
    let rho_term = match problem.rho {
        Rho::Finite(r) => r * b.norm_squared(),
        Rho::Infinite => 0.0,
    };
    KktReport {
        primal_violation: primal.max(0.0) / r_max,
        dual_violation: dual,
        complementarity: comp / dual_obj.max(f64::MIN_POSITIVE),
        stationarity,
        objective: w_norm + rho_term,
        support: u.iter().filter(|&&v| v > 0.0).count(),
        iterations,
    }
}

#[derive(Clone, Debug)]
pub struct PrimalSolution {
    pub predictor: Predictor,
    pub kkt: KktReport,
    pub multipliers: Vec<f64>,
    /// Fraction of training points not classified correctly (can be > 0 for CDT).
    pub training_error: f64,
}

/// Solves the margin problem on a dataset and returns the weight-space predictor.
pub fn solve_primal(ds: &Dataset, problem: &MarginProblem) -> Result<PrimalSolution> {
    if ds.is_empty() {
        return invalid("empty dataset");
    }
    if ds.c != problem.classes() {
        return invalid(format!("dataset has {} classes, problem has {}", ds.c, problem.classes()));
    }
    let k = kernel_matrix(ds);
    let sol = solve_kernel(&k, &ds.y, problem)?;
    let predictor = Predictor::from_kernel(ds, sol.beta.clone(), sol.b.clone());
    let kkt = certify_primal(ds, problem, &predictor, &sol.multipliers, sol.kkt.iterations);
    if kkt.max_residual() > KKT_TOL {
        return Err(Error::Numerical(format!("primal KKT residuals above tolerance: {kkt:?}")));
    }
    let training_error = training_error(&predictor, ds)?;
    Ok(PrimalSolution { predictor, kkt, multipliers: sol.multipliers, training_error })
}

/// Residuals recomputed from W and b directly.
fn certify_primal(ds: &Dataset, problem: &MarginProblem, p: &Predictor, u: &[f64], iterations: usize) -> KktReport {
    let scores = decision_scores(p, &ds.x);
    let cons = problem.constraints(&ds.y);
    let c = problem.classes();
    let r_max = cons.iter().map(|c| c.rhs).fold(0.0_f64, f64::max);
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj = 0.0;
    let mut coeff = DMatrix::zeros(ds.len(), c);
    for (con, &uj) in cons.iter().zip(u) {
        let lhs = con.coef[0] * scores[(con.point, con.classes[0])] + con.coef[1] * scores[(con.point, con.classes[1])];
        primal = primal.max(con.rhs - lhs);
        comp = comp.max(uj * (lhs - con.rhs).abs());
        dual_obj += uj * con.rhs;
        for t in 0..2 {
            coeff[(con.point, con.classes[t])] += 0.5 * uj * con.coef[t];
        }
    }
    let w_from_u = &ds.x * coeff;
    let w_norm = p.w.norm();
    let stationarity = (&p.w - w_from_u).norm() / w_norm.max(f64::MIN_POSITIVE);
    let u_max = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let rho_term = match problem.rho {
        Rho::Finite(r) => r * p.b.norm_squared(),
        Rho::Infinite => 0.0,
    };
    KktReport {
        primal_violation: primal.max(0.0) / r_max,
        dual_violation: u.iter().fold(0.0_f64, |a, v| a.max(-v)) / u_max.max(f64::MIN_POSITIVE),
        complementarity: comp / dual_obj.max(f64::MIN_POSITIVE),
        stationarity,
        objective: w_norm * w_norm + rho_term,
        support: u.iter().filter(|&&v| v > 0.0).count(),
        iterations,
    }
}

/// Fraction of points whose argmax score differs from the label.
pub fn training_error(p: &Predictor, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return invalid("empty dataset");
    }
    let pred = argmax_rows(&decision_scores(p, &ds.x));
    let wrong = pred.iter().zip(&ds.y).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / ds.len() as f64)
}

/// Scores of kernel-form predictors on new points: cross is N_train×M.
pub fn kernel_decision_scores(beta: &DMatrix<f64>, b: &DVector<f64>, cross: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = cross.tr_mul(beta);
    for mut row in s.row_iter_mut() {
        for (v, bb) in row.iter_mut().zip(b.iter()) {
            *v += bb;
        }
    }
    s
}
