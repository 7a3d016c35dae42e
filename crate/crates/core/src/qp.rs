//! Dual solvers for multiclass margin problems.
//!
//! Primal: minimise ‖W‖² + ρ‖b‖² subject to, for every constraint j,
//! Σ_t a_{j,t} (w_{y_t}·x_{p_j} + b_{y_t}) ≥ r_j. Each constraint touches one
//! sample p_j and at most two classes. With u ≥ 0 the multipliers,
//! W = ½ Σ_j u_j a_j ⊗ x_{p_j} and b = (1/2ρ) Σ_j u_j a_j, and the dual Hessian is
//! H_{jl} = ½ (K_{p_j p_l} + 1/ρ) ⟨a_j, a_l⟩.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub point: usize,
    pub classes: [usize; 2],
    pub coef: [f64; 2],
    pub rhs: f64,
}

impl Constraint {
    fn dot(&self, other: &Constraint) -> f64 {
        let mut v = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                if self.classes[a] == other.classes[b] {
                    v += self.coef[a] * other.coef[b];
                }
            }
        }
        v
    }
}

pub struct DualProblem<'a> {
    pub kernel: &'a DMatrix<f64>,
    pub constraints: &'a [Constraint],
    pub classes: usize,
    /// 1/ρ; zero when the bias is pinned at zero.
    pub rho_inv: f64,
}

impl DualProblem<'_> {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn entry(&self, j: usize, l: usize) -> f64 {
        let (cj, cl) = (&self.constraints[j], &self.constraints[l]);
        0.5 * (self.kernel[(cj.point, cl.point)] + self.rho_inv) * cj.dot(cl)
    }

    /// Per-sample class coefficients Σ_j v_j a_j, as an N×c matrix.
    pub fn aggregate(&self, v: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.kernel.nrows(), self.classes);
        for (c, &vj) in self.constraints.iter().zip(v) {
            if vj != 0.0 {
                for t in 0..2 {
                    out[(c.point, c.classes[t])] += vj * c.coef[t];
                }
            }
        }
        out
    }

    /// H·v without forming H.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let agg = self.aggregate(v);
        let mut scores = self.kernel * &agg;
        if self.rho_inv != 0.0 {
            let sums: Vec<f64> = (0..self.classes).map(|t| agg.column(t).sum()).collect();
            for mut row in scores.row_iter_mut() {
                for t in 0..self.classes {
                    row[t] += self.rho_inv * sums[t];
                }
            }
        }
        self.constraints
            .iter()
            .map(|c| 0.5 * (c.coef[0] * scores[(c.point, c.classes[0])] + c.coef[1] * scores[(c.point, c.classes[1])]))
            .collect()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |j, l| self.entry(j, l))
    }

    fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    /// Constraint slacks H·u − r.
    pub fn slacks(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u).iter().zip(self.constraints).map(|(h, c)| h - c.rhs).collect()
    }
}

/// Lower-triangular factor stored by rows, supporting append and row deletion.
struct TriFactor {
    rows: Vec<Vec<f64>>,
}

impl TriFactor {
    fn new() -> Self {
        TriFactor { rows: Vec::new() }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn forward(&self, v: &[f64]) -> Vec<f64> {
        let mut z = v.to_vec();
        for i in 0..self.len() {
            let row = &self.rows[i];
            let mut acc = z[i];
            for k in 0..i {
                acc -= row[k] * z[k];
            }
            z[i] = acc / row[i];
        }
        z
    }

    fn backward(&self, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        for i in (0..self.len()).rev() {
            let row = &self.rows[i];
            x[i] /= row[i];
            let xi = x[i];
            for k in 0..i {
                x[k] -= row[k] * xi;
            }
        }
        x
    }

    fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(v))
    }

    /// Appends a row given the new column of the factored matrix; `None` when
    /// the new pivot is not positive.
    fn push(&mut self, col: &[f64], diag: f64) -> Option<()> {
        let l = self.forward(col);
        let pivot = diag - l.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > 0.0) {
            return None;
        }
        let mut row = l;
        row.push(pivot.sqrt());
        self.rows.push(row);
        Some(())
    }

    /// Deletes row/column q, restoring triangular form with Givens rotations.
    fn remove(&mut self, q: usize) {
        self.rows.remove(q);
        let n = self.len();
        for k in q..n {
            let (a, b) = (self.rows[k][k], self.rows[k][k + 1]);
            let h = a.hypot(b);
            let (c, s) = if h == 0.0 { (1.0, 0.0) } else { (a / h, b / h) };
            for r in k..n {
                let (x, y) = (self.rows[r][k], self.rows[r][k + 1]);
                self.rows[r][k] = c * x + s * y;
                self.rows[r][k + 1] = -s * x + c * y;
            }
            self.rows[k].truncate(k + 1);
            if self.rows[k][k] < 0.0 {
                for r in k..n {
                    self.rows[r][k] = -self.rows[r][k];
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub u: Vec<f64>,
    /// Bias recovered from equality multipliers when ρ = 0.
    pub bias: Option<DVector<f64>>,
    pub iterations: usize,
}

/// Goldfarb–Idnani dual active-set method expressed through H only.
///
/// Starts from the unconstrained minimiser (W = 0, b = 0), repeatedly adds the
/// most violated constraint and drops active constraints whose multiplier
/// would turn negative. Terminates finitely; infeasibility shows up as a
/// violated constraint that is linearly dependent on the active set with no
/// multiplier left to release.
pub fn solve_active_set(prob: &DualProblem, feas_tol: f64) -> Result<DualSolution> {
    let m = prob.len();
    let rhs = prob.rhs();
    let diag: Vec<f64> = (0..m).map(|j| prob.entry(j, j)).collect();
    let mut u = vec![0.0; m];
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; m];
    let mut factor = TriFactor::new();
    let max_iter = 50 * m + 100;
    let mut iterations = 0;
    let mut since_refresh = 0;

    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Numerical("active-set solver exceeded its iteration budget".into()));
        }
        let slack = prob.slacks(&u);
        let mut p = None;
        let mut worst = -feas_tol;
        for j in 0..m {
            if is_active[j] || diag[j] <= 0.0 {
                if !is_active[j] && slack[j] < -feas_tol {
                    // zero normal: the constraint reads 0 ≥ r_j
                    let c = &prob.constraints[j];
                    return Err(Error::Infeasible { point: c.point, class: c.classes[1] });
                }
                continue;
            }
            let score = slack[j] / diag[j].sqrt();
            if score < worst {
                worst = score;
                p = Some(j);
            }
        }
        let Some(p) = p else { break };
        let mut up = u[p];

        loop {
            let col: Vec<f64> = active.iter().map(|&j| prob.entry(j, p)).collect();
            let r = factor.solve(&col);
            let gamma = diag[p] - col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
            let sp = active.iter().zip(&col).map(|(&j, h)| h * u[j]).sum::<f64>() + diag[p] * up - rhs[p];

            let mut t1 = f64::INFINITY;
            let mut block = None;
            for (pos, &j) in active.iter().enumerate() {
                if r[pos] > 0.0 {
                    let t = u[j] / r[pos];
                    if t < t1 {
                        t1 = t;
                        block = Some(pos);
                    }
                }
            }
            let dependent = gamma <= 1e-12 * diag[p];
            let t2 = if dependent { f64::INFINITY } else { (-sp / gamma).max(0.0) };
            if t1.is_infinite() && t2.is_infinite() {
                let c = &prob.constraints[p];
                return Err(Error::Infeasible { point: c.point, class: c.classes[1] });
            }
            let t = t1.min(t2);
            for (pos, &j) in active.iter().enumerate() {
                u[j] = (u[j] - t * r[pos]).max(0.0);
            }
            up += t;
            if t2 <= t1 {
                if factor.push(&col, diag[p]).is_none() {
                    return Err(Error::Numerical("lost positive definiteness while adding a constraint".into()));
                }
                active.push(p);
                is_active[p] = true;
                u[p] = up;
                break;
            }
            let pos = block.expect("blocking constraint exists when t1 is finite");
            let j = active.remove(pos);
            is_active[j] = false;
            u[j] = 0.0;
            factor.remove(pos);
        }

        since_refresh += 1;
        if since_refresh >= 64 {
            refine(prob, &active, &factor, &rhs, &mut u);
            since_refresh = 0;
        }
    }
    refine(prob, &active, &factor, &rhs, &mut u);
    Ok(DualSolution { u, bias: None, iterations })
}

/// Iterative refinement of H_AA u_A = r_A on the current active set.
fn refine(prob: &DualProblem, active: &[usize], factor: &TriFactor, rhs: &[f64], u: &mut [f64]) {
    if active.is_empty() {
        return;
    }
    for _ in 0..2 {
        let h = prob.apply(u);
        let resid: Vec<f64> = active.iter().map(|&j| rhs[j] - h[j]).collect();
        let step = factor.solve(&resid);
        for (pos, &j) in active.iter().enumerate() {
            u[j] += step[pos];
        }
    }
}

/// Mehrotra predictor–corrector for min ½uᵀHu − rᵀu, u ≥ 0, E u = 0.
///
/// Returns the multipliers and y, the multipliers of the equality rows.
pub fn solve_interior_point(h: &DMatrix<f64>, r: &DVector<f64>, e: Option<&DMatrix<f64>>, tol: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let m = h.nrows();
    let ne = e.map_or(0, |e| e.nrows());
    let e_mat = e.cloned().unwrap_or_else(|| DMatrix::zeros(0, m));
    let mut u = DVector::from_element(m, 1.0);
    let mut z = DVector::from_element(m, 1.0);
    let mut y = DVector::zeros(ne);
    let scale = 1.0 + r.amax() + h.amax();

    for _ in 0..200 {
        let rd = h * &u - r - e_mat.tr_mul(&y) - &z;
        let rp = &e_mat * &u;
        let mu = u.dot(&z) / m as f64;
        if rd.amax() <= tol * scale && rp.amax() <= tol * scale && mu <= tol * scale {
            return Ok((u, y));
        }
        let mut dmat = h.clone();
        for i in 0..m {
            dmat[(i, i)] += z[i] / u[i];
        }
        let chol = Cholesky::new(dmat).ok_or_else(|| Error::Numerical("interior point: KKT matrix not positive definite".into()))?;
        let schur = {
            let dinv_et = chol.solve(&e_mat.transpose());
            &e_mat * dinv_et
        };
        let schur_pinv = if ne > 0 {
            let eps = 1e-12 * schur.amax().max(1e-300);
            Some(schur.pseudo_inverse(eps).map_err(|e| Error::Numerical(e.to_string()))?)
        } else {
            None
        };
        let newton = |rhs3: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            let g = -&rd + rhs3.component_div(&u);
            let dinv_g = chol.solve(&g);
            let dy = match &schur_pinv {
                Some(sp) => sp * (-&rp - &e_mat * &dinv_g),
                None => DVector::zeros(0),
            };
            let du = chol.solve(&(e_mat.tr_mul(&dy) + &g));
            let dz = (rhs3 - z.component_mul(&du)).component_div(&u);
            (du, dy, dz)
        };
        let step_to_boundary = |x: &DVector<f64>, dx: &DVector<f64>| {
            let mut a: f64 = 1.0;
            for i in 0..x.len() {
                if dx[i] < 0.0 {
                    a = a.min(-x[i] / dx[i]);
                }
            }
            a
        };
        // predictor
        let uz = u.component_mul(&z);
        let (du_a, _, dz_a) = newton(&(-&uz));
        let ap = step_to_boundary(&u, &du_a);
        let ad = step_to_boundary(&z, &dz_a);
        let mu_aff = (&u + &du_a * ap).dot(&(&z + &dz_a * ad)) / m as f64;
        let sigma = (mu_aff / mu).powi(3);
        // corrector
        let rhs3 = -&uz + DVector::from_element(m, sigma * mu) - du_a.component_mul(&dz_a);
        let (du, dy, dz) = newton(&rhs3);
        let ap = (0.99 * step_to_boundary(&u, &du)).min(1.0);
        let ad = (0.99 * step_to_boundary(&z, &dz)).min(1.0);
        u += &du * ap;
        y += &dy * ad;
        z += &dz * ad;
    }
    Err(Error::Numerical("interior point did not converge".into()))
}
