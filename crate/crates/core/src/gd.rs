//! Full-batch gradient descent on the cross-entropy family of losses.
//!
//! The bias is trained in an extended feature space: every point gets an
//! extra coordinate 1/√ρ and the matching weight is √ρ·b. A single step size
//! therefore moves b with an effective rate η/ρ, and ρ = ∞ freezes b at zero.

use crate::error::{invalid, Error, Result};
use crate::model::{decision_scores, Dataset, Predictor, Rho};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Ma,
    Cdt,
    La,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iota: Option<Vec<f64>>,
    pub rho: Rho,
}

impl LossSpec {
    pub fn ce(rho: Rho) -> Self {
        LossSpec { kind: LossKind::Ce, delta: None, iota: None, rho }
    }

    pub fn ma(delta: Vec<f64>, rho: Rho) -> Self {
        LossSpec { kind: LossKind::Ma, delta: Some(delta), iota: None, rho }
    }

    pub fn cdt(delta: Vec<f64>, rho: Rho) -> Self {
        LossSpec { kind: LossKind::Cdt, delta: Some(delta), iota: None, rho }
    }

    pub fn la(iota: Vec<f64>, rho: Rho) -> Self {
        LossSpec { kind: LossKind::La, delta: None, iota: Some(iota), rho }
    }

    pub fn validate(&self, c: usize) -> Result<()> {
        self.rho.validate()?;
        match self.kind {
            LossKind::Ma | LossKind::Cdt => {
                let Some(d) = &self.delta else { return invalid("MA/CDT losses need delta") };
                if d.len() != c || d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return invalid(format!("delta must hold {c} positive finite values"));
                }
            }
            LossKind::La => {
                let Some(i) = &self.iota else { return invalid("LA loss needs iota") };
                if i.len() != c || i.iter().any(|v| !v.is_finite()) {
                    return invalid(format!("iota must hold {c} finite values"));
                }
            }
            LossKind::Ce => {}
        }
        Ok(())
    }

    fn delta(&self, k: usize) -> f64 {
        self.delta.as_ref().map_or(1.0, |d| d[k])
    }

    /// Maps raw logits z of a point with label y to the logits fed to softmax,
    /// returning them together with d t_k / d z_k (the map is diagonal).
    fn transform(&self, z: &[f64], y: usize, t: &mut [f64], scale: &mut [f64]) {
        for k in 0..z.len() {
            let (tk, sk) = match self.kind {
                LossKind::Ce => (z[k], 1.0),
                LossKind::Ma => (z[k] / self.delta(y), 1.0 / self.delta(y)),
                LossKind::Cdt => (z[k] / self.delta(k), 1.0 / self.delta(k)),
                LossKind::La => (z[k] + self.iota.as_ref().unwrap()[k], 1.0),
            };
            t[k] = tk;
            scale[k] = sk;
        }
    }
}

/// Largest exponent max_{k≠y} (t_k − t_y) of one point.
fn top_gap(t: &[f64], y: usize) -> f64 {
    t.iter().enumerate().filter(|&(k, _)| k != y).map(|(_, &v)| v - t[y]).fold(f64::NEG_INFINITY, f64::max)
}

/// Per-point cross-entropy log(1 + Σ_{k≠y} e^{t_k − t_y}) and its gradient in t,
/// both divided by e^shift. `shift` must be 0 or at least the point's top gap.
fn point_loss(t: &[f64], y: usize, shift: f64, grad: &mut [f64]) -> f64 {
    if shift < 0.0 || top_gap(t, y) <= 0.0 {
        // small-loss regime: ln(1 + s) = s · ln_1p(s)/s keeps precision
        let mut scaled = 0.0;
        for (k, g) in grad.iter_mut().enumerate() {
            *g = if k == y { 0.0 } else { (t[k] - t[y] - shift).exp() };
            scaled += *g;
        }
        let s = scaled * shift.exp();
        let denom = 1.0 + s;
        for (k, g) in grad.iter_mut().enumerate() {
            if k != y {
                *g /= denom;
            }
        }
        grad[y] = -scaled / denom;
        let ratio = if s > 0.0 { s.ln_1p() / s } else { 1.0 };
        scaled * ratio
    } else {
        let tmax = t.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let mut s = 0.0;
        for (k, g) in grad.iter_mut().enumerate() {
            *g = (t[k] - tmax).exp();
            s += *g;
        }
        for g in grad.iter_mut() {
            *g /= s;
        }
        grad[y] -= 1.0;
        tmax + s.ln() - t[y]
    }
}

/// Mean loss and gradients (W: d×c, b: c) at a predictor, all divided by
/// e^shift where shift ≤ 0 is returned last. Once every point is fit the
/// true loss underflows long before the scaled quantities do.
fn scaled_loss_and_grad(ds: &Dataset, spec: &LossSpec, p: &Predictor) -> (f64, DMatrix<f64>, DVector<f64>, f64) {
    let c = ds.c;
    let n = ds.len() as f64;
    let scores = decision_scores(p, &ds.x);
    let mut t = DMatrix::zeros(ds.len(), c);
    let mut scale = DMatrix::zeros(ds.len(), c);
    let mut row_t = vec![0.0; c];
    let mut row_s = vec![0.0; c];
    let mut z = vec![0.0; c];
    let mut shift = f64::NEG_INFINITY;
    for i in 0..ds.len() {
        for k in 0..c {
            z[k] = scores[(i, k)];
        }
        spec.transform(&z, ds.y[i], &mut row_t, &mut row_s);
        shift = shift.max(top_gap(&row_t, ds.y[i]));
        for k in 0..c {
            t[(i, k)] = row_t[k];
            scale[(i, k)] = row_s[k];
        }
    }
    let shift = shift.min(0.0);
    let mut gz = DMatrix::zeros(ds.len(), c);
    let mut g = vec![0.0; c];
    let mut total = 0.0;
    for i in 0..ds.len() {
        for k in 0..c {
            row_t[k] = t[(i, k)];
        }
        total += point_loss(&row_t, ds.y[i], shift, &mut g);
        for k in 0..c {
            gz[(i, k)] = g[k] * scale[(i, k)] / n;
        }
    }
    let gw = &ds.x * &gz;
    let gb = DVector::from_fn(c, |k, _| gz.column(k).sum());
    (total / n, gw, gb, shift)
}

fn loss_and_grad(ds: &Dataset, spec: &LossSpec, p: &Predictor) -> (f64, DMatrix<f64>, DVector<f64>) {
    let (l, gw, gb, shift) = scaled_loss_and_grad(ds, spec, p);
    let f = shift.exp();
    (l * f, gw * f, gb * f)
}

/// Mean loss of a predictor on a dataset.
pub fn loss_value(ds: &Dataset, spec: &LossSpec, p: &Predictor) -> Result<f64> {
    check(ds, spec, p)?;
    Ok(loss_and_grad(ds, spec, p).0)
}

/// Gradients of the mean loss with respect to W and b.
pub fn gradient(ds: &Dataset, spec: &LossSpec, p: &Predictor) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check(ds, spec, p)?;
    let (_, gw, gb) = loss_and_grad(ds, spec, p);
    Ok((gw, gb))
}

fn check(ds: &Dataset, spec: &LossSpec, p: &Predictor) -> Result<()> {
    if ds.is_empty() {
        return invalid("empty dataset");
    }
    spec.validate(ds.c)?;
    if p.w.nrows() != ds.dim() || p.classes() != ds.c {
        return invalid("predictor shape does not match the dataset");
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum StepRule {
    /// η = factor / β with β the smoothness bound of the loss in the extended space.
    Fixed {
        #[serde(default = "default_fixed_factor")]
        factor: f64,
    },
    /// η_t = factor · L(t) / ‖∇L(t)‖².
    Polyak {
        #[serde(default = "default_polyak_factor")]
        factor: f64,
    },
}

fn default_fixed_factor() -> f64 {
    0.9
}

fn default_polyak_factor() -> f64 {
    0.05
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Polyak { factor: default_polyak_factor() }
    }
}

/// Smoothness bound max_i (‖x_i‖² + 1/ρ) / min_k δ_k² of the mean loss.
pub fn smoothness_bound(ds: &Dataset, spec: &LossSpec) -> f64 {
    let max_sq = ds.x.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    let dmin = spec.delta.as_ref().map_or(1.0, |d| d.iter().cloned().fold(f64::INFINITY, f64::min));
    let rho_inv = match spec.rho {
        Rho::Finite(0.0) => f64::INFINITY,
        r => r.inverse(),
    };
    (max_sq + rho_inv) / (dmin * dmin)
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub loss: f64,
    pub train_error: f64,
    pub w_norm: f64,
    pub predictor: Predictor,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: LossSpec,
    pub snapshots: Vec<Snapshot>,
    /// Set when the gradient vanished and no further step was possible.
    pub stopped_at: Option<usize>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn final_predictor(&self) -> &Predictor {
        &self.last().predictor
    }

    /// CSV with columns step,loss,train_error,cosine_to_reference,w_norm.
    /// The cosine column is empty when no reference is given.
    pub fn write_csv<W: Write>(&self, mut w: W, reference: Option<&Predictor>) -> Result<()> {
        writeln!(w, "step,loss,train_error,cosine_to_reference,w_norm")?;
        for s in &self.snapshots {
            let cos = reference.map(|r| direction_cosine(&s.predictor, r, self.spec.rho));
            let cos = cos.map_or(String::new(), |v| format!("{v:.12}"));
            writeln!(w, "{},{:.12e},{:.6},{},{:.12e}", s.step, s.loss, s.train_error, cos, s.w_norm)?;
        }
        Ok(())
    }
}

/// Steps 0, 1, 2, ... spaced by roughly 10% up to and including `steps`.
pub fn geometric_checkpoints(steps: usize) -> Vec<usize> {
    let mut out = vec![0];
    let mut x = 1.0_f64;
    while (x as usize) < steps {
        let s = x as usize;
        if s > *out.last().unwrap() {
            out.push(s);
        }
        x = (x * 1.1).max(x + 1.0);
    }
    if steps > 0 {
        out.push(steps);
    }
    out
}

fn train_error_of(ds: &Dataset, p: &Predictor) -> f64 {
    let pred = crate::model::argmax_rows(&decision_scores(p, &ds.x));
    pred.iter().zip(&ds.y).filter(|(a, b)| a != b).count() as f64 / ds.len() as f64
}

/// Runs full-batch GD from W = 0, b = 0.
pub fn gd_train(ds: &Dataset, spec: &LossSpec, steps: usize, rule: StepRule) -> Result<Trajectory> {
    if ds.is_empty() {
        return invalid("empty dataset");
    }
    spec.validate(ds.c)?;
    if spec.rho == Rho::Finite(0.0) {
        return invalid("gradient descent needs rho > 0 (rho = 0 makes the bias step unbounded)");
    }
    let factor = match rule {
        StepRule::Fixed { factor } | StepRule::Polyak { factor } => factor,
    };
    if !(factor > 0.0) || !factor.is_finite() {
        return invalid("step factor must be positive");
    }
    let fixed_eta = factor / smoothness_bound(ds, spec);
    let rho_inv = spec.rho.inverse();
    let learn_bias = !spec.rho.is_infinite();

    let checkpoints = geometric_checkpoints(steps);
    let mut next_cp = 0;
    let mut p = Predictor::zeros(ds.dim(), ds.c);
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut stopped_at = None;
    let mut last_finite = p.clone();

    for step in 0..=steps {
        let (scaled, gw, gb, shift) = scaled_loss_and_grad(ds, spec, &p);
        let loss = scaled * shift.exp();
        if !loss.is_finite() || p.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step, last_finite: Box::new(last_finite) });
        }
        last_finite = p.clone();
        if next_cp < checkpoints.len() && checkpoints[next_cp] == step {
            snapshots.push(Snapshot {
                step,
                loss,
                train_error: train_error_of(ds, &p),
                w_norm: p.w.norm(),
                predictor: p.clone(),
            });
            next_cp += 1;
        }
        if step == steps {
            break;
        }
        // squared gradient norm in the extended space: the bias weight is √ρ b
        // η·∇L is invariant to the common e^shift factor, so Polyak steps use
        // the scaled values and fixed steps undo the scaling.
        let gsq = gw.norm_squared() + if learn_bias { gb.norm_squared() * rho_inv } else { 0.0 };
        let eta = match rule {
            StepRule::Fixed { .. } => fixed_eta * shift.exp(),
            StepRule::Polyak { factor } => {
                if scaled == 0.0 || gsq == 0.0 || !gsq.is_finite() {
                    stopped_at = Some(step);
                    break;
                }
                factor * scaled / gsq
            }
        };
        if eta == 0.0 {
            stopped_at = Some(step);
            break;
        }
        p.w -= &gw * eta;
        if learn_bias {
            p.b -= &gb * (eta * rho_inv);
        }
    }
    if let Some(step) = stopped_at.filter(|&s| snapshots.last().map(|l| l.step) != Some(s)) {
        let (loss, _, _) = loss_and_grad(ds, spec, &p);
        snapshots.push(Snapshot { step, loss, train_error: train_error_of(ds, &p), w_norm: p.w.norm(), predictor: p });
    }
    Ok(Trajectory { spec: spec.clone(), snapshots, stopped_at })
}

/// Cosine between [W1 | √ρ b1] and [W2 | √ρ b2]; the bias is ignored at ρ = ∞.
pub fn direction_cosine(p1: &Predictor, p2: &Predictor, rho: Rho) -> f64 {
    let weight = match rho {
        Rho::Infinite => 0.0,
        Rho::Finite(r) => r,
    };
    let dot = p1.w.dot(&p2.w) + weight * p1.b.dot(&p2.b);
    let n1 = p1.w.norm_squared() + weight * p1.b.norm_squared();
    let n2 = p2.w.norm_squared() + weight * p2.b.norm_squared();
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    (dot / (n1.sqrt() * n2.sqrt())).clamp(-1.0, 1.0)
}
