//! Problem instances, Gaussian-mixture sampling and linear predictors.

use crate::error::{invalid, Error, Result};
use crate::rng;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::io::{BufRead, Write};
use std::path::Path;

/// Bias regularisation weight. `Infinite` pins the bias at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rho {
    Finite(f64),
    Infinite,
}

impl Rho {
    pub fn is_infinite(self) -> bool {
        matches!(self, Rho::Infinite)
    }

    /// 1/ρ, with 1/∞ = 0. Panics on ρ = 0; callers branch on that first.
    pub fn inverse(self) -> f64 {
        match self {
            Rho::Infinite => 0.0,
            Rho::Finite(r) => {
                assert!(r > 0.0, "inverse of rho = 0");
                1.0 / r
            }
        }
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            Rho::Finite(r) if !(r >= 0.0) || r.is_infinite() => {
                invalid(format!("rho must be a finite value >= 0 or Infinite, got {r}"))
            }
            _ => Ok(self),
        }
    }
}

impl std::fmt::Display for Rho {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rho::Finite(r) => write!(f, "{r}"),
            Rho::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Rho {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rho::Finite(r) => s.serialize_f64(*r),
            Rho::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Rho {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) if r.is_infinite() && r > 0.0 => Ok(Rho::Infinite),
            Raw::Num(r) => Rho::Finite(r).validate().map_err(serde::de::Error::custom),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(Rho::Infinite),
                other => other
                    .parse::<f64>()
                    .map_err(serde::de::Error::custom)
                    .and_then(|r| Rho::Finite(r).validate().map_err(serde::de::Error::custom)),
            },
        }
    }
}

/// How class means are embedded in R^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanFrame {
    /// μ_i on the i-th standard basis axis.
    #[default]
    Basis,
    /// μ_i along the columns of a random orthonormal c-frame drawn from the instance seed.
    RandomOrthonormal,
}

/// A Gaussian-mixture classification instance with σ²d = 1 and ‖μ_i‖² = s_i/√d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub c: usize,
    pub d: usize,
    pub n: Vec<usize>,
    pub s: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub frame: MeanFrame,
}

pub fn make_instance(c: usize, d: usize, n: &[usize], s: &[f64], seed: u64) -> Result<ProblemInstance> {
    ProblemInstance::new(c, d, n.to_vec(), s.to_vec(), seed)
}

impl ProblemInstance {
    pub fn new(c: usize, d: usize, n: Vec<usize>, s: Vec<f64>, seed: u64) -> Result<Self> {
        let inst = ProblemInstance { c, d, n, s, seed, frame: MeanFrame::Basis };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_frame(mut self, frame: MeanFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_dimension(&self, d: usize) -> Result<Self> {
        let mut out = self.clone();
        out.d = d;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return invalid(format!("need at least 2 classes, got {}", self.c));
        }
        if self.d < self.c {
            return invalid(format!("dimension {} is smaller than class count {}", self.d, self.c));
        }
        if self.n.len() != self.c || self.s.len() != self.c {
            return invalid("N and s must have one entry per class");
        }
        if let Some(i) = self.n.iter().position(|&v| v == 0) {
            return invalid(format!("class {} has no training samples", i + 1));
        }
        if let Some(v) = self.s.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return invalid(format!("signal strengths must be positive and finite, got {v}"));
        }
        Ok(())
    }

    pub fn sqrt_d(&self) -> f64 {
        (self.d as f64).sqrt()
    }

    pub fn sigma2(&self) -> f64 {
        1.0 / self.d as f64
    }

    /// ‖μ_i‖² = s_i/√d.
    pub fn mean_norm_sq(&self, i: usize) -> f64 {
        self.s[i] / self.sqrt_d()
    }

    pub fn mean_norms_sq(&self) -> Vec<f64> {
        (0..self.c).map(|i| self.mean_norm_sq(i)).collect()
    }

    /// ξ_i = s_i/√d + 1/N_i.
    pub fn xi(&self, i: usize) -> f64 {
        self.mean_norm_sq(i) + 1.0 / self.n[i] as f64
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.c).map(|i| self.xi(i)).collect()
    }

    pub fn n_f64(&self) -> Vec<f64> {
        self.n.iter().map(|&v| v as f64).collect()
    }

    pub fn total(&self) -> usize {
        self.n.iter().sum()
    }

    /// Class means as the columns of a d×c matrix.
    pub fn means(&self) -> DMatrix<f64> {
        let scales: Vec<f64> = (0..self.c).map(|i| self.mean_norm_sq(i).sqrt()).collect();
        match self.frame {
            MeanFrame::Basis => {
                let mut m = DMatrix::zeros(self.d, self.c);
                for (i, sc) in scales.iter().enumerate() {
                    m[(i, i)] = *sc;
                }
                m
            }
            MeanFrame::RandomOrthonormal => {
                let mut r = rng::stream(self.seed, rng::FRAME);
                let g = DMatrix::from_fn(self.d, self.c, |_, _| StandardNormal.sample(&mut r));
                let q = g.qr().q();
                let mut m = q.columns(0, self.c).into_owned();
                for (i, sc) in scales.iter().enumerate() {
                    m.column_mut(i).scale_mut(*sc);
                }
                m
            }
        }
    }
}

/// Samples stored one per column: `x` is d×N, `y` holds 0-based labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<usize>,
    pub c: usize,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<usize>, c: usize) -> Result<Self> {
        if x.ncols() != y.len() {
            return invalid(format!("{} samples but {} labels", x.ncols(), y.len()));
        }
        if let Some(&l) = y.iter().find(|&&l| l >= c) {
            return invalid(format!("label {} outside 1..={c}", l + 1));
        }
        Ok(Dataset { x, y, c })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Row indices S_k of every class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.c];
        for (j, &l) in self.y.iter().enumerate() {
            out[l].push(j);
        }
        out
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.c];
        for &l in &self.y {
            out[l] += 1;
        }
        out
    }

    /// x̄_k = Σ_{j∈S_k} x_j, as the columns of a d×c matrix.
    pub fn class_sums(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.c);
        for (j, &l) in self.y.iter().enumerate() {
            let mut col = out.column_mut(l);
            col += self.x.column(j);
        }
        out
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_columns(rows);
        let y = rows.iter().map(|&r| self.y[r]).collect();
        Dataset { x, y, c: self.c }
    }

    /// Writes `label,f0,...,f{d-1}` with 1-based labels and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("label");
        for f in 0..self.dim() {
            header.push_str(&format!(",f{f}"));
        }
        writeln!(w, "{header}")?;
        for j in 0..self.len() {
            let mut line = (self.y[j] + 1).to_string();
            for v in self.x.column(j).iter() {
                line.push_str(&format!(",{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    /// Parses the CSV layout of [`Dataset::write_csv`].
    ///
    /// With `classes = None` the class count is the largest label seen.
    pub fn read_csv<R: BufRead>(r: R, classes: Option<usize>) -> Result<Dataset> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first().map(|s| s.trim()) != Some("label") {
            return Err(Error::Parse { line: 1, msg: "header must start with `label`".into() });
        }
        let d = cols.len() - 1;
        if d == 0 {
            return Err(Error::Parse { line: 1, msg: "no feature columns".into() });
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let lineno = k + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} fields, found {}", d + 1, fields.len()),
                });
            }
            let label: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad label `{}`", fields[0]),
            })?;
            if label == 0 || classes.is_some_and(|c| label > c) {
                return Err(Error::Parse { line: lineno, msg: format!("unknown label {label}") });
            }
            labels.push(label - 1);
            for f in &fields[1..] {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad number `{f}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line: lineno, msg: format!("non-finite value `{f}`") });
                }
                values.push(v);
            }
        }
        let c = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let x = DMatrix::from_vec(d, labels.len(), values);
        Dataset::new(x, labels, c)
    }

    pub fn load_csv(path: impl AsRef<Path>, classes: Option<usize>) -> Result<Dataset> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Dataset::read_csv(f, classes)
    }
}

fn sample_classes(inst: &ProblemInstance, counts: &[usize], seed: u64, purpose: u64) -> Dataset {
    let total: usize = counts.iter().sum();
    let sigma = inst.sigma2().sqrt();
    let means = inst.means();
    let mut x = DMatrix::zeros(inst.d, total);
    let mut y = Vec::with_capacity(total);
    let mut col = 0;
    for (k, &nk) in counts.iter().enumerate() {
        let mut r = rng::stream(seed, purpose | k as u64);
        for _ in 0..nk {
            let mut xc = x.column_mut(col);
            for v in xc.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = sigma * z;
            }
            xc += means.column(k);
            y.push(k);
            col += 1;
        }
    }
    Dataset { x, y, c: inst.c }
}

/// Training set: N_k rows of class k, grouped by class, deterministic in the instance seed.
pub fn sample_train(inst: &ProblemInstance) -> Dataset {
    sample_classes(inst, &inst.n, inst.seed, rng::TRAIN)
}

/// Balanced test set with `per_class` rows per class. The means come from the
/// instance, the noise from `seed`.
pub fn sample_test(inst: &ProblemInstance, per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class < 1 {
        return invalid("per_class must be at least 1");
    }
    Ok(sample_classes(inst, &vec![per_class; inst.c], seed, rng::TEST))
}

/// Linear-kernel Gram matrix XᵀX.
pub fn kernel_matrix(ds: &Dataset) -> DMatrix<f64> {
    let k = ds.x.tr_mul(&ds.x);
    // enforce exact symmetry
    (&k + k.transpose()) * 0.5
}

/// E K for labels in class-grouped order, with the given per-class ‖μ‖² and noise σ²d.
pub fn expected_kernel_for_labels(labels: &[usize], mean_norm_sq: &[f64], noise: f64) -> DMatrix<f64> {
    let n = labels.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = if labels[i] == labels[j] { mean_norm_sq[labels[i]] } else { 0.0 };
        if i == j {
            v += noise;
        }
        v
    })
}

/// E K for the row order produced by [`sample_train`].
pub fn expected_kernel(inst: &ProblemInstance) -> DMatrix<f64> {
    let labels: Vec<usize> = inst.n.iter().enumerate().flat_map(|(k, &nk)| std::iter::repeat_n(k, nk)).collect();
    expected_kernel_for_labels(&labels, &inst.mean_norms_sq(), 1.0)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let e = SymmetricEigen::new(m.clone());
    e.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// ‖K − E K‖ against explicit per-class ‖μ‖² and noise level.
pub fn kernel_concentration_with(ds: &Dataset, mean_norm_sq: &[f64], noise: f64) -> f64 {
    let k = kernel_matrix(ds);
    let ek = expected_kernel_for_labels(&ds.y, mean_norm_sq, noise);
    symmetric_operator_norm(&(k - ek))
}

/// ‖K − E K‖ for a dataset drawn from `inst`.
pub fn kernel_concentration(ds: &Dataset, inst: &ProblemInstance) -> f64 {
    kernel_concentration_with(ds, &inst.mean_norms_sq(), 1.0)
}

/// Linear predictor with weights W (d×c) and bias b. The kernel form, when
/// present, holds β as an N×c matrix so that w_y = Σ_i β_{y[i]} x_i.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub beta: Option<DMatrix<f64>>,
}

impl Predictor {
    pub fn zeros(d: usize, c: usize) -> Self {
        Predictor { w: DMatrix::zeros(d, c), b: DVector::zeros(c), beta: None }
    }

    pub fn from_kernel(train: &Dataset, beta: DMatrix<f64>, b: DVector<f64>) -> Self {
        let w = &train.x * &beta;
        Predictor { w, b, beta: Some(beta) }
    }

    pub fn classes(&self) -> usize {
        self.b.len()
    }

    /// JSON `{W: row-major d×c array, b, meta}`.
    pub fn to_json(&self, meta: serde_json::Value) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.w.nrows()).map(|r| self.w.row(r).iter().copied().collect()).collect();
        serde_json::json!({ "W": rows, "b": self.b.as_slice(), "meta": meta })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("predictor JSON: {m}"));
        let rows = v["W"].as_array().ok_or_else(|| bad("missing W"))?;
        let b: Vec<f64> = serde_json::from_value(v["b"].clone())?;
        let c = b.len();
        let mut data = Vec::with_capacity(rows.len() * c);
        for r in rows {
            let r: Vec<f64> = serde_json::from_value(r.clone())?;
            if r.len() != c {
                return Err(bad("row length differs from bias length"));
            }
            data.extend(r);
        }
        Ok(Predictor { w: DMatrix::from_row_slice(rows.len(), c, &data), b: DVector::from_vec(b), beta: None })
    }
}

/// Scores Wᵀx + b for every column of `x`, returned as an M×c matrix.
pub fn decision_scores(p: &Predictor, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = x.tr_mul(&p.w);
    for mut row in s.row_iter_mut() {
        for (v, b) in row.iter_mut().zip(p.b.iter()) {
            *v += b;
        }
    }
    s
}

/// Argmax of each score row; ties go to the smallest class index.
pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|r| {
            let mut best = 0;
            for k in 1..r.len() {
                if r[k] > r[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn predict(p: &Predictor, x: &DMatrix<f64>) -> Vec<usize> {
    argmax_rows(&decision_scores(p, x))
}
