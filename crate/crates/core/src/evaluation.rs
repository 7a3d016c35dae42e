//! Empirical test metrics: per-class, worst-class and balanced error, macro F1, confusion.

use crate::error::{invalid, Result};
use crate::model::{argmax_rows, decision_scores, Dataset, Predictor};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_class_error: Vec<f64>,
    pub worst_class_error: f64,
    pub balanced_error: f64,
    pub macro_f1: f64,
    /// confusion[y][k] counts class-y points predicted as k.
    pub confusion: Vec<Vec<usize>>,
    /// pairwise[y][k]: fraction of class-y points where class k outscores y.
    pub pairwise: Vec<Vec<f64>>,
}

impl ErrorReport {
    pub fn classes(&self) -> usize {
        self.per_class_error.len()
    }

    /// Fraction of all points misclassified, ignoring class balance.
    pub fn overall_error(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let right: usize = (0..self.classes()).map(|y| self.confusion[y][y]).sum();
        (total - right) as f64 / total as f64
    }

    pub fn max_pairwise(&self) -> f64 {
        self.pairwise.iter().flatten().cloned().fold(0.0, f64::max)
    }

    pub fn write_confusion_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let c = self.classes();
        let header: Vec<String> = (1..=c).map(|k| format!("pred_{k}")).collect();
        writeln!(w, "label,{}", header.join(","))?;
        for (y, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", y + 1, cells.join(","))?;
        }
        Ok(())
    }
}

/// Class k beats y when its score is higher, or equal with a smaller index
/// (the argmax tie rule). Ties have probability zero for Gaussian data.
fn beats(sk: f64, k: usize, sy: f64, y: usize) -> bool {
    sk > sy || (sk == sy && k < y)
}

/// Builds a report from a score matrix (M×c) and labels.
///
/// Classes with no test points get error 0 and are left out of the balanced
/// error and macro F1 averages.
pub fn evaluate_scores(scores: &DMatrix<f64>, labels: &[usize], c: usize) -> Result<ErrorReport> {
    if labels.is_empty() {
        return invalid("empty test set");
    }
    if scores.nrows() != labels.len() || scores.ncols() != c {
        return invalid(format!("scores are {}x{}, expected {}x{c}", scores.nrows(), scores.ncols(), labels.len()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return invalid(format!("label {} outside 1..={c}", l + 1));
    }
    let pred = argmax_rows(scores);
    let mut confusion = vec![vec![0usize; c]; c];
    let mut above = vec![vec![0usize; c]; c];
    for (i, (&y, &p)) in labels.iter().zip(&pred).enumerate() {
        confusion[y][p] += 1;
        for k in 0..c {
            if k != y && beats(scores[(i, k)], k, scores[(i, y)], y) {
                above[y][k] += 1;
            }
        }
    }
    let counts: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let present: Vec<usize> = (0..c).filter(|&y| counts[y] > 0).collect();
    let per_class_error: Vec<f64> = (0..c)
        .map(|y| if counts[y] == 0 { 0.0 } else { 1.0 - confusion[y][y] as f64 / counts[y] as f64 })
        .collect();
    let pairwise = (0..c)
        .map(|y| (0..c).map(|k| if counts[y] == 0 { 0.0 } else { above[y][k] as f64 / counts[y] as f64 }).collect())
        .collect();
    let worst = per_class_error.iter().cloned().fold(0.0, f64::max);
    let balanced = present.iter().map(|&y| per_class_error[y]).sum::<f64>() / present.len() as f64;
    let f1 = |y: usize| {
        let tp = confusion[y][y] as f64;
        let predicted: usize = (0..c).map(|r| confusion[r][y]).sum();
        let denom = counts[y] as f64 + predicted as f64;
        if denom == 0.0 { 0.0 } else { 2.0 * tp / denom }
    };
    let macro_f1 = present.iter().map(|&y| f1(y)).sum::<f64>() / present.len() as f64;
    Ok(ErrorReport { per_class_error, worst_class_error: worst, balanced_error: balanced, macro_f1, confusion, pairwise })
}

pub fn evaluate(p: &Predictor, test: &Dataset) -> Result<ErrorReport> {
    if p.classes() != test.c || p.w.nrows() != test.dim() {
        return invalid("predictor shape does not match the test set");
    }
    if test.is_empty() {
        return invalid("empty test set");
    }
    evaluate_scores(&decision_scores(p, &test.x), &test.y, test.c)
}

/// Fraction of class-y test points where class k outscores y.
pub fn pairwise_empirical(p: &Predictor, test: &Dataset, y: usize, k: usize) -> Result<f64> {
    if y >= test.c || k >= test.c {
        return invalid("class index out of range");
    }
    let idx: Vec<usize> = (0..test.len()).filter(|&i| test.y[i] == y).collect();
    if idx.is_empty() {
        return invalid(format!("no test points of class {}", y + 1));
    }
    if y == k {
        return Ok(0.0);
    }
    let s = decision_scores(p, &test.subset(&idx).x);
    let hits = (0..idx.len()).filter(|&i| beats(s[(i, k)], k, s[(i, y)], y)).count();
    Ok(hits as f64 / idx.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sandwich {
    /// max pairwise ≤ worst-class error
    pub lower: bool,
    /// worst-class error ≤ c · max pairwise
    pub upper: bool,
}

impl Sandwich {
    pub fn holds(self) -> bool {
        self.lower && self.upper
    }
}

/// Checks, per class, max_k Err_{y→k} ≤ Err_y ≤ c · max_k Err_{y→k} and
/// reports the conjunction over classes.
pub fn sandwich_check(report: &ErrorReport) -> Sandwich {
    let c = report.classes();
    let eps = 1e-12;
    let mut lower = true;
    let mut upper = true;
    for y in 0..c {
        let m = report.pairwise[y].iter().cloned().fold(0.0, f64::max);
        let e = report.per_class_error[y];
        lower &= m <= e + eps;
        upper &= e <= c as f64 * m + eps;
    }
    Sandwich { lower, upper }
}
