//! Sampling training Gram matrices directly at very large d, without ever
//! materialising the d-dimensional points.

use imbalance_lab::evaluation::evaluate_scores;
use imbalance_lab::margin::{solve_kernel, MarginProblem};
use imbalance_lab::model::*;
use imbalance_lab::sampler::sample_gram;

fn main() -> imbalance_lab::Result<()> {
    let problem = MarginProblem::max_margin(3, Rho::Infinite);
    for d in [10_000, 1_000_000, 100_000_000] {
        let inst = make_instance(3, d, &[5, 40, 200], &[1.0; 3], 2)?;
        let g = sample_gram(&inst)?;
        let sol = solve_kernel(&g.kernel(), &g.labels, &problem)?;
        let (scores, labels) = g.test_scores(&[(&sol.beta, &sol.b)], 2_000, 3)?;
        let r = evaluate_scores(&scores[0], &labels, 3)?;
        println!("d={d:>11}  per-class test error {:.3?}", r.per_class_error);
    }
    Ok(())
}
