//! Exact multiclass max-margin and margin-adjusted solutions, with and
//! without a bias term, and the matching kernel-form solve.

use imbalance_lab::evaluation::evaluate;
use imbalance_lab::margin::*;
use imbalance_lab::model::*;
use imbalance_lab::tuners::ma_delta_star;

fn main() -> imbalance_lab::Result<()> {
    let inst = make_instance(3, 5_000, &[4, 30, 120], &[1.0; 3], 11)?;
    let train = sample_train(&inst);
    let test = sample_test(&inst, 500, 12)?;

    let problems = [
        ("mm", MarginProblem::max_margin(3, Rho::Infinite)),
        ("mm rho=1", MarginProblem::max_margin(3, Rho::Finite(1.0))),
        ("ma", MarginProblem::margin_adjust(ma_delta_star(&inst, Rho::Infinite), Rho::Infinite)),
        ("cdt", MarginProblem::class_dep_temp(vec![1.0, 0.3, 0.1], Rho::Infinite)),
    ];
    for (name, problem) in problems {
        let sol = solve_primal(&train, &problem)?;
        let report = evaluate(&sol.predictor, &test)?;
        println!(
            "{name:<9} kkt {:.1e}  train err {:.3}  per-class test err {:.3?}  b {:.3?}",
            sol.kkt.max_residual(),
            sol.training_error,
            report.per_class_error,
            sol.predictor.b.as_slice()
        );
    }

    let k = kernel_matrix(&train);
    let kern = solve_kernel(&k, &train.y, &MarginProblem::max_margin(3, Rho::Infinite))?;
    let p = Predictor::from_kernel(&train, kern.beta, kern.b);
    println!("kernel form worst-class error {:.3}", evaluate(&p, &test)?.worst_class_error);
    Ok(())
}
