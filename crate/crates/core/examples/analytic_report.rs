//! Predicted per-class errors of max-margin, margin-adjusted and logit-adjusted
//! classifiers, both at finite d and in the large-d limit.

use imbalance_lab::analytic::*;
use imbalance_lab::model::{make_instance, Rho};
use imbalance_lab::tuners::{method_coefficients, Schedule};

fn main() -> imbalance_lab::Result<()> {
    let inst = make_instance(4, 100_000, &[5, 50, 100, 200], &[0.5, 0.5, 0.5, 0.5], 0)?;
    let mc = McOptions::default();
    let rho = Rho::Finite(1.0);

    let candidates = [
        ("mm rho=inf", mm_coefficients(&inst, Rho::Infinite)?),
        ("mm rho=1", mm_coefficients(&inst, rho)?),
        // the schedules carry their large-d expansions, which limit mode needs
        ("ma tuned", method_coefficients(&inst, Method::Ma, &Schedule::MaStarPower(1.0), Rho::Infinite)?),
        ("la tuned", method_coefficients(&inst, Method::La, &Schedule::LaStarScaled(1.0), rho)?),
    ];
    for (name, coeffs) in candidates {
        let coeffs = reduced_optimum(&inst, &coeffs)?;
        let finite = analytic_error_report(&inst, &coeffs, Mode::FiniteD, mc)?;
        let limit = analytic_error_report(&inst, &coeffs, Mode::Limit, mc)?;
        let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>().join(" ");
        println!("{name:<11} finite-d [{}]  limit [{}]", fmt(&finite.per_class_error), fmt(&limit.per_class_error));
    }
    Ok(())
}
