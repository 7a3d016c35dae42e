//! Gradient descent on cross-entropy and margin-adjusted losses, tracking the
//! direction of the iterates against the exact margin solution.

use imbalance_lab::gd::*;
use imbalance_lab::margin::{solve_primal, MarginProblem};
use imbalance_lab::model::*;

fn main() -> imbalance_lab::Result<()> {
    let inst = make_instance(4, 1_000, &[5, 10, 20, 40], &[1.0; 4], 3)?;
    let ds = sample_train(&inst);
    let rho = Rho::Infinite;
    let delta = vec![1.0, 0.8, 0.6, 0.4];

    let mm = solve_primal(&ds, &MarginProblem::max_margin(4, rho))?.predictor;
    let ma = solve_primal(&ds, &MarginProblem::margin_adjust(delta.clone(), rho))?.predictor;
    let runs = [
        ("ce", LossSpec::ce(rho), &mm),
        ("la", LossSpec::la(vec![0.5, 0.2, -0.1, -0.6], rho), &mm),
        ("ma", LossSpec::ma(delta, rho), &ma),
    ];
    for (name, spec, reference) in runs {
        let traj = gd_train(&ds, &spec, 20_000, StepRule::default())?;
        let path: Vec<String> = traj
            .snapshots
            .iter()
            .filter(|s| s.step > 0)
            .step_by(16)
            .map(|s| format!("{}:{:.4}", s.step, direction_cosine(&s.predictor, reference, rho)))
            .collect();
        println!("{name}: cosine to margin solution {}  final |W| {:.1}", path.join(" "), traj.last().w_norm);
    }

    let traj = gd_train(&ds, &LossSpec::ce(rho), 2_000, StepRule::Polyak { factor: 0.05 })?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv, Some(&mm))?;
    println!("{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
