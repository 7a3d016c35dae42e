//! Worst-class, balanced and macro-F1 metrics plus the pairwise-error sandwich
//! on a trained predictor.

use imbalance_lab::evaluation::*;
use imbalance_lab::margin::{solve_primal, MarginProblem};
use imbalance_lab::model::*;

fn main() -> imbalance_lab::Result<()> {
    let inst = make_instance(3, 2_000, &[3, 20, 100], &[1.0; 3], 5)?;
    let p = solve_primal(&sample_train(&inst), &MarginProblem::max_margin(3, Rho::Infinite))?.predictor;
    let test = sample_test(&inst, 1_000, 6)?;
    let r = evaluate(&p, &test)?;
    println!("per-class {:.3?}", r.per_class_error);
    println!("worst {:.3}  balanced {:.3}  macro F1 {:.3}", r.worst_class_error, r.balanced_error, r.macro_f1);
    let sw = sandwich_check(&r);
    println!("max pairwise {:.3} <= worst {:.3} <= (c-1) max pairwise: {}", r.max_pairwise(), r.worst_class_error, sw.holds());
    r.write_confusion_csv(std::io::stdout())?;
    Ok(())
}
