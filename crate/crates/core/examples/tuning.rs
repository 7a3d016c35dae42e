//! Near-optimal margins and offsets, and the worst-class error bounds they
//! attain compared with the untuned max-margin classifier.

use imbalance_lab::model::{make_instance, Rho};
use imbalance_lab::tuners::*;

fn main() -> imbalance_lab::Result<()> {
    let n = [5, 50, 100, 200];
    for (label, s) in [("aligned", [0.5, 0.7, 0.9, 1.1]), ("equal", [0.7; 4]), ("reversed", [0.5, 0.3, 0.2, 0.1])] {
        let inst = make_instance(4, 100_000, &n, &s, 0)?;
        println!("{label} signals");
        for rho in [Rho::Infinite, Rho::Finite(1.0)] {
            println!(
                "  rho={rho:<4} delta*={:.3?}  mm {:.4}  ma* {:.4}",
                ma_delta_star(&inst, rho),
                wcelb_mm(&inst, rho)?,
                wcelb_ma_opt(&inst, rho)
            );
        }
        println!("  la* (rho=1) {:.4}", wcelb_la_star(&inst, Rho::Finite(1.0))?);
    }

    println!("long-tail profile (10 classes, 500 max, ratio 100): {:?}", exp_longtail_profile(10, 500, 100.0)?);
    Ok(())
}
