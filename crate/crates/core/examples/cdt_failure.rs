//! An instance where every class-dependent temperature schedule keeps the
//! worst-class error near one half while tuned margins drive it close to zero.

use imbalance_lab::experiments::cdt_failure_report;

fn main() -> imbalance_lab::Result<()> {
    let gammas: Vec<f64> = (0..=12).map(|k| k as f64 * 0.25).collect();
    for (eps, c) in [(0.1, 3), (0.05, 3), (0.2, 4)] {
        let r = cdt_failure_report(eps, c, &gammas)?;
        println!(
            "eps {eps:<4} c={c}  N={:?}  min cdt bound {:.3}  tuned margin bound {:.4}  separation {}",
            r.n, r.min_cdt_bound, r.wcelb_ma_opt_no_bias, r.separation_holds
        );
    }
    Ok(())
}
