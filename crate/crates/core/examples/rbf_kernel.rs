//! RBF kernels on normalized features: how far the Gram matrix sits from the
//! block-plus-identity shape, and the resulting max-margin test errors.

use imbalance_lab::kernel_lab::*;
use imbalance_lab::margin::MarginProblem;
use imbalance_lab::model::*;

fn main() -> imbalance_lab::Result<()> {
    // stand-in for extracted features: a low-dimensional, strongly separated mixture
    let inst = make_instance(3, 64, &[10, 40, 160], &[25.0; 3], 0)?;
    let train = normalize_features(&sample_train(&inst));
    let test = normalize_features(&sample_test(&inst, 200, 1)?);
    let problem = MarginProblem::max_margin(3, Rho::Infinite);

    for zeta in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let k = rbf_kernel(&train.x, zeta)?;
        let fit = fit_block_identity(&k, &train.y)?;
        let run = kernel_classify(&train, &test, zeta, &problem)?;
        println!(
            "zeta {zeta:<4} fit {:.3}B + {:.3}I  distance {:.2}  worst-class err {:.3}",
            fit.alpha_block, fit.alpha_identity, fit.residual, run.report.worst_class_error
        );
    }
    Ok(())
}
