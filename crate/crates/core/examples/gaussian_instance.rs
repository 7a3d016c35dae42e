//! Build an imbalanced Gaussian mixture, draw a training set and check how
//! closely its Gram matrix follows the block-diagonal expectation.

use imbalance_lab::model::*;

fn main() -> imbalance_lab::Result<()> {
    let n = [5, 20, 80];
    let s = [1.0, 1.0, 1.0];
    for d in [1_000, 10_000, 100_000] {
        let inst = make_instance(3, d, &n, &s, 7)?;
        let ds = sample_train(&inst);
        let gap = kernel_concentration(&ds, &inst);
        println!("d={d:>7}  xi={:?}  ||K - E K||_op = {gap:.4}", inst.xis());
    }

    // per-class noise streams: growing one class leaves the others' points alone
    let a = sample_train(&make_instance(3, 500, &n, &s, 1)?);
    let b = sample_train(&make_instance(3, 500, &[5, 20, 81], &s, 1)?);
    println!("first 25 columns unchanged after adding a class-2 point: {}", a.x.columns(0, 25) == b.x.columns(0, 25));

    let test = sample_test(&make_instance(3, 500, &n, &s, 1)?, 100, 2)?;
    println!("test set counts {:?}", test.class_counts());
    Ok(())
}
