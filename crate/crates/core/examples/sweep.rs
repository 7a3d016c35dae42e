//! A small hyperparameter sweep driven by the same JSON config the CLI reads.
//! Writes results.csv and SVG plots under target/sweep-example.

use imbalance_lab::experiments::{cmd_sweep, read_results_csv, config::Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg: Config = serde_json::from_str(
        r#"{
            "instance": {"d": 20000, "n": [5, 50, 200], "s": 0.8},
            "methods": ["mm", "ma", "la"],
            "grid": {"from": 0.0, "to": 2.0, "steps": 5},
            "seeds": [0, 1, 2],
            "test_per_class": 300
        }"#,
    )?;
    let out = std::path::Path::new("target/sweep-example");
    let csv = cmd_sweep(&cfg, out)?;
    for row in read_results_csv(&csv)?.iter().filter(|r| r.metric == "worst_class_error" && r.seed == 0) {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!("{:<4} param {:.1}  empirical {}  analytic {}", row.method, row.param, show(row.value), show(row.analytic));
    }
    println!("wrote {}", csv.display());
    Ok(())
}
