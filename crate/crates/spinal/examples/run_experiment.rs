//! A scaled-down Monte-Carlo study: error curves for all five estimators
//! over a grid of observation windows, written as CSV and SVG.
//!
//! The full-size study (h up to 125, 50 replicates) is what the defaults in
//! `ExperimentConfig` encode; this demo trims it to run in seconds.

use spinal::experiment::{run_to_files, ExperimentConfig};

fn main() {
    let out_dir = std::env::temp_dir().join("spinal-demo-experiment");
    let cfg = ExperimentConfig {
        mu: vec![0.35, 0.4, 0.25],
        f: vec![0.0, 1.0, 3.0],
        h_max: 50,
        h_step: 5,
        h_min: 5,
        replicates: 10,
        master_seed: 7,
        output_dir: out_dir.clone(),
        node_budget: 100_000_000,
    };

    let output = run_to_files(&cfg).unwrap();
    println!(
        "criterion {:.6} (negative: spine recoverable)",
        output.criterion.criterion
    );
    println!(
        "{} records, {} failures",
        output.records.len(),
        output.failures.len()
    );

    println!("\n h   median mu* err   median spine err   mean K_h/h");
    for row in &output.aggregates {
        let k_ratio: f64 = output
            .records
            .iter()
            .filter(|r| r.h == row.h)
            .map(|r| r.k_h as f64 / f64::from(r.h))
            .sum::<f64>()
            / output.records.iter().filter(|r| r.h == row.h).count() as f64;
        println!(
            "{:>3}   {:>13.4}   {:>16.4}   {:>10.3}",
            row.h, row.median_err_mu_star, row.median_err_spine, k_ratio
        );
    }
    println!("\nfiles in {}", out_dir.display());
}
