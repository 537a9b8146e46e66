//! Monte-Carlo harness: simulate many labeled trees, run the recovery
//! pipeline across a grid of observation windows, and aggregate the five
//! error curves into CSV and SVG outputs.
//!
//! One tree per replicate is simulated to the deepest window and then
//! re-windowed for every `h`, so adjacent grid points share sampling noise.
//! Replicates run concurrently on independent seed streams; records are
//! sorted by `(replicate, h)` before any aggregation or output, which makes
//! the files byte-identical across thread counts.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{self, CriterionReport, DivergenceError, SolverConfig};
use crate::estimate::{normalized_transform_error, run_pipeline};
use crate::prob::{l1_distance, special_law, Distribution, ProbError, TransformFn};
use crate::tree::{simulate_sst_with_budget, DEFAULT_NODE_BUDGET};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Every replicate failed; there is nothing to aggregate or plot.
    #[error("no successful records to aggregate")]
    EmptyOutput,
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_h_max() -> u32 {
    125
}
fn default_h_step() -> u32 {
    5
}
fn default_h_min() -> u32 {
    5
}
fn default_replicates() -> u32 {
    50
}
fn default_node_budget() -> u64 {
    DEFAULT_NODE_BUDGET
}

/// Full description of one study; the JSON config file mirrors these field
/// names. Only `mu`, `f`, `master_seed`, and `output_dir` are required.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mu: Vec<f64>,
    pub f: Vec<f64>,
    #[serde(default = "default_h_max")]
    pub h_max: u32,
    #[serde(default = "default_h_step")]
    pub h_step: u32,
    #[serde(default = "default_h_min")]
    pub h_min: u32,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_node_budget")]
    pub node_budget: u64,
}

impl ExperimentConfig {
    /// Checks the grid invariants and materializes the model laws.
    pub fn validate(&self) -> Result<(Distribution, TransformFn), ExperimentError> {
        if self.h_min < 1 {
            return Err(ExperimentError::InvalidConfig("h_min must be >= 1".into()));
        }
        if self.h_min > self.h_max {
            return Err(ExperimentError::InvalidConfig(format!(
                "h_min = {} exceeds h_max = {}",
                self.h_min, self.h_max
            )));
        }
        if self.h_step < 1 {
            return Err(ExperimentError::InvalidConfig("h_step must be >= 1".into()));
        }
        if self.replicates < 1 {
            return Err(ExperimentError::InvalidConfig(
                "replicates must be >= 1".into(),
            ));
        }
        let mu = Distribution::new(self.mu.clone())?;
        let f = TransformFn::new(self.f.clone())?;
        Ok((mu, f))
    }

    /// Observation windows probed for each replicate.
    pub fn h_grid(&self) -> Vec<u32> {
        (self.h_min..=self.h_max)
            .step_by(self.h_step as usize)
            .collect()
    }
}

/// Pipeline error at one `(replicate, h)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub h: u32,
    pub replicate: u32,
    /// L1 gap between the raw birth-law estimate and the truth.
    pub err_mu_hat: f64,
    /// Same for the branch-corrected estimate.
    pub err_mu_star: f64,
    /// L1 gap between tilt weights, both on the unit-tilt-mass scale.
    pub err_f_norm: f64,
    /// L1 gap between the special-lineage law estimate and the truth.
    pub err_nu: f64,
    /// Fraction of the spine not recovered: `1 - overlap`.
    pub err_spine: f64,
    pub tree_size: usize,
    /// Identified spine prefix length forced by the window alone.
    pub k_h: usize,
}

/// A replicate (or one of its windows) that produced no record.
#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub replicate: u32,
    /// `None` means the simulation itself failed, losing every window.
    pub h: Option<u32>,
    pub reason: String,
}

/// Per-window mean and median of each error, plus how many replicates are
/// missing from that window (simulation failures count everywhere).
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub h: u32,
    pub mean_err_mu_hat: f64,
    pub median_err_mu_hat: f64,
    pub mean_err_mu_star: f64,
    pub median_err_mu_star: f64,
    pub mean_err_f_norm: f64,
    pub median_err_f_norm: f64,
    pub mean_err_nu: f64,
    pub median_err_nu: f64,
    pub mean_err_spine: f64,
    pub median_err_spine: f64,
    pub failures: u32,
}

/// Everything one run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub criterion: CriterionReport,
    pub records: Vec<ErrorRecord>,
    pub failures: Vec<FailureRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// Per-replicate seed stream: a SplitMix64 scramble of the master seed and
/// the replicate index, so replicates are independent and insertion of new
/// ones never shifts existing streams.
pub fn stream_seed(master_seed: u64, replicate: u64) -> u64 {
    let mut z = master_seed ^ replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_replicate(
    cfg: &ExperimentConfig,
    mu: &Distribution,
    f: &TransformFn,
    nu: &Distribution,
    grid: &[u32],
    replicate: u32,
) -> (Vec<ErrorRecord>, Vec<FailureRecord>) {
    let seed = stream_seed(cfg.master_seed, u64::from(replicate));
    let tree = match simulate_sst_with_budget(mu, f, cfg.h_max, seed, cfg.node_budget) {
        Ok(t) => t,
        Err(e) => {
            return (
                Vec::new(),
                vec![FailureRecord {
                    replicate,
                    h: None,
                    reason: e.to_string(),
                }],
            )
        }
    };

    let mut records = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for &h in grid {
        let cell = (|| -> Result<ErrorRecord, String> {
            let observed = tree
                .observe(h)
                .and_then(|o| o.with_n_max(mu.n_max()))
                .map_err(|e| e.to_string())?;
            let bundle = run_pipeline(&observed).map_err(|e| e.to_string())?;
            let overlap = bundle
                .true_spine_overlap
                .ok_or_else(|| "tree carries no spine labels".to_string())?;
            let err = |a: &Distribution, b: &Distribution| {
                l1_distance(a.probs(), b.probs()).map_err(|e| e.to_string())
            };
            Ok(ErrorRecord {
                h,
                replicate,
                err_mu_hat: err(&bundle.mu_hat, mu)?,
                err_mu_star: err(&bundle.mu_star, mu)?,
                err_f_norm: normalized_transform_error(&bundle.f_hat, f, mu)
                    .map_err(|e| e.to_string())?,
                err_nu: err(&bundle.nu_hat, nu)?,
                err_spine: 1.0 - overlap,
                tree_size: bundle.num_observed,
                k_h: bundle.identified_prefix_len,
            })
        })();
        match cell {
            Ok(record) => records.push(record),
            Err(reason) => failures.push(FailureRecord {
                replicate,
                h: Some(h),
                reason,
            }),
        }
    }
    (records, failures)
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn aggregate(records: &[ErrorRecord], failures: &[FailureRecord], grid: &[u32]) -> Vec<AggregateRow> {
    let mut rows = Vec::with_capacity(grid.len());
    for &h in grid {
        let cells: Vec<&ErrorRecord> = records.iter().filter(|r| r.h == h).collect();
        if cells.is_empty() {
            continue;
        }
        let missing = failures
            .iter()
            .filter(|fr| fr.h.is_none() || fr.h == Some(h))
            .count() as u32;
        let stat = |pick: fn(&ErrorRecord) -> f64| -> (f64, f64) {
            let mut values: Vec<f64> = cells.iter().map(|r| pick(r)).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            (mean, median(&mut values))
        };
        let (mean_err_mu_hat, median_err_mu_hat) = stat(|r| r.err_mu_hat);
        let (mean_err_mu_star, median_err_mu_star) = stat(|r| r.err_mu_star);
        let (mean_err_f_norm, median_err_f_norm) = stat(|r| r.err_f_norm);
        let (mean_err_nu, median_err_nu) = stat(|r| r.err_nu);
        let (mean_err_spine, median_err_spine) = stat(|r| r.err_spine);
        rows.push(AggregateRow {
            h,
            mean_err_mu_hat,
            median_err_mu_hat,
            mean_err_mu_star,
            median_err_mu_star,
            mean_err_f_norm,
            median_err_f_norm,
            mean_err_nu,
            median_err_nu,
            mean_err_spine,
            median_err_spine,
            failures: missing,
        });
    }
    rows
}

/// Runs the full study in memory: criterion first (with a warning when the
/// regime predicts an unrecoverable spine), then all replicates in parallel.
/// Deterministic given the master seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let (mu, f) = cfg.validate()?;
    let nu = special_law(&mu, &f)?;

    let criterion = divergence::criterion(&mu, &f, &SolverConfig::default())?;
    if criterion.criterion >= 0.0 {
        log::warn!(
            "criterion {:.6} is nonnegative: the spine is expected to drown in this regime",
            criterion.criterion
        );
    } else {
        log::info!("criterion {:.6}", criterion.criterion);
    }

    let grid = cfg.h_grid();
    let per_replicate: Vec<(Vec<ErrorRecord>, Vec<FailureRecord>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &mu, &f, &nu, &grid, r))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (recs, fails) in per_replicate {
        records.extend(recs);
        failures.extend(fails);
    }
    records.sort_by_key(|r| (r.replicate, r.h));
    failures.sort_by_key(|fr| (fr.replicate, fr.h));
    for failure in &failures {
        log::warn!(
            "replicate {} h {:?} failed: {}",
            failure.replicate,
            failure.h,
            failure.reason
        );
    }

    let aggregates = aggregate(&records, &failures, &grid);
    Ok(ExperimentOutput {
        criterion,
        records,
        failures,
        aggregates,
    })
}

pub fn write_records_csv<W: Write>(records: &[ErrorRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "h,replicate,err_mu_hat,err_mu_star,err_f_norm,err_nu,err_spine,tree_size,k_h"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.h,
            r.replicate,
            r.err_mu_hat,
            r.err_mu_star,
            r.err_f_norm,
            r.err_nu,
            r.err_spine,
            r.tree_size,
            r.k_h
        )?;
    }
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "h,mean_err_mu_hat,median_err_mu_hat,mean_err_mu_star,median_err_mu_star,\
         mean_err_f_norm,median_err_f_norm,mean_err_nu,median_err_nu,\
         mean_err_spine,median_err_spine,failures"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.h,
            r.mean_err_mu_hat,
            r.median_err_mu_hat,
            r.mean_err_mu_star,
            r.median_err_mu_star,
            r.mean_err_f_norm,
            r.median_err_f_norm,
            r.mean_err_nu,
            r.median_err_nu,
            r.mean_err_spine,
            r.median_err_spine,
            r.failures
        )?;
    }
    Ok(())
}

const SVG_CURVES: [(&str, &str, fn(&AggregateRow) -> f64); 5] = [
    ("mu_hat", "#1f77b4", |r| r.mean_err_mu_hat),
    ("mu_star", "#d62728", |r| r.mean_err_mu_star),
    ("f_norm", "#2ca02c", |r| r.mean_err_f_norm),
    ("nu", "#9467bd", |r| r.mean_err_nu),
    ("spine", "#ff7f0e", |r| r.mean_err_spine),
];

/// Five mean-error polylines against the window size. Non-finite means
/// (possible for the tilt error at tiny windows) are skipped pointwise.
pub fn write_errors_svg<W: Write>(rows: &[AggregateRow], out: &mut W) -> std::io::Result<()> {
    let (width, height) = (640.0, 420.0);
    let (x0, x1, y0, y1) = (60.0, 610.0, 380.0, 20.0);
    let h_lo = rows.first().map_or(0.0, |r| f64::from(r.h));
    let h_hi = rows.last().map_or(1.0, |r| f64::from(r.h));
    let h_span = if h_hi > h_lo { h_hi - h_lo } else { 1.0 };
    let mut v_hi = 0.0_f64;
    for row in rows {
        for (_, _, pick) in SVG_CURVES {
            let v = pick(row);
            if v.is_finite() {
                v_hi = v_hi.max(v);
            }
        }
    }
    if v_hi <= 0.0 {
        v_hi = 1.0;
    }
    let sx = |h: f64| x0 + (h - h_lo) / h_span * (x1 - x0);
    let sy = |v: f64| y0 + v / v_hi * (y1 - y0);

    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    )?;
    writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    )?;
    writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>"
    )?;
    writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    )?;
    for frac in [0.0, 0.5, 1.0] {
        let h = h_lo + frac * h_span;
        let v = frac * v_hi;
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            sx(h),
            y0 + 16.0,
            h.round()
        )?;
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>",
            x0 - 6.0,
            sy(v) + 4.0,
            v
        )?;
    }
    writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">observation window h</text>",
        (x0 + x1) / 2.0,
        height - 6.0
    )?;
    writeln!(
        out,
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">mean error</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )?;

    for (idx, (label, color, pick)) in SVG_CURVES.iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .filter(|r| pick(r).is_finite())
            .map(|r| format!("{:.2},{:.2}", sx(f64::from(r.h)), sy(pick(r))))
            .collect();
        if !points.is_empty() {
            writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                points.join(" ")
            )?;
        }
        let ly = 28.0 + 18.0 * idx as f64;
        writeln!(
            out,
            "<line x1=\"500\" y1=\"{ly}\" x2=\"530\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        )?;
        writeln!(out, "<text x=\"536\" y=\"{}\">{label}</text>", ly + 4.0)?;
    }
    writeln!(out, "</svg>")
}

/// Writes `records.csv`, `aggregate.csv`, and `errors.svg` into a directory.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<(), ExperimentError> {
    if output.aggregates.is_empty() {
        return Err(ExperimentError::EmptyOutput);
    }
    std::fs::create_dir_all(dir)?;
    let mut records = std::fs::File::create(dir.join("records.csv"))?;
    write_records_csv(&output.records, &mut records)?;
    let mut aggregates = std::fs::File::create(dir.join("aggregate.csv"))?;
    write_aggregate_csv(&output.aggregates, &mut aggregates)?;
    let mut svg = std::fs::File::create(dir.join("errors.svg"))?;
    write_errors_svg(&output.aggregates, &mut svg)?;
    Ok(())
}

/// End-to-end run: probes the output directory for writability before any
/// simulation starts, then runs the study and writes the three files.
pub fn run_to_files(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let probe = cfg.output_dir.join(".write_probe");
    std::fs::write(&probe, b"probe")?;
    std::fs::remove_file(&probe)?;

    let output = run_experiment(cfg)?;
    write_outputs(&output, &cfg.output_dir)?;
    Ok(output)
}
