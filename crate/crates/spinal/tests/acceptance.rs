//! Release gate: one test per shipping requirement, each printing a single
//! verdict line (run with `--nocapture` to see them all). Numbers are stable
//! identifiers for the checks, not an ordering.

mod common;

use std::process::Command;
use std::time::Instant;

use common::{brute_force_two_point, count_pattern_lineages, random_pair, seeded_rng};
use rand::Rng;
use rayon::ThreadPoolBuilder;
use spinal::divergence::{delta_value, solve, DeltaGrid, ProblemSpec, SolverConfig};
use spinal::experiment::{run_experiment, run_to_files, ErrorRecord, ExperimentConfig};
use spinal::prob::{Distribution, TransformFn};
use spinal::spine::{identify, NodeStatus};
use spinal::tree::{simulate_gw, simulate_sst, DEFAULT_NODE_BUDGET};

fn check(number: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {number} ({name}): {verdict} - {detail}");
    assert!(pass, "acceptance {number} ({name}): {detail}");
}

fn bhattacharyya_parts(p: &Distribution, q: &Distribution) -> (f64, Vec<f64>) {
    let weights: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a * b).sqrt())
        .collect();
    let total: f64 = weights.iter().sum();
    let gm = weights.iter().map(|w| w / total).collect();
    (-2.0 * total.ln(), gm)
}

fn criterion_cli(mu: &str, f: &str) -> (f64, f64) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_spinal"))
        .args(["criterion", "--mu", mu, "--f", f])
        .output()
        .expect("binary should run");
    let secs = start.elapsed().as_secs_f64();
    assert!(
        out.status.success(),
        "criterion --mu {mu} --f {f} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json on stdout");
    (parsed["criterion"].as_f64().expect("criterion field"), secs)
}

#[test]
fn criterion_command_reproduces_the_known_bands() {
    let (sub, sub_secs) = criterion_cli("0.35,0.4,0.25", "0,1,3");
    let (sup, sup_secs) = criterion_cli("0.29,0.4,0.31", "0,1,4");
    let pass = (sub + 0.115).abs() <= 0.005
        && (sup + 0.006).abs() <= 0.005
        && sub_secs < 30.0
        && sup_secs < 30.0;
    check(
        1,
        "command line criterion bands",
        pass,
        &format!(
            "subcritical {sub:.6} (want -0.115 +- 0.005, {sub_secs:.1}s), \
             supercritical {sup:.6} (want -0.006 +- 0.005, {sup_secs:.1}s)"
        ),
    );
}

#[test]
fn unweighted_endpoint_lands_on_the_geometric_mean() {
    let config = SolverConfig::default();
    let mut rng = seeded_rng(0xACC2);
    let mut worst_gap = 0.0f64;
    let mut worst_l1 = 0.0f64;
    for trial in 0..20 {
        let n_max = 1 + (trial % 6);
        let (p, q) = random_pair(&mut rng, n_max);
        let (d_b, gm) = bhattacharyya_parts(&p, &q);
        let report = solve(&ProblemSpec::new(p, q), &config).unwrap();
        worst_gap = worst_gap.max((report.objective - d_b).abs());
        let l1 = |u: &[f64]| -> f64 { u.iter().zip(&gm).map(|(a, b)| (a - b).abs()).sum() };
        worst_l1 = worst_l1.max(l1(&report.x)).max(l1(&report.y));
    }
    let pass = worst_gap < 1e-6 && worst_l1 < 1e-6;
    check(
        2,
        "alpha 0 solution is the Bhattacharyya point",
        pass,
        &format!("20 pairs: worst value gap {worst_gap:.2e}, worst (x,y) L1 gap {worst_l1:.2e}"),
    );
}

#[test]
fn scaled_family_approaches_the_bhattacharyya_bound() {
    let config = SolverConfig::default();
    let grid = DeltaGrid::default();
    let mut rng = seeded_rng(0xACC3);
    let mut worst_rel = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut pass = true;
    for trial in 0..5 {
        let (p, q) = random_pair(&mut rng, 2 + (trial % 4));
        let (d_b, _) = bhattacharyya_parts(&p, &q);
        let probes: Vec<f64> = [1.0, 9.0, 99.0]
            .iter()
            .map(|&d| delta_value(&p, &q, d, &config).unwrap().0)
            .collect();
        worst_rel = worst_rel.max((probes[2] - d_b).abs() / d_b);
        let lowest = probes.iter().cloned().fold(f64::INFINITY, f64::min);
        for &v in &probes {
            pass = pass && v >= lowest - 1e-12 && v <= 1.05 * d_b;
        }
        for &delta in &grid.deltas {
            let (value, _) = delta_value(&p, &q, delta, &config).unwrap();
            worst_excess = worst_excess.max(value - d_b);
        }
    }
    pass = pass && worst_rel <= 0.05 && worst_excess <= 1e-8;
    check(
        3,
        "scaled family sits just under the Bhattacharyya distance",
        pass,
        &format!(
            "5 pairs: weight-99 relative gap {worst_rel:.2e} (cap 0.05), \
             worst excess over the bound {worst_excess:.2e} (cap 1e-8)"
        ),
    );
}

#[test]
fn two_point_solutions_match_a_fine_grid_search() {
    let config = SolverConfig::default();
    let mut rng = seeded_rng(0xACC4);
    let deltas = [0.0, 1.0, 10.0];
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let tp = 0.05 + 0.9 * rng.random::<f64>();
        let tq = 0.05 + 0.9 * rng.random::<f64>();
        let delta = deltas[trial % 3];
        let p = Distribution::new(vec![1.0 - tp, tp]).unwrap();
        let q = Distribution::new(vec![1.0 - tq, tq]).unwrap();
        let spec = ProblemSpec::new(p, q).with_delta(delta);
        let report = solve(&spec, &config).unwrap();
        let oracle = brute_force_two_point(tp, tq, spec.alpha, 0.0, 1000);
        worst = worst.max((report.objective - oracle).abs());
    }
    check(
        4,
        "solver matches exhaustive search on two-point supports",
        worst <= 1e-3,
        &format!("10 problems: worst objective gap {worst:.2e} at grid resolution 1e-3"),
    );
}

#[test]
fn path_counts_match_the_tagged_lineage_formula() {
    let start = Instant::now();
    let mu = Distribution::new(vec![0.35, 0.4, 0.25]).unwrap();
    let biased = mu.size_biased().unwrap();
    let exact = mu.mean().powi(3) * biased.prob(1).powi(3);
    assert!((exact - 0.064).abs() < 1e-12);

    let trials = 200_000u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for seed in 0..trials {
        let tree = simulate_gw(&mu, 3, 55_000 + seed).unwrap();
        let x = count_pattern_lineages(&tree, &[1, 1, 1]) as f64;
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / trials as f64;
    let variance = (sum_sq / trials as f64 - mean * mean).max(0.0);
    let se = (variance / trials as f64).sqrt();
    let secs = start.elapsed().as_secs_f64();
    let target = 0.063927;
    let pass = (mean - target).abs() <= 4.0 * se && secs < 60.0;
    check(
        5,
        "single-child lineages at depth 3",
        pass,
        &format!("estimate {mean:.6} vs {target} (4 se = {:.6}), {secs:.1}s", 4.0 * se),
    );
}

#[test]
fn type_identification_never_mislabels() {
    let regimes: [(&[f64], &[f64]); 3] = [
        (&[0.35, 0.4, 0.25], &[0.0, 1.0, 3.0]),
        (&[0.3, 0.4, 0.3], &[0.0, 1.0, 3.0]),
        (&[0.29, 0.4, 0.31], &[0.0, 1.0, 4.0]),
    ];
    let windows = [4u32, 8, 12, 16];
    let mut trees = 0u32;
    let mut labeled = 0u64;
    let mut errors = 0u64;
    for i in 0..200u64 {
        let (mu_raw, f_raw) = regimes[(i % 3) as usize];
        let mu = Distribution::new(mu_raw.to_vec()).unwrap();
        let f = TransformFn::new(f_raw.to_vec()).unwrap();
        let h = windows[((i / 3) % 4) as usize];
        let tree = simulate_sst(&mu, &f, 16, 600_000 + i).unwrap();
        let view = tree.observe(h).unwrap();
        let report = identify(&view);
        for v in view.observed_ids() {
            match report.status[v as usize] {
                NodeStatus::IdentifiedNormal => {
                    labeled += 1;
                    if tree.is_special(v) {
                        errors += 1;
                    }
                }
                NodeStatus::IdentifiedSpecial => {
                    labeled += 1;
                    if !tree.is_special(v) {
                        errors += 1;
                    }
                }
                NodeStatus::Unknown => {}
            }
        }
        trees += 1;
    }
    let pass = errors == 0 && trees == 200 && labeled > 0;
    check(
        6,
        "identification is sound in all three regimes",
        pass,
        &format!("{errors} errors over {trees} trees ({labeled} labeled nodes)"),
    );
}

fn median_of(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[test]
fn window_growth_shrinks_every_error() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        mu: vec![0.35, 0.4, 0.25],
        f: vec![0.0, 1.0, 3.0],
        h_max: 125,
        h_step: 5,
        h_min: 5,
        replicates: 50,
        master_seed: 20260825,
        output_dir: dir.path().to_path_buf(),
        node_budget: DEFAULT_NODE_BUDGET,
    };
    let output = run_experiment(&cfg).unwrap();
    let at = |h: u32, pick: fn(&ErrorRecord) -> f64| -> Vec<f64> {
        output
            .records
            .iter()
            .filter(|r| r.h == h)
            .map(pick)
            .collect()
    };
    let star_25 = median_of(at(25, |r| r.err_mu_star));
    let star_125 = median_of(at(125, |r| r.err_mu_star));
    let f_25 = median_of(at(25, |r| r.err_f_norm));
    let f_125 = median_of(at(125, |r| r.err_f_norm));
    let spine_25 = median_of(at(25, |r| r.err_spine));
    let spine_125 = median_of(at(125, |r| r.err_spine));
    let shares = at(125, |r| r.k_h as f64 / 125.0);
    let share_125 = shares.iter().sum::<f64>() / shares.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    let complete = at(25, |r| r.err_mu_star).len() == 50 && shares.len() == 50;
    let pass = complete
        && star_125 <= 0.5 * star_25
        && f_125 <= 0.5 * f_25
        && spine_125 < spine_25
        && share_125 > 0.9
        && secs < 600.0;
    check(
        7,
        "errors shrink as the window grows",
        pass,
        &format!(
            "median birth-law error {star_125:.4} vs {star_25:.4}, \
             tilt error {f_125:.4} vs {f_25:.4}, spine error {spine_125:.4} vs {spine_25:.4}, \
             mean forced-prefix share {share_125:.3}, {secs:.0}s"
        ),
    );
}

#[test]
fn records_are_identical_across_runs_and_thread_counts() {
    let config_for = |dir: &std::path::Path| ExperimentConfig {
        mu: vec![0.35, 0.4, 0.25],
        f: vec![0.0, 1.0, 3.0],
        h_max: 45,
        h_step: 5,
        h_min: 5,
        replicates: 12,
        master_seed: 7_702_026,
        output_dir: dir.to_path_buf(),
        node_budget: DEFAULT_NODE_BUDGET,
    };
    let mut outputs = Vec::new();
    for threads in [0usize, 0, 1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_for(dir.path());
        if threads == 0 {
            run_to_files(&cfg).unwrap();
        } else {
            let pool = ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_to_files(&cfg)).unwrap();
        }
        outputs.push(std::fs::read(dir.path().join("records.csv")).unwrap());
    }
    let identical = outputs.iter().all(|bytes| bytes == &outputs[0]);
    let pass = identical && !outputs[0].is_empty();
    check(
        8,
        "records are byte-identical across runs and thread counts",
        pass,
        &format!(
            "{} bytes; repeat run match: {}, 1-thread match: {}, 4-thread match: {}",
            outputs[0].len(),
            outputs[1] == outputs[0],
            outputs[2] == outputs[0],
            outputs[3] == outputs[0]
        ),
    );
}
