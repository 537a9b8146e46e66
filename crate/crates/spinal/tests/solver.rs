//! Integration checks for the constrained KL solver: robustness across
//! random instances, agreement with exhaustive search on small supports,
//! and the qualitative shape of the multiplier path.

mod common;

use common::{brute_force_two_point, random_pair, seeded_rng};
use spinal::divergence::{
    delta_value, kkt_residual, min_divergence, solve, DeltaGrid, ProblemSpec, SolverConfig,
};
use spinal::prob::Distribution;

#[test]
fn random_instances_converge_feasibly_under_the_bound() {
    let config = SolverConfig::default();
    let mut rng = seeded_rng(0xD1CE);
    for trial in 0..5 {
        let (p, q) = random_pair(&mut rng, 2 + trial % 3);
        let d_b = p.bhattacharyya(&q);
        for delta in [0.0, 0.3, 1.0, 3.0, 10.0, 50.0] {
            let (value, report) = delta_value(&p, &q, delta, &config).unwrap();
            assert!(report.converged, "trial {trial} delta {delta}");
            assert!(report.constraint_slack >= -1e-9);
            assert!(report.kkt_residual <= 1e-6);
            assert!(
                value <= d_b + 1e-9,
                "trial {trial} delta {delta}: {value} > {d_b}"
            );
            assert!(value >= -1e-12);
            let spec = ProblemSpec::new(p.clone(), q.clone()).with_delta(delta);
            let recheck = kkt_residual(&spec, &report).unwrap();
            assert!((recheck.residual - report.kkt_residual).abs() < 1e-9);
        }
    }
}

#[test]
fn multiplier_path_runs_from_minus_one_toward_minus_half() {
    let p = Distribution::new(vec![0.0, 4.0 / 9.0, 5.0 / 9.0]).unwrap();
    let q = Distribution::new(vec![0.0, 8.0 / 23.0, 15.0 / 23.0]).unwrap();
    let config = SolverConfig::default();
    let mut last_gamma = f64::NEG_INFINITY;
    for delta in [0.0, 0.5, 2.0, 10.0, 100.0] {
        let (_, report) = delta_value(&p, &q, delta, &config).unwrap();
        assert!(
            report.gamma >= -1.0 - 1e-9 && report.gamma <= -0.5,
            "delta {delta}: gamma {}",
            report.gamma
        );
        assert!(
            report.gamma >= last_gamma - 1e-6,
            "delta {delta}: gamma {} after {last_gamma}",
            report.gamma
        );
        last_gamma = report.gamma;
    }
    assert!((last_gamma - (-0.5)).abs() < 0.01, "limit gamma {last_gamma}");
}

#[test]
fn two_point_grid_search_agrees_with_the_solver() {
    let config = SolverConfig::default();
    let cases = [(0.45, 0.8, 1.0), (0.3, 0.55, 0.0)];
    for (tp, tq, delta) in cases {
        let p = Distribution::new(vec![1.0 - tp, tp]).unwrap();
        let q = Distribution::new(vec![1.0 - tq, tq]).unwrap();
        let spec = ProblemSpec::new(p, q).with_delta(delta);
        let report = solve(&spec, &config).unwrap();
        let oracle = brute_force_two_point(tp, tq, spec.alpha, 0.0, 1000);
        assert!(
            (report.objective - oracle).abs() < 1e-3,
            "delta {delta}: solver {} vs grid {oracle}",
            report.objective
        );
    }
}

#[test]
fn relaxed_values_agree_with_the_grid_search_too() {
    let config = SolverConfig::default();
    let (tp, tq) = (0.35, 0.7);
    let p = Distribution::new(vec![1.0 - tp, tp]).unwrap();
    let q = Distribution::new(vec![1.0 - tq, tq]).unwrap();
    for (alpha, eps) in [(0.0, 0.001), (0.0, 0.01), (0.4, 0.005)] {
        let spec = ProblemSpec::new(p.clone(), q.clone())
            .with_alpha(alpha)
            .with_epsilon(eps);
        let report = solve(&spec, &config).unwrap();
        let oracle = brute_force_two_point(tp, tq, alpha, eps, 1000);
        assert!(
            (report.objective - oracle).abs() < 1e-3,
            "alpha {alpha} eps {eps}: solver {} vs grid {oracle}",
            report.objective
        );
    }
}

#[test]
fn grid_minimum_is_the_minimum_of_its_members() {
    let mut rng = seeded_rng(0xBEEF);
    let (p, q) = random_pair(&mut rng, 3);
    let config = SolverConfig::default();
    let grid = DeltaGrid::default();
    let summary = min_divergence(&p, &q, &grid, &config).unwrap();
    let mut manual = f64::INFINITY;
    for &delta in &grid.deltas {
        let (value, _) = delta_value(&p, &q, delta, &config).unwrap();
        manual = manual.min(value);
    }
    // Refinement between grid neighbors may beat the raw grid minimum, but
    // never lose to it.
    assert!(summary.value <= manual + 1e-12);
    assert!(summary.value >= 0.0);
    assert!(summary.value <= summary.bhattacharyya + 1e-8);
    assert!(grid.deltas.contains(&summary.delta_star) || summary.value < manual);
}
