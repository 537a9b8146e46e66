//! Distributional checks of the simulators against exactly computable
//! quantities: extinction probabilities, the tagged-lineage change of
//! measure, the spine birth law, and uniform marker passing.

mod common;

use common::count_pattern_lineages;
use spinal::prob::{special_law, Distribution, TransformFn};
use spinal::tree::{simulate_gw, simulate_sst};

fn sub_mu() -> Distribution {
    Distribution::new(vec![0.35, 0.4, 0.25]).unwrap()
}

fn generating_function(mu: &Distribution, s: f64) -> f64 {
    mu.probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| p * s.powi(k as i32))
        .sum()
}

#[test]
fn extinction_by_generation_fifty_matches_the_iterated_pgf() {
    let mu = sub_mu();
    // Probability of extinction by generation g is the g-fold iterate of the
    // probability generating function at zero.
    let mut e50 = 0.0;
    for _ in 0..50 {
        e50 = generating_function(&mu, e50);
    }
    assert!((e50 - 0.9987282402583377).abs() < 1e-15);
    // Fixed points of the pgf: certain extinction, and the conjugate root.
    assert!((generating_function(&mu, 1.0) - 1.0).abs() < 1e-12);
    assert!((generating_function(&mu, 1.4) - 1.4).abs() < 1e-12);

    let trials = 20_000u64;
    let mut extinct = 0u64;
    for seed in 0..trials {
        let tree = simulate_gw(&mu, 50, 90_000 + seed).unwrap();
        if tree.max_depth() < 50 {
            extinct += 1;
        }
    }
    let estimate = extinct as f64 / trials as f64;
    let se = (e50 * (1.0 - e50) / trials as f64).sqrt();
    assert!(
        (estimate - e50).abs() <= 4.0 * se,
        "estimate {estimate} vs {e50} (se {se})"
    );
}

#[test]
fn tagged_lineage_counts_follow_the_biased_law() {
    // The expected number of depth-2 nodes with ancestral counts (2, 1) is
    // m^2 * biased(2) * biased(1); directly, it is also mu(2) * 2 * mu(1).
    let mu = sub_mu();
    let biased = mu.size_biased().unwrap();
    let expected = mu.mean().powi(2) * biased.prob(2) * biased.prob(1);
    assert!((expected - mu.prob(2) * 2.0 * mu.prob(1)).abs() < 1e-15);
    assert!((expected - 0.2).abs() < 1e-12);

    let trials = 50_000u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for seed in 0..trials {
        let tree = simulate_gw(&mu, 2, 31_000 + seed).unwrap();
        let x = count_pattern_lineages(&tree, &[2, 1]) as f64;
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / trials as f64;
    let variance = (sum_sq / trials as f64 - mean * mean).max(0.0);
    let se = (variance / trials as f64).sqrt();
    assert!(
        (mean - expected).abs() <= 4.0 * se,
        "estimate {mean} vs {expected} (se {se})"
    );
}

#[test]
fn spine_nodes_reproduce_by_the_tilted_law() {
    let mu = sub_mu();
    let f = TransformFn::new(vec![0.0, 1.0, 3.0]).unwrap();
    let nu = special_law(&mu, &f).unwrap();

    let h = 20u32;
    let trees = 1_500u64;
    let mut counts = [0u64; 3];
    let mut first_child_special = 0u64;
    let mut two_child_spine_nodes = 0u64;
    for seed in 0..trees {
        let tree = simulate_sst(&mu, &f, h, 77_000 + seed).unwrap();
        for v in 0..tree.len() as u32 {
            if !tree.is_special(v) || tree.depth_of(v) >= h {
                continue;
            }
            let k = tree.num_children(v);
            counts[k as usize] += 1;
            if k == 2 {
                two_child_spine_nodes += 1;
                let first = tree.children_of(v).next().unwrap();
                if tree.is_special(first) {
                    first_child_special += 1;
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    assert_eq!(total, trees * u64::from(h));
    assert_eq!(counts[0], 0);
    for k in 1..=2 {
        let freq = counts[k] as f64 / total as f64;
        let p = nu.prob(k);
        let se = (p * (1.0 - p) / total as f64).sqrt();
        assert!(
            (freq - p).abs() <= 4.0 * se,
            "count {k}: frequency {freq} vs {p} (se {se})"
        );
    }

    // The marker passes to a uniformly chosen child.
    let share = first_child_special as f64 / two_child_spine_nodes as f64;
    let se = 0.5 / (two_child_spine_nodes as f64).sqrt();
    assert!(
        (share - 0.5).abs() <= 4.0 * se,
        "first-child share {share} over {two_child_spine_nodes} (se {se})"
    );
}
