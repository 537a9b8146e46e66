//! Shared helpers for the integration tests: seeded random law pairs, an
//! exhaustive-search oracle for two-point supports, and a lineage counter.
//! Each test binary uses its own subset, hence the blanket allow.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinal::prob::Distribution;
use spinal::tree::Tree;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A strictly positive law on `{0..n_max}`: exponential weights with a floor
/// so no entry collapses to numerical zero.
pub fn random_law(rng: &mut ChaCha8Rng, n_max: usize) -> Distribution {
    let weights: Vec<f64> = (0..=n_max)
        .map(|_| 0.05 - (1.0 - rng.random::<f64>()).ln())
        .collect();
    Distribution::from_weights(&weights).unwrap()
}

/// Two random laws of the same dimension, sharing full support.
pub fn random_pair(rng: &mut ChaCha8Rng, n_max: usize) -> (Distribution, Distribution) {
    (random_law(rng, n_max), random_law(rng, n_max))
}

/// KL divergence between Bernoulli parameters.
pub fn kl2(s: f64, t: f64) -> f64 {
    let mut out = 0.0;
    if s > 0.0 {
        out += s * (s / t).ln();
    }
    if s < 1.0 {
        out += (1.0 - s) * ((1.0 - s) / (1.0 - t)).ln();
    }
    out
}

/// Brute-force value of the three-block program on a two-point support, by
/// grid search at resolution `1/steps` over all three Bernoulli parameters.
///
/// For each grid value of the third block, the constraint couples the first
/// two only through their mixture costs, so the inner double loop reduces to
/// a sort plus suffix minima instead of a quadratic scan.
pub fn brute_force_two_point(tp: f64, tq: f64, alpha: f64, eps: f64, steps: usize) -> f64 {
    let a = alpha;
    let ts: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let mut best = f64::INFINITY;
    for &tz in &ts {
        let cost_z = a * kl2(tz, tq);
        if cost_z >= best {
            continue;
        }
        // First block, sorted by achieved mixture cost, with suffix-minimal
        // own cost: feasibility is "mixture cost at least threshold".
        let mut by_mix: Vec<(f64, f64)> = ts
            .iter()
            .map(|&tx| {
                let mix = (1.0 - a) * tx + a * tz;
                (kl2(mix, tp), (1.0 - a) * kl2(tx, tp))
            })
            .collect();
        by_mix.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap());
        let n = by_mix.len();
        let mut suffix_min = vec![f64::INFINITY; n + 1];
        for i in (0..n).rev() {
            suffix_min[i] = suffix_min[i + 1].min(by_mix[i].1);
        }
        let keys: Vec<f64> = by_mix.iter().map(|e| e.0).collect();

        for &ty in &ts {
            let mix_y = (1.0 - a) * ty + a * tz;
            let threshold = kl2(mix_y, tp) - eps;
            let idx = keys.partition_point(|&k| k < threshold);
            let cx = suffix_min[idx];
            if cx.is_finite() {
                let total = cost_z + cx + (1.0 - a) * kl2(ty, tq);
                if total < best {
                    best = total;
                }
            }
        }
    }
    best
}

/// Number of depth-`pattern.len()` nodes whose ancestral child counts, read
/// from the root down, equal `pattern`.
pub fn count_pattern_lineages(tree: &Tree, pattern: &[u32]) -> u64 {
    let depth = pattern.len() as u32;
    let mut count = 0;
    for v in 0..tree.len() as u32 {
        if tree.depth_of(v) != depth {
            continue;
        }
        let mut counts = Vec::with_capacity(pattern.len());
        let mut cursor = v;
        while let Some(parent) = tree.parent_of(cursor) {
            counts.push(tree.num_children(parent));
            cursor = parent;
        }
        counts.reverse();
        if counts == pattern {
            count += 1;
        }
    }
    count
}
