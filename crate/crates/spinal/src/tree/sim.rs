//! Seeded simulation of plain and spinal-structured branching trees.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NodeId, Tree, TreeError, DEFAULT_NODE_BUDGET};
use crate::prob::{special_law, Distribution, TransformFn};

/// Inverse-CDF sampler over a fixed finite distribution.
struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(d: &Distribution) -> Self {
        let mut acc = 0.0;
        let cumulative = d
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        let u: f64 = rng.random();
        // The last cumulative entry is 1 up to rounding; the fallback covers
        // u landing in that rounding gap.
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1) as u32
    }
}

/// Simulates a Galton-Watson tree with birth law `mu`, stopping generation at
/// `depth_cap` (nodes at that depth are leaves by fiat). Deterministic given
/// the seed. Uses the default node budget.
pub fn simulate_gw(mu: &Distribution, depth_cap: u32, seed: u64) -> Result<Tree, TreeError> {
    simulate_gw_with_budget(mu, depth_cap, seed, DEFAULT_NODE_BUDGET)
}

/// As [`simulate_gw`] with an explicit node budget; errors out as soon as the
/// population would exceed it.
pub fn simulate_gw_with_budget(
    mu: &Distribution,
    depth_cap: u32,
    seed: u64,
    budget: u64,
) -> Result<Tree, TreeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = Sampler::new(mu);
    let mut t = empty_tree(depth_cap, false);
    let mut level_start = 0usize;
    for depth in 0..depth_cap {
        let level_end = t.parent.len();
        if level_start == level_end {
            break; // extinct before the cap
        }
        for v in level_start..level_end {
            let k = sampler.draw(&mut rng);
            push_children(&mut t, v as NodeId, k, depth + 1, None, budget)?;
        }
        level_start = level_end;
    }
    Ok(t)
}

/// Simulates a spinal-structured tree: one special node per generation drawing
/// from the tilted law `nu = f*mu / sum(f*mu)`, a uniformly chosen special
/// child continuing the spine, and independent `mu` trees grafted on the other
/// children. Generation runs to `h_max + 1` so that observation at any horizon
/// `h <= h_max + 1` sees only fully drawn counts.
pub fn simulate_sst(
    mu: &Distribution,
    f: &TransformFn,
    h_max: u32,
    seed: u64,
) -> Result<Tree, TreeError> {
    simulate_sst_with_budget(mu, f, h_max, seed, DEFAULT_NODE_BUDGET)
}

/// As [`simulate_sst`] with an explicit node budget.
pub fn simulate_sst_with_budget(
    mu: &Distribution,
    f: &TransformFn,
    h_max: u32,
    seed: u64,
    budget: u64,
) -> Result<Tree, TreeError> {
    let nu = special_law(mu, f).map_err(|e| TreeError::Malformed(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Sampler::new(mu);
    let special = Sampler::new(&nu);
    let generated_to = h_max + 1;
    let mut t = empty_tree(generated_to, true);
    let mut level_start = 0usize;
    for depth in 0..generated_to {
        let level_end = t.parent.len();
        if level_start == level_end {
            break;
        }
        for v in level_start..level_end {
            if t.special[v] {
                // nu(0) = 0 guarantees k >= 1, so the spine never dies.
                let k = special.draw(&mut rng);
                let chosen = rng.random_range(0..k.max(1));
                push_children(&mut t, v as NodeId, k, depth + 1, Some(chosen), budget)?;
            } else {
                let k = normal.draw(&mut rng);
                push_children(&mut t, v as NodeId, k, depth + 1, None, budget)?;
            }
        }
        level_start = level_end;
    }
    Ok(t)
}

fn empty_tree(generated_to: u32, special_root: bool) -> Tree {
    Tree {
        parent: vec![0],
        first_child: vec![0],
        child_count: vec![0],
        depth: vec![0],
        special: vec![special_root],
        generated_to,
    }
}

fn push_children(
    t: &mut Tree,
    parent: NodeId,
    k: u32,
    child_depth: u32,
    special_child: Option<u32>,
    budget: u64,
) -> Result<(), TreeError> {
    if t.parent.len() as u64 + k as u64 > budget {
        return Err(TreeError::NodeBudgetExceeded {
            budget,
            depth: child_depth,
        });
    }
    let first = t.parent.len() as NodeId;
    // first_child stays 0 for childless nodes so the arena layout is
    // canonical and representation equality matches semantic equality.
    t.first_child[parent as usize] = if k > 0 { first } else { 0 };
    t.child_count[parent as usize] = k;
    for i in 0..k {
        t.parent.push(parent);
        t.first_child.push(0);
        t.child_count.push(0);
        t.depth.push(child_depth);
        t.special.push(special_child == Some(i));
    }
    Ok(())
}
