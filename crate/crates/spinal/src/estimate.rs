//! Estimation of the hidden model from a single observed window.
//!
//! The pipeline runs in four moves, each consuming the previous one's output:
//!
//! 1. `empirical_distribution`: the birth law estimate over every observed
//!    node. The single special lineage contaminates it with `h` out of
//!    `|T_h|` samples, which washes out as the window grows.
//! 2. `ugly_duckling`: pick the candidate branch whose children-count measure
//!    looks *least* like the size-biased version of that estimate. A typical
//!    lineage conditioned to survive looks size-biased, while the special
//!    lineage follows its own tilted law, so the most atypical branch is the
//!    best guess for the spine.
//! 3. `corrected_distribution`: re-estimate the birth law with the chosen
//!    branch's nodes removed.
//! 4. `transform_estimate` / `special_law_estimate`: read off the tilt
//!    weights by comparing how often the chosen branch produced `k` children
//!    against how often a normal node does.
//!
//! `run_pipeline` wires the moves together into an [`EstimateBundle`].

use serde::Serialize;
use thiserror::Error;

use crate::prob::{Distribution, EmpiricalCounts, ProbError, TransformFn};
use crate::spine::{candidates_with_measures, identify, Candidate};
use crate::tree::{NodeId, ObservedTree, TreeError};

#[derive(Debug, Error)]
pub enum EstimateError {
    /// The window is a bare path: every observed node lies on the chosen
    /// branch, so no sample of normal births remains.
    #[error("no normal nodes remain at horizon {horizon} ({observed} observed, all on the chosen branch)")]
    NoNormalNodes { horizon: u32, observed: usize },
    /// No branch reaches the horizon, so there is nothing to choose from.
    #[error("no candidate branch reaches horizon {horizon}")]
    NoCandidates { horizon: u32 },
    /// The likelihood is only defined for transforms without infinity flags.
    #[error("transform has non-finite weights at indices {0:?}")]
    NonFiniteTransform(Vec<usize>),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Children-count tallies over every observed node.
pub fn observed_counts(t: &ObservedTree<'_>) -> EmpiricalCounts {
    let tree = t.tree();
    let mut counts = EmpiricalCounts::new(t.n_max());
    for v in t.observed_ids() {
        counts
            .record(tree.num_children(v) as usize)
            .expect("observed counts fit the declared bound");
    }
    counts
}

/// Raw birth-law estimate: the empirical children-count distribution over all
/// observed nodes, special lineage included.
pub fn empirical_distribution(t: &ObservedTree<'_>) -> Distribution {
    observed_counts(t)
        .to_distribution()
        .expect("the window always contains the root")
}

/// Selects the candidate branch maximizing the KL divergence from its
/// empirical children-count measure to the size-biased law of `mu_hat`.
///
/// Infinite divergences (a count that the size-biased law cannot produce)
/// dominate every finite one. Ties keep the earliest branch in depth-first
/// order, so the choice is deterministic.
pub fn ugly_duckling(
    t: &ObservedTree<'_>,
    mu_hat: &Distribution,
) -> Result<Candidate, EstimateError> {
    let biased = mu_hat.size_biased()?;
    let mut best: Option<(f64, Candidate)> = None;
    for cand in candidates_with_measures(t) {
        let score = cand.counts.kl_to(&biased);
        match &best {
            Some((incumbent, _)) if score <= *incumbent => {}
            _ => best = Some((score, cand)),
        }
    }
    best.map(|(_, cand)| cand).ok_or(EstimateError::NoCandidates {
        horizon: t.horizon(),
    })
}

/// Birth-law estimate with the chosen branch's `h` nodes removed.
pub fn corrected_distribution(
    t: &ObservedTree<'_>,
    branch: &EmpiricalCounts,
) -> Result<Distribution, EstimateError> {
    let rest = observed_counts(t).minus(branch)?;
    if rest.total() == 0 {
        return Err(EstimateError::NoNormalNodes {
            horizon: t.horizon(),
            observed: t.num_observed(),
        });
    }
    Ok(rest.to_distribution()?)
}

/// Tilt-weight estimate `f_hat(k) = s_k / (h * mu_star(k))`, where `s_k` is
/// the number of branch nodes with `k` children.
///
/// The scale is pinned by construction: whenever no flag fires,
/// `sum_k mu_star(k) f_hat(k) = 1` exactly, so `f_hat` targets the normalized
/// transform rather than the raw one (which is only identifiable up to
/// scale). Indices where the branch produced counts that no normal node did
/// (`s_k > 0` but `mu_star(k) = 0`) get an infinity flag instead of a value.
pub fn transform_estimate(
    mu_star: &Distribution,
    branch: &EmpiricalCounts,
    h: u32,
) -> Result<TransformFn, EstimateError> {
    let n = mu_star.probs().len().max(branch.counts().len());
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let s = branch.counts().get(k).copied().unwrap_or(0) as f64;
        let w = if s == 0.0 {
            0.0
        } else if mu_star.prob(k) > 0.0 {
            s / (mu_star.prob(k) * h as f64)
        } else {
            f64::INFINITY
        };
        weights.push(w);
    }
    Ok(TransformFn::relaxed(weights)?)
}

/// Special-lineage law estimate `nu_hat ∝ f_hat(k) mu_star(k)`.
///
/// Flagged indices are excluded (the product `inf * 0` carries no usable
/// mass). On the remaining indices the product collapses to `s_k / h`, so
/// this is the normalized branch tally restricted to unflagged counts.
pub fn special_law_estimate(
    f_hat: &TransformFn,
    mu_star: &Distribution,
) -> Result<Distribution, EstimateError> {
    let weights: Vec<f64> = f_hat
        .weights()
        .iter()
        .enumerate()
        .map(|(k, &w)| if w.is_finite() { w * mu_star.prob(k) } else { 0.0 })
        .collect();
    Ok(Distribution::from_weights(&weights)?)
}

/// Log-likelihood of the window under birth law `mu`, transform `f`, and the
/// given branch as the special lineage:
///
/// `sum_k n_k ln mu(k) + sum_k s_k ln f(k) - h ln(sum_l f(l) mu(l))`
///
/// with `n_k` counting all observed nodes and `s_k` only branch nodes.
/// Returns `-inf` when the window is impossible under the model. Transforms
/// carrying infinity flags are rejected.
pub fn sst_log_likelihood(
    t: &ObservedTree<'_>,
    branch: &Candidate,
    mu: &Distribution,
    f: &TransformFn,
) -> Result<f64, EstimateError> {
    if !f.is_finite() {
        return Err(EstimateError::NonFiniteTransform(f.infinite_indices()));
    }
    let all = observed_counts(t);
    let h = t.horizon() as f64;

    let tilt_mass: f64 = (0..f.weights().len())
        .map(|k| f.weight(k) * mu.prob(k))
        .sum();
    if !(tilt_mass > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }

    let mut ll = -h * tilt_mass.ln();
    for (k, &n_k) in all.counts().iter().enumerate() {
        if n_k == 0 {
            continue;
        }
        let p = mu.prob(k);
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += n_k as f64 * p.ln();
    }
    for (k, &s_k) in branch.counts.counts().iter().enumerate() {
        if s_k == 0 {
            continue;
        }
        let w = f.weight(k);
        if w <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += s_k as f64 * w.ln();
    }
    Ok(ll)
}

/// Fraction of positions where two root-descending paths agree. Paths in a
/// tree agree on a prefix and never rejoin, so this is the shared prefix
/// length over the longer path length.
pub fn spine_overlap(truth: &[NodeId], estimate: &[NodeId]) -> f64 {
    let longer = truth.len().max(estimate.len());
    if longer == 0 {
        return 1.0;
    }
    let matches = truth
        .iter()
        .zip(estimate)
        .filter(|(a, b)| a == b)
        .count();
    matches as f64 / longer as f64
}

/// `sum_k |f_hat(k) - f*(k)|` where `f*` is the true transform rescaled to
/// unit tilt mass under the true birth law, the scale in which `f_hat`
/// converges. Infinity flags make the error infinite.
pub fn normalized_transform_error(
    f_hat: &TransformFn,
    f_true: &TransformFn,
    mu_true: &Distribution,
) -> Result<f64, EstimateError> {
    let f_star = f_true.normalized(mu_true)?;
    let n = f_hat.weights().len().max(f_star.weights().len());
    let mut err = 0.0;
    for k in 0..n {
        err += (f_hat.weight(k) - f_star.weight(k)).abs();
    }
    Ok(err)
}

/// Everything the pipeline recovers from one window, serialization-ready.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateBundle {
    pub horizon: u32,
    pub num_observed: usize,
    /// Length of the spine prefix forced by the observation alone.
    pub identified_prefix_len: usize,
    pub num_candidates: usize,
    /// Raw birth-law estimate over all observed nodes.
    pub mu_hat: Distribution,
    /// Chosen branch: its deepest node and full root-down path.
    pub spine_leaf: NodeId,
    pub spine_path: Vec<NodeId>,
    pub spine_counts: Vec<u64>,
    /// Birth-law estimate excluding the chosen branch.
    pub mu_star: Distribution,
    /// Tilt-weight estimate (unit tilt mass scale). JSON renders flagged
    /// entries as null; `f_hat_infinite` lists them explicitly.
    pub f_hat: TransformFn,
    pub f_hat_infinite: Vec<usize>,
    /// Special-lineage law estimate.
    pub nu_hat: Distribution,
    /// Agreement with the labeled spine, when the tree carries labels.
    pub true_spine_overlap: Option<f64>,
}

/// Runs identification, branch selection, and all estimators on one window.
pub fn run_pipeline(t: &ObservedTree<'_>) -> Result<EstimateBundle, EstimateError> {
    let report = identify(t);
    let mu_hat = empirical_distribution(t);
    let branch = ugly_duckling(t, &mu_hat)?;
    let mu_star = corrected_distribution(t, &branch.counts)?;
    let f_hat = transform_estimate(&mu_star, &branch.counts, t.horizon())?;
    let nu_hat = special_law_estimate(&f_hat, &mu_star)?;

    let tree = t.tree();
    let path = branch.path(tree);
    let true_spine_overlap = tree
        .true_spine(t.horizon())
        .map(|truth| spine_overlap(&truth, &path));

    Ok(EstimateBundle {
        horizon: t.horizon(),
        num_observed: t.num_observed(),
        identified_prefix_len: report.identified_prefix_len,
        num_candidates: report.candidates.len(),
        mu_hat,
        spine_leaf: branch.leaf,
        spine_path: path,
        spine_counts: branch.counts.counts().to_vec(),
        mu_star,
        f_hat_infinite: f_hat.infinite_indices(),
        f_hat,
        nu_hat,
        true_spine_overlap,
    })
}
