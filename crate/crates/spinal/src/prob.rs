//! Finite birth distributions on `{0, ..., N}` and the operators built on them.
//!
//! Everything downstream (simulation, spine recovery, the divergence solver)
//! consumes the types defined here. A [`Distribution`] is a validated
//! probability vector indexed by children count; a [`TransformFn`] is the
//! nonnegative weight function `f` with `f(0) = 0` that tilts a birth law into
//! the law of the special lineage; [`EmpiricalCounts`] holds integer counts so
//! that argmax comparisons between empirical measures stay exact.

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Constructors accept a probability vector whose sum is within this distance
/// of one and renormalize it exactly once. Larger violations are errors.
pub const SUM_ACCEPT_TOLERANCE: f64 = 1e-9;

/// Guaranteed bound on `|sum - 1|` after construction.
pub const SUM_POST_TOLERANCE: f64 = 1e-12;

/// Floor applied inside logarithms so that `ln` of an underflowed positive
/// value never produces `-inf` by accident. Genuine zeros are handled
/// explicitly before taking the log.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("probability vector must have at least two entries (N >= 1), got {0}")]
    TooShort(usize),
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entries must sum to 1 within {tol}, got sum {sum}")]
    NotNormalized { sum: f64, tol: f64 },
    #[error("non-finite entry {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("transform weight at 0 must be 0, got {0}")]
    NonzeroAtZero(f64),
    #[error("strict transform requires positive weight at index {0}")]
    ZeroWeight(usize),
    #[error("total mass is zero")]
    ZeroMass,
    #[error("mean is zero, size-biased law undefined")]
    DegenerateMean,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("count {count} exceeds declared maximum {n_max}")]
    CountAboveLimit { count: usize, n_max: usize },
}

/// A probability distribution on `{0, ..., N}` stored densely.
///
/// The index is a children count, so `probs[k]` is the probability of exactly
/// `k` children. `N >= 1` always; point masses are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and normalizes. The vector must have length at least 2, only
    /// nonnegative finite entries, and sum to 1 within
    /// [`SUM_ACCEPT_TOLERANCE`]; it is then divided by its sum exactly once.
    pub fn new(mut probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.len() < 2 {
            return Err(ProbError::TooShort(probs.len()));
        }
        for (index, value) in probs.iter_mut().enumerate() {
            if !value.is_finite() {
                return Err(ProbError::NonFinite {
                    index,
                    value: *value,
                });
            }
            if *value < 0.0 {
                if *value >= -SUM_POST_TOLERANCE {
                    *value = 0.0;
                } else {
                    return Err(ProbError::NegativeEntry {
                        index,
                        value: *value,
                    });
                }
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_ACCEPT_TOLERANCE {
            return Err(ProbError::NotNormalized {
                sum,
                tol: SUM_ACCEPT_TOLERANCE,
            });
        }
        for p in &mut probs {
            *p /= sum;
        }
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= SUM_POST_TOLERANCE);
        Ok(Self { probs })
    }

    /// Normalizes an arbitrary nonnegative weight vector into a distribution.
    /// Errors if the total mass is zero.
    pub fn from_weights(weights: &[f64]) -> Result<Self, ProbError> {
        if weights.len() < 2 {
            return Err(ProbError::TooShort(weights.len()));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(ProbError::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(ProbError::NegativeEntry { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(ProbError::ZeroMass);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest representable children count `N` (vector length minus one).
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Mean number of children, `m = sum_k k * p_k`.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }

    /// Kullback-Leibler divergence `KL(self || other)` in nats.
    ///
    /// Returns `+inf` when `self` puts mass where `other` does not. Terms with
    /// `self_k = 0` contribute nothing regardless of `other_k`.
    pub fn kl_divergence(&self, other: &Distribution) -> f64 {
        kl(&self.probs, &other.probs)
    }

    /// Bhattacharyya distance `-2 ln sum_k sqrt(p_k q_k)`.
    ///
    /// Evaluated on padded-with-zero indices when lengths differ; returns
    /// `+inf` for disjoint supports.
    pub fn bhattacharyya(&self, other: &Distribution) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        let mut coeff = 0.0;
        for k in 0..n {
            coeff += (self.prob(k) * other.prob(k)).sqrt();
        }
        if coeff <= 0.0 {
            f64::INFINITY
        } else {
            -2.0 * coeff.min(1.0).max(LOG_FLOOR).ln()
        }
    }

    /// Size-biased law `k * p_k / m`. Undefined (error) when the mean is zero,
    /// i.e. for the point mass at zero children.
    pub fn size_biased(&self) -> Result<Distribution, ProbError> {
        let m = self.mean();
        if m <= 0.0 {
            return Err(ProbError::DegenerateMean);
        }
        let probs = self
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p / m)
            .collect();
        Ok(Distribution { probs })
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.probs.serialize(serializer)
    }
}

/// L1 distance between two equal-length vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64, ProbError> {
    if a.len() != b.len() {
        return Err(ProbError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// `KL(p || q)` on raw nonnegative slices, padding the shorter one with
/// zeros. Zero-mass indices of `p` contribute nothing; positive mass against
/// `q_k = 0` gives `+inf`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..p.len().max(q.len()) {
        let pk = p.get(k).copied().unwrap_or(0.0);
        if pk > 0.0 {
            let qk = q.get(k).copied().unwrap_or(0.0);
            if qk <= 0.0 {
                return f64::INFINITY;
            }
            total += pk * (pk.max(LOG_FLOOR) / qk.max(LOG_FLOOR)).ln();
        }
    }
    total
}

/// The tilt function `f` on `{0, ..., N}` with `f(0) = 0`.
///
/// Strict instances (from [`TransformFn::new`]) have `f(k) > 0` for every
/// `k >= 1` and define a valid special-lineage law for any fully supported
/// birth distribution. Relaxed instances (from [`TransformFn::relaxed`]) come
/// out of estimation: zero entries mean "never seen on the spine" and `+inf`
/// entries flag counts seen on the spine but nowhere else.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformFn {
    weights: Vec<f64>,
}

impl TransformFn {
    /// Strict constructor: `f(0) = 0`, `f(k) > 0` and finite for `k >= 1`.
    pub fn new(weights: Vec<f64>) -> Result<Self, ProbError> {
        if weights.len() < 2 {
            return Err(ProbError::TooShort(weights.len()));
        }
        if weights[0] != 0.0 {
            return Err(ProbError::NonzeroAtZero(weights[0]));
        }
        for (index, &value) in weights.iter().enumerate().skip(1) {
            if !value.is_finite() {
                return Err(ProbError::NonFinite { index, value });
            }
            if value <= 0.0 {
                return Err(ProbError::ZeroWeight(index));
            }
        }
        Ok(Self { weights })
    }

    /// Relaxed constructor for estimated transforms: `f(0) = 0` and entries
    /// nonnegative, with `+inf` allowed as a data-quality flag.
    pub fn relaxed(weights: Vec<f64>) -> Result<Self, ProbError> {
        if weights.len() < 2 {
            return Err(ProbError::TooShort(weights.len()));
        }
        if weights[0] != 0.0 {
            return Err(ProbError::NonzeroAtZero(weights[0]));
        }
        for (index, &value) in weights.iter().enumerate().skip(1) {
            if value.is_nan() || value < 0.0 {
                return Err(ProbError::NegativeEntry { index, value });
            }
        }
        Ok(Self { weights })
    }

    /// The identity tilt `f(k) = k`, which produces the size-biased law.
    pub fn kesten(n_max: usize) -> Result<Self, ProbError> {
        Self::new((0..=n_max).map(|k| k as f64).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_max(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.get(k).copied().unwrap_or(0.0)
    }

    /// True when every weight is finite (no data-quality flags).
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Indices flagged `+inf` by estimation.
    pub fn infinite_indices(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.is_infinite())
            .map(|(k, _)| k)
            .collect()
    }

    /// Rescales so that `sum_k mu_k f(k) = 1`. The rescaled transform induces
    /// the same special-lineage law and is the scale in which the estimated
    /// transform converges.
    pub fn normalized(&self, mu: &Distribution) -> Result<TransformFn, ProbError> {
        if self.weights.len() != mu.probs().len() {
            return Err(ProbError::LengthMismatch {
                left: self.weights.len(),
                right: mu.probs().len(),
            });
        }
        let scale: f64 = self
            .weights
            .iter()
            .zip(mu.probs())
            .map(|(f, p)| f * p)
            .sum();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(ProbError::ZeroMass);
        }
        Ok(TransformFn {
            weights: self.weights.iter().map(|f| f / scale).collect(),
        })
    }
}

impl Serialize for TransformFn {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        // +inf is not representable in JSON numbers; serde_json maps it to
        // null, which consumers should read together with infinite_indices().
        self.weights.serialize(serializer)
    }
}

/// Law of the special lineage: `nu(k) = f(k) mu(k) / sum_l f(l) mu(l)`.
///
/// Always has `nu(0) = 0`. Requires finite weights and positive total tilt
/// mass. With `f(k) = k` this is exactly the size-biased law.
pub fn special_law(mu: &Distribution, f: &TransformFn) -> Result<Distribution, ProbError> {
    if mu.probs().len() != f.weights().len() {
        return Err(ProbError::LengthMismatch {
            left: mu.probs().len(),
            right: f.weights().len(),
        });
    }
    let mut weights = Vec::with_capacity(mu.probs().len());
    for (k, (&p, &w)) in mu.probs().iter().zip(f.weights()).enumerate() {
        if !w.is_finite() {
            return Err(ProbError::NonFinite { index: k, value: w });
        }
        weights.push(p * w);
    }
    Distribution::from_weights(&weights)
}

/// Integer children-count tallies with their total, kept exact so that
/// KL-based argmax comparisons between empirical measures never drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCounts {
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalCounts {
    pub fn new(n_max: usize) -> Self {
        Self {
            counts: vec![0; n_max + 1],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_max(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn record(&mut self, k: usize) -> Result<(), ProbError> {
        if k >= self.counts.len() {
            return Err(ProbError::CountAboveLimit {
                count: k,
                n_max: self.counts.len() - 1,
            });
        }
        self.counts[k] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn unrecord(&mut self, k: usize) -> Result<(), ProbError> {
        if k >= self.counts.len() || self.counts[k] == 0 {
            return Err(ProbError::CountAboveLimit {
                count: k,
                n_max: self.counts.len() - 1,
            });
        }
        self.counts[k] -= 1;
        self.total -= 1;
        Ok(())
    }

    /// Entrywise difference `self - other` as counts. Errors if any entry of
    /// `other` exceeds the corresponding entry of `self`.
    pub fn minus(&self, other: &EmpiricalCounts) -> Result<EmpiricalCounts, ProbError> {
        if self.counts.len() != other.counts.len() {
            return Err(ProbError::LengthMismatch {
                left: self.counts.len(),
                right: other.counts.len(),
            });
        }
        let mut counts = Vec::with_capacity(self.counts.len());
        for (k, (&a, &b)) in self.counts.iter().zip(&other.counts).enumerate() {
            if b > a {
                return Err(ProbError::CountAboveLimit {
                    count: k,
                    n_max: self.counts.len() - 1,
                });
            }
            counts.push(a - b);
        }
        Ok(EmpiricalCounts::from_counts(counts))
    }

    pub fn to_distribution(&self) -> Result<Distribution, ProbError> {
        if self.total == 0 {
            return Err(ProbError::ZeroMass);
        }
        let n = self.total as f64;
        Distribution::from_weights(&self.counts.iter().map(|&c| c as f64 / n).collect::<Vec<_>>())
    }

    /// `KL(counts/total || q)`, computed from the integer counts directly:
    /// `sum_k (c_k / n) ln(c_k / (n q_k))`. Returns `+inf` when a positive
    /// count meets `q_k = 0`.
    pub fn kl_to(&self, q: &Distribution) -> f64 {
        let n = self.total as f64;
        if self.total == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let qk = q.prob(k);
            if qk <= 0.0 {
                return f64::INFINITY;
            }
            let pk = c as f64 / n;
            total += pk * (pk / qk.max(LOG_FLOOR)).ln();
        }
        total
    }
}
