//! The constrained KL program behind the identifiability criterion.
//!
//! For two laws `p`, `q` on a common finite support, the building block is
//! the three-block problem parametrized by a mixing weight `alpha` and a
//! relaxation `epsilon`:
//!
//! ```text
//! minimize   (1-a) [ KL(x||p) + KL(y||q) ] + a KL(z||q)
//! subject to KL((1-a)x + az || p) - KL((1-a)y + az || p) + eps >= 0
//! ```
//!
//! over probability vectors `x`, `y`, `z`. Its value `V(a, eps)` enters the
//! scaled family `v(delta) = (1+delta) V(delta/(1+delta), 0)`, whose infimum
//! over `delta >= 0` is the divergence `D(p, q)` separating a size-biased
//! birth law from the special-lineage law. The identifiability criterion for
//! a model `(mu, f)` is then `ln m(mu) - D(size_biased(mu), special_law)`:
//! negative means the spine stays recoverable, positive means it drowns.
//!
//! The geometric-mean point `x = y ∝ sqrt(p q)`, `z = q` is feasible for
//! every `(alpha, epsilon)` (both mixtures coincide, so the constraint holds
//! with slack `eps`), and its objective is `(1-a)` times the Bhattacharyya
//! distance. The scaled family therefore never exceeds `d_B(p, q)`, and
//! [`solve`] guarantees the returned value respects that bound by always
//! keeping the geometric-mean point as a candidate.

mod fallback;
mod solver;

pub use solver::solve;

use serde::Serialize;
use thiserror::Error;

use crate::prob::{kl, special_law, Distribution, ProbError, TransformFn};

#[derive(Debug, Error)]
pub enum DivergenceError {
    /// The two laws must vanish together; one-sided mass makes every KL pair
    /// in the program infinite.
    #[error("support mismatch at index {index}: p = {p}, q = {q}")]
    SupportMismatch { index: usize, p: f64, q: f64 },
    #[error("{name} = {value} is outside {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    /// Stationarity cannot be evaluated where a block has zero (or negative)
    /// mass on the common support, or any mass off it.
    #[error("point touches the boundary at index {index}")]
    BoundaryPoint { index: usize },
    /// No candidate met the stationarity tolerance. The best point found is
    /// attached; its objective is still a valid upper bound.
    #[error("solver stalled with stationarity residual {residual:.3e}")]
    NonConvergent {
        residual: f64,
        report: Box<SolverReport>,
    },
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// One instance of the three-block problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub p: Distribution,
    pub q: Distribution,
    pub alpha: f64,
    pub epsilon: f64,
}

impl ProblemSpec {
    /// Starts from the unrelaxed endpoint `alpha = 0`, `epsilon = 0`.
    pub fn new(p: Distribution, q: Distribution) -> Self {
        Self {
            p,
            q,
            alpha: 0.0,
            epsilon: 0.0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Member of the scaled family: `alpha = delta / (1 + delta)`, no
    /// relaxation. The family value is `(1 + delta)` times the objective.
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.alpha = delta / (1.0 + delta);
        self.epsilon = 0.0;
        self
    }
}

/// Objective of the three-block problem at an arbitrary point.
pub fn objective_value(spec: &ProblemSpec, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let a = spec.alpha;
    (1.0 - a) * (kl(x, spec.p.probs()) + kl(y, spec.q.probs())) + a * kl(z, spec.q.probs())
}

/// Constraint slack at an arbitrary point; nonnegative means feasible.
pub fn constraint_slack(spec: &ProblemSpec, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let a = spec.alpha;
    let n = x.len().max(y.len()).max(z.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let mut mix_x = Vec::with_capacity(n);
    let mut mix_y = Vec::with_capacity(n);
    for i in 0..n {
        mix_x.push((1.0 - a) * at(x, i) + a * at(z, i));
        mix_y.push((1.0 - a) * at(y, i) + a * at(z, i));
    }
    kl(&mix_x, spec.p.probs()) - kl(&mix_y, spec.p.probs()) + spec.epsilon
}

/// Tolerances and iteration budgets for [`solve`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Objective values closer than this are treated as ties.
    pub objective_tol: f64,
    /// Largest stationarity residual accepted as converged.
    pub kkt_tol: f64,
    /// Final width of the bracket on the constraint multiplier.
    pub gamma_bisect_tol: f64,
    /// L-infinity movement below which the inner fixed point stops.
    pub fixed_point_tol: f64,
    /// Iteration cap for one inner fixed-point run.
    pub max_fixed_point_iters: u64,
    /// Mix-in weight of the previous iterate (0 = undamped).
    pub damping: f64,
    /// Cap on bracket-expansion steps for the multiplier search.
    pub max_bracket_steps: u32,
    /// Restarts of the projected-gradient fallback.
    pub fallback_restarts: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            objective_tol: 1e-9,
            kkt_tol: 1e-6,
            gamma_bisect_tol: 1e-10,
            fixed_point_tol: 1e-13,
            max_fixed_point_iters: 10_000,
            damping: 0.5,
            max_bracket_steps: 64,
            fallback_restarts: 8,
        }
    }
}

/// Solution of one three-block instance.
#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    /// Constraint multiplier in exponent form: stationary blocks satisfy
    /// `x ∝ p (p/mix_x)^gamma` and its two siblings. Zero when the constraint
    /// is inactive; `-1` at the unrelaxed `alpha = 0` optimum.
    pub gamma: f64,
    /// Simplex multipliers for the x, y, z blocks.
    pub lambda: f64,
    pub mu_mult: f64,
    pub nu_mult: f64,
    /// Worst violation across stationarity, feasibility, sign, and
    /// complementarity conditions.
    pub kkt_residual: f64,
    /// `KL(mix_x||p) - KL(mix_y||p) + eps` at the solution.
    pub constraint_slack: f64,
    pub converged: bool,
    /// Total inner-iteration count across all multiplier probes.
    pub iterations: u64,
}

/// Multiplier estimates and the worst optimality violation at a point.
#[derive(Debug, Clone, Copy)]
pub struct KktInfo {
    pub lambda: f64,
    pub mu_mult: f64,
    pub nu_mult: f64,
    pub residual: f64,
}

/// Re-derives multipliers and the optimality residual for a reported point.
///
/// Each simplex multiplier is centered so the largest and smallest
/// stationarity terms of its block violate equally; the block residual is
/// that shared violation. The total adds primal feasibility, the sign of
/// `gamma`, and complementarity.
///
/// The unconstrained point `(p, q, q)` with `gamma = 0` is always stationary,
/// so for it the residual degenerates to pure constraint violation; a large
/// value there means "infeasible", not "non-stationary".
pub fn kkt_residual(
    spec: &ProblemSpec,
    report: &SolverReport,
) -> Result<KktInfo, DivergenceError> {
    let red = solver::Reduced::build(spec)?;
    let x = red.extract(&report.x)?;
    let y = red.extract(&report.y)?;
    let z = red.extract(&report.z)?;
    Ok(red.kkt(&x, &y, &z, report.gamma))
}

/// One member of the scaled family: `(1+delta) V(delta/(1+delta), 0)`,
/// together with the underlying solution.
pub fn delta_value(
    p: &Distribution,
    q: &Distribution,
    delta: f64,
    config: &SolverConfig,
) -> Result<(f64, SolverReport), DivergenceError> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(DivergenceError::InvalidParameter {
            name: "delta",
            value: delta,
            range: "[0, inf)",
        });
    }
    let spec = ProblemSpec::new(p.clone(), q.clone()).with_delta(delta);
    let report = solve(&spec, config)?;
    Ok(((1.0 + delta) * report.objective, report))
}

/// Scale weights probed when minimizing the scaled family.
#[derive(Debug, Clone)]
pub struct DeltaGrid {
    pub deltas: Vec<f64>,
}

impl Default for DeltaGrid {
    /// Zero plus 40 log-spaced weights spanning `[1e-2, 1e3]`.
    fn default() -> Self {
        let (lo, hi, n) = (1e-2_f64, 1e3_f64, 40usize);
        let mut deltas = vec![0.0];
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            deltas.push(lo * (hi / lo).powf(t));
        }
        Self { deltas }
    }
}

/// Infimum of the scaled family over a delta grid.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    /// The divergence: smallest scaled-family value found.
    pub value: f64,
    /// Scale weight attaining it.
    pub delta_star: f64,
    /// Bhattacharyya distance, the structural upper bound.
    pub bhattacharyya: f64,
    /// Whether the infimum sits on the upper bound to within 1e-6.
    pub matches_bhattacharyya: bool,
    /// Solver output at the best scale weight.
    pub report: SolverReport,
}

/// Minimizes the scaled family over the grid, refining around the best grid
/// point by golden-section search when the landscape actually varies (a flat
/// profile, the typical outcome, leaves nothing to refine).
pub fn min_divergence(
    p: &Distribution,
    q: &Distribution,
    grid: &DeltaGrid,
    config: &SolverConfig,
) -> Result<DivergenceReport, DivergenceError> {
    if grid.deltas.is_empty() {
        return Err(DivergenceError::InvalidParameter {
            name: "grid",
            value: 0.0,
            range: "at least one delta",
        });
    }
    let mut values = Vec::with_capacity(grid.deltas.len());
    let mut best: Option<(usize, f64, SolverReport)> = None;
    for (i, &delta) in grid.deltas.iter().enumerate() {
        let (value, report) = delta_value(p, q, delta, config)?;
        if best.as_ref().map_or(true, |(_, v, _)| value < *v) {
            best = Some((i, value, report));
        }
        values.push(value);
    }
    let (best_idx, mut value, mut report) = best.expect("grid is nonempty");
    let mut delta_star = grid.deltas[best_idx];

    let mut runner_up = f64::INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if i != best_idx && v < runner_up {
            runner_up = v;
        }
    }
    if runner_up - value > config.objective_tol {
        // A visible dip: tighten around it between its grid neighbors.
        let lo = if best_idx == 0 {
            grid.deltas[0]
        } else {
            grid.deltas[best_idx - 1]
        };
        let hi = if best_idx + 1 == grid.deltas.len() {
            grid.deltas[best_idx]
        } else {
            grid.deltas[best_idx + 1]
        };
        if hi > lo {
            let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (lo, hi);
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let mut fc = delta_value(p, q, c, config)?;
            let mut fd = delta_value(p, q, d, config)?;
            for _ in 0..40 {
                if b - a < 1e-10 * (1.0 + b) {
                    break;
                }
                if fc.0 <= fd.0 {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = delta_value(p, q, c, config)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = delta_value(p, q, d, config)?;
                }
            }
            let (refined, refined_delta) = if fc.0 <= fd.0 { (fc, c) } else { (fd, d) };
            if refined.0 < value {
                value = refined.0;
                report = refined.1;
                delta_star = refined_delta;
            }
        }
    }

    let d_b = p.bhattacharyya(q);
    Ok(DivergenceReport {
        value,
        delta_star,
        bhattacharyya: d_b,
        matches_bhattacharyya: (value - d_b).abs() <= 1e-6,
        report,
    })
}

/// The identifiability criterion of a model `(mu, f)`.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    /// `ln m(mu)` minus the divergence; negative keeps the spine estimable.
    pub criterion: f64,
    pub log_mean: f64,
    pub divergence: DivergenceReport,
}

/// Evaluates `ln m(mu) - D(size_biased(mu), special_law(mu, f))` with the
/// default scale grid.
pub fn criterion(
    mu: &Distribution,
    f: &TransformFn,
    config: &SolverConfig,
) -> Result<CriterionReport, DivergenceError> {
    let nu = special_law(mu, f)?;
    let biased = mu.size_biased()?;
    let log_mean = mu.mean().ln();
    let divergence = min_divergence(&biased, &nu, &DeltaGrid::default(), config)?;
    Ok(CriterionReport {
        criterion: log_mean - divergence.value,
        log_mean,
        divergence,
    })
}
