//! Solution machinery: support reduction, the damped multiplier fixed point
//! with bisection, the closed-form endpoint at zero mixing weight, and final
//! candidate selection against the geometric-mean bound.

use crate::prob::kl;

use super::fallback;
use super::{DivergenceError, KktInfo, ProblemSpec, SolverConfig, SolverReport};

/// Entries below this are lifted back up so logarithms stay finite; the mass
/// involved is far below every tolerance in play.
const MASS_FLOOR: f64 = 1e-280;

/// Feasibility margin: slacks beyond this small negative band disqualify a
/// candidate point.
const FEASIBILITY_TOL: f64 = 1e-9;

/// The problem restricted to indices where both laws have mass, so that all
/// logarithms are finite. Solutions are re-embedded on the way out.
pub(super) struct Reduced {
    support: Vec<usize>,
    pub(super) p: Vec<f64>,
    pub(super) q: Vec<f64>,
    pub(super) alpha: f64,
    pub(super) epsilon: f64,
    full_len: usize,
}

impl Reduced {
    pub(super) fn build(spec: &ProblemSpec) -> Result<Self, DivergenceError> {
        let full_len = spec.p.probs().len().max(spec.q.probs().len());
        let mut support = Vec::new();
        let mut p = Vec::new();
        let mut q = Vec::new();
        for i in 0..full_len {
            let pi = spec.p.prob(i);
            let qi = spec.q.prob(i);
            match (pi > 0.0, qi > 0.0) {
                (true, true) => {
                    support.push(i);
                    p.push(pi);
                    q.push(qi);
                }
                (false, false) => {}
                _ => return Err(DivergenceError::SupportMismatch { index: i, p: pi, q: qi }),
            }
        }
        Ok(Self {
            support,
            p,
            q,
            alpha: spec.alpha,
            epsilon: spec.epsilon,
            full_len,
        })
    }

    pub(super) fn embed(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_len];
        for (j, &i) in self.support.iter().enumerate() {
            out[i] = v[j];
        }
        out
    }

    /// Pulls a full-length block back onto the support, rejecting points with
    /// mass off it or none on it.
    pub(super) fn extract(&self, full: &[f64]) -> Result<Vec<f64>, DivergenceError> {
        if full.len() != self.full_len {
            return Err(crate::prob::ProbError::LengthMismatch {
                left: full.len(),
                right: self.full_len,
            }
            .into());
        }
        let mut out = Vec::with_capacity(self.support.len());
        let mut cursor = 0;
        for (i, &v) in full.iter().enumerate() {
            if cursor < self.support.len() && self.support[cursor] == i {
                if v <= 0.0 {
                    return Err(DivergenceError::BoundaryPoint { index: i });
                }
                out.push(v);
                cursor += 1;
            } else if v > 0.0 {
                return Err(DivergenceError::BoundaryPoint { index: i });
            }
        }
        Ok(out)
    }

    fn mixes(&self, x: &[f64], y: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.alpha;
        let mix = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(z)
                .map(|(&vi, &zi)| (1.0 - a) * vi + a * zi)
                .collect()
        };
        (mix(x), mix(y))
    }

    pub(super) fn objective(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let a = self.alpha;
        (1.0 - a) * (kl(x, &self.p) + kl(y, &self.q)) + a * kl(z, &self.q)
    }

    /// Constraint slack; nonnegative means feasible.
    pub(super) fn slack(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let (mix_x, mix_y) = self.mixes(x, y, z);
        kl(&mix_x, &self.p) - kl(&mix_y, &self.p) + self.epsilon
    }

    pub(super) fn geometric_mean(&self) -> Vec<f64> {
        let mut gm: Vec<f64> = self
            .p
            .iter()
            .zip(&self.q)
            .map(|(&pi, &qi)| (pi * qi).sqrt())
            .collect();
        let s: f64 = gm.iter().sum();
        for v in &mut gm {
            *v /= s;
        }
        gm
    }

    /// Multipliers and optimality residual at a strictly positive point on
    /// the support. Each simplex multiplier centers its block's stationarity
    /// terms; the residual is the worst violation across stationarity,
    /// feasibility, multiplier sign, and complementarity.
    pub(super) fn kkt(&self, x: &[f64], y: &[f64], z: &[f64], gamma: f64) -> KktInfo {
        let a = self.alpha;
        let (mix_x, mix_y) = self.mixes(x, y, z);
        let center = |terms: Vec<f64>| -> (f64, f64) {
            let lo = terms.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (-(hi + lo) / 2.0, (hi - lo) / 2.0)
        };
        let gx: Vec<f64> = (0..x.len())
            .map(|i| {
                (1.0 - a)
                    * ((x[i] / self.p[i]).ln() + 1.0 + gamma * ((mix_x[i] / self.p[i]).ln() + 1.0))
            })
            .collect();
        let gy: Vec<f64> = (0..y.len())
            .map(|i| {
                (1.0 - a)
                    * ((y[i] / self.q[i]).ln() + 1.0 - gamma * ((mix_y[i] / self.p[i]).ln() + 1.0))
            })
            .collect();
        let gz: Vec<f64> = (0..z.len())
            .map(|i| a * ((z[i] / self.q[i]).ln() + 1.0 + gamma * (mix_x[i] / mix_y[i]).ln()))
            .collect();
        let (lambda, res_x) = center(gx);
        let (mu_mult, res_y) = center(gy);
        let (nu_mult, res_z) = center(gz);
        let slack = kl(&mix_x, &self.p) - kl(&mix_y, &self.p) + self.epsilon;
        let residual = res_x
            .max(res_y)
            .max(res_z)
            .max((-slack).max(0.0))
            .max(gamma.max(0.0))
            .max((gamma * slack).abs());
        KktInfo {
            lambda,
            mu_mult,
            nu_mult,
            residual,
        }
    }
}

/// A candidate solution in reduced coordinates.
struct Point {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    gamma: f64,
}

fn normalize_softmax(l: &mut [f64]) {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in l.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in l.iter_mut() {
        *v /= s;
    }
}

/// Damped iteration of the stationarity map at a fixed multiplier. Each
/// block is re-solved from the current mixtures in log space, normalized,
/// and averaged with its previous value.
fn run_fixed_point(
    red: &Reduced,
    gamma: f64,
    x: &mut [f64],
    y: &mut [f64],
    z: &mut [f64],
    config: &SolverConfig,
) -> (bool, u64) {
    let a = red.alpha;
    let n = red.p.len();
    let lp: Vec<f64> = red.p.iter().map(|v| v.ln()).collect();
    let lq: Vec<f64> = red.q.iter().map(|v| v.ln()).collect();
    let mut nx = vec![0.0; n];
    let mut ny = vec![0.0; n];
    let mut nz = vec![0.0; n];
    let d = config.damping;
    for iter in 1..=config.max_fixed_point_iters {
        for i in 0..n {
            let lmx = ((1.0 - a) * x[i] + a * z[i]).ln();
            let lmy = ((1.0 - a) * y[i] + a * z[i]).ln();
            nx[i] = lp[i] + gamma * (lp[i] - lmx);
            ny[i] = lq[i] + gamma * (lmy - lp[i]);
            nz[i] = lq[i] + gamma * (lmy - lmx);
        }
        normalize_softmax(&mut nx);
        normalize_softmax(&mut ny);
        normalize_softmax(&mut nz);
        let mut movement = 0.0_f64;
        for i in 0..n {
            let xv = (d * x[i] + (1.0 - d) * nx[i]).max(MASS_FLOOR);
            let yv = (d * y[i] + (1.0 - d) * ny[i]).max(MASS_FLOOR);
            let zv = (d * z[i] + (1.0 - d) * nz[i]).max(MASS_FLOOR);
            movement = movement
                .max((xv - x[i]).abs())
                .max((yv - y[i]).abs())
                .max((zv - z[i]).abs());
            x[i] = xv;
            y[i] = yv;
            z[i] = zv;
        }
        if movement < config.fixed_point_tol {
            return (true, iter);
        }
    }
    (false, config.max_fixed_point_iters)
}

/// Brackets and bisects the multiplier until the constraint is tight,
/// keeping the last feasible-side state. `None` when no bracket exists
/// within the expansion budget.
fn solve_interior(red: &Reduced, config: &SolverConfig) -> (Option<Point>, u64) {
    let a = red.alpha;
    let stability_bound = -1.0 / (1.0 - a);
    let mut x = red.p.to_vec();
    let mut y = red.q.to_vec();
    let mut z = red.q.to_vec();
    let mut iterations = 0u64;

    // Expand downward from -1/2: the slack is negative at 0 (checked by the
    // caller) and grows as the multiplier strengthens.
    let mut hi = 0.0_f64;
    let mut lo = -0.5_f64;
    let mut bracketed = false;
    for _ in 0..config.max_bracket_steps {
        let (_, used) = run_fixed_point(red, lo, &mut x, &mut y, &mut z, config);
        iterations += used;
        if red.slack(&x, &y, &z) >= 0.0 {
            bracketed = true;
            break;
        }
        hi = lo;
        lo = if 2.0 * lo > stability_bound {
            2.0 * lo
        } else {
            0.5 * (lo + stability_bound)
        };
    }
    if !bracketed {
        return (None, iterations);
    }

    let mut best = Point {
        x: x.clone(),
        y: y.clone(),
        z: z.clone(),
        gamma: lo,
    };
    while hi - lo > config.gamma_bisect_tol {
        let mid = 0.5 * (lo + hi);
        let (_, used) = run_fixed_point(red, mid, &mut x, &mut y, &mut z, config);
        iterations += used;
        let slack = red.slack(&x, &y, &z);
        if slack >= 0.0 {
            lo = mid;
            best = Point {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                gamma: mid,
            };
            if slack <= 1e-12 {
                break;
            }
        } else {
            hi = mid;
        }
    }
    (Some(best), iterations)
}

/// Closed-form endpoint at zero mixing weight. The optimal second block
/// lies on the geometric path `y_t ∝ p^t q^(1-t)`; the value along it is
/// `max(KL(y_t||p) - eps, 0) + KL(y_t||q)`, which is scanned and refined.
/// Without relaxation the optimum is the geometric mean itself.
fn solve_alpha_zero(red: &Reduced, config: &SolverConfig) -> (Point, u64) {
    let n = red.p.len();
    let lp: Vec<f64> = red.p.iter().map(|v| v.ln()).collect();
    let lq: Vec<f64> = red.q.iter().map(|v| v.ln()).collect();
    let path_point = |t: f64| -> Vec<f64> {
        let mut l: Vec<f64> = (0..n).map(|i| t * lp[i] + (1.0 - t) * lq[i]).collect();
        normalize_softmax(&mut l);
        l
    };
    let value_at = |t: f64| -> f64 {
        let y = path_point(t);
        (kl(&y, &red.p) - red.epsilon).max(0.0) + kl(&y, &red.q)
    };

    let mut evals = 0u64;
    let t_star = if red.epsilon == 0.0 {
        0.5
    } else {
        let steps = 1000;
        let mut best_t = 0.0;
        let mut best_v = f64::INFINITY;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let v = value_at(t);
            evals += 1;
            if v < best_v {
                best_v = v;
                best_t = t;
            }
        }
        let width = 1.0 / steps as f64;
        let (mut a, mut b) = ((best_t - width).max(0.0), (best_t + width).min(1.0));
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut dpt = a + phi * (b - a);
        let mut fc = value_at(c);
        let mut fd = value_at(dpt);
        while b - a > 1e-12 {
            evals += 1;
            if fc <= fd {
                b = dpt;
                dpt = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = value_at(c);
            } else {
                a = c;
                c = dpt;
                fc = fd;
                dpt = a + phi * (b - a);
                fd = value_at(dpt);
            }
        }
        0.5 * (a + b)
    };

    let y = path_point(t_star);
    let klp = kl(&y, &red.p);
    let target = (klp - red.epsilon).max(0.0);
    let x = if target <= 0.0 {
        red.p.to_vec()
    } else if (klp - target).abs() < 1e-15 {
        y.clone()
    } else {
        // Slide along the path from p toward y until the first-block cost
        // hits the target; the cost is increasing in the slide parameter.
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let point = |s: f64| -> Vec<f64> {
            let mut l: Vec<f64> = (0..n).map(|i| (1.0 - s) * lp[i] + s * ly[i]).collect();
            normalize_softmax(&mut l);
            l
        };
        let (mut s_lo, mut s_hi) = (0.0_f64, 1.0_f64);
        let mut xs = point(0.5);
        for _ in 0..100 {
            let mid = 0.5 * (s_lo + s_hi);
            xs = point(mid);
            evals += 1;
            let v = kl(&xs, &red.p);
            if (v - target).abs() <= 1e-15 {
                break;
            }
            if v < target {
                s_lo = mid;
            } else {
                s_hi = mid;
            }
        }
        xs
    };

    let _ = config;
    (
        Point {
            x,
            y,
            z: red.q.to_vec(),
            gamma: -(t_star / (1.0 - t_star)),
        },
        evals,
    )
}

/// One-dimensional search for the multiplier best explaining a point, used
/// when the point did not come out of the bisection (fallback or bound
/// candidates).
fn refit_gamma(red: &Reduced, x: &[f64], y: &[f64], z: &[f64]) -> (f64, KktInfo) {
    let stability_bound = if red.alpha < 1.0 {
        -1.0 / (1.0 - red.alpha)
    } else {
        -64.0
    };
    let residual_at = |g: f64| red.kkt(x, y, z, g).residual;
    let (mut a, mut b) = (stability_bound * 0.999_999, 0.0_f64);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = residual_at(c);
    let mut fd = residual_at(d);
    for _ in 0..80 {
        if b - a < 1e-12 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = residual_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = residual_at(d);
        }
    }
    let g = 0.5 * (a + b);
    (g, red.kkt(x, y, z, g))
}

/// Solves one three-block instance.
///
/// The path depends on the regime: a feasible unconstrained optimum returns
/// immediately with value zero; zero mixing weight uses the geometric-path
/// closed form; otherwise the constraint multiplier is bisected over the
/// damped fixed point. The geometric-mean point is always scored as well,
/// so the result never exceeds `(1 - alpha)` times the Bhattacharyya
/// distance. A projected-gradient fallback engages when the stationarity
/// residual misses the tolerance; if even that fails the error carries the
/// best report found.
pub fn solve(spec: &ProblemSpec, config: &SolverConfig) -> Result<SolverReport, DivergenceError> {
    if !spec.alpha.is_finite() || !(0.0..=1.0).contains(&spec.alpha) {
        return Err(DivergenceError::InvalidParameter {
            name: "alpha",
            value: spec.alpha,
            range: "[0, 1]",
        });
    }
    if !spec.epsilon.is_finite() || spec.epsilon < 0.0 {
        return Err(DivergenceError::InvalidParameter {
            name: "epsilon",
            value: spec.epsilon,
            range: "[0, inf)",
        });
    }
    let red = Reduced::build(spec)?;

    // The unconstrained optimum (p, q, q) has objective zero, the global
    // floor; if it is feasible the instance is free. At full mixing weight
    // both mixtures collapse to z, so this always triggers there.
    let slack0 = red.slack(&red.p, &red.q, &red.q);
    if slack0 >= 0.0 {
        let point = Point {
            x: red.p.to_vec(),
            y: red.q.to_vec(),
            z: red.q.to_vec(),
            gamma: 0.0,
        };
        let info = red.kkt(&point.x, &point.y, &point.z, point.gamma);
        return Ok(assemble(&red, point, 0.0, slack0, info, true, 0));
    }

    let (interior, iterations) = if red.alpha == 0.0 {
        let (point, evals) = solve_alpha_zero(&red, config);
        (Some(point), evals)
    } else {
        solve_interior(&red, config)
    };

    // The geometric-mean point is feasible for every instance (both
    // mixtures coincide) and costs (1 - alpha) times the Bhattacharyya
    // distance; never return anything worse.
    let gm = red.geometric_mean();
    let gm_point = Point {
        x: gm.clone(),
        y: gm,
        z: red.q.to_vec(),
        gamma: -1.0,
    };
    let gm_objective = red.objective(&gm_point.x, &gm_point.y, &gm_point.z);

    let (mut point, mut objective, mut slack) = match interior {
        Some(pt) => {
            let obj = red.objective(&pt.x, &pt.y, &pt.z);
            let s = red.slack(&pt.x, &pt.y, &pt.z);
            if s >= -FEASIBILITY_TOL && obj <= gm_objective + config.objective_tol {
                (pt, obj, s)
            } else {
                (gm_point, gm_objective, red.epsilon)
            }
        }
        None => (gm_point, gm_objective, red.epsilon),
    };

    let mut info = red.kkt(&point.x, &point.y, &point.z, point.gamma);
    if info.residual > config.kkt_tol {
        if let Some(fb) = fallback::projected_gradient(&red, config) {
            if fb.slack >= -FEASIBILITY_TOL && fb.objective < objective - config.objective_tol {
                point = Point {
                    x: fb.x,
                    y: fb.y,
                    z: fb.z,
                    gamma: point.gamma,
                };
                objective = fb.objective;
                slack = fb.slack;
            }
        }
        let (gamma, refit) = refit_gamma(&red, &point.x, &point.y, &point.z);
        if refit.residual < info.residual {
            point.gamma = gamma;
            info = refit;
        }
    }

    let converged = info.residual <= config.kkt_tol;
    let report = assemble(&red, point, objective, slack, info, converged, iterations);
    if converged {
        Ok(report)
    } else {
        Err(DivergenceError::NonConvergent {
            residual: info.residual,
            report: Box::new(report),
        })
    }
}

fn assemble(
    red: &Reduced,
    point: Point,
    objective: f64,
    slack: f64,
    info: KktInfo,
    converged: bool,
    iterations: u64,
) -> SolverReport {
    SolverReport {
        x: red.embed(&point.x),
        y: red.embed(&point.y),
        z: red.embed(&point.z),
        objective,
        gamma: point.gamma,
        lambda: info.lambda,
        mu_mult: info.mu_mult,
        nu_mult: info.nu_mult,
        kkt_residual: info.residual,
        constraint_slack: slack,
        converged,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{l1_distance, Distribution};

    fn spec(p: &[f64], q: &[f64]) -> ProblemSpec {
        ProblemSpec::new(
            Distribution::new(p.to_vec()).unwrap(),
            Distribution::new(q.to_vec()).unwrap(),
        )
    }

    #[test]
    fn reduction_keeps_only_joint_support() {
        let s = spec(&[0.0, 0.3, 0.7, 0.0], &[0.0, 0.6, 0.4, 0.0]);
        let red = Reduced::build(&s).unwrap();
        assert_eq!(red.p, vec![0.3, 0.7]);
        assert_eq!(red.q, vec![0.6, 0.4]);
        let full = red.embed(&[0.25, 0.75]);
        assert_eq!(full, vec![0.0, 0.25, 0.75, 0.0]);
        assert_eq!(red.extract(&full).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn extract_rejects_boundary_and_offsupport_mass() {
        let s = spec(&[0.0, 0.3, 0.7], &[0.0, 0.6, 0.4]);
        let red = Reduced::build(&s).unwrap();
        assert!(matches!(
            red.extract(&[0.0, 0.0, 1.0]),
            Err(DivergenceError::BoundaryPoint { index: 1 })
        ));
        assert!(matches!(
            red.extract(&[0.1, 0.2, 0.7]),
            Err(DivergenceError::BoundaryPoint { index: 0 })
        ));
    }

    #[test]
    fn fixed_point_stays_on_the_simplex() {
        let s = spec(&[0.4, 0.6], &[0.8, 0.2]);
        let red = Reduced::build(&s.clone().with_alpha(0.5)).unwrap();
        let mut x = red.p.to_vec();
        let mut y = red.q.to_vec();
        let mut z = red.q.to_vec();
        let (converged, iters) =
            run_fixed_point(&red, -0.8, &mut x, &mut y, &mut z, &SolverConfig::default());
        assert!(converged, "took {iters} iterations");
        for block in [&x, &y, &z] {
            let sum: f64 = block.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(block.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn relaxed_endpoint_pins_the_first_block_to_p() {
        // KL(gm||p) ≈ 0.0051 < eps < KL(q||p) ≈ 0.0201: the path optimum sits
        // at the kink, where matching the constraint costs nothing.
        let s = spec(&[0.5, 0.5], &[0.6, 0.4]).with_epsilon(0.01);
        let r = solve(&s, &SolverConfig::default()).unwrap();
        assert!(l1_distance(&r.x, &[0.5, 0.5]).unwrap() < 1e-6);
        assert!(r.constraint_slack.abs() < 1e-9);
        assert!(r.objective > 0.0);
        assert!(r.converged);
    }

    #[test]
    fn big_relaxation_at_zero_weight_costs_nothing() {
        let s = spec(&[0.5, 0.5], &[0.6, 0.4]).with_epsilon(0.05);
        let r = solve(&s, &SolverConfig::default()).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn moderate_relaxation_tracks_the_shifted_geometric_value() {
        // With gm still outside the relaxed region the optimum is gm and the
        // value drops by exactly eps.
        let p = Distribution::new(vec![0.5, 0.5]).unwrap();
        let q = Distribution::new(vec![0.9, 0.1]).unwrap();
        let gm_klp = kl(&[0.75, 0.25], p.probs());
        let eps = 0.5 * gm_klp;
        let s = ProblemSpec::new(p.clone(), q.clone()).with_epsilon(eps);
        let r = solve(&s, &SolverConfig::default()).unwrap();
        let d_b = p.bhattacharyya(&q);
        assert!((r.objective - (d_b - eps)).abs() < 1e-9);
        assert!(l1_distance(&r.y, &[0.75, 0.25]).unwrap() < 1e-6);
        assert!((r.gamma + 1.0).abs() < 1e-6);
    }
}
