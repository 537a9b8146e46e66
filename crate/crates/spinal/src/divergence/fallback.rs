//! Projected-gradient safety net for instances where the fixed point does
//! not certify. Minimizes the objective plus an exact penalty on constraint
//! violation over the product of three simplices, from several starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::solver::Reduced;
use super::SolverConfig;

const PENALTY: f64 = 100.0;
const LOG_GUARD: f64 = 1e-18;
const MAX_STEPS: usize = 4000;

pub(super) struct FallbackResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    pub slack: f64,
}

/// Euclidean projection onto the probability simplex, by the sorted
/// cumulative-sum threshold rule.
fn project_simplex(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for vi in v.iter_mut() {
        *vi = (*vi - theta).max(0.0);
    }
}

fn penalized(red: &Reduced, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    red.objective(x, y, z) + PENALTY * (-red.slack(x, y, z)).max(0.0)
}

fn gradient(
    red: &Reduced,
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let a = red.alpha;
    let n = red.p.len();
    let pen = if red.slack(x, y, z) < 0.0 { PENALTY } else { 0.0 };
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut gz = vec![0.0; n];
    for i in 0..n {
        let mx = ((1.0 - a) * x[i] + a * z[i]).max(LOG_GUARD);
        let my = ((1.0 - a) * y[i] + a * z[i]).max(LOG_GUARD);
        let lmxp = (mx / red.p[i]).ln();
        let lmyp = (my / red.p[i]).ln();
        gx[i] = (1.0 - a) * ((x[i].max(LOG_GUARD) / red.p[i]).ln() + 1.0)
            - pen * (1.0 - a) * (lmxp + 1.0);
        gy[i] = (1.0 - a) * ((y[i].max(LOG_GUARD) / red.q[i]).ln() + 1.0)
            + pen * (1.0 - a) * (lmyp + 1.0);
        gz[i] = a * ((z[i].max(LOG_GUARD) / red.q[i]).ln() + 1.0) - pen * a * (lmxp - lmyp);
    }
    (gx, gy, gz)
}

fn start_point(red: &Reduced, restart: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match restart {
        0 => (red.p.to_vec(), red.q.to_vec(), red.q.to_vec()),
        1 => {
            let gm = red.geometric_mean();
            (gm.clone(), gm, red.q.to_vec())
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0xFA11_BACC + restart);
            let mut draw = || {
                let mut v: Vec<f64> = (0..red.p.len())
                    .map(|_| -(1.0 - rng.random::<f64>()).ln().max(1e-12))
                    .collect();
                let s: f64 = v.iter().sum();
                for e in &mut v {
                    *e /= s;
                }
                v
            };
            (draw(), draw(), draw())
        }
    }
}

/// Best feasible point found over all restarts, or `None` when every run
/// ends outside the feasibility band.
pub(super) fn projected_gradient(red: &Reduced, config: &SolverConfig) -> Option<FallbackResult> {
    let mut best: Option<FallbackResult> = None;
    for restart in 0..config.fallback_restarts {
        let (mut x, mut y, mut z) = start_point(red, u64::from(restart));
        let mut value = penalized(red, &x, &y, &z);
        let mut step = 0.25_f64;
        for _ in 0..MAX_STEPS {
            let (gx, gy, gz) = gradient(red, &x, &y, &z);
            let mut accepted = false;
            while step > 1e-12 {
                let descend = |block: &[f64], grad: &[f64]| -> Vec<f64> {
                    let mut out: Vec<f64> = block
                        .iter()
                        .zip(grad)
                        .map(|(&b, &g)| b - step * g)
                        .collect();
                    project_simplex(&mut out);
                    out
                };
                let cx = descend(&x, &gx);
                let cy = descend(&y, &gy);
                let cz = descend(&z, &gz);
                let candidate = penalized(red, &cx, &cy, &cz);
                if candidate < value - 1e-13 * (1.0 + value.abs()) {
                    x = cx;
                    y = cy;
                    z = cz;
                    value = candidate;
                    step = (step * 1.3).min(1.0);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let slack = red.slack(&x, &y, &z);
        if slack >= -1e-9 {
            let objective = red.objective(&x, &y, &z);
            if best.as_ref().map_or(true, |b| objective < b.objective) {
                best = Some(FallbackResult {
                    x,
                    y,
                    z,
                    objective,
                    slack,
                });
            }
        }
    }
    best
}
