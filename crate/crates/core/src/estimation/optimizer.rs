//! Nelder–Mead simplex search with restarts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when the spread of objective values over the simplex is below
    /// `ftol · max(1, |f_best|)` ...
    pub ftol: f64,
    /// ... and every vertex is within `xtol · max(1, |x|)` of the best one.
    pub xtol: f64,
    /// Evaluation budget per run.
    pub max_evaluations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            xtol: 1e-5,
            max_evaluations: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// One Nelder–Mead run from `x0` with the standard coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<F>(f: &mut F, x0: &[f64], opts: &SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += (0.1 * x0[i].abs()).max(0.1);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut converged = false;

    while evaluations < opts.max_evaluations {
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let f_best = values[best];
        let f_spread = values[worst] - f_best;
        let x_spread = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_best.is_finite() && f_spread <= opts.ftol * f_best.abs().max(1.0) && x_spread <= opts.xtol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evaluations);
        if fr < f_best {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        // contraction, outside if the reflected point beat the worst
        let (xc, fc) = if fr < values[worst] {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < fr.min(values[worst]) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &i in order.iter().skip(1) {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            values[i] = eval(&simplex[i], &mut evaluations);
        }
    }

    let best = (0..=n)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("nonempty simplex");
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}

/// Outcome of [`minimize_with_restarts`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Minimum,
    /// Total evaluations across all runs.
    pub evaluations: usize,
    pub runs: usize,
}

/// Restart schedule: a primary run from the warm start (or the cold default
/// when there is none); a run from the cold default if a warm start was
/// given and the cold default scores better; a polishing run from the best
/// point; and, when polishing still moved the optimum, a run from a
/// jittered copy of the best point. `converged` on the returned minimum
/// reflects the final run from the best point.
pub fn minimize_with_restarts<F>(
    mut f: F,
    cold: &[f64],
    warm: Option<&[f64]>,
    seed: u64,
    opts: &SimplexOptions,
) -> SearchResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut total = 0usize;
    let mut runs = 0usize;
    let start = warm.unwrap_or(cold);
    let mut best = nelder_mead(&mut f, start, opts);
    total += best.evaluations;
    runs += 1;

    if warm.is_some() {
        let f_cold = sanitize(f(cold));
        total += 1;
        if f_cold < best.value {
            let alt = nelder_mead(&mut f, cold, opts);
            total += alt.evaluations;
            runs += 1;
            if alt.value < best.value {
                best = alt;
            }
        }
    }

    let tolerance = |v: f64| opts.ftol * v.abs().max(1.0);
    let polish = nelder_mead(&mut f, &best.x, opts);
    total += polish.evaluations;
    runs += 1;
    let improved = best.value - polish.value > tolerance(best.value);
    if polish.value <= best.value {
        best = polish;
    } else {
        best.converged = polish.converged;
    }

    if improved {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jittered: Vec<f64> = best
            .x
            .iter()
            .map(|&x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + 0.1 * x.abs().max(0.1) * z
            })
            .collect();
        let jit = nelder_mead(&mut f, &jittered, opts);
        total += jit.evaluations;
        runs += 1;
        if jit.value < best.value {
            best = jit;
        }
    }

    SearchResult {
        best,
        evaluations: total,
        runs,
    }
}
