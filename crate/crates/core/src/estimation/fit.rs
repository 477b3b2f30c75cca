use super::optimizer::{minimize_with_restarts, SimplexOptions};
use super::{
    Coefficients, EstimationError, FitSource, FittedModel, GevCoefficients, StratumSizes, TnCoefficients, TrainingSet,
};
use crate::dists::{Gev, TruncatedNormal, GUMBEL_SWITCH};
use crate::scoring::crps_truncated_normal;
use crate::special::CompensatedSum;

/// Open box for the GEV shape during the likelihood search.
pub const GEV_SHAPE_BOUNDS: (f64, f64) = (-0.5, 0.95);

const TN_PENALTY: f64 = 1e10;
const GEV_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Smallest training set (or regime stratum) that is fitted.
    pub n_min: usize,
    pub simplex: SimplexOptions,
    /// Seeds the jittered restart.
    pub seed: u64,
    /// Start regime fits from the previous window's coefficients.
    pub warm_start: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_min: 100,
            simplex: SimplexOptions::default(),
            seed: 0,
            warm_start: false,
        }
    }
}

/// Mean CRPS of the truncated normal regression over `train`.
pub fn tn_objective(train: &TrainingSet, coef: &TnCoefficients) -> f64 {
    let mut acc = CompensatedSum::new();
    for c in train.cases() {
        let var = coef.variance(c.s2);
        if !(var > 0.0) || !var.is_finite() {
            return TN_PENALTY;
        }
        match TruncatedNormal::new(coef.location(c.x_bar), var.sqrt()) {
            Ok(d) => acc.add(crps_truncated_normal(&d, c.y)),
            Err(_) => return TN_PENALTY,
        }
    }
    acc.value() / train.len() as f64
}

fn gev_violation(train: &TrainingSet, coef: &GevCoefficients) -> f64 {
    let (lo, hi) = GEV_SHAPE_BOUNDS;
    let mut v = 0.0;
    if coef.xi <= lo {
        v += lo - coef.xi + 1e-3;
    }
    if coef.xi >= hi {
        v += coef.xi - hi + 1e-3;
    }
    for c in train.cases() {
        let sigma = coef.scale(c.x_bar);
        if !(sigma > 0.0) {
            v += 1e-3 - sigma;
            continue;
        }
        let margin = 1.0 + coef.xi * (c.y - coef.location(c.x_bar)) / sigma;
        if coef.xi.abs() >= GUMBEL_SWITCH && !(margin > 0.0) {
            v += 1e-3 - margin;
        }
    }
    v
}

/// Mean negative log-likelihood of the GEV regression over `train`.
/// Infeasible coefficients (nonpositive scale, an observation outside the
/// support, or the shape outside [`GEV_SHAPE_BOUNDS`]) score
/// `1e6 · (1 + total violation)`.
pub fn gev_objective(train: &TrainingSet, coef: &GevCoefficients) -> f64 {
    let v = gev_violation(train, coef);
    if v > 0.0 {
        return GEV_PENALTY * (1.0 + v);
    }
    let mut acc = CompensatedSum::new();
    for c in train.cases() {
        let Ok(d) = Gev::new(coef.location(c.x_bar), coef.scale(c.x_bar), coef.xi) else {
            return GEV_PENALTY;
        };
        let lp = d.ln_pdf(c.y);
        if !lp.is_finite() {
            return GEV_PENALTY;
        }
        acc.add(-lp);
    }
    acc.value() / train.len() as f64
}

fn require(train: &TrainingSet, opts: &FitOptions) -> Result<(), EstimationError> {
    if train.len() < opts.n_min.max(1) {
        return Err(EstimationError::InsufficientData {
            needed: opts.n_min.max(1),
            got: train.len(),
        });
    }
    Ok(())
}

fn tn_from_vec(p: &[f64]) -> TnCoefficients {
    TnCoefficients {
        a: p[0],
        b: p[1],
        c: p[2] * p[2],
        d: p[3] * p[3],
    }
}

fn tn_to_vec(c: &TnCoefficients) -> [f64; 4] {
    [c.a, c.b, c.c.max(0.0).sqrt(), c.d.max(0.0).sqrt()]
}

fn gev_from_vec(p: &[f64]) -> GevCoefficients {
    GevCoefficients {
        mu0: p[0],
        mu1: p[1],
        sigma0: p[2],
        sigma1: p[3],
        xi: p[4],
    }
}

fn gev_to_vec(c: &GevCoefficients) -> [f64; 5] {
    [c.mu0, c.mu1, c.sigma0, c.sigma1, c.xi]
}

fn finish(model: FittedModel) -> Result<FittedModel, EstimationError> {
    if model.converged {
        Ok(model)
    } else {
        Err(EstimationError::NotConverged { best: Box::new(model) })
    }
}

/// Minimum-CRPS fit of μ = a + b·x̄, σ² = c + d·S². The variance
/// coefficients are searched as c = γ², d = δ².
pub fn fit_tn_min_crps(
    train: &TrainingSet,
    init: Option<&TnCoefficients>,
    opts: &FitOptions,
) -> Result<FittedModel, EstimationError> {
    require(train, opts)?;
    let cold = tn_to_vec(&TnCoefficients::COLD_START);
    let warm = init.map(tn_to_vec);
    let result = minimize_with_restarts(
        |p| tn_objective(train, &tn_from_vec(p)),
        &cold,
        warm.as_ref().map(|w| &w[..]),
        opts.seed,
        &opts.simplex,
    );
    finish(FittedModel {
        window_end: None,
        coefficients: Coefficients::Tn(tn_from_vec(&result.best.x)),
        objective: result.best.value,
        evaluations: result.evaluations,
        converged: result.best.converged,
        n_train: train.len(),
        source: FitSource::Window,
        stratum_sizes: None,
        shape_at_bound: false,
    })
}

/// Maximum-likelihood fit of μ = μ₀ + μ₁·x̄, σ = σ₀ + σ₁·x̄ with constant ξ.
pub fn fit_gev_ml(
    train: &TrainingSet,
    init: Option<&GevCoefficients>,
    opts: &FitOptions,
) -> Result<FittedModel, EstimationError> {
    require(train, opts)?;
    let cold = gev_to_vec(&GevCoefficients::COLD_START);
    let warm = init.map(gev_to_vec);
    let result = minimize_with_restarts(
        |p| gev_objective(train, &gev_from_vec(p)),
        &cold,
        warm.as_ref().map(|w| &w[..]),
        opts.seed,
        &opts.simplex,
    );
    let coef = gev_from_vec(&result.best.x);
    let feasible = gev_violation(train, &coef) == 0.0;
    let (lo, hi) = GEV_SHAPE_BOUNDS;
    finish(FittedModel {
        window_end: None,
        coefficients: Coefficients::Gev(coef),
        objective: result.best.value,
        evaluations: result.evaluations,
        converged: result.best.converged && feasible,
        n_train: train.len(),
        source: FitSource::Window,
        stratum_sizes: None,
        shape_at_bound: coef.xi - lo < 1e-3 || hi - coef.xi < 1e-3,
    })
}

/// The two branches of the regime-switching model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeFit {
    pub theta: f64,
    /// Fitted on cases with x_med < theta.
    pub tn: FittedModel,
    /// Fitted on cases with x_med ≥ theta.
    pub gev: FittedModel,
}

/// Keep the best point of a fit that ran out of evaluations.
pub(crate) fn accept_best(r: Result<FittedModel, EstimationError>) -> Result<FittedModel, EstimationError> {
    match r {
        Err(EstimationError::NotConverged { best }) => Ok(*best),
        other => other,
    }
}

/// Fit the TN branch on the x_med < theta stratum and the GEV branch on
/// the x_med ≥ theta stratum. A stratum smaller than `n_min` reuses the
/// branch from `previous` if given, else is fitted on the whole window.
/// Branches that exhaust the evaluation budget keep their best point with
/// `converged = false`.
pub fn fit_regime_switching(
    train: &TrainingSet,
    theta: f64,
    previous: Option<&RegimeFit>,
    opts: &FitOptions,
) -> Result<RegimeFit, EstimationError> {
    let (low, high) = train.split(theta);
    let sizes = StratumSizes {
        low: low.len(),
        high: high.len(),
    };
    let warm = if opts.warm_start { previous } else { None };

    let tn = if low.len() >= opts.n_min {
        let mut m = accept_best(fit_tn_min_crps(&low, warm.and_then(|p| p.tn.tn()), opts))?;
        m.source = FitSource::Window;
        m
    } else if let Some(p) = previous {
        let mut m = p.tn.clone();
        m.source = FitSource::PreviousWindow;
        m
    } else if train.len() >= opts.n_min {
        let mut m = accept_best(fit_tn_min_crps(train, None, opts))?;
        m.source = FitSource::FullWindow;
        m
    } else {
        return Err(EstimationError::EmptyStratum {
            branch: "low",
            stratum: low.len(),
            full: train.len(),
        });
    };

    let gev = if high.len() >= opts.n_min {
        let mut m = accept_best(fit_gev_ml(&high, warm.and_then(|p| p.gev.gev()), opts))?;
        m.source = FitSource::Window;
        m
    } else if let Some(p) = previous {
        let mut m = p.gev.clone();
        m.source = FitSource::PreviousWindow;
        m
    } else if train.len() >= opts.n_min {
        let mut m = accept_best(fit_gev_ml(train, None, opts))?;
        m.source = FitSource::FullWindow;
        m
    } else {
        return Err(EstimationError::EmptyStratum {
            branch: "high",
            stratum: high.len(),
            full: train.len(),
        });
    };

    let mut tn = tn;
    let mut gev = gev;
    tn.stratum_sizes = Some(sizes);
    gev.stratum_sizes = Some(sizes);
    Ok(RegimeFit { theta, tn, gev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::CaseSummary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tn_sample(n: usize, truth: &TnCoefficients, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cases = (0..n)
            .map(|_| {
                let x_bar = rng.random_range(1.0..12.0);
                let s2 = rng.random_range(0.1..3.0);
                let d = truth.predict(x_bar, s2).unwrap();
                let y = d.quantile(rng.random_range(1e-9..1.0 - 1e-9)).unwrap();
                CaseSummary {
                    x_bar,
                    s2,
                    x_med: x_bar,
                    y,
                }
            })
            .collect();
        TrainingSet::new(cases, 50).unwrap()
    }

    #[test]
    fn tn_fit_beats_default_start_and_random_perturbations() {
        let truth = TnCoefficients {
            a: 0.5,
            b: 1.1,
            c: 0.8,
            d: 1.3,
        };
        let train = tn_sample(800, &truth, 9);
        let fit = fit_tn_min_crps(&train, None, &FitOptions::default()).unwrap();
        let coef = *fit.tn().unwrap();
        assert!(fit.objective <= tn_objective(&train, &TnCoefficients::COLD_START));
        assert_eq!(fit.objective, tn_objective(&train, &coef));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = TnCoefficients {
                a: coef.a + rng.random_range(-0.01..0.01),
                b: coef.b + rng.random_range(-0.01..0.01),
                c: (coef.c + rng.random_range(-0.01..0.01)).max(0.0),
                d: (coef.d + rng.random_range(-0.01..0.01)).max(0.0),
            };
            assert!(fit.objective <= tn_objective(&train, &p) + 1e-9);
        }
    }

    #[test]
    fn degenerate_training_set_gives_sharp_medians() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cases = (0..300)
            .map(|_| {
                let x = rng.random_range(3.0..12.0);
                CaseSummary {
                    x_bar: x,
                    s2: 1.0,
                    x_med: x,
                    y: x,
                }
            })
            .collect();
        let train = TrainingSet::new(cases, 50).unwrap();
        let fit = accept_best(fit_tn_min_crps(&train, None, &FitOptions::default())).unwrap();
        let coef = fit.tn().unwrap();
        for c in train.cases() {
            let m = coef.predict(c.x_bar, c.s2).unwrap().median();
            assert!((m - c.y).abs() < 0.05, "{m} vs {}", c.y);
        }
    }

    #[test]
    fn gev_fit_keeps_observations_in_support() {
        let truth = GevCoefficients {
            mu0: 0.3,
            mu1: 1.0,
            sigma0: 0.5,
            sigma1: 0.1,
            xi: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cases = (0..600)
            .map(|_| {
                let x_bar = rng.random_range(2.0..12.0);
                let y = truth
                    .predict(x_bar)
                    .unwrap()
                    .quantile(rng.random_range(1e-9..1.0 - 1e-9))
                    .unwrap()
                    .max(0.0);
                CaseSummary {
                    x_bar,
                    s2: 1.0,
                    x_med: x_bar,
                    y,
                }
            })
            .collect();
        let train = TrainingSet::new(cases, 50).unwrap();
        let fit = fit_gev_ml(&train, None, &FitOptions::default()).unwrap();
        let coef = fit.gev().unwrap();
        for c in train.cases() {
            let margin = 1.0 + coef.xi * (c.y - coef.location(c.x_bar)) / coef.scale(c.x_bar);
            assert!(margin > 0.0);
        }
        assert!(fit.objective <= gev_objective(&train, &truth));
    }

    #[test]
    fn too_few_pairs_is_an_error() {
        let train = tn_sample(50, &TnCoefficients::COLD_START, 1);
        assert_eq!(
            fit_tn_min_crps(&train, None, &FitOptions::default()),
            Err(EstimationError::InsufficientData { needed: 100, got: 50 })
        );
    }

    #[test]
    fn regime_fallbacks() {
        let train = tn_sample(300, &TnCoefficients::COLD_START, 3);
        let opts = FitOptions::default();
        // theta = 0: every case is in the high stratum
        let rs = fit_regime_switching(&train, 0.0, None, &opts).unwrap();
        assert_eq!(rs.tn.source, FitSource::FullWindow);
        assert_eq!(rs.gev.source, FitSource::Window);
        assert_eq!(rs.gev.n_train, 300);
        let again = fit_regime_switching(&train, 0.0, Some(&rs), &opts).unwrap();
        assert_eq!(again.tn.source, FitSource::PreviousWindow);
        assert_eq!(again.tn.coefficients, rs.tn.coefficients);
        // theta = inf: TN-only training
        let rs = fit_regime_switching(&train, f64::INFINITY, None, &opts).unwrap();
        assert_eq!(rs.tn.source, FitSource::Window);
        assert_eq!(rs.tn.n_train, 300);
        assert_eq!(rs.gev.source, FitSource::FullWindow);
    }
}
