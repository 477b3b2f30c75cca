//! Optimum score estimation of the regression coefficients.
//!
//! The truncated normal model is fitted by minimizing the mean CRPS over a
//! pooled training set and the GEV model by maximum likelihood. Members are
//! exchangeable, so fits only ever see the symmetric summaries in
//! [`CaseSummary`].

mod fit;
pub mod optimizer;

pub(crate) use fit::accept_best;
pub use fit::{
    fit_gev_ml, fit_regime_switching, fit_tn_min_crps, gev_objective, tn_objective, FitOptions, RegimeFit,
    GEV_SHAPE_BOUNDS,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dists::{DistError, Gev, TruncatedNormal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("ensemble needs at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("ensemble member {index} is not finite ({value})")]
    NonFiniteMember { index: usize, value: f64 },
    #[error("training case {index} is invalid: {reason}")]
    InvalidCase { index: usize, reason: &'static str },
    #[error("training set has {got} pairs, at least {needed} are required")]
    InsufficientData { needed: usize, got: usize },
    #[error("predictive variance c + d·S² = {0} is not positive")]
    NonPositiveVariance(f64),
    #[error("predictive scale sigma0 + sigma1·x_bar = {0} is not positive")]
    NonPositiveScale(f64),
    #[error("optimizer did not converge after {} evaluations (best objective {})", .best.evaluations, .best.objective)]
    NotConverged { best: Box<FittedModel> },
    #[error("no usable fit for the {branch} regime: stratum has {stratum} pairs, full window has {full}")]
    EmptyStratum {
        branch: &'static str,
        stratum: usize,
        full: usize,
    },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Symmetric summaries of one forecast case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    /// Ensemble mean.
    pub x_bar: f64,
    /// Ensemble variance with divisor k.
    pub s2: f64,
    /// Ensemble median.
    pub x_med: f64,
    /// Verifying observation.
    pub y: f64,
}

/// Mean, population variance and median of an ensemble.
pub fn ensemble_summaries(members: &[f64]) -> Result<(f64, f64, f64), EstimationError> {
    let k = members.len();
    if k < 2 {
        return Err(EstimationError::TooFewMembers(k));
    }
    if let Some((index, &value)) = members.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(EstimationError::NonFiniteMember { index, value });
    }
    let x_bar = crate::special::mean(members.iter().copied()).expect("k >= 2");
    let s2 = crate::special::mean(members.iter().map(|x| (x - x_bar) * (x - x_bar))).expect("k >= 2");
    let mut sorted = members.to_vec();
    sorted.sort_by(f64::total_cmp);
    let x_med = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    Ok((x_bar, s2, x_med))
}

impl CaseSummary {
    pub fn from_members(members: &[f64], y: f64) -> Result<Self, EstimationError> {
        let (x_bar, s2, x_med) = ensemble_summaries(members)?;
        Ok(Self { x_bar, s2, x_med, y })
    }
}

/// Pooled forecast–observation summaries for one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    cases: Vec<CaseSummary>,
    /// Ensemble size, kept as metadata.
    k: usize,
}

impl TrainingSet {
    pub fn new(cases: Vec<CaseSummary>, k: usize) -> Result<Self, EstimationError> {
        for (index, c) in cases.iter().enumerate() {
            if !(c.x_bar.is_finite() && c.s2.is_finite() && c.x_med.is_finite() && c.y.is_finite()) {
                return Err(EstimationError::InvalidCase {
                    index,
                    reason: "non-finite entry",
                });
            }
            if c.s2 < 0.0 {
                return Err(EstimationError::InvalidCase {
                    index,
                    reason: "negative variance",
                });
            }
            if c.y < 0.0 {
                return Err(EstimationError::InvalidCase {
                    index,
                    reason: "negative observation",
                });
            }
        }
        Ok(Self { cases, k })
    }

    pub fn cases(&self) -> &[CaseSummary] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Split by the ensemble median: (x_med < theta, x_med ≥ theta).
    pub fn split(&self, theta: f64) -> (TrainingSet, TrainingSet) {
        let (low, high): (Vec<_>, Vec<_>) = self.cases.iter().partition(|c| c.x_med < theta);
        (
            TrainingSet { cases: low, k: self.k },
            TrainingSet { cases: high, k: self.k },
        )
    }
}

/// μ = a + b·x̄, σ² = c + d·S².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TnCoefficients {
    pub const COLD_START: Self = Self {
        a: 0.0,
        b: 1.0,
        c: 1.0,
        d: 1.0,
    };

    pub fn location(&self, x_bar: f64) -> f64 {
        self.a + self.b * x_bar
    }

    pub fn variance(&self, s2: f64) -> f64 {
        self.c + self.d * s2
    }

    pub fn predict(&self, x_bar: f64, s2: f64) -> Result<TruncatedNormal, EstimationError> {
        let var = self.variance(s2);
        if !(var > 0.0) {
            return Err(EstimationError::NonPositiveVariance(var));
        }
        Ok(TruncatedNormal::new(self.location(x_bar), var.sqrt())?)
    }
}

/// μ = μ₀ + μ₁·x̄, σ = σ₀ + σ₁·x̄, constant ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevCoefficients {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub xi: f64,
}

impl GevCoefficients {
    pub const COLD_START: Self = Self {
        mu0: 0.0,
        mu1: 1.0,
        sigma0: 1.0,
        sigma1: 0.0,
        xi: 0.1,
    };

    pub fn location(&self, x_bar: f64) -> f64 {
        self.mu0 + self.mu1 * x_bar
    }

    pub fn scale(&self, x_bar: f64) -> f64 {
        self.sigma0 + self.sigma1 * x_bar
    }

    pub fn predict(&self, x_bar: f64) -> Result<Gev, EstimationError> {
        let scale = self.scale(x_bar);
        if !(scale > 0.0) {
            return Err(EstimationError::NonPositiveScale(scale));
        }
        Ok(Gev::new(self.location(x_bar), scale, self.xi)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Coefficients {
    Tn(TnCoefficients),
    Gev(GevCoefficients),
}

/// Which data a model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSource {
    /// The training set passed in (a full window or a regime stratum).
    Window,
    /// Coefficients carried over from the previous window's fit.
    PreviousWindow,
    /// Stratum too small; fitted on the whole unstratified window.
    FullWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumSizes {
    pub low: usize,
    pub high: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub window_end: Option<NaiveDate>,
    pub coefficients: Coefficients,
    /// Mean CRPS (TN) or mean negative log-likelihood (GEV) at the optimum.
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub n_train: usize,
    pub source: FitSource,
    pub stratum_sizes: Option<StratumSizes>,
    /// Shape estimate within 1e-3 of the search box.
    #[serde(default)]
    pub shape_at_bound: bool,
}

impl FittedModel {
    pub fn tn(&self) -> Option<&TnCoefficients> {
        match &self.coefficients {
            Coefficients::Tn(c) => Some(c),
            Coefficients::Gev(_) => None,
        }
    }

    pub fn gev(&self) -> Option<&GevCoefficients> {
        match &self.coefficients {
            Coefficients::Gev(c) => Some(c),
            Coefficients::Tn(_) => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
