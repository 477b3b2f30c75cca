use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dists::{Gev, TruncatedNormal};
use crate::estimation::{CaseSummary, EstimationError, GevCoefficients, TnCoefficients};
use crate::scoring::{EmpiricalEnsemble, PredictiveDist, ScoreError};

/// The five forecasters compared in a run, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Forecaster {
    Climatology,
    Ensemble,
    Tn,
    Gev,
    /// Regime switching between the TN and GEV branches.
    Combination,
}

impl Forecaster {
    pub const ALL: [Forecaster; 5] = [
        Forecaster::Climatology,
        Forecaster::Ensemble,
        Forecaster::Tn,
        Forecaster::Gev,
        Forecaster::Combination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Forecaster::Climatology => "climatology",
            Forecaster::Ensemble => "ensemble",
            Forecaster::Tn => "tn",
            Forecaster::Gev => "gev",
            Forecaster::Combination => "combination",
        }
    }

    pub fn is_postprocessor(self) -> bool {
        matches!(self, Forecaster::Tn | Forecaster::Gev | Forecaster::Combination)
    }
}

impl fmt::Display for Forecaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Forecaster {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Forecaster::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown forecaster {s:?}"))
    }
}

/// Branch of the regime-switching model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Tn,
    Gev,
}

/// TN below the threshold, GEV at or above it.
pub fn regime_branch(x_med: f64, theta: f64) -> Branch {
    if x_med >= theta {
        Branch::Gev
    } else {
        Branch::Tn
    }
}

pub fn predict_tn(coef: &TnCoefficients, case: &CaseSummary) -> Result<TruncatedNormal, EstimationError> {
    coef.predict(case.x_bar, case.s2)
}

pub fn predict_gev(coef: &GevCoefficients, case: &CaseSummary) -> Result<Gev, EstimationError> {
    coef.predict(case.x_bar)
}

pub fn predict_regime(
    tn: &TnCoefficients,
    gev: &GevCoefficients,
    theta: f64,
    case: &CaseSummary,
) -> Result<PredictiveDist, EstimationError> {
    Ok(match regime_branch(case.x_med, theta) {
        Branch::Tn => predict_tn(tn, case)?.into(),
        Branch::Gev => predict_gev(gev, case)?.into(),
    })
}

/// Empirical distribution of the pooled observations of a training window.
pub fn climatology_forecast(window_observations: &[f64]) -> Result<EmpiricalEnsemble, ScoreError> {
    if window_observations.is_empty() {
        return Err(ScoreError::EmptyCaseSet);
    }
    EmpiricalEnsemble::new(window_observations.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::CaseSummary;

    fn case(x_bar: f64, s2: f64, x_med: f64) -> CaseSummary {
        CaseSummary {
            x_bar,
            s2,
            x_med,
            y: 0.0,
        }
    }

    #[test]
    fn tn_prediction_arithmetic() {
        let c = CaseSummary::from_members(&[5.0; 50], 5.0).unwrap();
        let d = predict_tn(
            &TnCoefficients {
                a: 0.0,
                b: 1.0,
                c: 0.01,
                d: 0.0,
            },
            &c,
        )
        .unwrap();
        assert_eq!(d.mu(), 5.0);
        assert!((d.sigma() - 0.1).abs() < 1e-15);
        let d = predict_tn(
            &TnCoefficients {
                a: 1.0,
                b: 0.5,
                c: 1.0,
                d: 2.0,
            },
            &case(4.0, 1.0, 4.0),
        )
        .unwrap();
        assert_eq!(d.mu(), 3.0);
        assert_eq!(d.sigma(), 3f64.sqrt());
    }

    #[test]
    fn gev_prediction_and_negative_scale() {
        let g = GevCoefficients {
            mu0: 0.0,
            mu1: 1.0,
            sigma0: 1.0,
            sigma1: 0.0,
            xi: 0.0,
        };
        let d = predict_gev(&g, &case(3.0, 1.0, 3.0)).unwrap();
        assert_eq!((d.mu(), d.sigma(), d.xi()), (3.0, 1.0, 0.0));
        let bad = GevCoefficients { sigma0: -1.0, ..g };
        assert!(matches!(
            predict_gev(&bad, &case(3.0, 1.0, 3.0)),
            Err(EstimationError::NonPositiveScale(_))
        ));
    }

    #[test]
    fn boundary_goes_to_gev() {
        let tn = TnCoefficients::COLD_START;
        let gev = GevCoefficients::COLD_START;
        let at = predict_regime(&tn, &gev, 7.5, &case(7.0, 1.0, 7.5)).unwrap();
        assert_eq!(at.kind(), "gev");
        let below = predict_regime(&tn, &gev, 7.5, &case(7.0, 1.0, 7.5 - 1e-12)).unwrap();
        assert_eq!(below.kind(), "tn");
    }

    #[test]
    fn climatology_of_one_observation_is_a_point_mass() {
        let c = climatology_forecast(&[4.2]).unwrap();
        assert_eq!(c.members(), &[4.2]);
        assert_eq!(crate::scoring::crps(&c.into(), 4.2).unwrap(), 0.0);
        assert!(climatology_forecast(&[]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for f in Forecaster::ALL {
            assert_eq!(f.name().parse::<Forecaster>().unwrap(), f);
        }
    }
}
