use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::WeightFn;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {}", .violations.join("; "))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

/// Gaussian-CDF weight w(z) = Φ((z − mu)/sigma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianWeight {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Rolling training window length m in days.
    pub window_days: u32,
    /// Regime threshold on the ensemble median.
    pub theta: f64,
    pub lead_days: u32,
    /// Indicator thresholds reported in the score table.
    pub twcrps_thresholds: Vec<f64>,
    /// Extra Gaussian-CDF weights reported in the score table.
    pub gaussian_weights: Vec<GaussianWeight>,
    /// Candidate thresholds for `select-theta`.
    pub theta_grid: Vec<f64>,
    /// Indicator thresholds of the twCRPSS curves.
    pub sweep_thresholds: Vec<f64>,
    pub seed: u64,
    /// Fit days in order, starting each fit from the previous day's optimum.
    pub warm_start: bool,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    /// Smallest training set or regime stratum that is fitted.
    pub n_min: usize,
    /// First verification day; defaults to the first date plus the window.
    pub start: Option<NaiveDate>,
    /// Last verification day; defaults to the last date.
    pub end: Option<NaiveDate>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            window_days: 30,
            theta: 7.5,
            lead_days: 1,
            twcrps_thresholds: vec![10.0, 12.0, 15.0],
            gaussian_weights: Vec::new(),
            theta_grid: (0..=10).map(|i| 5.0 + 0.5 * f64::from(i)).collect(),
            sweep_thresholds: (6..=20).map(f64::from).collect(),
            seed: 1,
            warm_start: false,
            jobs: 0,
            n_min: 100,
            start: None,
            end: None,
        }
    }
}

fn check_ascending(name: &str, values: &[f64], v: &mut Vec<String>) {
    if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        v.push(format!("{name}: {x} is not a positive finite number"));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        v.push(format!("{name} must be strictly ascending"));
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError {
            violations: vec![e.message().to_string()],
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        if self.window_days == 0 {
            v.push("window_days must be at least 1".to_string());
        }
        if !(self.theta >= 0.0) {
            v.push(format!("theta = {} must be nonnegative", self.theta));
        }
        if self.lead_days == 0 {
            v.push("lead_days must be at least 1".to_string());
        }
        check_ascending("twcrps_thresholds", &self.twcrps_thresholds, &mut v);
        check_ascending("sweep_thresholds", &self.sweep_thresholds, &mut v);
        for (i, t) in self.theta_grid.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) {
                v.push(format!("theta_grid[{i}] = {t} must be finite and nonnegative"));
            }
        }
        for (i, g) in self.gaussian_weights.iter().enumerate() {
            if WeightFn::gaussian_cdf(g.mu, g.sigma).is_err() {
                v.push(format!(
                    "gaussian_weights[{i}]: mu = {} must be finite and sigma = {} positive",
                    g.mu, g.sigma
                ));
            }
        }
        if self.n_min == 0 {
            v.push("n_min must be at least 1".to_string());
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                v.push(format!("start {s} is after end {e}"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: v })
        }
    }

    /// Weights of the score table's twCRPS columns.
    pub fn table_weights(&self) -> Vec<WeightFn> {
        let mut w: Vec<WeightFn> = self
            .twcrps_thresholds
            .iter()
            .map(|&r| WeightFn::Indicator { r })
            .collect();
        w.extend(self.gaussian_weights.iter().map(|g| WeightFn::GaussianCdf {
            mu: g.mu,
            sigma: g.sigma,
        }));
        w
    }

    /// Weights scored for every case: the table weights followed by the
    /// sweep thresholds not already among them.
    pub fn case_weights(&self) -> Vec<WeightFn> {
        let mut w = self.table_weights();
        for &r in &self.sweep_thresholds {
            if !self.twcrps_thresholds.contains(&r) {
                w.push(WeightFn::Indicator { r });
            }
        }
        w
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serializable")
    }
}
