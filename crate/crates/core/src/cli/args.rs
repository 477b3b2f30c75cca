use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use super::{parse_list, CliError};
use crate::models::{ConfigError, ExperimentConfig, GaussianWeight};

#[derive(Debug, Parser)]
#[command(
    name = "windpost",
    version,
    about = "Ensemble postprocessing and verification for daily maximum wind speed"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic benchmark and write it as a case CSV.
    Simulate {
        /// Synthetic spec (TOML); defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolate gridded step fields to stations and reduce to daily maxima.
    Ingest {
        /// Grid files, one per run and lead step.
        #[arg(long, num_args = 1.., required = true)]
        grids: Vec<PathBuf>,
        #[arg(long)]
        stations: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, default_value_t = 1)]
        lead: u32,
        #[arg(long, default_value_t = 3)]
        step_hours: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean CRPS of the regime-switching model over a grid of thresholds.
    SelectTheta {
        #[arg(long)]
        cases: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Curve output (theta,mean_crps).
        #[arg(long)]
        out: PathBuf,
    },
    /// Rolling-window experiment with every forecaster and all reports.
    Run {
        #[arg(long)]
        cases: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Rebuild the reports of a run directory from its per-case forecasts.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score one forecast.
    ScoreOne {
        /// tn, gev or ensemble.
        #[arg(long)]
        dist: String,
        /// mu,sigma for tn; mu,sigma,xi for gev; member values for ensemble.
        #[arg(long, allow_hyphen_values = true)]
        params: String,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        /// crps, twcrps, logs or pit.
        #[arg(long, default_value = "crps")]
        metric: String,
        /// constant, indicator:r or gaussian:mu:sigma (twcrps only).
        #[arg(long, allow_hyphen_values = true)]
        weight: Option<String>,
    },
}

/// Experiment settings; flags override the `--config` file, which
/// overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Experiment config (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training window length in days.
    #[arg(long)]
    pub window_days: Option<u32>,
    /// Ensemble-median threshold of the regime switch.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Comma list (5,5.5,6) or range start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_grid: Option<String>,
    #[arg(long)]
    pub lead: Option<u32>,
    /// Comma list of indicator thresholds.
    #[arg(long, allow_hyphen_values = true)]
    pub twcrps_thresholds: Option<String>,
    /// Comma list of indicator thresholds for the twCRPSS curves.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_thresholds: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Start each regime fit from the previous day's coefficients.
    #[arg(long)]
    pub warm_start: bool,
    /// Worker threads for the daily fits; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma list of mu:sigma pairs.
    #[arg(long, allow_hyphen_values = true)]
    pub gaussian_weights: Option<String>,
    /// Smallest training set or regime stratum that is fitted.
    #[arg(long)]
    pub n_min: Option<usize>,
    /// First verification day (YYYY-MM-DD).
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// Last verification day (YYYY-MM-DD).
    #[arg(long)]
    pub end: Option<NaiveDate>,
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [_] => parse_list(s),
        [a, b, c] => {
            let v = parse_list(&format!("{a},{b},{c}"))?;
            let (start, stop, step) = (v[0], v[1], v[2]);
            if !(step > 0.0) || !(stop >= start) {
                return Err(CliError::Usage(format!(
                    "theta grid {s:?}: need start <= stop and step > 0"
                )));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(CliError::Usage(format!(
            "theta grid {s:?}: expected a comma list or start:stop:step"
        ))),
    }
}

fn parse_gaussian(s: &str) -> Result<Vec<GaussianWeight>, CliError> {
    s.split(',')
        .map(|p| {
            let (mu, sigma) = p
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("gaussian weight {p:?}: expected mu:sigma")))?;
            let v = parse_list(&format!("{mu},{sigma}"))?;
            Ok(GaussianWeight { mu: v[0], sigma: v[1] })
        })
        .collect()
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                toml::from_str::<ExperimentConfig>(&text).map_err(|e| ConfigError {
                    violations: vec![format!("{}: {}", p.display(), e.message())],
                })?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.window_days {
            c.window_days = v;
        }
        if let Some(v) = self.theta {
            c.theta = v;
        }
        if let Some(v) = &self.theta_grid {
            c.theta_grid = parse_grid(v)?;
        }
        if let Some(v) = self.lead {
            c.lead_days = v;
        }
        if let Some(v) = &self.twcrps_thresholds {
            c.twcrps_thresholds = parse_list(v)?;
        }
        if let Some(v) = &self.sweep_thresholds {
            c.sweep_thresholds = parse_list(v)?;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.warm_start {
            c.warm_start = true;
        }
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        if let Some(v) = &self.gaussian_weights {
            c.gaussian_weights = parse_gaussian(v)?;
        }
        if let Some(v) = self.n_min {
            c.n_min = v;
        }
        if self.start.is_some() {
            c.start = self.start;
        }
        if self.end.is_some() {
            c.end = self.end;
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("5:6:0.5").unwrap(), vec![5.0, 5.5, 6.0]);
        assert_eq!(parse_grid("7.5").unwrap(), vec![7.5]);
        assert_eq!(parse_grid("7,8").unwrap(), vec![7.0, 8.0]);
        assert!(parse_grid("5:4:1").is_err());
    }

    #[test]
    fn flags_override_defaults_and_violations_accumulate() {
        let a = ConfigArgs {
            window_days: Some(20),
            gaussian_weights: Some("12:1.5,15:2".into()),
            ..ConfigArgs::default()
        };
        let c = a.resolve().unwrap();
        assert_eq!(c.window_days, 20);
        assert_eq!(c.gaussian_weights.len(), 2);
        let bad = ConfigArgs {
            window_days: Some(0),
            theta: Some(-2.0),
            ..ConfigArgs::default()
        };
        match bad.resolve() {
            Err(CliError::Config(e)) => assert_eq!(e.violations.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
