//! Forecasters and the rolling-window verification experiment.

mod config;
mod experiment;
mod forecasters;
mod records;
mod report;
mod theta;

pub use config::{ConfigError, ExperimentConfig, GaussianWeight};
pub use experiment::{run_rolling_experiment, DayFit, RunDiagnostics, RunOutput, SCALE_FLOOR, SKIP_WARNING_SHARE};
pub use forecasters::{
    climatology_forecast, predict_gev, predict_regime, predict_tn, regime_branch, Branch, Forecaster,
};
pub use records::{CaseRecord, RecordSet};
pub use report::{
    build_report, Calibration, LogScoreRow, Report, ReportSummary, SkillCurve, StationRow, NEG_PROB_LEVEL, PIT_BINS,
};
pub use theta::{select_theta, ThetaPoint, ThetaSelection};

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::estimation::EstimationError;
use crate::scoring::ScoreError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("no verification day has enough training data ({skipped} skipped)")]
    NoVerificationDays { skipped: usize },
    #[error("theta grid is empty")]
    EmptyThetaGrid,
    #[error("records line {line}: {message}")]
    Records { line: u64, message: String },
    #[error("records have no {0} forecasts")]
    MissingForecaster(&'static str),
    #[error("records have no column {0}")]
    MissingColumn(String),
    #[error("cannot start worker threads: {0}")]
    ThreadPool(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
