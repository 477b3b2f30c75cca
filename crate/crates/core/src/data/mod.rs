//! Forecast cases, file formats and the synthetic benchmark generator.

mod cases;
mod grid;
mod synthetic;

pub use cases::{read_cases, read_cases_from, write_cases, write_cases_to};
pub use grid::{
    bilinear_to_station, build_cases, daily_max_reduce, read_grid, read_grid_from, read_observations, read_stations,
    GridSpec, GriddedEnsembleField, Station,
};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: invalid UTF-8")]
    NonUtf8 { line: u64 },
    #[error("station {station} at ({lat}, {lon}) lies outside the grid")]
    OutsideGrid { station: String, lat: f64, lon: f64 },
    #[error("lead day {lead}: missing forecast steps at hours {missing:?}")]
    MissingSteps { lead: u32, missing: Vec<u32> },
    #[error("member count mismatch: expected {expected}, found {found}")]
    MemberCount { expected: usize, found: usize },
    #[error("invalid case {station} {date}: {reason}")]
    InvalidCase {
        station: String,
        date: NaiveDate,
        reason: &'static str,
    },
    #[error("invalid synthetic spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

/// One (station, valid date, lead) record: ensemble members and the
/// verifying daily maximum wind speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastCase {
    pub station_id: String,
    pub valid_date: NaiveDate,
    pub lead_days: u32,
    pub members: Vec<f64>,
    pub observation: f64,
}

impl ForecastCase {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |reason| DataError::InvalidCase {
            station: self.station_id.clone(),
            date: self.valid_date,
            reason,
        };
        if self.lead_days == 0 {
            return Err(fail("lead_days must be at least 1"));
        }
        if !(self.observation.is_finite() && self.observation >= 0.0) {
            return Err(fail("observation must be finite and nonnegative"));
        }
        if self.members.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(fail("members must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Immutable collection of cases sharing one ensemble size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    cases: Vec<ForecastCase>,
    k: usize,
}

impl Dataset {
    pub fn new(cases: Vec<ForecastCase>) -> Result<Self, DataError> {
        let k = cases.first().map_or(0, |c| c.members.len());
        for c in &cases {
            if c.members.len() != k {
                return Err(DataError::MemberCount {
                    expected: k,
                    found: c.members.len(),
                });
            }
            c.validate()?;
        }
        Ok(Self { cases, k })
    }

    /// Empty dataset with a known ensemble size.
    pub fn empty(k: usize) -> Self {
        Self { cases: Vec::new(), k }
    }

    pub fn cases(&self) -> &[ForecastCase] {
        &self.cases
    }

    pub fn into_cases(self) -> Vec<ForecastCase> {
        self.cases
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Cases of one lead time.
    pub fn for_lead(&self, lead_days: u32) -> Dataset {
        Dataset {
            cases: self
                .cases
                .iter()
                .filter(|c| c.lead_days == lead_days)
                .cloned()
                .collect(),
            k: self.k,
        }
    }

    /// Cases with valid date in `[from, to]`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> Dataset {
        Dataset {
            cases: self
                .cases
                .iter()
                .filter(|c| c.valid_date >= from && c.valid_date <= to)
                .cloned()
                .collect(),
            k: self.k,
        }
    }

    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.cases.iter().map(|c| c.valid_date).min()?;
        let last = self.cases.iter().map(|c| c.valid_date).max()?;
        Some((first, last))
    }
}
