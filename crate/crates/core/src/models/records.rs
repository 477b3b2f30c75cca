//! Per-case forecast records, the single source every report is derived from.

use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{Forecaster, ModelError};

const FIXED: [&str; 17] = [
    "station_id",
    "valid_date",
    "lead_days",
    "forecaster",
    "dist_kind",
    "param1",
    "param2",
    "param3",
    "param4",
    "param5",
    "median",
    "q10",
    "q90",
    "pit",
    "crps",
    "observation",
    "branch_x_med",
];

/// One forecaster's forecast for one case with its scores.
///
/// `params` holds (mu, sigma) for `tn`, (mu, sigma, xi) for `gev` and
/// (n, mean, variance, min, max) for `ensemble`; unused slots are NaN.
/// For ensembles `pit` is (rank − 1)/n with the verification rank among
/// the n values and the observation, ties broken at random.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub station_id: String,
    pub valid_date: NaiveDate,
    pub lead_days: u32,
    pub forecaster: Forecaster,
    pub dist_kind: String,
    pub params: [f64; 5],
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub pit: f64,
    pub crps: f64,
    pub observation: f64,
    /// Ensemble median that selected the regime branch; NaN except for
    /// the combination forecaster.
    pub branch_x_med: f64,
    /// Weighted scores, aligned with [`RecordSet::weight_labels`].
    pub weighted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordSet {
    pub weight_labels: Vec<String>,
    pub records: Vec<CaseRecord>,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

fn parse_num(s: &str, line: u64, what: &str) -> Result<f64, ModelError> {
    match s {
        "" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| ModelError::Records {
            line,
            message: format!("{what}: cannot parse {s:?}"),
        }),
    }
}

impl RecordSet {
    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
        c.extend(self.weight_labels.iter().cloned());
        c
    }

    /// Column index of a weighted score.
    pub fn weight_index(&self, label: &str) -> Option<usize> {
        self.weight_labels.iter().position(|l| l == label)
    }

    pub fn of(&self, forecaster: Forecaster) -> impl Iterator<Item = &CaseRecord> {
        self.records.iter().filter(move |r| r.forecaster == forecaster)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| ModelError::Records {
            line: 0,
            message: e.to_string(),
        };
        w.write_record(self.columns()).map_err(io)?;
        let mut row = Vec::with_capacity(FIXED.len() + self.weight_labels.len());
        for r in &self.records {
            row.clear();
            row.push(r.station_id.clone());
            row.push(r.valid_date.format("%Y-%m-%d").to_string());
            row.push(r.lead_days.to_string());
            row.push(r.forecaster.name().to_string());
            row.push(r.dist_kind.clone());
            row.extend(r.params.iter().map(|&p| num(p)));
            for v in [r.median, r.q10, r.q90, r.pit, r.crps, r.observation, r.branch_x_med] {
                row.push(num(v));
            }
            row.extend(r.weighted.iter().map(|&v| num(v)));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| ModelError::Records {
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let bad = |line: u64, message: String| ModelError::Records { line, message };
        let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if header.len() < FIXED.len() || header.iter().take(FIXED.len()).ne(FIXED.iter().copied()) {
            return Err(bad(1, format!("header must start with {}", FIXED.join(","))));
        }
        let weight_labels: Vec<String> = header.iter().skip(FIXED.len()).map(str::to_string).collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let f = |i: usize| parse_num(&rec[i], line, FIXED.get(i).copied().unwrap_or("weighted score"));
            let valid_date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|_| bad(line, format!("valid_date: {:?} is not YYYY-MM-DD", &rec[1])))?;
            let lead_days = rec[2]
                .parse()
                .map_err(|_| bad(line, format!("lead_days: {:?} is not an integer", &rec[2])))?;
            let forecaster = rec[3].parse().map_err(|m| bad(line, m))?;
            records.push(CaseRecord {
                station_id: rec[0].to_string(),
                valid_date,
                lead_days,
                forecaster,
                dist_kind: rec[4].to_string(),
                params: [f(5)?, f(6)?, f(7)?, f(8)?, f(9)?],
                median: f(10)?,
                q10: f(11)?,
                q90: f(12)?,
                pit: f(13)?,
                crps: f(14)?,
                observation: f(15)?,
                branch_x_med: f(16)?,
                weighted: (FIXED.len()..rec.len()).map(f).collect::<Result<_, _>>()?,
            });
        }
        Ok(Self { weight_labels, records })
    }
}
