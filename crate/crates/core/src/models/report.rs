//! Tables, histograms and curves derived from per-case records alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::records::{CaseRecord, RecordSet};
use super::{Forecaster, ModelError};
use crate::dists::{Gev, TruncatedNormal};
use crate::scoring::{
    chi_square_uniform, ks_uniform, pit_histogram, rank_histogram, summarize_log_scores, twcrpss, ChiSquareTest,
    Histogram, KsTest, ScoreRow, ScoreTable, WeightFn,
};
use crate::special::mean;

pub const PIT_BINS: usize = 20;
/// Predictive probability of negative wind speed that counts as notable.
pub const NEG_PROB_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub forecaster: Forecaster,
    pub chi_square: ChiSquareTest,
    pub ks: KsTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogScoreRow {
    pub forecaster: Forecaster,
    pub mean: Option<f64>,
    pub n_finite: usize,
    pub n_infinite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub n_cases: usize,
    pub calibration: Vec<Calibration>,
    /// Each end bin of the ensemble rank histogram over the mean interior bin.
    pub rank_end_ratio: f64,
    pub rank_chi_square: ChiSquareTest,
    /// Share of combination forecasts issued by the GEV branch.
    pub gev_branch_share: f64,
    /// Share of GEV forecasts with more than 1% mass below zero.
    pub gev_neg_prob_share: f64,
    pub combination_neg_prob_share: f64,
    pub log_scores: Vec<LogScoreRow>,
}

/// twCRPSS over indicator thresholds against the TN forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillCurve {
    pub forecaster: Forecaster,
    pub points: Vec<(f64, f64)>,
}

impl SkillCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,twcrpss\n");
        for (r, v) in &self.points {
            s.push_str(&format!("{r},{v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationRow {
    pub station_id: String,
    /// Mean CRPS per forecaster in [`Forecaster::ALL`] order.
    pub crps: Vec<f64>,
    pub n_cases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: ScoreTable,
    pub pit_histograms: Vec<(Forecaster, Histogram)>,
    pub rank_histogram: Histogram,
    pub stations: Vec<StationRow>,
    pub skill_curves: Vec<SkillCurve>,
    pub summary: ReportSummary,
}

fn mean_of<'a>(rs: impl Iterator<Item = &'a CaseRecord>, f: impl Fn(&CaseRecord) -> f64) -> f64 {
    mean(rs.map(f)).unwrap_or(f64::NAN)
}

fn column(set: &RecordSet, label: &str) -> Result<usize, ModelError> {
    set.weight_index(label)
        .ok_or_else(|| ModelError::MissingColumn(label.to_string()))
}

fn score_row(set: &RecordSet, f: Forecaster, cols: &[usize]) -> Result<ScoreRow, ModelError> {
    let n = set.of(f).count();
    if n == 0 {
        return Err(ModelError::MissingForecaster(f.name()));
    }
    let hits = set
        .of(f)
        .filter(|r| r.q10 <= r.observation && r.observation <= r.q90)
        .count();
    Ok(ScoreRow {
        forecaster: f.name().to_string(),
        crps: mean_of(set.of(f), |r| r.crps),
        mae: mean_of(set.of(f), |r| (r.median - r.observation).abs()),
        coverage80: 100.0 * hits as f64 / n as f64,
        width80: mean_of(set.of(f), |r| r.q90 - r.q10),
        twcrps: cols.iter().map(|&c| mean_of(set.of(f), |r| r.weighted[c])).collect(),
        n_cases: n,
    })
}

fn ln_density(r: &CaseRecord) -> Option<f64> {
    let p = r.params;
    match r.dist_kind.as_str() {
        "tn" => TruncatedNormal::new(p[0], p[1]).ok().map(|d| d.ln_pdf(r.observation)),
        "gev" => Gev::new(p[0], p[1], p[2]).ok().map(|d| d.ln_pdf(r.observation)),
        _ => None,
    }
}

fn neg_prob_share(set: &RecordSet, f: Forecaster) -> f64 {
    let n = set.of(f).count();
    let hits = set
        .of(f)
        .filter(|r| r.dist_kind == "gev")
        .filter_map(|r| Gev::new(r.params[0], r.params[1], r.params[2]).ok())
        .filter(|d| d.neg_prob() > NEG_PROB_LEVEL)
        .count();
    if n == 0 {
        f64::NAN
    } else {
        hits as f64 / n as f64
    }
}

/// Build every report artifact from the records. `table_weights` select the
/// score table's twCRPS columns; `sweep` the thresholds of the skill curves.
pub fn build_report(set: &RecordSet, table_weights: &[WeightFn], sweep: &[f64]) -> Result<Report, ModelError> {
    let labels: Vec<String> = table_weights.iter().map(|w| w.column_label()).collect();
    let cols = labels.iter().map(|l| column(set, l)).collect::<Result<Vec<_>, _>>()?;
    let mut table = ScoreTable::new(labels);
    for f in Forecaster::ALL {
        table.rows.push(score_row(set, f, &cols)?);
    }

    let mut pit_histograms = Vec::new();
    let mut calibration = Vec::new();
    for f in [Forecaster::Tn, Forecaster::Gev, Forecaster::Combination] {
        let pits: Vec<f64> = set.of(f).map(|r| r.pit).collect();
        let h = pit_histogram(&pits, PIT_BINS);
        calibration.push(Calibration {
            forecaster: f,
            chi_square: chi_square_uniform(&h.counts())?,
            ks: ks_uniform(&pits)?,
        });
        pit_histograms.push((f, h));
    }

    let k = set.of(Forecaster::Ensemble).map(|r| r.params[0]).fold(0.0, f64::max) as usize;
    let ranks: Vec<usize> = set
        .of(Forecaster::Ensemble)
        .map(|r| (r.pit * r.params[0]).round() as usize + 1)
        .collect();
    let rank_histogram = rank_histogram(&ranks, k);
    let counts = rank_histogram.counts();
    let interior = mean(counts[1..counts.len() - 1].iter().map(|&c| c as f64)).unwrap_or(f64::NAN);
    let rank_end_ratio = counts[0].min(counts[counts.len() - 1]) as f64 / interior;

    let mut by_station: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for r in &set.records {
        let slot = Forecaster::ALL
            .iter()
            .position(|f| *f == r.forecaster)
            .expect("known forecaster");
        by_station
            .entry(r.station_id.as_str())
            .or_insert_with(|| vec![Vec::new(); Forecaster::ALL.len()])[slot]
            .push(r.crps);
    }
    let stations = by_station
        .into_iter()
        .map(|(id, per)| StationRow {
            station_id: id.to_string(),
            n_cases: per[0].len(),
            crps: per.into_iter().map(|v| mean(v).unwrap_or(f64::NAN)).collect(),
        })
        .collect();

    let reference: Vec<&CaseRecord> = set.of(Forecaster::Tn).collect();
    let mut skill_curves = Vec::new();
    for f in [Forecaster::Gev, Forecaster::Combination] {
        let rows: Vec<&CaseRecord> = set.of(f).collect();
        let mut points = Vec::new();
        for &r in sweep {
            let c = column(set, &WeightFn::Indicator { r }.column_label())?;
            let a: Vec<f64> = rows.iter().map(|x| x.weighted[c]).collect();
            let b: Vec<f64> = reference.iter().map(|x| x.weighted[c]).collect();
            points.push((r, twcrpss(&a, &b).unwrap_or(f64::NAN)));
        }
        skill_curves.push(SkillCurve { forecaster: f, points });
    }

    let comb = set.of(Forecaster::Combination).count();
    let gev_branch = set.of(Forecaster::Combination).filter(|r| r.dist_kind == "gev").count();
    let log_scores = [Forecaster::Tn, Forecaster::Gev, Forecaster::Combination]
        .into_iter()
        .map(|f| {
            let s: Vec<f64> = set.of(f).filter_map(|r| ln_density(r).map(|l| -l)).collect();
            let summary = summarize_log_scores(&s);
            LogScoreRow {
                forecaster: f,
                mean: summary.mean,
                n_finite: summary.n_finite,
                n_infinite: summary.n_infinite,
            }
        })
        .collect();

    Ok(Report {
        summary: ReportSummary {
            n_cases: table.rows[0].n_cases,
            calibration,
            rank_end_ratio,
            rank_chi_square: chi_square_uniform(&counts)?,
            gev_branch_share: gev_branch as f64 / comb as f64,
            gev_neg_prob_share: neg_prob_share(set, Forecaster::Gev),
            combination_neg_prob_share: neg_prob_share(set, Forecaster::Combination),
            log_scores,
        },
        table,
        pit_histograms,
        rank_histogram,
        stations,
        skill_curves,
    })
}

impl Report {
    pub fn stations_csv(&self) -> String {
        let mut s = String::from("station_id");
        for f in Forecaster::ALL {
            s.push(',');
            s.push_str(f.name());
        }
        s.push_str(",n_cases\n");
        for row in &self.stations {
            s.push_str(&row.station_id);
            for v in &row.crps {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{}\n", row.n_cases));
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("serializable");
        s.push('\n');
        s
    }

    /// File name and content of every report artifact.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("scores.csv".to_string(), self.table.to_csv()),
            ("scores.json".to_string(), self.table.to_json()),
        ];
        for (f, h) in &self.pit_histograms {
            out.push((format!("pit_{}.csv", f.name()), h.to_csv()));
        }
        out.push(("rank_ensemble.csv".to_string(), self.rank_histogram.to_csv()));
        out.push(("station_crps.csv".to_string(), self.stations_csv()));
        for c in &self.skill_curves {
            out.push((format!("twcrpss_{}.csv", c.forecaster.name()), c.to_csv()));
        }
        out.push(("report.json".to_string(), self.summary_json()));
        out
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<(), ModelError> {
        for (name, content) in self.files() {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| ModelError::Io {
                path: path.clone(),
                source: e,
            })?;
        }
        Ok(())
    }
}
