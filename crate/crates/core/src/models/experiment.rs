//! Rolling-window experiment: refit every model each verification day on
//! the trailing window and score every station's forecast.

use std::ops::Range;

use chrono::{Datelike, Days, NaiveDate};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::forecasters::{climatology_forecast, regime_branch, Branch};
use super::records::{CaseRecord, RecordSet};
use super::{ExperimentConfig, Forecaster, ModelError};
use crate::data::{Dataset, ForecastCase};
use crate::dists::{Gev, TruncatedNormal};
use crate::estimation::{
    accept_best, fit_gev_ml, fit_tn_min_crps, CaseSummary, FitOptions, FitSource, FittedModel, GevCoefficients,
    RegimeFit, StratumSizes, TnCoefficients, TrainingSet,
};
use crate::scoring::{
    central_interval, crps, twcrps, twcrps_indicator_sweep, verification_rank, EmpiricalEnsemble, PredictiveDist,
    WeightFn,
};

/// Smallest predictive scale issued when a fitted link turns nonpositive.
pub const SCALE_FLOOR: f64 = 0.05;
/// Skipped-day share above which a run reports a warning.
pub const SKIP_WARNING_SHARE: f64 = 0.05;

/// Models fitted for one verification day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayFit {
    pub date: NaiveDate,
    pub n_train: usize,
    pub tn: FittedModel,
    pub gev: FittedModel,
    pub regime_tn: FittedModel,
    pub regime_gev: FittedModel,
}

impl DayFit {
    pub fn regime(&self, theta: f64) -> RegimeFit {
        RegimeFit {
            theta,
            tn: self.regime_tn.clone(),
            gev: self.regime_gev.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunDiagnostics {
    pub verification_days: usize,
    pub scored_days: usize,
    pub skipped_days: Vec<NaiveDate>,
    pub scored_cases: usize,
    pub non_converged_fits: usize,
    pub shape_at_bound: usize,
    pub fallback_previous_window: usize,
    pub fallback_full_window: usize,
    pub floored_scales: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: RecordSet,
    pub fits: Vec<DayFit>,
    pub diagnostics: RunDiagnostics,
}

/// SplitMix64 finalizer; derives independent seeds from the run seed.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn day_seed(seed: u64, date: NaiveDate) -> u64 {
    mix_seed(seed, date.num_days_from_ce() as u64)
}

/// Cases of one lead time in (date, station) order with their summaries.
pub(crate) struct Prepared<'a> {
    pub cases: Vec<&'a ForecastCase>,
    pub summaries: Vec<CaseSummary>,
    /// Distinct dates with the index range of their cases.
    pub days: Vec<(NaiveDate, Range<usize>)>,
    pub k: usize,
}

impl<'a> Prepared<'a> {
    pub fn new(dataset: &'a Dataset, lead_days: u32) -> Result<Self, ModelError> {
        let mut cases: Vec<&ForecastCase> = dataset.cases().iter().filter(|c| c.lead_days == lead_days).collect();
        cases.sort_by(|a, b| (a.valid_date, &a.station_id).cmp(&(b.valid_date, &b.station_id)));
        let summaries = cases
            .iter()
            .map(|c| CaseSummary::from_members(&c.members, c.observation))
            .collect::<Result<Vec<_>, _>>()?;
        let mut days: Vec<(NaiveDate, Range<usize>)> = Vec::new();
        for (i, c) in cases.iter().enumerate() {
            match days.last_mut() {
                Some((d, r)) if *d == c.valid_date => r.end = i + 1,
                _ => days.push((c.valid_date, i..i + 1)),
            }
        }
        Ok(Self {
            cases,
            summaries,
            days,
            k: dataset.k(),
        })
    }

    /// Cases valid in `[date − m, date − 1]`.
    pub fn window(&self, date: NaiveDate, m: u32) -> Range<usize> {
        let first = date - Days::new(u64::from(m));
        let lo = self.cases.partition_point(|c| c.valid_date < first);
        let hi = self.cases.partition_point(|c| c.valid_date < date);
        lo..hi
    }

    pub fn training_set(&self, window: Range<usize>) -> Result<TrainingSet, ModelError> {
        Ok(TrainingSet::new(self.summaries[window].to_vec(), self.k)?)
    }

    /// Verification days as indices into `days`, and those that are
    /// skipped for lack of training data.
    pub fn plan(&self, config: &ExperimentConfig) -> (Vec<usize>, Vec<NaiveDate>) {
        let Some(first) = self.days.first().map(|d| d.0) else {
            return (Vec::new(), Vec::new());
        };
        let start = config.start.unwrap_or(first + Days::new(u64::from(config.window_days)));
        let end = config.end.unwrap_or(NaiveDate::MAX);
        let mut used = Vec::new();
        let mut skipped = Vec::new();
        for (i, (date, _)) in self.days.iter().enumerate() {
            if *date < start || *date > end {
                continue;
            }
            if self.window(*date, config.window_days).len() < config.n_min {
                skipped.push(*date);
            } else {
                used.push(i);
            }
        }
        (used, skipped)
    }
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, ModelError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ModelError::ThreadPool(e.to_string()))
}

/// Per-stratum fits of one day before fallbacks are resolved.
#[derive(Debug, Clone)]
pub(crate) struct StratumFits {
    pub low: Option<FittedModel>,
    pub high: Option<FittedModel>,
    pub sizes: StratumSizes,
}

pub(crate) fn fit_strata(
    train: &TrainingSet,
    theta: f64,
    warm: Option<(&TnCoefficients, &GevCoefficients)>,
    opts: &FitOptions,
) -> Result<StratumFits, ModelError> {
    let (low, high) = train.split(theta);
    let sizes = StratumSizes {
        low: low.len(),
        high: high.len(),
    };
    let low = if low.len() >= opts.n_min {
        Some(accept_best(fit_tn_min_crps(&low, warm.map(|w| w.0), opts))?)
    } else {
        None
    };
    let high = if high.len() >= opts.n_min {
        Some(accept_best(fit_gev_ml(&high, warm.map(|w| w.1), opts))?)
    } else {
        None
    };
    Ok(StratumFits { low, high, sizes })
}

/// Resolve a branch: own stratum fit, else the previous day's branch, else
/// the fit on the whole window.
pub(crate) fn resolve_branch(
    own: Option<FittedModel>,
    previous: Option<&FittedModel>,
    full: impl FnOnce() -> Result<FittedModel, ModelError>,
    sizes: StratumSizes,
) -> Result<FittedModel, ModelError> {
    let mut m = match (own, previous) {
        (Some(m), _) => m,
        (None, Some(p)) => {
            let mut m = p.clone();
            m.source = FitSource::PreviousWindow;
            m
        }
        (None, None) => {
            let mut m = full()?;
            m.source = FitSource::FullWindow;
            m
        }
    };
    m.stratum_sizes = Some(sizes);
    Ok(m)
}

struct FullFits {
    tn: FittedModel,
    gev: FittedModel,
    strata: StratumFits,
    n_train: usize,
}

fn fit_day(
    prep: &Prepared<'_>,
    day: usize,
    config: &ExperimentConfig,
    warm: Option<&DayFit>,
) -> Result<FullFits, ModelError> {
    let date = prep.days[day].0;
    let train = prep.training_set(prep.window(date, config.window_days))?;
    let opts = FitOptions {
        n_min: config.n_min,
        seed: day_seed(config.seed, date),
        warm_start: config.warm_start,
        ..FitOptions::default()
    };
    let window_end = Some(date - Days::new(1));
    let mut tn = accept_best(fit_tn_min_crps(&train, warm.and_then(|w| w.tn.tn()), &opts))?;
    let mut gev = accept_best(fit_gev_ml(&train, warm.and_then(|w| w.gev.gev()), &opts))?;
    tn.window_end = window_end;
    gev.window_end = window_end;
    let branch_warm = warm.and_then(|w| Some((w.regime_tn.tn()?, w.regime_gev.gev()?)));
    let mut strata = fit_strata(&train, config.theta, branch_warm, &opts)?;
    for m in strata.low.iter_mut().chain(strata.high.iter_mut()) {
        m.window_end = window_end;
    }
    Ok(FullFits {
        tn,
        gev,
        strata,
        n_train: train.len(),
    })
}

fn assemble(prep: &Prepared<'_>, day: usize, f: FullFits, previous: Option<&DayFit>) -> Result<DayFit, ModelError> {
    let sizes = f.strata.sizes;
    let regime_tn = resolve_branch(f.strata.low, previous.map(|p| &p.regime_tn), || Ok(f.tn.clone()), sizes)?;
    let regime_gev = resolve_branch(
        f.strata.high,
        previous.map(|p| &p.regime_gev),
        || Ok(f.gev.clone()),
        sizes,
    )?;
    Ok(DayFit {
        date: prep.days[day].0,
        n_train: f.n_train,
        tn: f.tn,
        gev: f.gev,
        regime_tn,
        regime_gev,
    })
}

/// Fit every verification day. Without warm starts the days are fitted in
/// parallel; fallbacks to the previous day are then resolved in order.
pub(crate) fn fit_days(
    prep: &Prepared<'_>,
    days: &[usize],
    config: &ExperimentConfig,
) -> Result<Vec<DayFit>, ModelError> {
    let mut out: Vec<DayFit> = Vec::with_capacity(days.len());
    if config.warm_start {
        for &d in days {
            let f = fit_day(prep, d, config, out.last())?;
            let fit = assemble(prep, d, f, out.last())?;
            out.push(fit);
        }
        return Ok(out);
    }
    let raw: Vec<FullFits> = days
        .par_iter()
        .map(|&d| fit_day(prep, d, config, None))
        .collect::<Result<_, _>>()?;
    for (&d, f) in days.iter().zip(raw) {
        let fit = assemble(prep, d, f, out.last())?;
        out.push(fit);
    }
    Ok(out)
}

pub(crate) fn tn_floored(coef: &TnCoefficients, c: &CaseSummary) -> (TruncatedNormal, bool) {
    let var = coef.variance(c.s2);
    let (sigma, floored) = if var > 0.0 && var.is_finite() {
        (var.sqrt().max(SCALE_FLOOR), var.sqrt() < SCALE_FLOOR)
    } else {
        (SCALE_FLOOR, true)
    };
    (
        TruncatedNormal::new(coef.location(c.x_bar), sigma).expect("positive scale"),
        floored,
    )
}

pub(crate) fn gev_floored(coef: &GevCoefficients, c: &CaseSummary) -> (Gev, bool) {
    let scale = coef.scale(c.x_bar);
    let floored = !(scale >= SCALE_FLOOR);
    let sigma = if floored { SCALE_FLOOR } else { scale };
    (
        Gev::new(coef.location(c.x_bar), sigma, coef.xi).expect("positive scale"),
        floored,
    )
}

/// Splits case weights into one indicator sweep plus individual weights.
pub(crate) struct WeightPlan {
    pub weights: Vec<WeightFn>,
    indicator_rs: Vec<f64>,
}

impl WeightPlan {
    pub fn new(weights: Vec<WeightFn>) -> Self {
        let indicator_rs = weights
            .iter()
            .filter_map(|w| match *w {
                WeightFn::Indicator { r } => Some(r),
                _ => None,
            })
            .collect();
        Self { weights, indicator_rs }
    }

    pub fn labels(&self) -> Vec<String> {
        self.weights.iter().map(|w| w.column_label()).collect()
    }

    pub fn score(&self, f: &PredictiveDist, y: f64) -> Result<Vec<f64>, ModelError> {
        let sweep = twcrps_indicator_sweep(f, y, &self.indicator_rs)?;
        let mut next = sweep.into_iter();
        self.weights
            .iter()
            .map(|w| match w {
                WeightFn::Indicator { .. } => Ok(next.next().expect("one value per indicator")),
                _ => Ok(twcrps(f, y, w)?),
            })
            .collect()
    }
}

fn params(f: &PredictiveDist) -> [f64; 5] {
    let nan = f64::NAN;
    match f {
        PredictiveDist::TruncatedNormal(d) => [d.mu(), d.sigma(), nan, nan, nan],
        PredictiveDist::Gev(d) => [d.mu(), d.sigma(), d.xi(), nan, nan],
        PredictiveDist::Ensemble(e) => {
            let m = e.members();
            [m.len() as f64, e.mean(), e.variance(), m[0], m[m.len() - 1]]
        }
    }
}

/// Score one forecast. `rng_seed` drives the random tie-breaking of
/// discrete forecasts.
pub(crate) fn score_case(
    case: &ForecastCase,
    forecaster: Forecaster,
    f: &PredictiveDist,
    weights: &WeightPlan,
    rng_seed: u64,
    branch_x_med: f64,
) -> Result<CaseRecord, ModelError> {
    let y = case.observation;
    let pit = match f {
        PredictiveDist::Ensemble(e) => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            (verification_rank(e.members(), y, &mut rng) - 1) as f64 / e.len() as f64
        }
        _ => f.cdf(y),
    };
    let (q10, q90) = central_interval(f, 0.8)?;
    Ok(CaseRecord {
        station_id: case.station_id.clone(),
        valid_date: case.valid_date,
        lead_days: case.lead_days,
        forecaster,
        dist_kind: f.kind().to_string(),
        params: params(f),
        median: f.median(),
        q10,
        q90,
        pit,
        crps: crps(f, y)?,
        observation: y,
        branch_x_med,
        weighted: weights.score(f, y)?,
    })
}

struct DayScores {
    records: Vec<CaseRecord>,
    floored: usize,
}

fn score_day(
    prep: &Prepared<'_>,
    day: usize,
    fit: &DayFit,
    config: &ExperimentConfig,
    weights: &WeightPlan,
) -> Result<DayScores, ModelError> {
    let (date, range) = &prep.days[day];
    let window = prep.window(*date, config.window_days);
    let obs: Vec<f64> = prep.cases[window].iter().map(|c| c.observation).collect();
    let clim: PredictiveDist = climatology_forecast(&obs)?.into();
    let tn = fit.tn.tn().expect("TN fit");
    let gev = fit.gev.gev().expect("GEV fit");
    let rtn = fit.regime_tn.tn().expect("TN branch");
    let rgev = fit.regime_gev.gev().expect("GEV branch");
    let mut records = Vec::with_capacity(range.len() * Forecaster::ALL.len());
    let mut floored = 0;
    for i in range.clone() {
        let case = prep.cases[i];
        let s = &prep.summaries[i];
        let seed = mix_seed(config.seed, i as u64);
        let ens: PredictiveDist = EmpiricalEnsemble::new(case.members.clone())?.into();
        let (d_tn, f1) = tn_floored(tn, s);
        let (d_gev, f2) = gev_floored(gev, s);
        let (d_comb, f3): (PredictiveDist, bool) = match regime_branch(s.x_med, config.theta) {
            Branch::Tn => {
                let (d, f) = tn_floored(rtn, s);
                (d.into(), f)
            }
            Branch::Gev => {
                let (d, f) = gev_floored(rgev, s);
                (d.into(), f)
            }
        };
        floored += usize::from(f1) + usize::from(f2) + usize::from(f3);
        let nan = f64::NAN;
        records.push(score_case(
            case,
            Forecaster::Climatology,
            &clim,
            weights,
            mix_seed(seed, 1),
            nan,
        )?);
        records.push(score_case(
            case,
            Forecaster::Ensemble,
            &ens,
            weights,
            mix_seed(seed, 2),
            nan,
        )?);
        records.push(score_case(case, Forecaster::Tn, &d_tn.into(), weights, 0, nan)?);
        records.push(score_case(case, Forecaster::Gev, &d_gev.into(), weights, 0, nan)?);
        records.push(score_case(case, Forecaster::Combination, &d_comb, weights, 0, s.x_med)?);
    }
    Ok(DayScores { records, floored })
}

/// Run the rolling experiment for `config.lead_days`. Results do not
/// depend on `config.jobs`.
pub fn run_rolling_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunOutput, ModelError> {
    config.validate()?;
    let prep = Prepared::new(dataset, config.lead_days)?;
    let (days, skipped) = prep.plan(config);
    let verification_days = days.len() + skipped.len();
    if days.is_empty() {
        return Err(ModelError::NoVerificationDays { skipped: skipped.len() });
    }
    let weights = WeightPlan::new(config.case_weights());
    let pool = thread_pool(config.jobs)?;
    let (fits, scored) = pool.install(|| -> Result<_, ModelError> {
        let fits = fit_days(&prep, &days, config)?;
        let scored: Vec<DayScores> = days
            .par_iter()
            .zip(fits.par_iter())
            .map(|(&d, fit)| score_day(&prep, d, fit, config, &weights))
            .collect::<Result<_, _>>()?;
        Ok((fits, scored))
    })?;

    let mut diagnostics = RunDiagnostics {
        verification_days,
        scored_days: days.len(),
        skipped_days: skipped,
        ..RunDiagnostics::default()
    };
    for f in &fits {
        for m in [&f.tn, &f.gev, &f.regime_tn, &f.regime_gev] {
            diagnostics.non_converged_fits += usize::from(!m.converged);
            diagnostics.shape_at_bound += usize::from(m.shape_at_bound);
        }
        for m in [&f.regime_tn, &f.regime_gev] {
            match m.source {
                FitSource::PreviousWindow => diagnostics.fallback_previous_window += 1,
                FitSource::FullWindow => diagnostics.fallback_full_window += 1,
                FitSource::Window => {}
            }
        }
    }
    let share = diagnostics.skipped_days.len() as f64 / verification_days as f64;
    if share > SKIP_WARNING_SHARE {
        let msg = format!(
            "{} of {} verification days ({:.1}%) skipped for lack of training data",
            diagnostics.skipped_days.len(),
            verification_days,
            100.0 * share
        );
        warn!("{msg}");
        diagnostics.warnings.push(msg);
    }
    let mut records = Vec::with_capacity(scored.iter().map(|s| s.records.len()).sum());
    for s in scored {
        diagnostics.floored_scales += s.floored;
        records.extend(s.records);
    }
    diagnostics.scored_cases = records.len() / Forecaster::ALL.len();
    Ok(RunOutput {
        records: RecordSet {
            weight_labels: weights.labels(),
            records,
        },
        fits,
        diagnostics,
    })
}
