use rayon::prelude::*;

use super::experiment::{
    day_seed, fit_strata, gev_floored, resolve_branch, thread_pool, tn_floored, Prepared, StratumFits,
};
use super::forecasters::{regime_branch, Branch};
use super::{ExperimentConfig, ModelError};
use crate::data::Dataset;
use crate::estimation::{accept_best, fit_gev_ml, fit_tn_min_crps, FitOptions, FittedModel};
use crate::scoring::{crps_gev, crps_truncated_normal};
use crate::special::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPoint {
    pub theta: f64,
    pub mean_crps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSelection {
    pub theta: f64,
    pub curve: Vec<ThetaPoint>,
    pub n_cases: usize,
}

impl ThetaSelection {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,mean_crps\n");
        for p in &self.curve {
            s.push_str(&format!("{},{}\n", p.theta, p.mean_crps));
        }
        s
    }
}

fn options(config: &ExperimentConfig, prep: &Prepared<'_>, day: usize) -> FitOptions {
    FitOptions {
        n_min: config.n_min,
        seed: day_seed(config.seed, prep.days[day].0),
        warm_start: config.warm_start,
        ..FitOptions::default()
    }
}

/// Mean CRPS of the regime-switching forecaster over the verification
/// days of `config` for one threshold.
fn regime_mean_crps(
    prep: &Prepared<'_>,
    days: &[usize],
    config: &ExperimentConfig,
    theta: f64,
) -> Result<(f64, usize), ModelError> {
    let strata_for = |d: usize, warm: Option<(&FittedModel, &FittedModel)>| -> Result<StratumFits, ModelError> {
        let train = prep.training_set(prep.window(prep.days[d].0, config.window_days))?;
        let warm = warm.and_then(|(t, g)| Some((t.tn()?, g.gev()?)));
        fit_strata(&train, theta, warm, &options(config, prep, d))
    };
    let mut branches: Vec<(FittedModel, FittedModel)> = Vec::with_capacity(days.len());
    let strata: Vec<Option<StratumFits>> = if config.warm_start {
        vec![None; days.len()]
    } else {
        days.par_iter()
            .map(|&d| strata_for(d, None).map(Some))
            .collect::<Result<_, _>>()?
    };
    for (&d, s) in days.iter().zip(strata) {
        let prev = branches.last();
        let s = match s {
            Some(s) => s,
            None => strata_for(d, prev.map(|(t, g)| (t, g)))?,
        };
        let opts = options(config, prep, d);
        let full = || prep.training_set(prep.window(prep.days[d].0, config.window_days));
        let tn = resolve_branch(
            s.low,
            prev.map(|p| &p.0),
            || Ok(accept_best(fit_tn_min_crps(&full()?, None, &opts))?),
            s.sizes,
        )?;
        let gev = resolve_branch(
            s.high,
            prev.map(|p| &p.1),
            || Ok(accept_best(fit_gev_ml(&full()?, None, &opts))?),
            s.sizes,
        )?;
        branches.push((tn, gev));
    }
    let per_day: Vec<CompensatedSum> = days
        .par_iter()
        .zip(branches.par_iter())
        .map(|(&d, (tn, gev))| {
            let tn = tn.tn().expect("TN branch");
            let gev = gev.gev().expect("GEV branch");
            let mut acc = CompensatedSum::new();
            for i in prep.days[d].1.clone() {
                let s = &prep.summaries[i];
                let score = match regime_branch(s.x_med, theta) {
                    Branch::Tn => crps_truncated_normal(&tn_floored(tn, s).0, s.y),
                    Branch::Gev => crps_gev(&gev_floored(gev, s).0, s.y)?,
                };
                acc.add(score);
            }
            Ok(acc)
        })
        .collect::<Result<_, ModelError>>()?;
    let mut total = CompensatedSum::new();
    for s in &per_day {
        total.merge(s);
    }
    let n: usize = days.iter().map(|&d| prep.days[d].1.len()).sum();
    Ok((total.value() / n as f64, n))
}

/// Run the regime-switching pipeline for every threshold in `grid` and
/// return the one with the smallest mean CRPS; ties go to the smaller
/// threshold.
pub fn select_theta(dataset: &Dataset, config: &ExperimentConfig, grid: &[f64]) -> Result<ThetaSelection, ModelError> {
    config.validate()?;
    if grid.is_empty() {
        return Err(ModelError::EmptyThetaGrid);
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let prep = Prepared::new(dataset, config.lead_days)?;
    let (days, skipped) = prep.plan(config);
    if days.is_empty() {
        return Err(ModelError::NoVerificationDays { skipped: skipped.len() });
    }
    let pool = thread_pool(config.jobs)?;
    let mut curve = Vec::with_capacity(sorted.len());
    let mut n_cases = 0;
    for &theta in &sorted {
        let (mean_crps, n) = pool.install(|| regime_mean_crps(&prep, &days, config, theta))?;
        n_cases = n;
        curve.push(ThetaPoint { theta, mean_crps });
    }
    let best = curve
        .iter()
        .fold(None::<ThetaPoint>, |acc, p| match acc {
            Some(a) if a.mean_crps <= p.mean_crps => Some(a),
            _ => Some(*p),
        })
        .expect("nonempty grid");
    Ok(ThetaSelection {
        theta: best.theta,
        curve,
        n_cases,
    })
}
