//! Synthetic benchmark with a known truth.
//!
//! Each station has a latent daily median wind speed `m` made of a station
//! level, an annual cycle and an AR(1) anomaly. Observations are drawn
//! from a truncated normal law when `m < regime_theta` and from a GEV law
//! with shape `tail_shape` otherwise; both have median `m` and the same
//! interquartile range, and high-regime observations are moved up by
//! `regime_shift`. Ensemble members are draws from the unshifted law,
//! shrunk towards `m` by `dispersion_factor`, offset by `bias` and by a
//! lead-dependent error common to all members, then clipped at zero.

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, ForecastCase};
use crate::dists::{Gev, TruncatedNormal};
use crate::scoring::PredictiveDist;

const AR_COEFFICIENT: f64 = 0.6;
const ANOMALY_SD: f64 = 1.8;
const SEASONAL_AMPLITUDE: f64 = 1.0;
const LEVEL_RANGE: (f64, f64) = (5.0, 8.0);
const MIN_MEDIAN: f64 = 1.0;
/// Lead error standard deviation per extra lead day, relative to the
/// truth scale.
const LEAD_ERROR: f64 = 0.3;
/// Interquartile range of the standard normal law.
const NORMAL_IQR: f64 = 1.348_979_500_392_163_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_stations: usize,
    pub n_days: usize,
    pub k: usize,
    pub seed: u64,
    pub bias: f64,
    pub dispersion_factor: f64,
    pub regime_theta: f64,
    pub tail_shape: f64,
    pub regime_shift: f64,
    pub start_date: NaiveDate,
    pub leads: Vec<u32>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_stations: 50,
            n_days: 395,
            k: 50,
            seed: 1,
            bias: -1.0,
            dispersion_factor: 0.4,
            regime_theta: 8.5,
            tail_shape: 0.2,
            regime_shift: 0.0,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            leads: vec![1],
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let mut v = Vec::new();
        if self.n_stations == 0 {
            v.push("n_stations must be at least 1".to_string());
        }
        if self.n_days == 0 {
            v.push("n_days must be at least 1".to_string());
        }
        if self.k < 2 {
            v.push(format!("k = {} must be at least 2", self.k));
        }
        if !self.bias.is_finite() {
            v.push("bias must be finite".to_string());
        }
        if !(self.dispersion_factor > 0.0 && self.dispersion_factor <= 1.0) {
            v.push(format!(
                "dispersion_factor = {} must lie in (0, 1]",
                self.dispersion_factor
            ));
        }
        if self.regime_theta.is_nan() {
            v.push("regime_theta must not be NaN".to_string());
        }
        if !(self.tail_shape > -0.4 && self.tail_shape < 0.9) {
            v.push(format!("tail_shape = {} must lie in (-0.4, 0.9)", self.tail_shape));
        }
        if !self.regime_shift.is_finite() {
            v.push("regime_shift must be finite".to_string());
        }
        if self.leads.is_empty() || self.leads.contains(&0) {
            v.push("leads must be a nonempty list of positive lead days".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(DataError::InvalidSpec(v))
        }
    }

    /// Truth scale as a function of the latent median.
    pub fn truth_scale(m: f64) -> f64 {
        0.5 + 0.15 * m
    }
}

/// Generated cases with the law each observation was drawn from.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Aligned with `dataset.cases()`.
    pub truth: Vec<PredictiveDist>,
    /// Whether each case was drawn from the high regime.
    pub high_regime: Vec<bool>,
}

struct Law {
    tn: Option<TruncatedNormal>,
    gev: Option<Gev>,
}

impl Law {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if let Some(d) = &self.tn {
            // rejection from the parent normal; the cutoff is at least 1.5
            // scales below the location, so acceptance is above 93%
            loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = d.mu() + d.sigma() * z;
                if x > 0.0 {
                    return x;
                }
            }
        }
        let d = self.gev.as_ref().expect("one law is set");
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        d.quantile(u).expect("u in (0, 1)")
    }

    fn dist(&self) -> PredictiveDist {
        match (&self.tn, &self.gev) {
            (Some(d), _) => (*d).into(),
            (None, Some(g)) => (*g).into(),
            (None, None) => unreachable!("one law is set"),
        }
    }
}

fn law(m: f64, high: bool, shape: f64, shift: f64) -> Law {
    let s = SyntheticSpec::truth_scale(m);
    if !high {
        return Law {
            tn: Some(TruncatedNormal::new(m, s).expect("positive scale")),
            gev: None,
        };
    }
    let std = Gev::new(0.0, 1.0, shape).expect("valid shape");
    let iqr = std.quantile(0.75).expect("p in (0, 1)") - std.quantile(0.25).expect("p in (0, 1)");
    let sigma = s * NORMAL_IQR / iqr;
    let mu = m + shift - sigma * std.median();
    Law {
        tn: None,
        gev: Some(Gev::new(mu, sigma, shape).expect("positive scale")),
    }
}

/// Draw a synthetic dataset; identical specs give identical data.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innovation_sd = ANOMALY_SD * (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
    let mut rows: Vec<(NaiveDate, usize, u32, ForecastCase, PredictiveDist, bool)> = Vec::new();
    for station in 0..spec.n_stations {
        let station_id = format!("S{:03}", station + 1);
        let level = rng.random_range(LEVEL_RANGE.0..LEVEL_RANGE.1);
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut anomaly = ANOMALY_SD * z0;
        for day in 0..spec.n_days {
            let date = spec.start_date + Days::new(day as u64);
            if day > 0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                anomaly = AR_COEFFICIENT * anomaly + innovation_sd * e;
            }
            let phase = 2.0 * std::f64::consts::PI * (f64::from(date.ordinal()) - 15.0) / 365.25;
            let m = (level + SEASONAL_AMPLITUDE * phase.cos() + anomaly).max(MIN_MEDIAN);
            let high = m >= spec.regime_theta;
            let observed = law(m, high, spec.tail_shape, if high { spec.regime_shift } else { 0.0 });
            let ensemble = law(m, high, spec.tail_shape, 0.0);
            let y = observed.sample(&mut rng).max(0.0);
            let s = SyntheticSpec::truth_scale(m);
            for &lead in &spec.leads {
                let e: f64 = StandardNormal.sample(&mut rng);
                let lead_error = LEAD_ERROR * f64::from(lead - 1) * s * e;
                let members = (0..spec.k)
                    .map(|_| {
                        let z = ensemble.sample(&mut rng);
                        (m + spec.bias + lead_error + spec.dispersion_factor * (z - m)).max(0.0)
                    })
                    .collect();
                rows.push((
                    date,
                    station,
                    lead,
                    ForecastCase {
                        station_id: station_id.clone(),
                        valid_date: date,
                        lead_days: lead,
                        members,
                        observation: y,
                    },
                    observed.dist(),
                    high,
                ));
            }
        }
    }
    rows.sort_by_key(|r| (r.0, r.2, r.1));
    let mut cases = Vec::with_capacity(rows.len());
    let mut truth = Vec::with_capacity(rows.len());
    let mut high_regime = Vec::with_capacity(rows.len());
    for (_, _, _, c, t, h) in rows {
        cases.push(c);
        truth.push(t);
        high_regime.push(h);
    }
    Ok(SyntheticData {
        dataset: Dataset::new(cases)?,
        truth,
        high_regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_stations: 4,
            n_days: 40,
            k: 10,
            leads: vec![1, 2],
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = generate_synthetic(&SyntheticSpec { seed: 2, ..small() }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn leads_share_the_observation() {
        let d = generate_synthetic(&small()).unwrap();
        assert_eq!(d.dataset.len(), 4 * 40 * 2);
        let l1 = d.dataset.for_lead(1);
        let l2 = d.dataset.for_lead(2);
        for (a, b) in l1.cases().iter().zip(l2.cases()) {
            assert_eq!(
                (a.valid_date, &a.station_id, a.observation),
                (b.valid_date, &b.station_id, b.observation)
            );
        }
    }

    #[test]
    fn high_regime_law_has_the_target_median() {
        let l = law(9.0, true, 0.2, 0.0);
        let g = l.gev.unwrap();
        assert!((g.median() - 9.0).abs() < 1e-12);
        let iqr = g.quantile(0.75).unwrap() - g.quantile(0.25).unwrap();
        assert!((iqr - SyntheticSpec::truth_scale(9.0) * NORMAL_IQR).abs() < 1e-12);
    }

    #[test]
    fn invalid_spec_lists_every_problem() {
        let spec = SyntheticSpec {
            k: 1,
            dispersion_factor: 1.5,
            tail_shape: 0.95,
            ..SyntheticSpec::default()
        };
        match spec.validate() {
            Err(DataError::InvalidSpec(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
