//! Proper scoring rules and calibration diagnostics.
//!
//! Every score is negatively oriented. The CRPS of the parametric laws is
//! evaluated in closed form; threshold-weighted variants fall back to
//! adaptive quadrature of the defining integral, except for discrete
//! ensembles where the weighted integral is exact piece by piece.

mod closed_form;
mod diagnostics;
mod table;

pub use closed_form::{crps_ensemble, crps_gev, crps_truncated_normal, twcrps_ensemble};
pub use diagnostics::{
    central_interval, chi_square_uniform, coverage_width, ks_uniform, mae_median, pit_histogram, rank_histogram,
    verification_rank, ChiSquareTest, Histogram, HistogramBin, IntervalSummary, KsTest,
};
pub use table::{ScoreRow, ScoreTable};

use thiserror::Error;

use crate::dists::{DistError, Gev, TruncatedNormal};
use crate::quadrature::{self, QuadError, QuadOptions};
use crate::special::{mean, norm_cdf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("GEV shape {xi} >= 1 has an infinite mean; the CRPS is undefined")]
    InfiniteMean { xi: f64 },
    #[error("the logarithmic score needs a density; ensembles have none")]
    NoDensity,
    #[error("the PIT needs a continuous predictive law; use the verification rank for ensembles")]
    NotContinuous,
    #[error("numerical integration failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("skill score undefined: mean reference score is {0}")]
    UndefinedSkill(f64),
    #[error("empty case set")]
    EmptyCaseSet,
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(&'static str),
    #[error("weight function parameter {name} = {value} is invalid")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error("{what} has {left} entries but {right} were expected")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
}

/// Discrete forecast placing mass 1/k on each value (raw ensembles and
/// climatology). Values are kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEnsemble {
    sorted: Vec<f64>,
    /// ½ E|X − X'| = (1/k²) Σ (2i − k − 1) x_(i)
    half_spread: f64,
}

impl EmpiricalEnsemble {
    pub fn new(values: impl Into<Vec<f64>>) -> Result<Self, ScoreError> {
        let mut sorted = values.into();
        if sorted.is_empty() {
            return Err(ScoreError::InvalidEnsemble("no members"));
        }
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(ScoreError::InvalidEnsemble("non-finite member"));
        }
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len() as f64;
        let mut acc = crate::special::CompensatedSum::new();
        for (i, x) in sorted.iter().enumerate() {
            acc.add((2.0 * (i as f64 + 1.0) - k - 1.0) * x);
        }
        let half_spread = acc.value() / (k * k);
        Ok(Self { sorted, half_spread })
    }

    pub fn members(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub(crate) fn half_spread(&self) -> f64 {
        self.half_spread
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, z: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= z) as f64 / self.sorted.len() as f64
    }

    /// Linear interpolation between order statistics (type 7).
    pub fn quantile(&self, p: f64) -> Result<f64, ScoreError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::ProbabilityOutOfRange(p).into());
        }
        let k = self.sorted.len();
        let h = (k - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(k - 1);
        let frac = h - lo as f64;
        Ok(self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo]))
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("0.5 is a valid probability")
    }

    pub fn mean(&self) -> f64 {
        mean(self.sorted.iter().copied()).expect("nonempty")
    }

    /// Population variance (divide by k).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        mean(self.sorted.iter().map(|x| (x - m) * (x - m))).expect("nonempty")
    }
}

/// A forecast that can be scored.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveDist {
    TruncatedNormal(TruncatedNormal),
    Gev(Gev),
    Ensemble(EmpiricalEnsemble),
}

impl From<TruncatedNormal> for PredictiveDist {
    fn from(d: TruncatedNormal) -> Self {
        Self::TruncatedNormal(d)
    }
}

impl From<Gev> for PredictiveDist {
    fn from(d: Gev) -> Self {
        Self::Gev(d)
    }
}

impl From<EmpiricalEnsemble> for PredictiveDist {
    fn from(d: EmpiricalEnsemble) -> Self {
        Self::Ensemble(d)
    }
}

impl PredictiveDist {
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Self::TruncatedNormal(d) => d.cdf_unchecked(z),
            Self::Gev(d) => d.cdf_unchecked(z),
            Self::Ensemble(e) => e.cdf(z),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, ScoreError> {
        Ok(match self {
            Self::TruncatedNormal(d) => d.quantile(p)?,
            Self::Gev(d) => d.quantile(p)?,
            Self::Ensemble(e) => e.quantile(p)?,
        })
    }

    pub fn median(&self) -> f64 {
        match self {
            Self::TruncatedNormal(d) => d.median(),
            Self::Gev(d) => d.median(),
            Self::Ensemble(e) => e.median(),
        }
    }

    /// Short tag used in output files.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::TruncatedNormal(_) => "tn",
            Self::Gev(_) => "gev",
            Self::Ensemble(_) => "ensemble",
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Ensemble(_))
    }
}

/// Nonnegative weight on the real line for threshold-weighted scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFn {
    Constant,
    /// w(z) = 1{z ≥ r}
    Indicator {
        r: f64,
    },
    /// w(z) = Φ((z − mu)/sigma)
    GaussianCdf {
        mu: f64,
        sigma: f64,
    },
}

impl WeightFn {
    pub fn indicator(r: f64) -> Result<Self, ScoreError> {
        if !r.is_finite() {
            return Err(ScoreError::InvalidWeight { name: "r", value: r });
        }
        Ok(Self::Indicator { r })
    }

    pub fn gaussian_cdf(mu: f64, sigma: f64) -> Result<Self, ScoreError> {
        if !mu.is_finite() {
            return Err(ScoreError::InvalidWeight { name: "mu", value: mu });
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(ScoreError::InvalidWeight {
                name: "sigma",
                value: sigma,
            });
        }
        Ok(Self::GaussianCdf { mu, sigma })
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::Indicator { r } => {
                if z >= r {
                    1.0
                } else {
                    0.0
                }
            }
            Self::GaussianCdf { mu, sigma } => norm_cdf((z - mu) / sigma),
        }
    }

    /// Antiderivative W with W(b) − W(a) = ∫_a^b w.
    pub(crate) fn antiderivative(&self, z: f64) -> f64 {
        match *self {
            Self::Constant => z,
            Self::Indicator { r } => (z - r).max(0.0),
            Self::GaussianCdf { mu, sigma } => {
                let t = (z - mu) / sigma;
                sigma * (t * norm_cdf(t) + crate::special::norm_pdf(t))
            }
        }
    }

    /// Column name in score tables, e.g. `twcrps_r10`.
    pub fn column_label(&self) -> String {
        match *self {
            Self::Constant => "crps".to_string(),
            Self::Indicator { r } => format!("twcrps_r{r}"),
            Self::GaussianCdf { mu, sigma } => format!("twcrps_g{mu}_{sigma}"),
        }
    }

    /// Inverse of [`WeightFn::column_label`].
    pub fn from_column_label(label: &str) -> Option<Self> {
        if label == "crps" {
            return Some(Self::Constant);
        }
        if let Some(r) = label.strip_prefix("twcrps_r") {
            return Self::indicator(r.parse().ok()?).ok();
        }
        let (mu, sigma) = label.strip_prefix("twcrps_g")?.split_once('_')?;
        Self::gaussian_cdf(mu.parse().ok()?, sigma.parse().ok()?).ok()
    }
}

/// Continuous ranked probability score.
pub fn crps(f: &PredictiveDist, y: f64) -> Result<f64, ScoreError> {
    crate::dists::check_finite("y", y)?;
    match f {
        PredictiveDist::TruncatedNormal(d) => Ok(crps_truncated_normal(d, y)),
        PredictiveDist::Gev(d) => crps_gev(d, y),
        PredictiveDist::Ensemble(e) => Ok(crps_ensemble(e, y)),
    }
}

/// Threshold-weighted CRPS. Constant weights go through [`crps`]; discrete
/// ensembles are integrated exactly; parametric laws use quadrature.
pub fn twcrps(f: &PredictiveDist, y: f64, w: &WeightFn) -> Result<f64, ScoreError> {
    match (f, w) {
        (_, WeightFn::Constant) => crps(f, y),
        (PredictiveDist::Ensemble(e), _) => {
            crate::dists::check_finite("y", y)?;
            Ok(twcrps_ensemble(e, y, w))
        }
        _ => crps_quadrature(f, y, w),
    }
}

fn push_if_inside(points: &mut Vec<f64>, z: f64, lo: f64, hi: f64) {
    if z.is_finite() && z > lo && z < hi {
        points.push(z);
    }
}

fn check_integrable(f: &PredictiveDist, y: f64) -> Result<(), ScoreError> {
    crate::dists::check_finite("y", y)?;
    if let PredictiveDist::Gev(d) = f {
        if d.xi() >= 1.0 {
            return Err(ScoreError::InfiniteMean { xi: d.xi() });
        }
    }
    Ok(())
}

/// `[min(y, q(1e-9)) − 1, max(y, q(1 − 1e-9)) + 1]`
fn integration_bounds(f: &PredictiveDist, y: f64) -> Result<(f64, f64), ScoreError> {
    let (q_lo, q_hi) = match f {
        PredictiveDist::Ensemble(e) => (e.members()[0], e.members()[e.len() - 1]),
        _ => (f.quantile(1e-9)?, f.quantile(1.0 - 1e-9)?),
    };
    Ok((q_lo.min(y) - 1.0, q_hi.max(y) + 1.0))
}

/// Panel boundaries inside `(lo, hi)` where the integrand has kinks or
/// changes quickly, plus the two ends, sorted.
fn breakpoints(f: &PredictiveDist, y: f64, w: &WeightFn, lo: f64, hi: f64) -> Result<Vec<f64>, ScoreError> {
    let mut points = vec![lo, hi];
    push_if_inside(&mut points, y, lo, hi);
    match f {
        PredictiveDist::Ensemble(e) => {
            for &x in e.members() {
                push_if_inside(&mut points, x, lo, hi);
            }
        }
        PredictiveDist::Gev(d) => {
            push_if_inside(&mut points, d.lower_bound(), lo, hi);
            push_if_inside(&mut points, d.upper_bound(), lo, hi);
        }
        PredictiveDist::TruncatedNormal(_) => push_if_inside(&mut points, 0.0, lo, hi),
    }
    if f.is_continuous() {
        for j in 1..=9 {
            let tail = 10f64.powi(-j);
            push_if_inside(&mut points, f.quantile(tail)?, lo, hi);
            push_if_inside(&mut points, f.quantile(1.0 - tail)?, lo, hi);
        }
        for p in [0.25, 0.5, 0.75] {
            push_if_inside(&mut points, f.quantile(p)?, lo, hi);
        }
    }
    if let WeightFn::GaussianCdf { mu, sigma } = *w {
        for s in [-10.0, -5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0, 10.0] {
            push_if_inside(&mut points, mu + s * sigma, lo, hi);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(points)
}

/// ∫ (F(z) − 1{y ≤ z})² w(z) dz by adaptive quadrature, over
/// `[min(y, q(1e-9)) − 1, max(y, q(1 − 1e-9)) + 1]`.
pub fn crps_quadrature(f: &PredictiveDist, y: f64, w: &WeightFn) -> Result<f64, ScoreError> {
    check_integrable(f, y)?;
    let (mut lo, hi) = integration_bounds(f, y)?;
    if let WeightFn::Indicator { r } = *w {
        if r >= hi {
            return Ok(0.0);
        }
        lo = lo.max(r);
    }
    let points = breakpoints(f, y, w, lo, hi)?;
    let integrand = |z: f64| {
        let step = if y <= z { 1.0 } else { 0.0 };
        let d = f.cdf(z) - step;
        d * d * w.eval(z)
    };
    let est = quadrature::integrate(integrand, &points, &QuadOptions::default())?;
    Ok(est.value.max(0.0))
}

/// twCRPS for the indicator weights 1{z ≥ r} at each threshold in `rs`.
/// Parametric laws share a single adaptive integration with every
/// threshold as a breakpoint; ensembles are exact.
pub fn twcrps_indicator_sweep(f: &PredictiveDist, y: f64, rs: &[f64]) -> Result<Vec<f64>, ScoreError> {
    for &r in rs {
        if !r.is_finite() {
            return Err(ScoreError::InvalidWeight { name: "r", value: r });
        }
    }
    if let PredictiveDist::Ensemble(e) = f {
        crate::dists::check_finite("y", y)?;
        return Ok(rs
            .iter()
            .map(|&r| twcrps_ensemble(e, y, &WeightFn::Indicator { r }))
            .collect());
    }
    check_integrable(f, y)?;
    let (lo, hi) = integration_bounds(f, y)?;
    let mut points = breakpoints(f, y, &WeightFn::Constant, lo, hi)?;
    for &r in rs {
        push_if_inside(&mut points, r, lo, hi);
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let integrand = |z: f64| {
        let step = if y <= z { 1.0 } else { 0.0 };
        let d = f.cdf(z) - step;
        d * d
    };
    let (_, parts) = quadrature::integrate_segments(integrand, &points, &QuadOptions::default())?;
    // tail[i] = integral over [points[i], hi]
    let mut tail = vec![0.0; points.len()];
    let mut acc = crate::special::CompensatedSum::new();
    for i in (0..parts.len()).rev() {
        acc.add(parts[i]);
        tail[i] = acc.value();
    }
    Ok(rs
        .iter()
        .map(|&r| {
            if r >= hi {
                0.0
            } else if r <= lo {
                tail[0].max(0.0)
            } else {
                let i = points.partition_point(|&p| p < r);
                tail[i].max(0.0)
            }
        })
        .collect())
}

/// Skill of mean score `score` against mean reference score `reference`,
/// 1 − score/reference.
pub fn skill(score: f64, reference: f64) -> Result<f64, ScoreError> {
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(ScoreError::UndefinedSkill(reference));
    }
    Ok(1.0 - score / reference)
}

/// Threshold-weighted skill score on mean scores over a case set.
pub fn twcrpss(scores: &[f64], reference: &[f64]) -> Result<f64, ScoreError> {
    if scores.len() != reference.len() {
        return Err(ScoreError::LengthMismatch {
            what: "reference scores",
            left: reference.len(),
            right: scores.len(),
        });
    }
    let s = mean(scores.iter().copied()).ok_or(ScoreError::EmptyCaseSet)?;
    let r = mean(reference.iter().copied()).ok_or(ScoreError::EmptyCaseSet)?;
    skill(s, r)
}

/// Logarithmic score −ln f(y); `+inf` when the density vanishes at y.
pub fn log_score(f: &PredictiveDist, y: f64) -> Result<f64, ScoreError> {
    crate::dists::check_finite("y", y)?;
    let ln_f = match f {
        PredictiveDist::TruncatedNormal(d) => d.ln_pdf(y),
        PredictiveDist::Gev(d) => d.ln_pdf(y),
        PredictiveDist::Ensemble(_) => return Err(ScoreError::NoDensity),
    };
    Ok(-ln_f)
}

/// Mean of finite log scores with a count of the excluded infinite ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScoreSummary {
    pub mean: Option<f64>,
    pub n_finite: usize,
    pub n_infinite: usize,
}

pub fn summarize_log_scores(scores: &[f64]) -> LogScoreSummary {
    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    LogScoreSummary {
        mean: mean(finite.iter().copied()),
        n_finite: finite.len(),
        n_infinite: scores.len() - finite.len(),
    }
}

/// Probability integral transform F(y).
pub fn pit(f: &PredictiveDist, y: f64) -> Result<f64, ScoreError> {
    crate::dists::check_finite("y", y)?;
    if !f.is_continuous() {
        return Err(ScoreError::NotContinuous);
    }
    Ok(f.cdf(y))
}
