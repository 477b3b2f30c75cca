//! Predictive distributions for nonnegative wind speed: the normal law
//! truncated to [0, ∞) and the generalized extreme value law.

mod gev;
mod truncnorm;

pub use gev::{Gev, GUMBEL_SWITCH};
pub use truncnorm::TruncatedNormal;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("argument {name} is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<(), DistError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(DistError::NonFinite { name, value })
    }
}

pub(crate) fn check_probability(p: f64) -> Result<(), DistError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(DistError::ProbabilityOutOfRange(p))
    }
}

/// Safeguarded Newton iteration for `cdf(x) = p` on a bracket `[lo, hi]`
/// with `cdf(lo) <= p <= cdf(hi)`. Falls back to bisection whenever the
/// Newton step leaves the bracket or the density vanishes.
pub(crate) fn invert_monotone<C, D>(cdf: C, pdf: D, p: f64, mut lo: f64, mut hi: f64, guess: f64) -> f64
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..300 {
        let fx = cdf(x) - p;
        if fx.abs() <= 1e-16 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let dens = pdf(x);
        let newton = x - fx / dens;
        x = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}
