use super::{check_finite, check_probability, invert_monotone, DistError};
use crate::special::{erfcx, norm_pdf, norm_quantile, norm_sf, LN_SQRT_2PI, SQRT_2};

/// Normal law N(mu, sigma²) conditioned on being positive.
///
/// `mu` and `sigma` are the location and scale of the parent normal. The CDF
/// is renormalized by the parent mass above zero, so `cdf(0) == 0`.
///
/// All tail quantities are evaluated as ratios of normal survival functions.
/// When the cutoff sits far in the parent's upper tail (`mu << 0`) those
/// ratios are formed from `erfcx` so nothing underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    mu: f64,
    sigma: f64,
    /// Cutoff in standard units, -mu/sigma.
    lower_std: f64,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, DistError> {
        check_finite("mu", mu)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DistError::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "must be positive and finite",
            });
        }
        Ok(Self {
            mu,
            sigma,
            lower_std: -mu / sigma,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Standardized cutoff -mu/sigma.
    pub fn lower_std(&self) -> f64 {
        self.lower_std
    }

    /// Φ(-w)/Φ(-a) for w ≥ a, with a the standardized cutoff.
    pub(crate) fn tail_ratio(&self, w: f64) -> f64 {
        let a = self.lower_std;
        if a <= 0.0 {
            norm_sf(w) / norm_sf(a)
        } else {
            erfcx(w / SQRT_2) / erfcx(a / SQRT_2) * (-0.5 * (w - a) * (w + a)).exp()
        }
    }

    /// φ(w)/Φ(-a): density of the standardized truncated law.
    pub(crate) fn std_density(&self, w: f64) -> f64 {
        let a = self.lower_std;
        if a <= 0.0 {
            norm_pdf(w) / norm_sf(a)
        } else {
            2.0 * (-0.5 * (w - a) * (w + a)).exp() * crate::special::INV_SQRT_2PI / erfcx(a / SQRT_2)
        }
    }

    /// Mass of the parent normal above zero, Φ(mu/sigma). Underflows to 0
    /// for extreme negative locations; prefer the ratio helpers.
    pub fn parent_mass(&self) -> f64 {
        norm_sf(self.lower_std)
    }

    pub fn cdf(&self, z: f64) -> Result<f64, DistError> {
        check_finite("z", z)?;
        Ok(self.cdf_unchecked(z))
    }

    pub(crate) fn cdf_unchecked(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let w = (z - self.mu) / self.sigma;
        (1.0 - self.tail_ratio(w)).clamp(0.0, 1.0)
    }

    pub fn sf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        self.tail_ratio((z - self.mu) / self.sigma).clamp(0.0, 1.0)
    }

    /// Density; zero on z ≤ 0.
    pub fn pdf(&self, z: f64) -> f64 {
        if !(z > 0.0) || !z.is_finite() {
            return 0.0;
        }
        self.std_density((z - self.mu) / self.sigma) / self.sigma
    }

    /// Log density; `-inf` on z ≤ 0.
    pub fn ln_pdf(&self, z: f64) -> f64 {
        if !(z > 0.0) || !z.is_finite() {
            return f64::NEG_INFINITY;
        }
        let w = (z - self.mu) / self.sigma;
        let a = self.lower_std;
        let ln_mass = if a <= 0.0 {
            norm_sf(a).ln()
        } else {
            // ln Φ(-a) = -a²/2 + ln(erfcx(a/√2)/2)
            -0.5 * a * a + (0.5 * erfcx(a / SQRT_2)).ln()
        };
        -0.5 * w * w - LN_SQRT_2PI - self.sigma.ln() - ln_mass
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        let cdf = |z: f64| self.cdf_unchecked(z);
        let pdf = |z: f64| self.pdf(z);
        let a = self.lower_std;
        let guess = if a <= 5.0 {
            self.mu - self.sigma * norm_quantile((1.0 - p) * norm_sf(a))
        } else {
            // Exponential-like law with rate ≈ a/sigma near the cutoff.
            -(1.0 - p).ln() * self.sigma / a
        };
        let mut hi = if guess.is_finite() && guess > 0.0 {
            guess
        } else {
            self.sigma.max(self.mu)
        };
        while cdf(hi) < p {
            hi *= 2.0;
        }
        Ok(invert_monotone(cdf, pdf, p, 0.0, hi, guess))
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("0.5 is a valid probability")
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.sigma * self.std_density(self.lower_std)
    }
}
