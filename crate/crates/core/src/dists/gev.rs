use super::{check_finite, check_probability, DistError};

/// Below this |shape| the Gumbel limit formulas are used.
pub const GUMBEL_SWITCH: f64 = 1e-8;

/// Generalized extreme value law with location `mu`, scale `sigma` and
/// shape `xi`. Fréchet type for `xi > 0`, reversed Weibull for `xi < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gev {
    mu: f64,
    sigma: f64,
    xi: f64,
}

/// Position of a point relative to the support.
enum Reduced {
    /// -ln G(z), strictly inside the support.
    Inside(f64),
    Below,
    Above,
}

impl Gev {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self, DistError> {
        check_finite("mu", mu)?;
        check_finite("xi", xi)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DistError::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "must be positive and finite",
            });
        }
        Ok(Self { mu, sigma, xi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn is_gumbel(&self) -> bool {
        self.xi.abs() < GUMBEL_SWITCH
    }

    /// Lower end of the support; finite only for the Fréchet type.
    pub fn lower_bound(&self) -> f64 {
        if !self.is_gumbel() && self.xi > 0.0 {
            self.mu - self.sigma / self.xi
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Upper end of the support; finite only for the reversed Weibull type.
    pub fn upper_bound(&self) -> f64 {
        if !self.is_gumbel() && self.xi < 0.0 {
            self.mu - self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    /// 1 + xi (z - mu)/sigma, the quantity that must stay positive.
    pub fn support_margin(&self, z: f64) -> f64 {
        1.0 + self.xi * (z - self.mu) / self.sigma
    }

    fn reduced(&self, z: f64) -> Reduced {
        let x = (z - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Reduced::Inside((-x).exp());
        }
        let u = self.xi * x;
        if u <= -1.0 {
            return if self.xi > 0.0 { Reduced::Below } else { Reduced::Above };
        }
        Reduced::Inside((-u.ln_1p() / self.xi).exp())
    }

    pub fn cdf(&self, z: f64) -> Result<f64, DistError> {
        check_finite("z", z)?;
        Ok(self.cdf_unchecked(z))
    }

    pub(crate) fn cdf_unchecked(&self, z: f64) -> f64 {
        match self.reduced(z) {
            Reduced::Inside(t) => (-t).exp(),
            Reduced::Below => 0.0,
            Reduced::Above => 1.0,
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        if !z.is_finite() {
            return 0.0;
        }
        match self.reduced(z) {
            Reduced::Inside(t) if t > 0.0 && t.is_finite() => (self.xi + 1.0).mul_add(t.ln(), -t).exp() / self.sigma,
            _ => 0.0,
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        if !z.is_finite() {
            return f64::NEG_INFINITY;
        }
        let x = (z - self.mu) / self.sigma;
        let ln_t = if self.is_gumbel() {
            -x
        } else {
            let u = self.xi * x;
            if u <= -1.0 {
                return f64::NEG_INFINITY;
            }
            -u.ln_1p() / self.xi
        };
        -self.sigma.ln() + (1.0 + self.xi) * ln_t - ln_t.exp()
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        let y = -p.ln();
        let x = if self.is_gumbel() {
            -y.ln()
        } else {
            // (y^-xi - 1)/xi without cancellation for small xi
            (-self.xi * y.ln()).exp_m1() / self.xi
        };
        Ok(self.mu + self.sigma * x)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("0.5 is a valid probability")
    }

    /// Probability assigned to negative wind speeds, G(0).
    pub fn neg_prob(&self) -> f64 {
        self.cdf_unchecked(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gumbel_at_location() {
        let d = Gev::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(d.cdf(0.0).unwrap(), (-1f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(d.quantile((-1f64).exp()).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn frechet_below_support_is_zero() {
        let d = Gev::new(0.0, 1.0, 0.5).unwrap();
        assert_eq!(d.cdf(-2.0).unwrap(), 0.0);
        assert_eq!(d.cdf(-3.0).unwrap(), 0.0);
        assert_eq!(d.pdf(-2.5), 0.0);
        assert_eq!(d.lower_bound(), -2.0);
    }

    #[test]
    fn weibull_above_support_is_one() {
        let d = Gev::new(0.0, 1.0, -0.25).unwrap();
        assert_eq!(d.upper_bound(), 4.0);
        assert_eq!(d.cdf(4.0).unwrap(), 1.0);
        assert_eq!(d.cdf(10.0).unwrap(), 1.0);
        assert_eq!(d.pdf(5.0), 0.0);
    }

    #[test]
    fn shape_point_two_at_one() {
        // exp(-1.2^-5)
        let d = Gev::new(0.0, 1.0, 0.2).unwrap();
        assert_abs_diff_eq!(d.cdf(1.0).unwrap(), 0.669_062_652_667_818_8, epsilon = 1e-14);
    }

    #[test]
    fn gumbel_density_at_location() {
        let d = Gev::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(d.pdf(0.0), (-1f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(d.ln_pdf(0.0), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn ln_pdf_matches_pdf() {
        for &xi in &[-0.4, -0.1, 0.0, 1e-6, 0.2, 0.8] {
            let d = Gev::new(3.0, 1.5, xi).unwrap();
            for &z in &[1.0, 2.5, 3.0, 5.0, 8.0] {
                let p = d.pdf(z);
                if p > 0.0 {
                    assert_abs_diff_eq!(d.ln_pdf(z), p.ln(), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn negative_wind_probability_is_small_for_typical_fit() {
        let d = Gev::new(10.0, 2.0, 0.1).unwrap();
        let p = d.neg_prob();
        assert_eq!(p, d.cdf(0.0).unwrap());
        // 1 + 0.1(-5) = 0.5 -> exp(-0.5^-10) = exp(-1024)
        assert!(p < 1e-300);
    }

    #[test]
    fn continuity_at_gumbel_limit() {
        let g0 = Gev::new(1.0, 2.0, 0.0).unwrap();
        for &xi in &[1e-9, -1e-9, 1e-7, -1e-7] {
            let g = Gev::new(1.0, 2.0, xi).unwrap();
            for i in -40..=120 {
                let z = i as f64 * 0.25;
                assert_abs_diff_eq!(g.cdf(z).unwrap(), g0.cdf(z).unwrap(), epsilon = 1e-6);
            }
        }
    }
}
