//! Special functions shared by the distribution and scoring code.
//!
//! The normal CDF is built on the `libm` complementary error function,
//! which is accurate to about one ulp over the whole line. The scaled
//! complement `erfcx` and the exponential integral `E1` are local.

use libm::erfc;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub const SQRT_PI: f64 = 1.772_453_850_905_516;
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, Φ(x).
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function, 1 − Φ(x), accurate in the upper tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of Φ for p in (0, 1).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // Halley polish against the accurate CDF.
    for _ in 0..2 {
        let dens = norm_pdf(x);
        if dens <= 0.0 {
            break;
        }
        let err = if x > 0.0 {
            (1.0 - p) - norm_sf(x)
        } else {
            norm_cdf(x) - p
        };
        let u = err / dens;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Scaled complementary error function, exp(x²)·erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfcx(-x) = 2 exp(x²) - erfcx(x)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 25.0 {
        // x² split exactly into hi + lo so the exponential keeps full
        // relative precision.
        let hi = x * x;
        let lo = x.mul_add(x, -hi);
        return hi.exp() * lo.exp() * erfc(x);
    }
    // Asymptotic series; at x ≥ 25 the terms shrink by ~1e-3 each.
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..8 {
        term *= -((2 * n - 1) as f64) * inv2x2;
        sum += term;
    }
    sum / (x * SQRT_PI)
}

/// Exponential integral E1(x) for x > 0.
pub fn exp_int_e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x > 700.0 {
        return 0.0;
    }
    if x <= 1.0 {
        // -γ - ln x - Σ (-x)^k / (k·k!)
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 1..60 {
            fact *= -x / k as f64;
            let term = fact / k as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return -EULER_GAMMA - x.ln() - sum;
    }
    // Modified Lentz continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// Gamma function.
#[inline]
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Regularized lower incomplete gamma P(a, x); handles the x = 0 and
/// x = ∞ endpoints that `statrs` rejects.
pub fn gamma_lr(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Neumaier compensated sum. Means computed through this are insensitive to
/// the order in which parallel partitions are merged (to ~1e-15 relative).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated arithmetic mean; `None` for an empty input.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut acc = CompensatedSum::new();
    let mut n = 0usize;
    for v in values {
        acc.add(v);
        n += 1;
    }
    (n > 0).then(|| acc.value() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_relative_eq!(norm_sf(5.0), 2.866_515_718_791_939e-7, max_relative = 1e-13);
        assert_relative_eq!(norm_sf(20.0), 2.753_624_118_606_233_7e-89, max_relative = 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.1, 0.5, 0.75, 0.99, 1.0 - 1e-9] {
            assert_relative_eq!(norm_cdf(norm_quantile(p)), p, max_relative = 1e-12);
        }
    }

    #[test]
    fn erfcx_is_continuous_at_the_switch() {
        assert_relative_eq!(erfcx(25.0 - 1e-9), 0.022_549_572_433_541_904, max_relative = 1e-13);
        assert_relative_eq!(erfcx(25.0), 0.022_549_572_432_641_36, max_relative = 1e-13);
        assert_relative_eq!(erfcx(10.0), 0.056_140_992_743_822_59, max_relative = 1e-13);
        assert_relative_eq!(erfcx(3.0), 0.179_001_151_181_389_95, max_relative = 1e-14);
        // erfcx(x) ~ 1/(x sqrt(pi)) for large x
        assert_relative_eq!(erfcx(1e6), 1.0 / (1e6 * SQRT_PI), max_relative = 1e-11);
        assert_relative_eq!(erfcx(0.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(erfcx(-1.0), 2.0 * 1f64.exp() - erfcx(1.0), max_relative = 1e-15);
    }

    #[test]
    fn e1_reference_values() {
        // Abramowitz & Stegun table 5.1
        assert_relative_eq!(exp_int_e1(0.5), 0.559_773_594_776_160_8, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(1.0), 0.219_383_934_395_520_3, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(2.0), 0.048_900_510_708_061_12, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(10.0), 4.156_968_929_685_324e-6, max_relative = 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
