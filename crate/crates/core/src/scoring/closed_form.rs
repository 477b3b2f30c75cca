use super::{EmpiricalEnsemble, ScoreError, WeightFn};
use crate::dists::{Gev, TruncatedNormal};
use crate::special::{erfcx, exp_int_e1, gamma, gamma_lr, norm_pdf, norm_sf, EULER_GAMMA, SQRT_2, SQRT_PI};

/// Closed-form CRPS of the zero-truncated normal.
///
/// In standard units w = (y − mu)/sigma with cutoff a = −mu/sigma and
/// P = Φ(−a):
///
/// CRPS/sigma = w (1 − 2Φ(−w)/P) + 2φ(w)/P − Φ(−√2 a)/(√π P²)
///
/// The three ratios are formed without evaluating P on its own when the
/// cutoff is in the upper tail of the parent normal.
pub fn crps_truncated_normal(d: &TruncatedNormal, y: f64) -> f64 {
    if y < 0.0 {
        // F vanishes on [y, 0), where the integrand is 1.
        return crps_truncated_normal(d, 0.0) - y;
    }
    let a = d.lower_std();
    let w = (y - d.mu()) / d.sigma();
    let (tail, dens, spread) = if a <= 0.0 {
        let mass = norm_sf(a);
        (
            norm_sf(w) / mass,
            norm_pdf(w) / mass,
            norm_sf(SQRT_2 * a) / (mass * mass),
        )
    } else {
        let scaled = erfcx(a / SQRT_2);
        (d.tail_ratio(w), d.std_density(w), 2.0 * erfcx(a) / (scaled * scaled))
    };
    let value = w * (1.0 - 2.0 * tail) + 2.0 * dens - spread / SQRT_PI;
    (d.sigma() * value).max(0.0)
}

/// Below this |shape| the ξ ≠ 0 expression loses digits to cancellation
/// and the CRPS is interpolated through the Gumbel value instead.
const SMALL_SHAPE: f64 = 1e-4;

fn crps_gumbel(mu: f64, sigma: f64, y: f64) -> f64 {
    let x = (y - mu) / sigma;
    let t = (-x).exp();
    let e1 = if t == 0.0 {
        // E1(t) = −γ − ln t + O(t)
        -EULER_GAMMA + x
    } else {
        exp_int_e1(t)
    };
    sigma * (-x - std::f64::consts::LN_2 + EULER_GAMMA + 2.0 * e1)
}

fn crps_gev_nonzero(mu: f64, sigma: f64, xi: f64, y: f64) -> f64 {
    let x = (y - mu) / sigma;
    let u = xi * x;
    // t = −ln G(y); p = G(y)
    let (p, t) = if u <= -1.0 {
        if xi > 0.0 {
            (0.0, f64::INFINITY)
        } else {
            (1.0, 0.0)
        }
    } else {
        let t = (-u.ln_1p() / xi).exp();
        ((-t).exp(), t)
    };
    let g = gamma(1.0 - xi);
    let lower_incomplete = g * gamma_lr(1.0 - xi, t);
    let s = sigma / xi;
    (y - mu + s) * (2.0 * p - 1.0) + s * (2.0 * lower_incomplete - 2f64.powf(xi) * g)
}

/// Closed-form CRPS of the GEV law; requires xi < 1.
pub fn crps_gev(d: &Gev, y: f64) -> Result<f64, ScoreError> {
    let (mu, sigma, xi) = (d.mu(), d.sigma(), d.xi());
    if xi >= 1.0 {
        return Err(ScoreError::InfiniteMean { xi });
    }
    let value = if d.is_gumbel() {
        crps_gumbel(mu, sigma, y)
    } else if xi.abs() < SMALL_SHAPE {
        // Quadratic through (−h, 0, h); the O(h³) remainder is far below
        // the cancellation error of the direct formula here.
        let h = SMALL_SHAPE;
        let fm = crps_gev_nonzero(mu, sigma, -h, y);
        let f0 = crps_gumbel(mu, sigma, y);
        let fp = crps_gev_nonzero(mu, sigma, h, y);
        let s = xi / h;
        f0 + 0.5 * s * (fp - fm) + 0.5 * s * s * (fp - 2.0 * f0 + fm)
    } else {
        crps_gev_nonzero(mu, sigma, xi, y)
    };
    Ok(value.max(0.0))
}

/// Kernel form (1/k)Σ|xᵢ − y| − (1/2k²)ΣΣ|xᵢ − xⱼ|.
pub fn crps_ensemble(e: &EmpiricalEnsemble, y: f64) -> f64 {
    let k = e.len() as f64;
    let mut acc = crate::special::CompensatedSum::new();
    for &x in e.members() {
        acc.add((x - y).abs());
    }
    (acc.value() / k - e.half_spread()).max(0.0)
}

/// Exact weighted CRPS of a step-function CDF: on each gap between
/// consecutive members (and the observation) the squared difference is
/// constant, so only the weight needs integrating.
pub fn twcrps_ensemble(e: &EmpiricalEnsemble, y: f64, w: &WeightFn) -> f64 {
    if let WeightFn::Constant = w {
        return crps_ensemble(e, y);
    }
    let members = e.members();
    let k = members.len() as f64;
    let mut acc = crate::special::CompensatedSum::new();
    let mut below = 0usize;
    let mut y_passed = false;
    let mut left = members[0].min(y);
    let mut i = 0usize;
    loop {
        // next breakpoint after `left`
        let next_member = members.get(i).copied();
        let next = match (next_member, y_passed) {
            (Some(m), false) => m.min(y),
            (Some(m), true) => m,
            (None, false) => y,
            (None, true) => break,
        };
        if next > left {
            let diff = below as f64 / k - if y_passed { 1.0 } else { 0.0 };
            let width = w.antiderivative(next) - w.antiderivative(left);
            acc.add(diff * diff * width);
            left = next;
        }
        // advance past every breakpoint equal to `next`
        while i < members.len() && members[i] <= next {
            below += 1;
            i += 1;
        }
        if !y_passed && y <= next {
            y_passed = true;
        }
    }
    acc.value().max(0.0)
}
