//! Globally adaptive Gauss–Kronrod (7/15) integration over a list of
//! breakpoints, in the style of QUADPACK's QAGP without extrapolation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error(
        "quadrature did not reach tolerance {tolerance:e}: estimate {value}, error {error:e} \
         after {subdivisions} subdivisions"
    )]
    NotConverged {
        value: f64,
        error: f64,
        tolerance: f64,
        subdivisions: usize,
    },
    #[error("integrand returned a non-finite value at z = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_subdivisions: 2000,
        }
    }
}

struct Panel {
    segment: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, segment: usize, a: f64, b: f64) -> Result<Panel, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(center));
    }
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, node) in XGK.iter().take(7).enumerate() {
        let dx = half * node;
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(x2));
        }
        fv[j] = (f1, f2);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        res_asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = res_k * half;
    res_asc *= half.abs();
    res_abs *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        segment,
        a,
        b,
        value,
        error,
    })
}

/// Integrate `f` over `[points[0], points[last]]`, treating every interior
/// point as a panel boundary. Points must be sorted and finite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: &QuadOptions) -> Result<Estimate, QuadError> {
    integrate_segments(f, points, opts).map(|(est, _)| est)
}

/// As [`integrate`], also returning the integral over each interval
/// `[points[i], points[i + 1]]`. The error target applies to the total.
pub fn integrate_segments<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<(Estimate, Vec<f64>), QuadError> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for (i, w) in points.windows(2).enumerate() {
        if w[1] > w[0] {
            heap.push(kronrod(&f, i, w[0], w[1])?);
            evaluations += 15;
        }
    }
    let total = |heap: &BinaryHeap<Panel>| {
        let mut v = crate::special::CompensatedSum::new();
        let mut e = 0.0;
        for p in heap.iter() {
            v.add(p.value);
            e += p.error;
        }
        (v.value(), e)
    };
    let mut subdivisions = 0usize;
    loop {
        let (value, error) = total(&heap);
        let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tolerance {
            let n = points.len().saturating_sub(1);
            let mut parts = vec![crate::special::CompensatedSum::new(); n];
            // sum in a fixed order so the split does not depend on heap layout
            let mut panels = heap.into_vec();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            for p in &panels {
                parts[p.segment].add(p.value);
            }
            let est = Estimate {
                value,
                error,
                evaluations,
            };
            return Ok((est, parts.iter().map(|s| s.value()).collect()));
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(QuadError::NotConverged {
                value,
                error,
                tolerance,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("nonempty while error exceeds tolerance");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel can no longer be split in floating point; accept it.
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod(&f, worst.segment, worst.a, mid)?);
        heap.push(kronrod(&f, worst.segment, mid, worst.b)?);
        evaluations += 30;
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomial_exactly() {
        let est = integrate(|x| x * x * x - 2.0 * x, &[0.0, 2.0], &QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(est.value, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn handles_kink_at_breakpoint() {
        let est = integrate(|x: f64| x.abs(), &[-1.0, 0.0, 3.0], &QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(est.value, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let f = |x: f64| (-0.5 * x * x).exp();
        let est = integrate(f, &[-40.0, -1.0, 0.0, 1.0, 40.0], &QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(est.value, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn unresolved_jump_without_breakpoint_still_converges() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let est = integrate(f, &[0.0, 1.0], &QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(est.value, 0.3, epsilon = 1e-8);
    }

    #[test]
    fn segments_add_up() {
        let (est, parts) = integrate_segments(|x: f64| x * x, &[0.0, 1.0, 1.0, 3.0], &QuadOptions::default()).unwrap();
        assert_eq!(parts.len(), 3);
        assert_abs_diff_eq!(parts[0], 1.0 / 3.0, epsilon = 1e-13);
        assert_eq!(parts[1], 0.0);
        assert_abs_diff_eq!(parts[2], 26.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.value, 9.0, epsilon = 1e-12);
    }

    #[test]
    fn reports_non_finite_integrand() {
        let err = integrate(|_| f64::NAN, &[0.0, 1.0], &QuadOptions::default()).unwrap_err();
        assert!(matches!(err, QuadError::NonFinite(_)));
    }
}
