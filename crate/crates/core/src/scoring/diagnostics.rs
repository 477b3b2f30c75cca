use rand::Rng;
use serde::Serialize;

use super::{PredictiveDist, ScoreError};
use crate::special::{mean, CompensatedSum};

/// Central prediction interval at `level` (e.g. 0.8 → [q10, q90]).
pub fn central_interval(f: &PredictiveDist, level: f64) -> Result<(f64, f64), ScoreError> {
    let tail = 0.5 * (1.0 - level);
    Ok((f.quantile(tail)?, f.quantile(1.0 - tail)?))
}

/// Mean absolute error of the predictive median.
pub fn mae_median<'a, I>(pairs: I) -> Result<f64, ScoreError>
where
    I: IntoIterator<Item = (&'a PredictiveDist, f64)>,
{
    mean(pairs.into_iter().map(|(f, y)| (f.median() - y).abs())).ok_or(ScoreError::EmptyCaseSet)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSummary {
    /// Percentage of observations inside the closed interval.
    pub coverage: f64,
    pub width: f64,
}

/// Coverage (%) and mean width of central prediction intervals.
pub fn coverage_width<'a, I>(pairs: I, level: f64) -> Result<IntervalSummary, ScoreError>
where
    I: IntoIterator<Item = (&'a PredictiveDist, f64)>,
{
    let mut hits = 0usize;
    let mut n = 0usize;
    let mut width = CompensatedSum::new();
    for (f, y) in pairs {
        let (lo, hi) = central_interval(f, level)?;
        if lo <= y && y <= hi {
            hits += 1;
        }
        width.add(hi - lo);
        n += 1;
    }
    if n == 0 {
        return Err(ScoreError::EmptyCaseSet);
    }
    Ok(IntervalSummary {
        coverage: 100.0 * hits as f64 / n as f64,
        width: width.value() / n as f64,
    })
}

/// Rank (1-based) of `y` within the pooled set {members, y}; ties with
/// members are broken uniformly at random.
pub fn verification_rank<R: Rng + ?Sized>(members: &[f64], y: f64, rng: &mut R) -> usize {
    let below = members.iter().filter(|&&x| x < y).count();
    let ties = members.iter().filter(|&&x| x == y).count();
    let offset = if ties > 0 { rng.random_range(0..=ties) } else { 0 };
    below + 1 + offset
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: u64,
    /// Count under a uniform distribution of the same total.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    fn from_counts(counts: Vec<u64>, edges: impl Fn(usize) -> (f64, f64)) -> Self {
        let total: u64 = counts.iter().sum();
        let expected = total as f64 / counts.len() as f64;
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| {
                let (low, high) = edges(i);
                HistogramBin {
                    low,
                    high,
                    count,
                    expected,
                }
            })
            .collect();
        Self { bins }
    }

    pub fn counts(&self) -> Vec<u64> {
        self.bins.iter().map(|b| b.count).collect()
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count,expected\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{},{}\n", b.low, b.high, b.count, b.expected));
        }
        out
    }
}

/// Histogram of verification ranks 1..=k+1; bin i spans [i − 0.5, i + 0.5].
pub fn rank_histogram(ranks: &[usize], k: usize) -> Histogram {
    let mut counts = vec![0u64; k + 1];
    for &r in ranks {
        let idx = r.clamp(1, k + 1) - 1;
        counts[idx] += 1;
    }
    Histogram::from_counts(counts, |i| (i as f64 + 0.5, i as f64 + 1.5))
}

/// Equal-width histogram of PIT values on [0, 1].
pub fn pit_histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let width = 1.0 / bins as f64;
    Histogram::from_counts(counts, |i| (i as f64 * width, (i + 1) as f64 * width))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against U(0, 1).
pub fn ks_uniform(values: &[f64]) -> Result<KsTest, ScoreError> {
    if values.is_empty() {
        return Err(ScoreError::EmptyCaseSet);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    Ok(KsTest {
        statistic: d,
        p_value,
        n: v.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson χ² test of equal bin probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquareTest, ScoreError> {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return Err(ScoreError::EmptyCaseSet);
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = counts.len() - 1;
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        statrs::function::gamma::gamma_ur(dof as f64 / 2.0, statistic / 2.0)
    };
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::TruncatedNormal;
    use crate::scoring::EmpiricalEnsemble;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_point_forecasts_have_zero_mae() {
        let fs: Vec<PredictiveDist> = [1.0, 2.5, 7.0]
            .iter()
            .map(|&v| EmpiricalEnsemble::new(vec![v, v]).unwrap().into())
            .collect();
        let ys = [1.0, 2.5, 7.0];
        let mae = mae_median(fs.iter().zip(ys.iter().copied())).unwrap();
        assert_eq!(mae, 0.0);
    }

    #[test]
    fn empty_case_set_is_an_error() {
        let none: Vec<(&PredictiveDist, f64)> = vec![];
        assert_eq!(mae_median(none.clone()), Err(ScoreError::EmptyCaseSet));
        assert_eq!(coverage_width(none, 0.8), Err(ScoreError::EmptyCaseSet));
    }

    #[test]
    fn closed_interval_counts_endpoints() {
        let f: PredictiveDist = EmpiricalEnsemble::new(vec![1.0, 2.0]).unwrap().into();
        let (lo, hi) = central_interval(&f, 0.8).unwrap();
        let s = coverage_width([(&f, lo), (&f, hi), (&f, hi + 1.0)], 0.8).unwrap();
        assert!((s.coverage - 200.0 / 3.0).abs() < 1e-12);
        assert!((s.width - (hi - lo)).abs() < 1e-15);
    }

    #[test]
    fn tie_with_smallest_member_splits_ranks_one_and_two() {
        let members = [2.0, 3.0, 4.0, 5.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = [0usize; 3];
        for _ in 0..4000 {
            let r = verification_rank(&members, 2.0, &mut rng);
            assert!(r == 1 || r == 2);
            seen[r] += 1;
        }
        let share = seen[1] as f64 / 4000.0;
        assert!((share - 0.5).abs() < 0.03, "{share}");
    }

    #[test]
    fn rank_histogram_has_k_plus_one_bins() {
        let h = rank_histogram(&[1, 1, 3, 5], 4);
        assert_eq!(h.counts(), vec![2, 0, 1, 0, 1]);
        assert_eq!(h.bins[0].expected, 0.8);
    }

    #[test]
    fn pit_histogram_places_edges() {
        let h = pit_histogram(&[0.0, 0.049, 0.05, 0.999, 1.0], 20);
        assert_eq!(h.bins.len(), 20);
        assert_eq!(h.bins[0].count, 2);
        assert_eq!(h.bins[1].count, 1);
        assert_eq!(h.bins[19].count, 2);
    }

    #[test]
    fn pit_of_draws_from_the_forecast_is_uniform() {
        let d = TruncatedNormal::new(1.0, 2.0).unwrap();
        let f: PredictiveDist = d.into();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pits: Vec<f64> = (0..10_000)
            .map(|_| {
                let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
                let y = d.quantile(u).unwrap();
                super::super::pit(&f, y).unwrap()
            })
            .collect();
        let ks = ks_uniform(&pits).unwrap();
        // 1% critical value ≈ 1.628/√n
        assert!(ks.statistic < 1.628 / 100.0, "{ks:?}");
        let chi = chi_square_uniform(&pit_histogram(&pits, 20).counts()).unwrap();
        assert!(chi.p_value > 0.001, "{chi:?}");
    }

    #[test]
    fn ks_detects_non_uniform() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).powi(2)).collect();
        let ks = ks_uniform(&v).unwrap();
        assert!(ks.p_value < 1e-6);
    }

    #[test]
    fn chi_square_of_flat_counts() {
        let t = chi_square_uniform(&[100, 100, 100, 100]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let t = chi_square_uniform(&[10, 190]).unwrap();
        assert!(t.p_value < 1e-20);
    }
}
