use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use windpost::data::{read_cases_from, write_cases_to, Dataset, ForecastCase};
use windpost::dists::{Gev, TruncatedNormal};
use windpost::scoring::{crps, twcrps, twcrpss, EmpiricalEnsemble, PredictiveDist, WeightFn};

fn tn() -> impl Strategy<Value = TruncatedNormal> {
    (-5.0..15.0f64, 0.1..6.0f64).prop_map(|(m, s)| TruncatedNormal::new(m, s).unwrap())
}

fn gev() -> impl Strategy<Value = Gev> {
    (0.0..12.0f64, 0.2..4.0f64, -0.45..0.9f64).prop_map(|(m, s, x)| Gev::new(m, s, x).unwrap())
}

fn any_dist() -> impl Strategy<Value = PredictiveDist> {
    prop_oneof![
        tn().prop_map(PredictiveDist::from),
        gev().prop_map(PredictiveDist::from),
        prop::collection::vec(0.0..20.0f64, 1..12).prop_map(|m| EmpiricalEnsemble::new(m).unwrap().into()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdfs_are_monotone_and_bounded(d in any_dist(), a in -5.0..30.0f64, b in -5.0..30.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (flo, fhi) = (d.cdf(lo), d.cdf(hi));
        prop_assert!((0.0..=1.0).contains(&flo) && (0.0..=1.0).contains(&fhi));
        prop_assert!(flo <= fhi);
    }

    #[test]
    fn quantiles_invert_the_cdf(d in prop_oneof![tn().prop_map(PredictiveDist::from), gev().prop_map(PredictiveDist::from)], p in 0.01..0.99f64) {
        let q = d.quantile(p).unwrap();
        prop_assert!((d.cdf(q) - p).abs() < 1e-9);
    }

    #[test]
    fn tail_weighting_is_monotone_in_the_threshold(d in any_dist(), y in 0.0..25.0f64, r1 in 0.0..25.0f64, dr in 0.0..5.0f64) {
        let full = crps(&d, y).unwrap();
        let a = twcrps(&d, y, &WeightFn::indicator(r1).unwrap()).unwrap();
        let b = twcrps(&d, y, &WeightFn::indicator(r1 + dr).unwrap()).unwrap();
        prop_assert!(b <= a + 1e-9);
        prop_assert!(a <= full + 1e-9);
        prop_assert!(b >= -1e-12);
    }

    #[test]
    fn self_referenced_skill_is_zero(scores in prop::collection::vec(0.01..5.0f64, 1..50)) {
        prop_assert_eq!(twcrpss(&scores, &scores).unwrap(), 0.0);
    }

    #[test]
    fn the_true_law_has_the_lowest_expected_crps(d in tn(), shift in 0.5..2.0f64, sign in prop::bool::ANY, stretch in 0.5..2.0f64) {
        let truth = PredictiveDist::from(d);
        let mu = d.mu() + if sign { shift } else { -shift } * d.sigma();
        let other = PredictiveDist::from(TruncatedNormal::new(mu, d.sigma() * stretch).unwrap());
        let n = 400;
        let (mut own, mut alt) = (0.0, 0.0);
        for i in 0..n {
            let y = truth.quantile((i as f64 + 0.5) / n as f64).unwrap();
            own += crps(&truth, y).unwrap();
            alt += crps(&other, y).unwrap();
        }
        prop_assert!(own < alt);
    }

    #[test]
    fn case_files_round_trip(
        rows in prop::collection::vec(
            ("[A-Z]{1,3}[0-9]{0,2}", 0u64..400, 1u32..4, 0.0..40.0f64, prop::collection::vec(0.0..40.0f64, 3)),
            0..30,
        )
    ) {
        let start = NaiveDate::from_ymd_opt(2012, 3, 1).unwrap();
        let cases: Vec<ForecastCase> = rows
            .into_iter()
            .map(|(id, day, lead, y, members)| ForecastCase {
                station_id: id,
                valid_date: start + Days::new(day),
                lead_days: lead,
                members,
                observation: y,
            })
            .collect();
        let data = if cases.is_empty() { Dataset::empty(3) } else { Dataset::new(cases).unwrap() };
        let mut buf = Vec::new();
        write_cases_to(&data, &mut buf).unwrap();
        let back = read_cases_from(&buf[..]).unwrap();
        prop_assert_eq!(back.cases(), data.cases());
    }
}

#[test]
fn crps_is_proper_against_perturbed_laws() {
    use rand::{Rng, SeedableRng};
    let truth = TruncatedNormal::new(6.0, 2.5).unwrap();
    let f0 = PredictiveDist::from(truth);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let ys: Vec<f64> = (0..100_000)
        .map(|_| truth.quantile(rng.random_range(1e-12..1.0 - 1e-12)).unwrap())
        .collect();
    let own: Vec<f64> = ys.iter().map(|&y| crps(&f0, y).unwrap()).collect();
    for i in 0..20 {
        let mu = 6.0 + rng.random_range(-1.5..1.5);
        let sigma = 2.5 * rng.random_range(0.6..1.6);
        let f1 = PredictiveDist::from(TruncatedNormal::new(mu, sigma).unwrap());
        let diff: Vec<f64> = ys.iter().zip(&own).map(|(&y, o)| crps(&f1, y).unwrap() - o).collect();
        let n = diff.len() as f64;
        let mean = diff.iter().sum::<f64>() / n;
        let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(
            mean > -3.0 * sd / n.sqrt(),
            "law {i}: N({mu}, {sigma}) mean gain {mean}"
        );
    }
}
