use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windpost::data::{generate_synthetic, SyntheticSpec};
use windpost::scoring::{chi_square_uniform, rank_histogram, verification_rank};

fn spec(bias: f64, dispersion_factor: f64) -> SyntheticSpec {
    SyntheticSpec {
        n_stations: 10,
        n_days: 250,
        k: 20,
        seed: 5,
        bias,
        dispersion_factor,
        ..SyntheticSpec::default()
    }
}

fn rank_counts(s: &SyntheticSpec) -> Vec<u64> {
    let data = generate_synthetic(s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ranks: Vec<usize> = data
        .dataset
        .cases()
        .iter()
        .map(|c| verification_rank(&c.members, c.observation, &mut rng))
        .collect();
    rank_histogram(&ranks, s.k).counts()
}

#[test]
fn unbiased_full_spread_members_are_exchangeable_with_the_observation() {
    let counts = rank_counts(&spec(0.0, 1.0));
    let test = chi_square_uniform(&counts).unwrap();
    assert!(test.p_value > 0.01, "{counts:?} p = {}", test.p_value);
}

#[test]
fn negative_bias_underpredicts() {
    let data = generate_synthetic(&spec(-1.0, 1.0)).unwrap();
    let errors: Vec<f64> = data
        .dataset
        .cases()
        .iter()
        .map(|c| c.members.iter().sum::<f64>() / c.members.len() as f64 - c.observation)
        .collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let sd = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean + 3.0 * sd / n.sqrt() < 0.0, "mean error {mean}");
}

#[test]
fn default_generator_gives_a_u_shaped_rank_histogram() {
    let s = SyntheticSpec {
        n_stations: 10,
        n_days: 120,
        k: 50,
        ..SyntheticSpec::default()
    };
    let counts = rank_counts(&s);
    let interior = &counts[1..counts.len() - 1];
    let interior_mean = interior.iter().sum::<u64>() as f64 / interior.len() as f64;
    assert!(counts[0] as f64 > 2.0 * interior_mean);
    assert!(*counts.last().unwrap() as f64 > 2.0 * interior_mean);
}

#[test]
fn high_regime_share_is_near_the_upper_quintile() {
    let s = SyntheticSpec {
        n_stations: 20,
        n_days: 365,
        k: 10,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&s).unwrap();
    let share = data.high_regime.iter().filter(|h| **h).count() as f64 / data.high_regime.len() as f64;
    assert!((0.12..0.28).contains(&share), "share {share}");
}

#[test]
fn full_year_case_file_parses_quickly() {
    let s = SyntheticSpec {
        n_stations: 228,
        n_days: 365,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&s).unwrap().dataset;
    let mut buf = Vec::new();
    windpost::data::write_cases_to(&data, &mut buf).unwrap();
    let t = std::time::Instant::now();
    let back = windpost::data::read_cases_from(&buf[..]).unwrap();
    let elapsed = t.elapsed();
    assert_eq!(back.len(), 83_220);
    assert!(elapsed.as_secs_f64() < 5.0, "{elapsed:?}");
}
