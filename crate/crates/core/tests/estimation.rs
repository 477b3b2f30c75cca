use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windpost::estimation::{
    fit_gev_ml, fit_tn_min_crps, gev_objective, tn_objective, CaseSummary, FitOptions, GevCoefficients, TnCoefficients,
    TrainingSet,
};

fn gev_sample(truth: &GevCoefficients, n: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = (0..n)
        .map(|_| {
            let x_bar = rng.random_range(1.0..12.0);
            let u = rng.random_range(1e-9..1.0 - 1e-9);
            let y = truth.predict(x_bar).unwrap().quantile(u).unwrap();
            CaseSummary {
                x_bar,
                s2: 1.0,
                x_med: x_bar,
                y: y.max(0.0),
            }
        })
        .collect();
    TrainingSet::new(cases, 50).unwrap()
}

#[test]
fn gumbel_data_gives_a_near_zero_shape() {
    let truth = GevCoefficients {
        mu0: 2.0,
        mu1: 1.0,
        sigma0: 0.5,
        sigma1: 0.1,
        xi: 0.0,
    };
    let train = gev_sample(&truth, 10_000, 21);
    let fit = fit_gev_ml(&train, None, &FitOptions::default()).unwrap();
    let xi = fit.gev().unwrap().xi;
    assert!(xi.abs() < 0.05, "xi = {xi}");
}

#[test]
fn likelihood_at_the_optimum_is_at_least_that_of_the_truth() {
    let truth = GevCoefficients {
        mu0: 0.3,
        mu1: 1.0,
        sigma0: 0.5,
        sigma1: 0.1,
        xi: 0.1,
    };
    for seed in 0..3 {
        let train = gev_sample(&truth, 2000, seed);
        let fit = fit_gev_ml(&train, None, &FitOptions::default()).unwrap();
        assert!(fit.objective <= gev_objective(&train, &truth) + 1e-9);
        assert_eq!(fit.objective, gev_objective(&train, fit.gev().unwrap()));
    }
}

#[test]
fn tn_fit_recovers_planted_coefficients() {
    let truth = TnCoefficients {
        a: 0.5,
        b: 1.1,
        c: 0.8,
        d: 1.3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cases = (0..5000)
        .map(|_| {
            let x_bar = rng.random_range(1.0..12.0);
            let s2 = rng.random_range(0.1..3.0);
            let u = rng.random_range(1e-9..1.0 - 1e-9);
            CaseSummary {
                x_bar,
                s2,
                x_med: x_bar,
                y: truth.predict(x_bar, s2).unwrap().quantile(u).unwrap(),
            }
        })
        .collect();
    let train = TrainingSet::new(cases, 50).unwrap();
    let fit = fit_tn_min_crps(&train, None, &FitOptions::default()).unwrap();
    let got = fit.tn().unwrap();
    for (g, t) in [(got.a, truth.a), (got.b, truth.b), (got.c, truth.c), (got.d, truth.d)] {
        assert!((g - t).abs() < 0.1, "{got:?}");
    }
    assert!(fit.objective <= tn_objective(&train, &truth));
}
