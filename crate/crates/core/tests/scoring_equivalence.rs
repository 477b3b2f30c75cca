use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windpost::dists::{Gev, TruncatedNormal};
use windpost::scoring::{crps, crps_quadrature, twcrps, EmpiricalEnsemble, PredictiveDist, WeightFn};

fn worst(cases: &[(PredictiveDist, f64)]) -> f64 {
    cases
        .iter()
        .map(|(f, y)| {
            let c = crps(f, *y).unwrap();
            let q = crps_quadrature(f, *y, &WeightFn::Constant).unwrap();
            (c - q).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn tn_closed_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<_> = (0..400)
        .map(|_| {
            let d = TruncatedNormal::new(rng.random_range(-5.0..15.0), rng.random_range(0.1..10.0)).unwrap();
            let y = rng.random_range(-2.0..25.0);
            (PredictiveDist::from(d), y)
        })
        .collect();
    let w = worst(&cases);
    assert!(w < 1e-6, "{w}");
}

#[test]
fn gev_closed_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases: Vec<_> = (0..400)
        .map(|_| {
            let d = Gev::new(
                rng.random_range(0.0..12.0),
                rng.random_range(0.2..4.0),
                rng.random_range(-0.4..0.9),
            )
            .unwrap();
            let y = rng.random_range(-2.0..25.0);
            (PredictiveDist::from(d), y)
        })
        .collect();
    let w = worst(&cases);
    assert!(w < 1e-6, "{w}");
}

#[test]
fn ensemble_kernel_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases: Vec<_> = (0..200)
        .map(|_| {
            let k = rng.random_range(1..=10);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..15.0)).collect();
            (
                PredictiveDist::from(EmpiricalEnsemble::new(v).unwrap()),
                rng.random_range(-1.0..16.0),
            )
        })
        .collect();
    let w = worst(&cases);
    assert!(w < 1e-8, "{w}");
}

#[test]
fn indicator_weight_is_nonincreasing_in_threshold() {
    let f: PredictiveDist = Gev::new(7.0, 2.0, 0.2).unwrap().into();
    let mut last = f64::INFINITY;
    for r in [0.0, 4.0, 8.0, 10.0, 12.0, 15.0, 20.0, 40.0] {
        let v = twcrps(&f, 9.0, &WeightFn::indicator(r).unwrap()).unwrap();
        assert!(v <= last + 1e-9, "r={r}: {v} > {last}");
        last = v;
    }
}

#[test]
fn narrow_gaussian_weight_approaches_indicator() {
    let f: PredictiveDist = TruncatedNormal::new(6.0, 2.5).unwrap().into();
    for y in [3.0, 9.5, 14.0] {
        let ind = twcrps(&f, y, &WeightFn::indicator(10.0).unwrap()).unwrap();
        let g = twcrps(&f, y, &WeightFn::gaussian_cdf(10.0, 1e-4).unwrap()).unwrap();
        assert!((ind - g).abs() < 1e-5, "{ind} {g}");
    }
}
