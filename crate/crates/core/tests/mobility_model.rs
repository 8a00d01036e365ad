//! Checks of the Gaussian distance model against independent references:
//! an error-function CDF, Monte Carlo draws and the epoch sampler.

use proptest::prelude::*;
use statrs::function::erf::erf;
use vanetsim_core::mobility::{
    distance_cdf, distance_pdf, efficiency, fit_gaussian, normalization_mass, sample_distance_at,
    ks_distance, EpochModelParams, GaussianDistanceModel,
};
use vanetsim_core::sim::{Dist, RngStream};

/// `∫₀ʳ N(z; ε, Θ) dz` via the error function.
fn erf_cdf(mean: f64, variance: f64, r: f64) -> f64 {
    let s = (2.0 * variance).sqrt();
    0.5 * (erf((r - mean) / s) - erf((0.0 - mean) / s))
}

#[test]
fn cdf_matches_erf_oracle_at_random_points() {
    let mut rng = RngStream::new(2024, "test.cdf");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mean = rng.draw(Dist::Uniform { low: -50.0, high: 300.0 }).unwrap();
        let variance = rng.draw(Dist::Uniform { low: 0.05, high: 2500.0 }).unwrap();
        let r = rng.draw(Dist::Uniform { low: 0.0, high: 400.0 }).unwrap();
        let m = GaussianDistanceModel::new(mean, variance).unwrap();
        let got = distance_cdf(&m, r).unwrap();
        let want = erf_cdf(mean, variance, r);
        worst = worst.max((got - want).abs());
    }
    assert!(worst < 1e-9, "worst deviation {worst:e}");
}

#[test]
fn cdf_far_from_origin_is_one_half_at_mean() {
    let m = GaussianDistanceModel::new(100.0, 25.0).unwrap();
    let got = distance_cdf(&m, 100.0).unwrap();
    assert!((got - erf_cdf(100.0, 25.0, 100.0)).abs() < 1e-9);
    assert!((got - 0.5).abs() < 1e-9);
}

#[test]
fn normalization_within_tolerance() {
    let mut rng = RngStream::new(7, "test.norm");
    for _ in 0..2000 {
        let mean = rng.draw(Dist::Uniform { low: -100.0, high: 100.0 }).unwrap();
        let variance = rng.draw(Dist::Uniform { low: 0.01, high: 1000.0 }).unwrap();
        let m = GaussianDistanceModel::new(mean, variance).unwrap();
        let mass = normalization_mass(&m).unwrap();
        assert!((1.0 - 1e-6..=1.0).contains(&mass), "mass {mass} for {m:?}");
    }
}

#[test]
fn cdf_matches_monte_carlo_fraction() {
    let (mean, variance) = (20.0, 400.0);
    let m = GaussianDistanceModel::new(mean, variance).unwrap();
    let mut rng = RngStream::new(11, "test.mc");
    let draws: Vec<f64> = (0..100_000)
        .map(|_| rng.draw(Dist::Normal { mean, variance }).unwrap())
        .collect();
    for r in [0.0, 5.0, 20.0, 35.0, 60.0, 100.0] {
        let frac = draws.iter().filter(|&&z| (0.0..=r).contains(&z)).count() as f64 / 1e5;
        let p = distance_cdf(&m, r).unwrap();
        assert!((frac - p).abs() < 0.01, "r={r}: mc {frac} vs {p}");
    }
}

#[test]
fn fit_recovers_normal_parameters() {
    let mut rng = RngStream::new(3, "test.fit");
    let draws: Vec<f64> = (0..100_000)
        .map(|_| rng.draw(Dist::Normal { mean: 5.0, variance: 9.0 }).unwrap())
        .collect();
    let m = fit_gaussian(&draws).unwrap();
    assert!((m.mean - 5.0).abs() < 0.05, "mean {}", m.mean);
    assert!((m.variance - 9.0).abs() < 0.3, "variance {}", m.variance);
}

#[test]
fn epoch_positions_are_close_to_gaussian() {
    let params = EpochModelParams::default();
    let mut rng = RngStream::new(99, "test.epochs");
    let samples = sample_distance_at(&params, 100.0, 10_000, &mut rng).unwrap();
    let fitted = fit_gaussian(&samples).unwrap();
    let ks = ks_distance(&samples, &fitted).unwrap();
    assert!(ks < 0.05, "KS distance {ks}");
}

proptest! {
    #[test]
    fn pdf_is_symmetric_about_mean(mean in -100.0f64..100.0, var in 0.01f64..500.0, delta in 0.0f64..50.0) {
        let m = GaussianDistanceModel::new(mean, var).unwrap();
        let a = distance_pdf(&m, mean + delta).unwrap();
        let b = distance_pdf(&m, mean - delta).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300));
        prop_assert!(distance_pdf(&m, mean).unwrap() >= a);
    }

    #[test]
    fn cdf_is_monotone(mean in -50.0f64..200.0, var in 0.1f64..1000.0, r1 in 0.0f64..300.0, dr in 0.0f64..100.0) {
        let m = GaussianDistanceModel::new(mean, var).unwrap();
        let p1 = distance_cdf(&m, r1).unwrap();
        let p2 = distance_cdf(&m, r1 + dr).unwrap();
        prop_assert!(p1 <= p2 + 1e-12, "P({}) = {} > P({}) = {}", r1, p1, r1 + dr, p2);
        prop_assert!((0.0..=1.0).contains(&p2));
    }

    #[test]
    fn efficiency_is_exactly_hundred_times_cdf(mean in -50.0f64..200.0, var in 0.1f64..1000.0, r in 0.0f64..300.0) {
        let m = GaussianDistanceModel::new(mean, var).unwrap();
        prop_assert_eq!(efficiency(&m, r).unwrap(), 100.0 * distance_cdf(&m, r).unwrap());
    }
}
