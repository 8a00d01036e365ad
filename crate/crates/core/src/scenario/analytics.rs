//! Table of the Gaussian distance model: density, probability of lying
//! within `r`, and efficiency over an even grid, with an optional Monte
//! Carlo column from the epoch sampler.

use crate::mobility::{
    distance_cdf, distance_pdf, efficiency, fit_gaussian, sample_distance_at, EpochModelParams,
    GaussianDistanceModel, MobilityError,
};
use crate::sim::RngStream;

/// Epoch-model horizon used for the Monte Carlo column, seconds.
const MC_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticsRow {
    pub r: f64,
    pub pdf: f64,
    pub cdf: f64,
    pub efficiency: f64,
    pub monte_carlo: Option<f64>,
}

impl AnalyticsRow {
    pub const HEADER: &'static str = "r,pdf,cdf,efficiency,mc_cdf";

    pub fn to_csv_line(&self) -> String {
        let mc = self.monte_carlo.map_or_else(String::new, |v| format!("{v:.6}"));
        format!(
            "{:.6},{:.9},{:.9},{:.6},{}",
            self.r, self.pdf, self.cdf, self.efficiency, mc
        )
    }
}

/// Standardized epoch-model samples: each distance at `MC_HORIZON` is
/// rescaled to `mean + sqrt(var) * z`, where `z` is its z-score within the
/// sample, so the column compares the shape of the epoch process against
/// the Gaussian model at the requested moments.
fn mc_samples(
    model: &GaussianDistanceModel,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, MobilityError> {
    let mut rng = RngStream::new(seed, "analytics.mc");
    let raw = sample_distance_at(&EpochModelParams::default(), MC_HORIZON, n, &mut rng)?;
    let fit = fit_gaussian(&raw)?;
    let (mu, sd) = (fit.mean, fit.variance.sqrt());
    let target_sd = model.std_dev();
    Ok(raw
        .into_iter()
        .map(|x| model.mean + target_sd * (x - mu) / sd)
        .collect())
}

/// `steps` evenly spaced radii on `[0, r_max]`. `mc` gives the number of
/// epoch trajectories for the comparison column.
pub fn analytics_table(
    mean: f64,
    variance: f64,
    r_max: f64,
    steps: usize,
    mc: Option<(usize, u64)>,
) -> Result<Vec<AnalyticsRow>, MobilityError> {
    let model = GaussianDistanceModel::new(mean, variance)?;
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(MobilityError::InvalidParams(format!(
            "r_max must be positive, got {r_max}"
        )));
    }
    if steps < 2 {
        return Err(MobilityError::InvalidParams(format!(
            "steps must be at least 2, got {steps}"
        )));
    }
    let samples = match mc {
        Some((n, seed)) => Some(mc_samples(&model, n, seed)?),
        None => None,
    };
    (0..steps)
        .map(|k| {
            let r = r_max * k as f64 / (steps - 1) as f64;
            let monte_carlo = samples.as_ref().map(|s| {
                s.iter().filter(|&&x| (0.0..=r).contains(&x)).count() as f64 / s.len() as f64
            });
            Ok(AnalyticsRow {
                r,
                pdf: distance_pdf(&model, r)?,
                cdf: distance_cdf(&model, r)?,
                efficiency: efficiency(&model, r)?,
                monte_carlo,
            })
        })
        .collect()
}
