//! Highway kinematics and the Gaussian node-distance model.
//!
//! The simulator places vehicles on a multi-lane, bidirectional strip and
//! moves them at constant velocity. Separately, the distance `X(t)` of a node
//! from a strip segment is modelled as a normal variate with mean `ε` and
//! variance `Θ`; [`distance_cdf`] integrates that density from 0 to `r` and
//! [`efficiency`] scales the result to a percentage. [`simulate_epochs`]
//! produces Monte Carlo trajectories built from random-length mobility epochs
//! that can be checked against a fitted Gaussian.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::sim::{Dist, RngStream, SimError};
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("invalid highway configuration: {0}")]
    InvalidConfig(String),
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("invalid epoch parameters: {0}")]
    InvalidParams(String),
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error(transparent)]
    Rng(#[from] SimError),
}

/// Direction of travel along the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heading {
    East,
    West,
}

impl Heading {
    pub fn sign(self) -> f64 {
        match self {
            Heading::East => 1.0,
            Heading::West => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighwayConfig {
    /// Metres.
    pub length: f64,
    pub lanes: usize,
    /// Metres.
    pub lane_width: f64,
    /// One entry per lane.
    pub directions: Vec<Heading>,
    pub wraparound: bool,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        Self::with_lanes(1000.0, 4, 5.0)
    }
}

impl HighwayConfig {
    /// Lower half of the lanes heads east, upper half west.
    pub fn with_lanes(length: f64, lanes: usize, lane_width: f64) -> Self {
        let directions = (0..lanes)
            .map(|l| if l < lanes.div_ceil(2) { Heading::East } else { Heading::West })
            .collect();
        Self {
            length,
            lanes,
            lane_width,
            directions,
            wraparound: true,
        }
    }

    pub fn validate(&self) -> Result<(), MobilityError> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(MobilityError::InvalidConfig(format!(
                "length must be positive, got {}",
                self.length
            )));
        }
        if self.lanes == 0 {
            return Err(MobilityError::InvalidConfig("need at least one lane".into()));
        }
        if !(self.lane_width > 0.0 && self.lane_width.is_finite()) {
            return Err(MobilityError::InvalidConfig(format!(
                "lane_width must be positive, got {}",
                self.lane_width
            )));
        }
        if self.directions.len() != self.lanes {
            return Err(MobilityError::InvalidConfig(format!(
                "{} lane directions for {} lanes",
                self.directions.len(),
                self.lanes
            )));
        }
        Ok(())
    }

    /// Centre line of a lane.
    pub fn lane_y(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeKinematics {
    pub node_id: NodeId,
    pub position: Position,
    pub lane_index: usize,
    /// m/s, constant for the run.
    pub speed: f64,
    pub heading: Heading,
}

impl NodeKinematics {
    /// Position after `t` seconds of constant-velocity travel.
    pub fn position_after(&self, t: f64, cfg: &HighwayConfig) -> Position {
        if t <= 0.0 {
            return self.position;
        }
        step_kinematics(self, t, cfg).position
    }
}

/// Places `n_nodes` vehicles round-robin across lanes with uniformly drawn
/// x coordinates. Every vehicle gets the same `speed`.
pub fn build_highway(
    cfg: &HighwayConfig,
    n_nodes: usize,
    speed: f64,
    rng: &mut RngStream,
) -> Result<Vec<NodeKinematics>, MobilityError> {
    cfg.validate()?;
    if n_nodes < 2 {
        return Err(MobilityError::InvalidConfig(format!(
            "need at least 2 nodes, got {n_nodes}"
        )));
    }
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(MobilityError::InvalidConfig(format!(
            "speed must be non-negative, got {speed}"
        )));
    }
    let nodes = (0..n_nodes)
        .map(|i| {
            let lane = i % cfg.lanes;
            let x = rng.unit() * cfg.length;
            NodeKinematics {
                node_id: NodeId(i as u32),
                position: Position::new(x, cfg.lane_y(lane)),
                lane_index: lane,
                speed,
                heading: cfg.directions[lane],
            }
        })
        .collect();
    Ok(nodes)
}

/// Constant-velocity integration over `dt` seconds; `y` never changes.
pub fn step_kinematics(node: &NodeKinematics, dt: f64, cfg: &HighwayConfig) -> NodeKinematics {
    debug_assert!(dt >= 0.0, "dt must be non-negative");
    let mut x = node.position.x + node.heading.sign() * node.speed * dt;
    if cfg.wraparound {
        x = x.rem_euclid(cfg.length);
    }
    NodeKinematics {
        position: Position::new(x, node.position.y),
        ..node.clone()
    }
}

pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Normal model of the node-to-segment distance: mean `ε`, variance `Θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDistanceModel {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianDistanceModel {
    pub fn new(mean: f64, variance: f64) -> Result<Self, MobilityError> {
        let m = Self { mean, variance };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<(), MobilityError> {
        if self.variance > 0.0 && self.variance.is_finite() {
            Ok(())
        } else {
            Err(MobilityError::NonPositiveVariance(self.variance))
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    fn density(&self, r: f64) -> f64 {
        let d = r - self.mean;
        (-(d * d) / (2.0 * self.variance)).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

/// `b(r) = exp(-(r-ε)²/(2Θ)) / sqrt(2πΘ)`.
pub fn distance_pdf(model: &GaussianDistanceModel, r: f64) -> Result<f64, MobilityError> {
    model.check()?;
    Ok(model.density(r))
}

/// Absolute tolerance of the CDF quadrature.
pub const CDF_TOLERANCE: f64 = 1e-9;

/// The mass over ±8σ is 1 − 1.2e-15, so the normalisation check needs a
/// much tighter tolerance than the CDF to avoid overshooting 1.
const NORMALIZATION_TOLERANCE: f64 = 1e-15;

/// Half-width, in standard deviations, beyond which the density is treated
/// as zero.
const SUPPORT_SIGMAS: f64 = 8.0;

/// `P(r) = ∫₀ʳ b(z) dz` by adaptive Simpson quadrature.
///
/// The lower limit is 0 and no renormalisation is applied, so for a mean
/// close to zero the total mass stays below 1.
pub fn distance_cdf(model: &GaussianDistanceModel, r: f64) -> Result<f64, MobilityError> {
    model.check()?;
    if r < 0.0 || r.is_nan() {
        return Err(MobilityError::NegativeRadius(r));
    }
    let upper = r.min(model.mean + SUPPORT_SIGMAS * model.std_dev());
    if upper <= 0.0 {
        return Ok(0.0);
    }
    Ok(integrate_density(model, 0.0, upper, CDF_TOLERANCE).clamp(0.0, 1.0))
}

/// `η = 100 · P(r)`.
pub fn efficiency(model: &GaussianDistanceModel, r: f64) -> Result<f64, MobilityError> {
    Ok(distance_cdf(model, r)? * 100.0)
}

/// Quadrature of the density over `[ε − 8σ, ε + 8σ]`. Should be within
/// 1e-6 of 1; exposed as a diagnostic for the quadrature itself.
pub fn normalization_mass(model: &GaussianDistanceModel) -> Result<f64, MobilityError> {
    model.check()?;
    let h = SUPPORT_SIGMAS * model.std_dev();
    Ok(integrate_density(
        model,
        model.mean - h,
        model.mean + h,
        NORMALIZATION_TOLERANCE,
    ))
}

/// Integrates the density over `[a, b]`, split into one-sigma panels so a
/// narrow peak can never fall between the first Simpson nodes.
fn integrate_density(model: &GaussianDistanceModel, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let sigma = model.std_dev();
    let mut cuts = vec![a];
    let k_lo = ((a - model.mean) / sigma).ceil().max(-SUPPORT_SIGMAS) as i64;
    let k_hi = ((b - model.mean) / sigma).floor().min(SUPPORT_SIGMAS) as i64;
    for k in k_lo..=k_hi {
        let c = model.mean + k as f64 * sigma;
        if c > a && c < b {
            cuts.push(c);
        }
    }
    cuts.push(b);
    let panel_tol = tol / (cuts.len() - 1) as f64;
    let f = |z: f64| model.density(z);
    cuts.windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], panel_tol))
        .sum()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Sample mean and unbiased sample variance. A zero variance is returned
/// as-is; density evaluation rejects it later.
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianDistanceModel, MobilityError> {
    if samples.len() < 2 {
        return Err(MobilityError::InsufficientSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|s| (s - mean).powi(2)).sum();
    Ok(GaussianDistanceModel {
        mean,
        variance: ss / (n - 1.0),
    })
}

/// Random-epoch mobility: each epoch lasts an exponential time and carries a
/// fresh speed and heading. Only the component of motion along the axis
/// normal to the strip segment changes the modelled distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochModelParams {
    /// Rate of the exponential epoch duration (1/s).
    pub epoch_rate: f64,
    /// m/s; `speed_min == speed_max` gives a fixed speed.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Radians, measured from the axis along which distance is counted.
    pub heading_mean: f64,
    /// Radians; zero keeps every epoch on `heading_mean`.
    pub heading_std: f64,
    /// Distance at t = 0, metres.
    pub initial_distance: f64,
    /// Sampling cadence, seconds.
    pub sample_interval: f64,
}

impl Default for EpochModelParams {
    fn default() -> Self {
        Self {
            epoch_rate: 1.0,
            speed_min: 2.0,
            speed_max: 30.0,
            heading_mean: 0.0,
            heading_std: std::f64::consts::FRAC_PI_2,
            initial_distance: 0.0,
            sample_interval: 1.0,
        }
    }
}

impl EpochModelParams {
    fn validate(&self) -> Result<(), MobilityError> {
        let bad = |m: &str| Err(MobilityError::InvalidParams(m.into()));
        if !(self.epoch_rate > 0.0 && self.epoch_rate.is_finite()) {
            return bad("epoch_rate must be positive");
        }
        if !(self.speed_min >= 0.0 && self.speed_max >= self.speed_min && self.speed_max.is_finite())
        {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(self.heading_std >= 0.0 && self.heading_std.is_finite() && self.heading_mean.is_finite())
        {
            return bad("heading spread must be non-negative");
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval must be positive");
        }
        if !self.initial_distance.is_finite() {
            return bad("initial_distance must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

fn draw_velocity(params: &EpochModelParams, rng: &mut RngStream) -> Result<f64, MobilityError> {
    let speed = if params.speed_max > params.speed_min {
        rng.draw(Dist::Uniform {
            low: params.speed_min,
            high: params.speed_max,
        })?
    } else {
        params.speed_min
    };
    let heading = if params.heading_std > 0.0 {
        rng.draw(Dist::Normal {
            mean: params.heading_mean,
            variance: params.heading_std * params.heading_std,
        })?
    } else {
        params.heading_mean
    };
    Ok(speed * heading.cos())
}

/// One trajectory sampled at `0, Δ, 2Δ, …` up to `horizon`, giving
/// `floor(horizon / Δ) + 1` samples.
pub fn simulate_epochs(
    params: &EpochModelParams,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<EpochTrace, MobilityError> {
    params.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(MobilityError::InvalidParams(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let n = (horizon / params.sample_interval + 1e-12).floor() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut distances = Vec::with_capacity(n + 1);

    let mut epoch_start = 0.0;
    let mut start_distance = params.initial_distance;
    let mut velocity = draw_velocity(params, rng)?;
    let mut epoch_end = rng.draw(Dist::Exponential { rate: params.epoch_rate })?;

    for k in 0..=n {
        let t = k as f64 * params.sample_interval;
        while epoch_end < t {
            start_distance += velocity * (epoch_end - epoch_start);
            epoch_start = epoch_end;
            velocity = draw_velocity(params, rng)?;
            epoch_end += rng.draw(Dist::Exponential { rate: params.epoch_rate })?;
        }
        times.push(t);
        distances.push(start_distance + velocity * (t - epoch_start));
    }
    Ok(EpochTrace { times, distances })
}

/// Distance at time `t` across `trajectories` independent runs.
pub fn sample_distance_at(
    params: &EpochModelParams,
    t: f64,
    trajectories: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>, MobilityError> {
    let mut p = params.clone();
    p.sample_interval = t;
    (0..trajectories)
        .map(|_| {
            let trace = simulate_epochs(&p, t, rng)?;
            Ok(*trace.distances.last().expect("trace has at least one sample"))
        })
        .collect()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the normal CDF of `model`.
pub fn ks_distance(samples: &[f64], model: &GaussianDistanceModel) -> Result<f64, MobilityError> {
    model.check()?;
    if samples.is_empty() {
        return Err(MobilityError::InsufficientSamples(0));
    }
    let normal = Normal::new(model.mean, model.std_dev())
        .map_err(|_| MobilityError::NonPositiveVariance(model.variance))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (f - lo).abs().max((hi - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(x: f64, speed: f64, heading: Heading) -> NodeKinematics {
        NodeKinematics {
            node_id: NodeId(0),
            position: Position::new(x, 2.5),
            lane_index: 0,
            speed,
            heading,
        }
    }

    #[test]
    fn four_nodes_one_per_lane() {
        let cfg = HighwayConfig::default();
        let mut rng = RngStream::new(1, "mobility");
        let nodes = build_highway(&cfg, 4, 15.0, &mut rng).unwrap();
        let lanes: Vec<_> = nodes.iter().map(|n| n.lane_index).collect();
        assert_eq!(lanes, vec![0, 1, 2, 3]);
        assert_eq!(nodes[0].heading, Heading::East);
        assert_eq!(nodes[3].heading, Heading::West);
    }

    #[test]
    fn placement_repeats_for_fixed_seed() {
        let cfg = HighwayConfig::default();
        let a = build_highway(&cfg, 25, 7.0, &mut RngStream::new(42, "mobility")).unwrap();
        let b = build_highway(&cfg, 25, 7.0, &mut RngStream::new(42, "mobility")).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|n| n.speed == 7.0));
    }

    #[test]
    fn half_the_lanes_each_way() {
        let cfg = HighwayConfig::default();
        let east = cfg.directions.iter().filter(|h| **h == Heading::East).count();
        assert_eq!(east, 2);
    }

    #[test]
    fn build_rejects_bad_input() {
        let cfg = HighwayConfig::default();
        let mut rng = RngStream::new(1, "m");
        assert!(build_highway(&cfg, 1, 15.0, &mut rng).is_err());
        let bad = HighwayConfig { length: 0.0, ..HighwayConfig::default() };
        assert!(build_highway(&bad, 10, 15.0, &mut rng).is_err());
    }

    #[test]
    fn step_examples() {
        let cfg = HighwayConfig::default();
        let n = step_kinematics(&node(0.0, 15.0, Heading::East), 1.0, &cfg);
        assert_eq!(n.position.x, 15.0);
        let n = step_kinematics(&node(990.0, 30.0, Heading::East), 1.0, &cfg);
        assert_eq!(n.position.x, 20.0);
        let n = step_kinematics(&node(5.0, 30.0, Heading::West), 1.0, &cfg);
        assert_eq!(n.position.x, 975.0);
        let n = step_kinematics(&node(100.0, 2.0, Heading::East), 0.03, &cfg);
        assert!((n.position.x - 100.06).abs() < 1e-12);
        assert_eq!(n.position.y, 2.5);
    }

    #[test]
    fn distance_examples() {
        let p = Position::new(3.0, 4.0);
        assert_eq!(distance(p, p), 0.0);
        assert_eq!(distance(Position::new(0.0, 0.0), p), 5.0);
    }

    #[test]
    fn pdf_examples() {
        let std = GaussianDistanceModel::new(0.0, 1.0).unwrap();
        assert!((distance_pdf(&std, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let m = GaussianDistanceModel::new(5.0, 4.0).unwrap();
        let peak = 1.0 / (8.0 * std::f64::consts::PI).sqrt();
        assert!((distance_pdf(&m, 5.0).unwrap() - peak).abs() < 1e-15);
        assert!((peak - 0.19947).abs() < 1e-5);
        let bad = GaussianDistanceModel { mean: 0.0, variance: 0.0 };
        assert!(matches!(
            distance_pdf(&bad, 0.0),
            Err(MobilityError::NonPositiveVariance(_))
        ));
    }

    #[test]
    fn cdf_edge_cases() {
        let m = GaussianDistanceModel::new(0.0, 1.0).unwrap();
        assert_eq!(distance_cdf(&m, 0.0).unwrap(), 0.0);
        assert!((distance_cdf(&m, 8.0).unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(
            distance_cdf(&m, -1.0),
            Err(MobilityError::NegativeRadius(_))
        ));
        // All mass far to the right of a narrow window still gets found.
        let far = GaussianDistanceModel::new(500.0, 1.0).unwrap();
        assert!((distance_cdf(&far, 508.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn efficiency_is_scaled_cdf() {
        let m = GaussianDistanceModel::new(0.0, 1.0).unwrap();
        assert_eq!(efficiency(&m, 0.0).unwrap(), 0.0);
        let half = efficiency(&m, 20.0).unwrap();
        assert!((half - 50.0).abs() < 1e-6);
        for r in [0.1, 0.5, 1.3, 4.0] {
            assert_eq!(efficiency(&m, r).unwrap(), distance_cdf(&m, r).unwrap() * 100.0);
        }
    }

    #[test]
    fn fit_examples() {
        let m = fit_gaussian(&[0.0, 2.0]).unwrap();
        assert_eq!(m.mean, 1.0);
        assert_eq!(m.variance, 2.0);
        let flat = fit_gaussian(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(flat.mean, 1.0);
        assert!(matches!(
            distance_pdf(&flat, 1.0),
            Err(MobilityError::NonPositiveVariance(_))
        ));
        assert!(matches!(
            fit_gaussian(&[3.0]),
            Err(MobilityError::InsufficientSamples(1))
        ));
    }

    #[test]
    fn epoch_sample_count_and_stationary_case() {
        let params = EpochModelParams {
            speed_min: 0.0,
            speed_max: 0.0,
            heading_std: 0.0,
            initial_distance: 12.5,
            sample_interval: 0.3,
            ..EpochModelParams::default()
        };
        let mut rng = RngStream::new(5, "epochs");
        let trace = simulate_epochs(&params, 10.0, &mut rng).unwrap();
        assert_eq!(trace.times.len(), (10.0f64 / 0.3).floor() as usize + 1);
        assert!(trace.distances.iter().all(|d| *d == 12.5));
    }

    #[test]
    fn epoch_degenerate_is_constant_velocity() {
        let params = EpochModelParams {
            epoch_rate: 3.0,
            speed_min: 15.0,
            speed_max: 15.0,
            heading_std: 0.0,
            initial_distance: -40.0,
            sample_interval: 0.5,
            ..EpochModelParams::default()
        };
        let mut rng = RngStream::new(5, "epochs");
        let trace = simulate_epochs(&params, 60.0, &mut rng).unwrap();
        for (t, d) in trace.times.iter().zip(&trace.distances) {
            assert!((d - (-40.0 + 15.0 * t)).abs() < 1e-9, "t={t} d={d}");
        }
    }

    #[test]
    fn epoch_rejects_bad_params() {
        let mut rng = RngStream::new(5, "epochs");
        let p = EpochModelParams { epoch_rate: 0.0, ..EpochModelParams::default() };
        assert!(simulate_epochs(&p, 1.0, &mut rng).is_err());
        let p = EpochModelParams { speed_min: 5.0, speed_max: 1.0, ..EpochModelParams::default() };
        assert!(simulate_epochs(&p, 1.0, &mut rng).is_err());
        assert!(simulate_epochs(&EpochModelParams::default(), 0.0, &mut rng).is_err());
    }
}
