//! Radio model: multi-slope log-distance mean path loss, Nakagami-m fading
//! of the received power, threshold reception, and 802.11 / 802.11p presets.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sim::{Dist, RngStream};
use crate::Standard;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("Nakagami shape must be >= 0.5, got {0}")]
    InvalidShape(f64),
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Free-space loss at `distance` metres for a carrier of `freq` Hz, in dB.
pub fn free_space_loss_db(freq: f64, distance: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance * freq / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyParams {
    pub preset: Standard,
    /// Hz.
    pub carrier_freq: f64,
    /// dBm.
    pub tx_power: f64,
    /// bit/s.
    pub data_rate: f64,
    /// dBm; frames at or above this power decode.
    pub rx_threshold: f64,
    /// dBm; power at or above this marks the medium busy.
    pub cs_threshold: f64,
    /// dBm.
    pub noise_floor: f64,
}

impl PhyParams {
    pub fn validate(&self) -> Result<(), PhyError> {
        if !(self.data_rate > 0.0) {
            return Err(PhyError::InvalidParams("data_rate must be positive".into()));
        }
        if self.cs_threshold > self.rx_threshold {
            return Err(PhyError::InvalidParams(
                "cs_threshold must not exceed rx_threshold".into(),
            ));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(PhyError::InvalidParams("carrier_freq must be positive".into()));
        }
        Ok(())
    }

    /// `key = value` block, one field per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[phy]");
        let _ = writeln!(s, "preset = \"{}\"", self.preset);
        let _ = writeln!(s, "carrier_freq = {:e}", self.carrier_freq);
        let _ = writeln!(s, "tx_power = {}", self.tx_power);
        let _ = writeln!(s, "data_rate = {:e}", self.data_rate);
        let _ = writeln!(s, "rx_threshold = {}", self.rx_threshold);
        let _ = writeln!(s, "cs_threshold = {}", self.cs_threshold);
        let _ = writeln!(s, "noise_floor = {}", self.noise_floor);
        s
    }
}

/// Default parameter set for a standard.
///
/// 802.11 uses a 2.4 GHz carrier at 2 Mbit/s. 802.11p uses the 5.9 GHz DSRC
/// band with a 10 MHz channel at its 6 Mbit/s default rate; it gets a more
/// sensitive decode threshold and a carrier-sense threshold only 3 dB below it.
pub fn phy_preset(kind: Standard) -> PhyParams {
    match kind {
        Standard::Dot11 => PhyParams {
            preset: kind,
            carrier_freq: 2.4e9,
            tx_power: 20.0,
            data_rate: 2e6,
            rx_threshold: -68.0,
            cs_threshold: -78.0,
            noise_floor: -101.0,
        },
        Standard::Dot11p => PhyParams {
            preset: kind,
            carrier_freq: 5.9e9,
            tx_power: 20.0,
            data_rate: 6e6,
            rx_threshold: -82.0,
            cs_threshold: -85.0,
            noise_floor: -104.0,
        },
    }
}

/// Distance-dependent path-loss exponent and Nakagami shape.
///
/// Both profiles are lists of `(max_distance, value)` with strictly
/// increasing breakpoints; the last entry should cover `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct NakagamiParams {
    pub m_by_distance: Vec<(f64, f64)>,
    pub gamma_by_distance: Vec<(f64, f64)>,
    /// Metres.
    pub ref_distance: f64,
    /// dB of loss at `ref_distance`.
    pub ref_loss: f64,
}

impl NakagamiParams {
    /// m = 1.5 up to 80 m then 0.75; γ = 1.9 up to 200 m then 3.8; free-space
    /// loss at 1 m as the reference.
    pub fn for_carrier(freq: f64) -> Self {
        Self {
            m_by_distance: vec![(80.0, 1.5), (f64::INFINITY, 0.75)],
            gamma_by_distance: vec![(200.0, 1.9), (f64::INFINITY, 3.8)],
            ref_distance: 1.0,
            ref_loss: free_space_loss_db(freq, 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        fn increasing(v: &[(f64, f64)]) -> bool {
            !v.is_empty() && v.windows(2).all(|w| w[0].0 < w[1].0) && v[0].0 > 0.0
        }
        if !increasing(&self.m_by_distance) || !increasing(&self.gamma_by_distance) {
            return Err(PhyError::InvalidParams(
                "distance breakpoints must be positive and strictly increasing".into(),
            ));
        }
        if let Some(&(_, m)) = self.m_by_distance.iter().find(|(_, m)| !(*m >= 0.5)) {
            return Err(PhyError::InvalidShape(m));
        }
        if self.gamma_by_distance.iter().any(|(_, g)| !(*g > 0.0)) {
            return Err(PhyError::InvalidParams("path-loss exponents must be positive".into()));
        }
        if !(self.ref_distance > 0.0) {
            return Err(PhyError::InvalidParams("ref_distance must be positive".into()));
        }
        Ok(())
    }

    pub fn shape_at(&self, d: f64) -> f64 {
        self.m_by_distance
            .iter()
            .find(|(max, _)| d <= *max)
            .or(self.m_by_distance.last())
            .map(|(_, m)| *m)
            .unwrap_or(1.0)
    }

    /// Path loss in dB: the reference loss plus `10·γᵢ·log10` over each
    /// distance segment the link spans.
    pub fn path_loss_db(&self, d: f64) -> Result<f64, PhyError> {
        if !(d > 0.0) {
            return Err(PhyError::NonPositiveDistance(d));
        }
        let r0 = self.ref_distance;
        let first_gamma = self.gamma_by_distance.first().map_or(2.0, |g| g.1);
        if d <= r0 {
            return Ok(self.ref_loss + 10.0 * first_gamma * (d / r0).log10());
        }
        let mut loss = self.ref_loss;
        let mut from = r0;
        for &(until, gamma) in &self.gamma_by_distance {
            if until <= from {
                continue;
            }
            let to = d.min(until);
            loss += 10.0 * gamma * (to / from).log10();
            if d <= until {
                return Ok(loss);
            }
            from = until;
        }
        // Past the last breakpoint: keep the last exponent.
        let last_gamma = self.gamma_by_distance.last().map_or(2.0, |g| g.1);
        Ok(loss + 10.0 * last_gamma * (d / from).log10())
    }
}

/// Mean received power at distance `d`, in dBm.
pub fn mean_rx_power(phy: &PhyParams, naka: &NakagamiParams, d: f64) -> Result<f64, PhyError> {
    Ok(phy.tx_power - naka.path_loss_db(d)?)
}

/// Received power with Nakagami-m fading: the linear power of an m-shaped
/// envelope is Gamma(m, mean/m).
pub fn sample_rx_power(mean_dbm: f64, shape_m: f64, rng: &mut RngStream) -> Result<f64, PhyError> {
    if !(shape_m >= 0.5) || !shape_m.is_finite() {
        return Err(PhyError::InvalidShape(shape_m));
    }
    let mean_mw = dbm_to_mw(mean_dbm);
    let p = rng
        .draw(Dist::Gamma {
            shape: shape_m,
            scale: mean_mw / shape_m,
        })
        .map_err(|_| PhyError::InvalidShape(shape_m))?;
    Ok(mw_to_dbm(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    Received,
    /// Strong enough to sense, too weak to decode.
    CarrierOnly,
    Undetected,
    /// Decodable power but corrupted by an overlapping transmission.
    Collided,
}

pub fn reception_decision(sample: f64, phy: &PhyParams, concurrent_interference: bool) -> Reception {
    if sample >= phy.rx_threshold {
        if concurrent_interference {
            Reception::Collided
        } else {
            Reception::Received
        }
    } else if sample >= phy.cs_threshold {
        Reception::CarrierOnly
    } else {
        Reception::Undetected
    }
}

/// Path-loss and fading state shared by every link in a run.
#[derive(Debug, Clone)]
pub struct Channel {
    pub phy: PhyParams,
    pub naka: NakagamiParams,
    /// When false, received power equals the mean (no fading draw).
    pub fading: bool,
}

impl Channel {
    pub fn new(phy: PhyParams, naka: NakagamiParams) -> Result<Self, PhyError> {
        phy.validate()?;
        naka.validate()?;
        Ok(Self { phy, naka, fading: true })
    }

    /// Mean power far enough under carrier sense that a fading draw can
    /// never lift it above the threshold in practice. Such links skip the
    /// draw entirely.
    const NEGLIGIBLE_MARGIN_DB: f64 = 25.0;

    /// Sampled received power, or `None` when the mean is negligibly low.
    pub fn sample_link(&self, d: f64, rng: &mut RngStream) -> Result<Option<f64>, PhyError> {
        let mean = mean_rx_power(&self.phy, &self.naka, d.max(1e-3))?;
        if mean < self.phy.cs_threshold - Self::NEGLIGIBLE_MARGIN_DB {
            return Ok(None);
        }
        if !self.fading {
            return Ok(Some(mean));
        }
        sample_rx_power(mean, self.naka.shape_at(d), rng).map(Some)
    }
}
