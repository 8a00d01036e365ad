use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use super::SimError;

/// Virtual simulation time in seconds.
///
/// Always finite and non-negative, so it can carry a total order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self, SimError> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(SimTime(seconds))
        } else {
            Err(SimError::InvalidTime(seconds))
        }
    }

    /// Panics on a negative or non-finite value. Meant for literals and
    /// values already validated upstream.
    pub fn from_secs(seconds: f64) -> Self {
        Self::new(seconds).expect("simulation time must be finite and non-negative")
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn max(self, other: SimTime) -> SimTime {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: f64) -> SimTime {
        SimTime::from_secs(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;

    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}", self.0)
    }
}
