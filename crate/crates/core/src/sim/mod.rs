//! Discrete-event engine: virtual time, a totally ordered event queue and
//! seeded random streams.

mod queue;
mod rng;
mod time;

use thiserror::Error;

pub use queue::{Event, EventHandle, EventQueue, Target};
pub use rng::{derive_seed, Dist, RngStream};
pub use time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot schedule at t={at} before current time t={now}")]
    SchedulingInPast { at: f64, now: f64 },
    #[error("invalid simulation time {0}")]
    InvalidTime(f64),
    #[error("invalid distribution parameters: {0:?}")]
    InvalidDistParams(Dist),
}
