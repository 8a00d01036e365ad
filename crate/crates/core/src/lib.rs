//! Deterministic discrete-event simulator for comparing DSDV, OLSR and DYMO
//! over 802.11 and 802.11p parameter sets on a bidirectional highway.

pub mod mac;
pub mod metrics;
pub mod mobility;
pub mod net;
pub mod phy;
pub mod routing;
pub mod scenario;
pub mod sim;

use std::fmt;
use std::str::FromStr;

/// Index of a vehicle in a run; also its address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// MAC/PHY parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Standard {
    Dot11,
    Dot11p,
}

impl Standard {
    pub const ALL: [Standard; 2] = [Standard::Dot11, Standard::Dot11p];
}

impl fmt::Display for Standard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Standard::Dot11 => "802.11",
            Standard::Dot11p => "802.11p",
        })
    }
}

impl FromStr for Standard {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "802.11" | "dot11" => Ok(Standard::Dot11),
            "802.11p" | "dot11p" => Ok(Standard::Dot11p),
            other => Err(format!("unknown MAC variant '{other}' (expected 802.11 or 802.11p)")),
        }
    }
}
