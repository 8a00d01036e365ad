//! Cartesian sweeps over node counts, speeds, presets and MAC variants.

use std::str::FromStr;

use rayon::prelude::*;

use super::{run_scenario, MetricsRow, ScenarioConfig, ScenarioError};
use crate::routing::PresetName;
use crate::Standard;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepFamily {
    /// Node counts at a fixed 15 m/s.
    Density,
    /// Speeds at a fixed 50 nodes.
    Mobility,
}

impl SweepFamily {
    pub const ALL: [SweepFamily; 2] = [SweepFamily::Density, SweepFamily::Mobility];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepFamily::Density => "density",
            SweepFamily::Mobility => "mobility",
        }
    }

    /// The standard sweep for this family: all six presets on both MACs.
    pub fn sweep(self) -> Sweep {
        let (node_counts, speeds) = match self {
            SweepFamily::Density => (vec![25, 50, 75, 100], vec![15.0]),
            SweepFamily::Mobility => (vec![50], vec![2.0, 7.0, 15.0, 30.0]),
        };
        Sweep {
            node_counts,
            speeds,
            protocols: PresetName::ALL.to_vec(),
            macs: vec![Standard::Dot11, Standard::Dot11p],
        }
    }

    /// Which sweep family a row belongs to, judged by its fixed axis.
    pub fn classify(row: &MetricsRow) -> Vec<SweepFamily> {
        let mut out = Vec::new();
        if row.speed_mps == 15.0 {
            out.push(SweepFamily::Density);
        }
        if row.n_nodes == 50 {
            out.push(SweepFamily::Mobility);
        }
        out
    }
}

impl std::fmt::Display for SweepFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "density" => Ok(SweepFamily::Density),
            "mobility" => Ok(SweepFamily::Mobility),
            other => Err(format!("unknown sweep family {other:?} (density|mobility)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub node_counts: Vec<usize>,
    pub speeds: Vec<f64>,
    pub protocols: Vec<PresetName>,
    pub macs: Vec<Standard>,
}

impl Sweep {
    /// One point: the base config's own values on every axis.
    pub fn single(base: &ScenarioConfig) -> Self {
        Sweep {
            node_counts: vec![base.n_nodes],
            speeds: vec![base.speed_mps],
            protocols: vec![base.protocol],
            macs: vec![base.mac_variant],
        }
    }

    pub fn configs(&self, base: &ScenarioConfig, reps: usize) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &mac in &self.macs {
            for &protocol in &self.protocols {
                for &n in &self.node_counts {
                    for &speed in &self.speeds {
                        for rep in 0..reps {
                            let mut cfg = base.clone();
                            cfg.mac_variant = mac;
                            cfg.protocol = protocol;
                            cfg.n_nodes = n;
                            cfg.speed_mps = speed;
                            cfg.seed = base.seed.wrapping_add(rep as u64);
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

fn sort_key(r: &MetricsRow) -> (Standard, PresetName, usize, u64, u64) {
    (r.mac_variant, r.protocol, r.n_nodes, r.speed_mps.to_bits(), r.seed)
}

/// Runs every point of `sweep` for seeds `base.seed .. base.seed + reps`
/// in parallel. Rows come back in a fixed order regardless of scheduling.
pub fn run_matrix(
    base: &ScenarioConfig,
    sweep: &Sweep,
    reps: usize,
) -> Result<Vec<MetricsRow>, ScenarioError> {
    if reps == 0 {
        return Err(ScenarioError::Invalid("reps must be at least 1".into()));
    }
    let configs = sweep.configs(base, reps);
    let mut rows = configs
        .par_iter()
        .map(|cfg| run_scenario(cfg).map(|r| r.row))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(sort_key);
    Ok(rows)
}
