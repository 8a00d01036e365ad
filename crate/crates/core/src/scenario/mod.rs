//! Scenario assembly and batch execution: config parsing, single runs,
//! sweeps over node counts and speeds, report files and the analytic
//! distance-model table.

mod analytics;
mod config;
mod matrix;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::mac::{frame_airtime, MacCounters};
use crate::metrics::{self, CbrFlowConfig, FlowCounts};
use crate::mobility::{build_highway, MobilityError};
use crate::net::{NetError, Network, NetworkSetup};
use crate::phy::{Channel, PhyError};
use crate::routing::{ControlLabel, PresetName};
use crate::sim::{RngStream, SimTime};
use crate::{NodeId, Standard};

pub use analytics::{analytics_table, AnalyticsRow};
pub use config::{parse_config, ConfigError, OverrideValue, ScenarioConfig};
pub use matrix::{run_matrix, Sweep, SweepFamily};
pub use report::{csv_string, emit_report, write_csv, CSV_HEADER};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

/// One line of `metrics.csv`. Undefined ratios are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub protocol: PresetName,
    pub mac_variant: Standard,
    pub n_nodes: usize,
    pub speed_mps: f64,
    pub seed: u64,
    pub throughput_bps: f64,
    pub e2ed_s: Option<f64>,
    pub nrl: Option<f64>,
    pub sent: u64,
    pub delivered: u64,
    pub control_tx: u64,
    pub drops_queue: u64,
    pub drops_noroute: u64,
    pub collisions: u64,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        format!(
            "{},{},{},{:.6},{},{:.6},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.mac_variant,
            self.n_nodes,
            self.speed_mps,
            self.seed,
            self.throughput_bps,
            opt(self.e2ed_s),
            opt(self.nrl),
            self.sent,
            self.delivered,
            self.control_tx,
            self.drops_queue,
            self.drops_noroute,
            self.collisions
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub row: MetricsRow,
    pub wall_clock: Duration,
    pub events: u64,
    pub trace_hash: u64,
    pub control_by_kind: BTreeMap<ControlLabel, u64>,
    pub control_originated: u64,
    /// Smallest end-to-end delay seen, if anything was delivered.
    pub min_delay: Option<f64>,
    /// Airtime of one data packet at the configured PHY rate.
    pub one_hop_airtime: f64,
    pub per_flow: BTreeMap<usize, FlowCounts>,
    pub mac: MacCounters,
    /// Trace lines, when requested.
    pub trace: Vec<String>,
}

/// Draws `cfg.n_flows` distinct (src, dst) pairs and their start times
/// from the "traffic" stream.
pub fn build_flows(cfg: &ScenarioConfig) -> Vec<CbrFlowConfig> {
    let mut rng = RngStream::new(cfg.seed, "traffic");
    let mut used = BTreeSet::new();
    let mut flows = Vec::with_capacity(cfg.n_flows);
    while flows.len() < cfg.n_flows {
        let src = rng.index(cfg.n_nodes);
        let dst = rng.index(cfg.n_nodes);
        if src == dst || !used.insert((src, dst)) {
            continue;
        }
        let span = cfg.traffic_start_max - cfg.traffic_start_min;
        let start = cfg.traffic_start_min + rng.unit() * span;
        flows.push(CbrFlowConfig {
            src: NodeId(src as u32),
            dst: NodeId(dst as u32),
            packet_bytes: cfg.packet_bytes,
            interval: cfg.packet_interval,
            start_at: SimTime::from_secs(start.min(cfg.sim_time)),
            stop_at: SimTime::from_secs(cfg.sim_time),
        });
    }
    flows
}

/// Builds the network for `cfg` without running it.
pub fn build_network(cfg: &ScenarioConfig, trace: bool) -> Result<Network, ScenarioError> {
    cfg.validate()?;
    let mut mobility_rng = RngStream::new(cfg.seed, "mobility");
    let nodes = build_highway(&cfg.highway, cfg.n_nodes, cfg.speed_mps, &mut mobility_rng)?;
    let mut channel = Channel::new(cfg.phy_params(), cfg.nakagami())?;
    channel.fading = cfg.fading();
    let net = Network::new(NetworkSetup {
        highway: cfg.highway.clone(),
        nodes,
        channel,
        mac: cfg.mac_params(),
        queue_capacity: cfg.queue_capacity,
        routing: cfg.routing_params(),
        flows: build_flows(cfg),
        seed: cfg.seed,
        data_ttl: cfg.data_ttl,
        trace,
    })?;
    Ok(net)
}

/// Summarizes a network that has run for `duration` seconds.
pub fn collect_result(
    cfg: &ScenarioConfig,
    net: &mut Network,
    duration: f64,
    wall_clock: Duration,
) -> Result<RunResult, ScenarioError> {
    let acc = net.metrics();
    let mac = net.medium().total_counters();
    let row = MetricsRow {
        protocol: cfg.protocol,
        mac_variant: cfg.mac_variant,
        n_nodes: cfg.n_nodes,
        speed_mps: cfg.speed_mps,
        seed: cfg.seed,
        throughput_bps: metrics::throughput(acc, duration)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?,
        e2ed_s: metrics::e2ed(acc).ok(),
        nrl: metrics::nrl(acc).ok(),
        sent: acc.data_packets_sent,
        delivered: acc.data_packets_delivered,
        control_tx: acc.control_transmissions,
        drops_queue: acc.drops_queue,
        drops_noroute: acc.drops_noroute,
        collisions: mac.collisions,
    };
    Ok(RunResult {
        row,
        wall_clock,
        events: net.events_processed(),
        trace_hash: net.trace_hash(),
        control_by_kind: acc.control_by_kind.clone(),
        control_originated: acc.control_originated,
        min_delay: acc.min_delay,
        one_hop_airtime: frame_airtime(
            &cfg.mac_params(),
            cfg.phy_params().data_rate,
            cfg.packet_bytes,
        ),
        per_flow: acc.per_flow.clone(),
        mac,
        trace: net.take_trace(),
    })
}

/// Runs one scenario to `cfg.sim_time`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    run_scenario_with(cfg, false)
}

pub fn run_scenario_with(cfg: &ScenarioConfig, trace: bool) -> Result<RunResult, ScenarioError> {
    let started = Instant::now();
    let mut net = build_network(cfg, trace)?;
    net.run_until(SimTime::from_secs(cfg.sim_time))?;
    collect_result(cfg, &mut net, cfg.sim_time, started.elapsed())
}
