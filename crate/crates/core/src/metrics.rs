//! CBR traffic and the three run metrics: throughput, end-to-end delay and
//! normalized routing load.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::routing::ControlLabel;
use crate::sim::SimTime;
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("no data packets were delivered")]
    NoDeliveredPackets,
    #[error("packet {0} delivered twice")]
    DuplicateDelivery(u64),
    #[error("packet {0} was never sent")]
    UnknownPacket(u64),
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbrFlowConfig {
    pub src: NodeId,
    pub dst: NodeId,
    pub packet_bytes: usize,
    pub interval: f64,
    pub start_at: SimTime,
    pub stop_at: SimTime,
}

impl CbrFlowConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(MetricsError::InvalidFlow("interval must be positive".into()));
        }
        if self.src == self.dst {
            return Err(MetricsError::InvalidFlow("src equals dst".into()));
        }
        if self.start_at > self.stop_at {
            return Err(MetricsError::InvalidFlow("start after stop".into()));
        }
        Ok(())
    }
}

/// Send instants `start, start+interval, …` strictly before `stop`.
pub fn cbr_schedule(flow: &CbrFlowConfig) -> Result<Vec<SimTime>, MetricsError> {
    flow.validate()?;
    let span = flow.stop_at - flow.start_at;
    let q = span / flow.interval;
    // Guard against q landing a hair above an integer from rounding.
    let n = (q - 1e-9 * q.max(1.0)).ceil().max(0.0) as u64;
    Ok((0..n)
        .map(|k| flow.start_at + k as f64 * flow.interval)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub packet_id: u64,
    pub flow_id: usize,
    pub sent_at: SimTime,
    pub received_at: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounts {
    pub sent: u64,
    pub delivered: u64,
}

/// Per-run counters. One instance per run, owned by the event loop.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    pub data_packets_sent: u64,
    pub data_packets_delivered: u64,
    pub data_bytes_delivered: u64,
    pub data_bytes_sent: u64,
    /// Every routing-control frame put on the air, forwards included.
    pub control_transmissions: u64,
    /// Control messages created by their originator.
    pub control_originated: u64,
    pub control_by_kind: BTreeMap<ControlLabel, u64>,
    pub delay_sum: f64,
    pub min_delay: Option<f64>,
    pub drops_queue: u64,
    pub drops_noroute: u64,
    pub per_flow: BTreeMap<usize, FlowCounts>,
    records: HashMap<u64, PacketRecord>,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_send(&mut self, packet_id: u64, flow_id: usize, bytes: usize, at: SimTime) {
        self.data_packets_sent += 1;
        self.data_bytes_sent += bytes as u64;
        self.per_flow.entry(flow_id).or_default().sent += 1;
        self.records.insert(
            packet_id,
            PacketRecord {
                packet_id,
                flow_id,
                sent_at: at,
                received_at: None,
            },
        );
    }

    /// Returns the packet's end-to-end delay.
    pub fn record_delivery(
        &mut self,
        packet_id: u64,
        bytes: usize,
        at: SimTime,
    ) -> Result<f64, MetricsError> {
        let rec = self
            .records
            .get_mut(&packet_id)
            .ok_or(MetricsError::UnknownPacket(packet_id))?;
        if rec.received_at.is_some() {
            return Err(MetricsError::DuplicateDelivery(packet_id));
        }
        rec.received_at = Some(at);
        let delay = at - rec.sent_at;
        let flow = rec.flow_id;
        self.data_packets_delivered += 1;
        self.data_bytes_delivered += bytes as u64;
        self.delay_sum += delay;
        self.min_delay = Some(self.min_delay.map_or(delay, |m| m.min(delay)));
        self.per_flow.entry(flow).or_default().delivered += 1;
        Ok(delay)
    }

    pub fn record_control_tx(&mut self, label: ControlLabel) {
        self.control_transmissions += 1;
        *self.control_by_kind.entry(label).or_default() += 1;
    }

    pub fn record_control_origination(&mut self) {
        self.control_originated += 1;
    }

    pub fn record(&self, packet_id: u64) -> Option<&PacketRecord> {
        self.records.get(&packet_id)
    }

    /// Sum of the per-kind control counters.
    pub fn control_by_kind_total(&self) -> u64 {
        self.control_by_kind.values().sum()
    }
}

/// Delivered bytes per second.
pub fn throughput(acc: &MetricsAccumulator, duration: f64) -> Result<f64, MetricsError> {
    if !(duration > 0.0) {
        return Err(MetricsError::NonPositiveDuration(duration));
    }
    Ok(acc.data_bytes_delivered as f64 / duration)
}

/// Mean delay over delivered packets.
pub fn e2ed(acc: &MetricsAccumulator) -> Result<f64, MetricsError> {
    if acc.data_packets_delivered == 0 {
        return Err(MetricsError::NoDeliveredPackets);
    }
    Ok(acc.delay_sum / acc.data_packets_delivered as f64)
}

/// Control transmissions per delivered packet.
pub fn nrl(acc: &MetricsAccumulator) -> Result<f64, MetricsError> {
    if acc.data_packets_delivered == 0 {
        return Err(MetricsError::NoDeliveredPackets);
    }
    Ok(acc.control_transmissions as f64 / acc.data_packets_delivered as f64)
}
