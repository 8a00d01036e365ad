//! DSDV, OLSR and DYMO state machines.
//!
//! Every protocol reacts to the same inputs (start, timer expiry, a control
//! message heard from a neighbor, MAC link-failure feedback, a data packet
//! needing a next hop) and answers with [`RoutingAction`]s for the network
//! layer to carry out. Nothing here touches the radio or the event queue.

mod dsdv;
mod dymo;
mod olsr;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::sim::{RngStream, SimTime};
use crate::NodeId;

pub use dsdv::{Dsdv, DsdvAdvert, DsdvParams, DSDV_INFINITY};
pub use dymo::{Dymo, DymoParams, RouteRequest, RreqVerdict};
pub use olsr::{select_mprs, LinkCode, Olsr, OlsrParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("two-hop set lists neighbor {0} that is not a one-hop neighbor")]
    InconsistentTopologySets(NodeId),
    #[error("invalid routing parameters: {0}")]
    InvalidParams(String),
    #[error("unknown protocol preset {0:?}")]
    UnknownPreset(String),
}

/// Snapshot of one routing table row.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub metric: u32,
    pub seq_num: u32,
    pub installed_at: SimTime,
    pub expires_at: Option<SimTime>,
    pub valid: bool,
}

impl fmt::Display for RouteEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let expires = self
            .expires_at
            .map_or_else(|| "-".to_string(), |t| format!("{:.6}", t.secs()));
        write!(
            f,
            "{} {} {} {} {}{}",
            self.dest,
            self.next_hop,
            self.metric,
            self.seq_num,
            expires,
            if self.valid { "" } else { " invalid" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlKind {
    DsdvUpdate(Vec<DsdvAdvert>),
    Hello {
        neighbors: Vec<(NodeId, LinkCode)>,
    },
    Tc {
        ansn: u16,
        msg_seq: u16,
        ttl: u8,
        advertised: Vec<NodeId>,
    },
    Rreq {
        orig: NodeId,
        orig_seq: u16,
        target: NodeId,
        target_seq: Option<u16>,
        hop_count: u8,
        hop_limit: u8,
    },
    Rrep {
        /// The node that answered, i.e. the discovered destination.
        orig: NodeId,
        orig_seq: u16,
        /// The node that asked.
        target: NodeId,
        hop_count: u8,
        hop_limit: u8,
    },
    Rerr {
        unreachable: Vec<(NodeId, u16)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlLabel {
    DsdvUpdate,
    Hello,
    Tc,
    Rreq,
    Rrep,
    Rerr,
}

impl ControlLabel {
    pub const ALL: [ControlLabel; 6] = [
        ControlLabel::DsdvUpdate,
        ControlLabel::Hello,
        ControlLabel::Tc,
        ControlLabel::Rreq,
        ControlLabel::Rrep,
        ControlLabel::Rerr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlLabel::DsdvUpdate => "dsdv_update",
            ControlLabel::Hello => "hello",
            ControlLabel::Tc => "tc",
            ControlLabel::Rreq => "rreq",
            ControlLabel::Rrep => "rrep",
            ControlLabel::Rerr => "rerr",
        }
    }

    pub fn family(self) -> Family {
        match self {
            ControlLabel::DsdvUpdate => Family::Dsdv,
            ControlLabel::Hello | ControlLabel::Tc => Family::Olsr,
            ControlLabel::Rreq | ControlLabel::Rrep | ControlLabel::Rerr => Family::Dymo,
        }
    }
}

/// IP + UDP headers carried by every control packet.
const IP_UDP_HEADER: usize = 28;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMessage {
    pub origin: NodeId,
    pub emitted_at: SimTime,
    pub kind: ControlKind,
}

impl ControlMessage {
    pub fn label(&self) -> ControlLabel {
        match self.kind {
            ControlKind::DsdvUpdate(_) => ControlLabel::DsdvUpdate,
            ControlKind::Hello { .. } => ControlLabel::Hello,
            ControlKind::Tc { .. } => ControlLabel::Tc,
            ControlKind::Rreq { .. } => ControlLabel::Rreq,
            ControlKind::Rrep { .. } => ControlLabel::Rrep,
            ControlKind::Rerr { .. } => ControlLabel::Rerr,
        }
    }

    /// On-air payload size in bytes.
    pub fn size_bytes(&self) -> usize {
        IP_UDP_HEADER
            + match &self.kind {
                ControlKind::DsdvUpdate(entries) => 4 + 12 * entries.len(),
                ControlKind::Hello { neighbors } => 16 + 8 * neighbors.len(),
                ControlKind::Tc { advertised, .. } => 20 + 4 * advertised.len(),
                ControlKind::Rreq { .. } | ControlKind::Rrep { .. } => 24,
                ControlKind::Rerr { unreachable } => 8 + 8 * unreachable.len(),
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoutingTimer {
    DsdvPeriodic,
    DsdvTrigger { gen: u64 },
    OlsrHello,
    OlsrTc,
    DymoRreqWait { dest: NodeId, gen: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoutingAction {
    /// Hand a broadcast to the MAC after `delay` seconds.
    Broadcast { msg: ControlMessage, delay: f64 },
    Unicast { next_hop: NodeId, msg: ControlMessage },
    Timer { at: SimTime, timer: RoutingTimer },
    /// A discovery for `dest` succeeded; buffered packets may go.
    RouteFound { dest: NodeId },
    /// A discovery for `dest` was abandoned; buffered packets are lost.
    GaveUp { dest: NodeId },
}

/// What to do with a data packet at this node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataDecision {
    Forward(NodeId),
    /// Keep the packet until a pending discovery finishes.
    Hold,
    NoRoute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Dsdv,
    Olsr,
    Dymo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PresetName {
    Dsdv,
    ModDsdv,
    Olsr,
    ModOlsr,
    Dymo,
    ModDymo,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::Dsdv,
        PresetName::ModDsdv,
        PresetName::Olsr,
        PresetName::ModOlsr,
        PresetName::Dymo,
        PresetName::ModDymo,
    ];

    pub fn family(self) -> Family {
        match self {
            PresetName::Dsdv | PresetName::ModDsdv => Family::Dsdv,
            PresetName::Olsr | PresetName::ModOlsr => Family::Olsr,
            PresetName::Dymo | PresetName::ModDymo => Family::Dymo,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Dsdv => "DSDV",
            PresetName::ModDsdv => "MOD_DSDV",
            PresetName::Olsr => "OLSR",
            PresetName::ModOlsr => "MOD_OLSR",
            PresetName::Dymo => "DYMO",
            PresetName::ModDymo => "MOD_DYMO",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = RoutingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| RoutingError::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolParams {
    Dsdv(DsdvParams),
    Olsr(OlsrParams),
    Dymo(DymoParams),
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), RoutingError> {
        match self {
            ProtocolParams::Dsdv(p) => p.validate(),
            ProtocolParams::Olsr(p) => p.validate(),
            ProtocolParams::Dymo(p) => p.validate(),
        }
    }
}

/// Base presets use the classic protocol defaults; MOD presets halve or
/// double the intervals each modification names.
pub fn preset_params(name: PresetName) -> ProtocolParams {
    match name {
        PresetName::Dsdv => ProtocolParams::Dsdv(DsdvParams::default()),
        PresetName::ModDsdv => ProtocolParams::Dsdv(DsdvParams {
            periodic_update_interval: 30.0,
            min_trigger_interval: 2.0,
            full_dump_interval: 30.0,
            ..DsdvParams::default()
        }),
        PresetName::Olsr => ProtocolParams::Olsr(OlsrParams::default()),
        PresetName::ModOlsr => ProtocolParams::Olsr(OlsrParams::with_intervals(1.0, 2.5)),
        PresetName::Dymo => ProtocolParams::Dymo(DymoParams::default()),
        PresetName::ModDymo => ProtocolParams::Dymo(DymoParams {
            route_timeout: 2.5,
            rreq_wait_time: 1.0,
            rreq_rate_limit: 5.0,
            ..DymoParams::default()
        }),
    }
}

/// One node's routing state.
#[derive(Debug, Clone)]
pub enum Protocol {
    Dsdv(Dsdv),
    Olsr(Olsr),
    Dymo(Dymo),
}

impl Protocol {
    pub fn new(me: NodeId, params: &ProtocolParams) -> Result<Self, RoutingError> {
        params.validate()?;
        Ok(match params {
            ProtocolParams::Dsdv(p) => Protocol::Dsdv(Dsdv::new(me, p.clone())),
            ProtocolParams::Olsr(p) => Protocol::Olsr(Olsr::new(me, p.clone())),
            ProtocolParams::Dymo(p) => Protocol::Dymo(Dymo::new(me, p.clone())),
        })
    }

    pub fn start(&mut self, now: SimTime, rng: &mut RngStream) -> Vec<RoutingAction> {
        match self {
            Protocol::Dsdv(p) => p.start(now, rng),
            Protocol::Olsr(p) => p.start(now, rng),
            Protocol::Dymo(_) => Vec::new(),
        }
    }

    pub fn on_timer(
        &mut self,
        timer: RoutingTimer,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Vec<RoutingAction> {
        match self {
            Protocol::Dsdv(p) => p.on_timer(timer, now),
            Protocol::Olsr(p) => p.on_timer(timer, now, rng),
            Protocol::Dymo(p) => p.on_timer(timer, now),
        }
    }

    pub fn on_control(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Vec<RoutingAction> {
        match self {
            Protocol::Dsdv(p) => p.on_control(msg, from, now),
            Protocol::Olsr(p) => p.on_control(msg, from, now, rng),
            Protocol::Dymo(p) => p.on_control(msg, from, now, rng),
        }
    }

    /// MAC gave up on a unicast frame to `neighbor`.
    pub fn on_link_failure(&mut self, neighbor: NodeId, now: SimTime) -> Vec<RoutingAction> {
        match self {
            Protocol::Dsdv(p) => p.on_link_failure(neighbor, now),
            Protocol::Olsr(p) => p.on_link_failure(neighbor, now),
            Protocol::Dymo(p) => p.on_link_failure(neighbor, now),
        }
    }

    /// Next hop for a data packet to `dest`. `originated` is true at the
    /// packet's source.
    pub fn route_data(
        &mut self,
        dest: NodeId,
        originated: bool,
        now: SimTime,
        actions: &mut Vec<RoutingAction>,
    ) -> DataDecision {
        match self {
            Protocol::Dsdv(p) => p.lookup(dest).map_or(DataDecision::NoRoute, DataDecision::Forward),
            Protocol::Olsr(p) => p
                .lookup(dest, now)
                .map_or(DataDecision::NoRoute, DataDecision::Forward),
            Protocol::Dymo(p) => p.route_data(dest, originated, now, actions),
        }
    }

    /// Pure lookup with no side effects.
    pub fn next_hop(&mut self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        match self {
            Protocol::Dsdv(p) => p.lookup(dest),
            Protocol::Olsr(p) => p.lookup(dest, now),
            Protocol::Dymo(p) => p.lookup(dest, now),
        }
    }

    pub fn table(&mut self, now: SimTime) -> Vec<RouteEntry> {
        match self {
            Protocol::Dsdv(p) => p.table(),
            Protocol::Olsr(p) => p.table(now),
            Protocol::Dymo(p) => p.table(),
        }
    }
}

/// Hop-count shortest paths from `me` over a directed adjacency map.
/// Equal-length paths resolve to the lowest first hop.
pub fn shortest_routes(
    me: NodeId,
    adjacency: &BTreeMap<NodeId, BTreeSet<NodeId>>,
) -> BTreeMap<NodeId, (NodeId, u32)> {
    let mut best: BTreeMap<NodeId, (NodeId, u32)> = BTreeMap::new();
    let mut frontier: Vec<NodeId> = Vec::new();
    if let Some(first) = adjacency.get(&me) {
        for &n in first {
            if n != me {
                best.insert(n, (n, 1));
                frontier.push(n);
            }
        }
    }
    let mut depth = 1;
    while !frontier.is_empty() {
        let mut next: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for u in &frontier {
            let via = best[u].0;
            for &v in adjacency.get(u).into_iter().flatten() {
                if v == me || best.contains_key(&v) {
                    continue;
                }
                next.entry(v)
                    .and_modify(|h| *h = (*h).min(via))
                    .or_insert(via);
            }
        }
        depth += 1;
        frontier = next.keys().copied().collect();
        for (v, via) in next {
            best.insert(v, (via, depth));
        }
    }
    best
}

/// `a` is newer than `b` under 16-bit wraparound.
pub fn seq_newer(a: u16, b: u16) -> bool {
    a != b && a.wrapping_sub(b) < 0x8000
}
