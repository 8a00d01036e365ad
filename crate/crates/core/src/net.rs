//! A whole simulated network: vehicles, the shared medium, one routing
//! instance per node and the CBR flows, driven by one event queue.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::mac::{
    Dest, EnqueueOutcome, Frame, FrameKind, MacEvent, MacIndication, MacOutput, MacParams, Medium,
};
use crate::metrics::{cbr_schedule, CbrFlowConfig, MetricsAccumulator, MetricsError};
use crate::mobility::{HighwayConfig, NodeKinematics, Position};
use crate::phy::Channel;
use crate::routing::{
    ControlMessage, DataDecision, Protocol, ProtocolParams, RoutingAction, RoutingError,
    RoutingTimer,
};
use crate::sim::{EventQueue, RngStream, SimError, SimTime, Target};
use crate::NodeId;

pub const DEFAULT_DATA_TTL: u8 = 32;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid network setup: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub id: u64,
    pub flow: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub bytes: usize,
    pub sent_at: SimTime,
    pub ttl: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetPayload {
    Data(DataPacket),
    Control(ControlMessage),
}

#[derive(Debug, Clone)]
enum NetEvent {
    Mac(MacEvent),
    Cbr { flow: usize, k: u64 },
    Routing { node: NodeId, timer: RoutingTimer },
    DelayedBroadcast { node: NodeId, msg: ControlMessage },
}

/// Everything needed to build a [`Network`].
#[derive(Debug, Clone)]
pub struct NetworkSetup {
    pub highway: HighwayConfig,
    pub nodes: Vec<NodeKinematics>,
    pub channel: Channel,
    pub mac: MacParams,
    pub queue_capacity: usize,
    pub routing: ProtocolParams,
    pub flows: Vec<CbrFlowConfig>,
    pub seed: u64,
    pub data_ttl: u8,
    pub trace: bool,
}

pub struct Network {
    highway: HighwayConfig,
    nodes: Vec<NodeKinematics>,
    medium: Medium<NetPayload>,
    protocols: Vec<Protocol>,
    routing_rngs: Vec<RngStream>,
    flows: Vec<CbrFlowConfig>,
    flow_packets: Vec<u64>,
    buffers: HashMap<(NodeId, NodeId), VecDeque<DataPacket>>,
    buffer_limit: usize,
    data_ttl: u8,
    next_packet_id: u64,
    metrics: MetricsAccumulator,
    trace: Option<Vec<String>>,
    queue: EventQueue<NetEvent>,
    error: Option<NetError>,
}

impl Network {
    pub fn new(setup: NetworkSetup) -> Result<Self, NetError> {
        let n = setup.nodes.len();
        if n < 2 {
            return Err(NetError::Setup("need at least two nodes".into()));
        }
        setup.mac.validate().map_err(NetError::Setup)?;
        for f in &setup.flows {
            if f.src.index() >= n || f.dst.index() >= n {
                return Err(NetError::Setup(format!("flow {}->{} names a missing node", f.src, f.dst)));
            }
        }
        let master = RngStream::new(setup.seed, "net");
        let medium = Medium::new(
            n,
            setup.mac,
            setup.channel,
            setup.queue_capacity,
            RngStream::new(setup.seed, "mac.backoff"),
            RngStream::new(setup.seed, "channel.fading"),
        );
        let protocols = (0..n)
            .map(|i| Protocol::new(NodeId(i as u32), &setup.routing))
            .collect::<Result<Vec<_>, _>>()?;
        let routing_rngs = (0..n)
            .map(|i| master.substream(&format!("routing.{i}")))
            .collect();
        let flow_packets = setup
            .flows
            .iter()
            .map(|f| cbr_schedule(f).map(|s| s.len() as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let buffer_limit = match &setup.routing {
            ProtocolParams::Dymo(p) => p.buffer_size,
            _ => 0,
        };

        let mut net = Self {
            highway: setup.highway,
            nodes: setup.nodes,
            medium,
            protocols,
            routing_rngs,
            flows: setup.flows,
            flow_packets,
            buffers: HashMap::new(),
            buffer_limit,
            data_ttl: setup.data_ttl,
            next_packet_id: 0,
            metrics: MetricsAccumulator::new(),
            trace: setup.trace.then(Vec::new),
            queue: EventQueue::new(),
            error: None,
        };
        for (i, f) in net.flows.iter().enumerate() {
            if net.flow_packets[i] > 0 {
                net.queue
                    .schedule(f.start_at, Target::Node(f.src), NetEvent::Cbr { flow: i, k: 0 })?;
            }
        }
        let mut queue = std::mem::replace(&mut net.queue, EventQueue::new());
        for i in 0..n {
            let node = NodeId(i as u32);
            let actions = net.protocols[i].start(SimTime::ZERO, &mut net.routing_rngs[i]);
            net.apply_actions(&mut queue, node, actions);
        }
        net.queue = queue;
        if let Some(e) = net.error.take() {
            return Err(e);
        }
        Ok(net)
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn events_processed(&self) -> u64 {
        self.queue.processed()
    }

    pub fn trace_hash(&self) -> u64 {
        self.queue.trace_hash()
    }

    pub fn metrics(&self) -> &MetricsAccumulator {
        &self.metrics
    }

    pub fn medium(&self) -> &Medium<NetPayload> {
        &self.medium
    }

    pub fn protocol(&self, node: NodeId) -> &Protocol {
        &self.protocols[node.index()]
    }

    pub fn protocol_mut(&mut self, node: NodeId) -> &mut Protocol {
        &mut self.protocols[node.index()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn position(&self, node: NodeId, at: SimTime) -> Position {
        self.nodes[node.index()].position_after(at.secs(), &self.highway)
    }

    /// Trace lines collected so far (empty unless tracing was requested).
    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Routing tables of every node, one entry per line.
    pub fn dump_tables(&mut self) -> String {
        let now = self.now();
        let mut out = String::new();
        for (i, p) in self.protocols.iter_mut().enumerate() {
            let _ = writeln!(out, "# node {i}");
            for e in p.table(now) {
                let _ = writeln!(out, "{e}");
            }
        }
        out
    }

    /// Advances the simulation to `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<u64, NetError> {
        let mut queue = std::mem::replace(&mut self.queue, EventQueue::new());
        let result = queue.run_until(t_end, |q, ev| {
            if self.error.is_none() {
                self.dispatch(q, ev.fire_at, ev.payload);
            }
        });
        self.queue = queue;
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        Ok(result?)
    }

    fn fail(&mut self, e: impl Into<NetError>) {
        if self.error.is_none() {
            self.error = Some(e.into());
        }
    }

    fn schedule(&mut self, q: &mut EventQueue<NetEvent>, at: SimTime, target: Target, ev: NetEvent) {
        if let Err(e) = q.schedule(at.max(q.now()), target, ev) {
            self.fail(e);
        }
    }

    fn dispatch(&mut self, q: &mut EventQueue<NetEvent>, now: SimTime, ev: NetEvent) {
        match ev {
            NetEvent::Mac(m) => {
                let mut out = MacOutput::default();
                let highway = &self.highway;
                let nodes = &self.nodes;
                self.medium.handle(
                    m,
                    now,
                    |n| nodes[n.index()].position_after(now.secs(), highway),
                    &mut out,
                );
                self.absorb(q, now, out);
            }
            NetEvent::Cbr { flow, k } => self.cbr_send(q, now, flow, k),
            NetEvent::Routing { node, timer } => {
                let i = node.index();
                let actions = self.protocols[i].on_timer(timer, now, &mut self.routing_rngs[i]);
                self.apply_actions(q, node, actions);
            }
            NetEvent::DelayedBroadcast { node, msg } => {
                self.submit_control(q, now, node, Dest::Broadcast, msg);
            }
        }
    }

    fn absorb(&mut self, q: &mut EventQueue<NetEvent>, now: SimTime, out: MacOutput<NetPayload>) {
        for (at, t) in out.timers {
            self.schedule(q, at, Target::System, NetEvent::Mac(t));
        }
        for ind in out.indications {
            self.on_indication(q, now, ind);
        }
    }

    fn on_indication(
        &mut self,
        q: &mut EventQueue<NetEvent>,
        now: SimTime,
        ind: MacIndication<NetPayload>,
    ) {
        match ind {
            MacIndication::TxStarted {
                node,
                kind,
                dst,
                attempt,
                frame,
            } => {
                if let Some(Frame {
                    payload: NetPayload::Control(msg),
                    ..
                }) = &frame
                {
                    self.metrics.record_control_tx(msg.label());
                }
                if let Some(lines) = &mut self.trace {
                    lines.push(format!(
                        "{:.9} tx {} {} {} {}",
                        now.secs(),
                        node,
                        kind_name(kind),
                        dest_name(dst),
                        attempt
                    ));
                }
            }
            MacIndication::Received { node, from, frame } => {
                if let Some(lines) = &mut self.trace {
                    lines.push(format!(
                        "{:.9} rx {} {} {}",
                        now.secs(),
                        node,
                        kind_name(frame.kind),
                        from
                    ));
                }
                match frame.payload {
                    NetPayload::Control(msg) => {
                        let i = node.index();
                        let actions =
                            self.protocols[i].on_control(&msg, from, now, &mut self.routing_rngs[i]);
                        self.apply_actions(q, node, actions);
                    }
                    NetPayload::Data(pkt) => self.on_data(q, now, node, pkt),
                }
            }
            MacIndication::Sent { .. } => {}
            MacIndication::RetryLimitExceeded { node, frame } => {
                if let NetPayload::Data(_) = frame.payload {
                    self.metrics.drops_noroute += 1;
                }
                if let Dest::Node(nh) = frame.dst {
                    let actions = self.protocols[node.index()].on_link_failure(nh, now);
                    self.apply_actions(q, node, actions);
                    // Data still queued for the dead neighbor gets a fresh lookup.
                    let stranded = self.medium.purge_queue(node, |f| {
                        f.dst == Dest::Node(nh) && matches!(f.payload, NetPayload::Data(_))
                    });
                    for f in stranded {
                        if let NetPayload::Data(pkt) = f.payload {
                            let originated = pkt.src == node;
                            self.route_packet(q, now, node, pkt, originated);
                        }
                    }
                }
            }
        }
    }

    fn cbr_send(&mut self, q: &mut EventQueue<NetEvent>, now: SimTime, flow: usize, k: u64) {
        let f = &self.flows[flow];
        let pkt = DataPacket {
            id: self.next_packet_id,
            flow,
            src: f.src,
            dst: f.dst,
            bytes: f.packet_bytes,
            sent_at: now,
            ttl: self.data_ttl,
        };
        let next_at = f.start_at + (k + 1) as f64 * f.interval;
        let src = f.src;
        self.next_packet_id += 1;
        if k + 1 < self.flow_packets[flow] {
            self.schedule(q, next_at, Target::Node(src), NetEvent::Cbr { flow, k: k + 1 });
        }
        self.metrics.record_send(pkt.id, flow, pkt.bytes, now);
        self.route_packet(q, now, src, pkt, true);
    }

    fn on_data(&mut self, q: &mut EventQueue<NetEvent>, now: SimTime, node: NodeId, mut pkt: DataPacket) {
        if pkt.dst == node {
            if let Err(e) = self.metrics.record_delivery(pkt.id, pkt.bytes, now) {
                self.fail(e);
            }
            return;
        }
        pkt.ttl = pkt.ttl.saturating_sub(1);
        if pkt.ttl == 0 {
            self.metrics.drops_noroute += 1;
            return;
        }
        self.route_packet(q, now, node, pkt, false);
    }

    fn route_packet(
        &mut self,
        q: &mut EventQueue<NetEvent>,
        now: SimTime,
        node: NodeId,
        pkt: DataPacket,
        originated: bool,
    ) {
        let mut actions = Vec::new();
        let decision = self.protocols[node.index()].route_data(pkt.dst, originated, now, &mut actions);
        match decision {
            DataDecision::Forward(nh) => self.submit_data(q, now, node, nh, pkt),
            DataDecision::Hold => {
                let buf = self.buffers.entry((node, pkt.dst)).or_default();
                if buf.len() < self.buffer_limit {
                    buf.push_back(pkt);
                } else {
                    self.metrics.drops_noroute += 1;
                }
            }
            DataDecision::NoRoute => self.metrics.drops_noroute += 1,
        }
        self.apply_actions(q, node, actions);
    }

    fn submit_data(
        &mut self,
        q: &mut EventQueue<NetEvent>,
        now: SimTime,
        node: NodeId,
        next_hop: NodeId,
        pkt: DataPacket,
    ) {
        let frame = Frame {
            kind: FrameKind::Data,
            src: node,
            dst: Dest::Node(next_hop),
            payload_bytes: pkt.bytes,
            born_at: pkt.sent_at,
            payload: NetPayload::Data(pkt),
        };
        let mut out = MacOutput::default();
        if self.medium.submit(node, frame, now, &mut out) == EnqueueOutcome::Dropped {
            self.metrics.drops_queue += 1;
        }
        self.absorb(q, now, out);
    }

    fn submit_control(
        &mut self,
        q: &mut EventQueue<NetEvent>,
        now: SimTime,
        node: NodeId,
        dst: Dest,
        msg: ControlMessage,
    ) {
        if msg.origin == node {
            self.metrics.record_control_origination();
        }
        let frame = Frame {
            kind: FrameKind::RoutingControl,
            src: node,
            dst,
            payload_bytes: msg.size_bytes(),
            born_at: now,
            payload: NetPayload::Control(msg),
        };
        let mut out = MacOutput::default();
        self.medium.submit(node, frame, now, &mut out);
        self.absorb(q, now, out);
    }

    fn apply_actions(&mut self, q: &mut EventQueue<NetEvent>, node: NodeId, actions: Vec<RoutingAction>) {
        let now = q.now();
        for a in actions {
            match a {
                RoutingAction::Broadcast { msg, delay } => {
                    if delay > 0.0 {
                        self.schedule(
                            q,
                            now + delay,
                            Target::Node(node),
                            NetEvent::DelayedBroadcast { node, msg },
                        );
                    } else {
                        self.submit_control(q, now, node, Dest::Broadcast, msg);
                    }
                }
                RoutingAction::Unicast { next_hop, msg } => {
                    self.submit_control(q, now, node, Dest::Node(next_hop), msg);
                }
                RoutingAction::Timer { at, timer } => {
                    self.schedule(q, at, Target::Node(node), NetEvent::Routing { node, timer });
                }
                RoutingAction::RouteFound { dest } => {
                    let held = self.buffers.remove(&(node, dest)).unwrap_or_default();
                    for pkt in held {
                        self.route_packet(q, now, node, pkt, true);
                    }
                }
                RoutingAction::GaveUp { dest } => {
                    let held = self.buffers.remove(&(node, dest)).unwrap_or_default();
                    self.metrics.drops_noroute += held.len() as u64;
                }
            }
        }
    }
}

fn kind_name(kind: FrameKind) -> &'static str {
    match kind {
        FrameKind::Data => "data",
        FrameKind::RoutingControl => "control",
        FrameKind::Ack => "ack",
    }
}

fn dest_name(dst: Dest) -> String {
    match dst {
        Dest::Node(n) => n.to_string(),
        Dest::Broadcast => "*".into(),
    }
}
