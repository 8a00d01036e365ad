//! Simplified CSMA/CA.
//!
//! Each node has a two-lane drop-tail queue (routing control strictly ahead
//! of data), carrier sensing against the channel's CS threshold, binary
//! exponential backoff that freezes while the medium is busy, and a stop-and-
//! wait ACK for unicast frames. Broadcasts go out once and are never acked.
//!
//! The [`Medium`] owns every node's MAC state plus the set of frames on the
//! air. It is driven by [`MacEvent`]s that the caller schedules on its event
//! queue; every entry point returns timers to schedule and indications for
//! the layer above through a [`MacOutput`].

use std::collections::{HashMap, VecDeque};

use crate::mobility::{distance, Position};
use crate::phy::{reception_decision, Channel, Reception};
use crate::sim::{RngStream, SimTime};
use crate::{NodeId, Standard};

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub variant: Standard,
    /// Seconds.
    pub slot_time: f64,
    pub sifs: f64,
    pub difs: f64,
    /// Slots.
    pub cw_min: u32,
    pub cw_max: u32,
    /// PLCP preamble and header plus MAC header/FCS, seconds.
    pub preamble_plus_header_time: f64,
    /// SIFS + ACK airtime + one slot.
    pub ack_timeout: f64,
    /// Attempts per unicast frame before the link is declared broken.
    pub retry_limit: u32,
}

impl MacParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.cw_min > self.cw_max {
            return Err("cw_min must not exceed cw_max".into());
        }
        let durations = [
            self.slot_time,
            self.sifs,
            self.difs,
            self.preamble_plus_header_time,
            self.ack_timeout,
        ];
        if durations.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err("MAC durations must be positive".into());
        }
        if self.ack_timeout <= self.sifs + self.slot_time {
            return Err("ack_timeout must exceed sifs + slot_time".into());
        }
        if self.retry_limit == 0 {
            return Err("retry_limit must be at least 1".into());
        }
        Ok(())
    }

    /// Airtime of the ACK itself, recovered from the timeout.
    pub fn ack_airtime(&self) -> f64 {
        self.ack_timeout - self.sifs - self.slot_time
    }
}

/// 802.11 DSSS timing, or 802.11p 10 MHz OFDM timing.
pub fn mac_preset(kind: Standard) -> MacParams {
    match kind {
        Standard::Dot11 => MacParams {
            variant: kind,
            slot_time: 20e-6,
            sifs: 10e-6,
            difs: 50e-6,
            cw_min: 31,
            cw_max: 1023,
            // 192 us long PLCP + 28 B MAC header/FCS at 2 Mbit/s.
            preamble_plus_header_time: 304e-6,
            // SIFS + 304 us ACK at 1 Mbit/s + slot.
            ack_timeout: 334e-6,
            retry_limit: 7,
        },
        Standard::Dot11p => MacParams {
            variant: kind,
            slot_time: 13e-6,
            sifs: 32e-6,
            difs: 58e-6,
            cw_min: 15,
            cw_max: 1023,
            // 40 us preamble + SIGNAL, 28 B MAC header/FCS at 6 Mbit/s.
            preamble_plus_header_time: 77.333e-6,
            // SIFS + 64 us ACK + slot.
            ack_timeout: 109e-6,
            retry_limit: 7,
        },
    }
}

/// `preamble_plus_header_time + 8·payload_bytes / phy_rate`.
pub fn frame_airtime(mac: &MacParams, phy_rate: f64, payload_bytes: usize) -> f64 {
    mac.preamble_plus_header_time + (payload_bytes as f64 * 8.0) / phy_rate
}

/// Contention window after `attempt` failures: `min(cw_max, (cw_min+1)·2^attempt − 1)`.
pub fn contention_window(mac: &MacParams, attempt: u32) -> u32 {
    let grown = (u64::from(mac.cw_min) + 1)
        .checked_shl(attempt.min(32))
        .unwrap_or(u64::MAX)
        .saturating_sub(1);
    grown.min(u64::from(mac.cw_max)) as u32
}

/// Uniform slot count in `[0, CW]`.
pub fn backoff_slots(mac: &MacParams, attempt: u32, rng: &mut RngStream) -> u32 {
    rng.int_inclusive(contention_window(mac, attempt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    RoutingControl,
    Ack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dest {
    Node(NodeId),
    Broadcast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame<P> {
    pub kind: FrameKind,
    pub src: NodeId,
    pub dst: Dest,
    pub payload_bytes: usize,
    pub born_at: SimTime,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped,
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 50;

/// Drop-tail queue with strict priority for routing control.
#[derive(Debug, Clone)]
pub struct TxQueue<P> {
    capacity: usize,
    control_lane: VecDeque<Frame<P>>,
    data_lane: VecDeque<Frame<P>>,
    pub offered: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub dequeued: u64,
}

impl<P> TxQueue<P> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            control_lane: VecDeque::new(),
            data_lane: VecDeque::new(),
            offered: 0,
            accepted: 0,
            dropped: 0,
            dequeued: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.control_lane.len() + self.data_lane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn control_len(&self) -> usize {
        self.control_lane.len()
    }

    pub fn enqueue(&mut self, frame: Frame<P>) -> EnqueueOutcome {
        self.offered += 1;
        if self.len() >= self.capacity {
            self.dropped += 1;
            return EnqueueOutcome::Dropped;
        }
        self.accepted += 1;
        match frame.kind {
            FrameKind::Data => self.data_lane.push_back(frame),
            FrameKind::RoutingControl | FrameKind::Ack => self.control_lane.push_back(frame),
        }
        EnqueueOutcome::Accepted
    }

    pub fn dequeue(&mut self) -> Option<Frame<P>> {
        let f = self
            .control_lane
            .pop_front()
            .or_else(|| self.data_lane.pop_front())?;
        self.dequeued += 1;
        Some(f)
    }

    /// Removes queued frames matching `pred`, returning them in queue order.
    pub fn drain_where<F: FnMut(&Frame<P>) -> bool>(&mut self, mut pred: F) -> Vec<Frame<P>> {
        let mut out = Vec::new();
        for lane in [&mut self.control_lane, &mut self.data_lane] {
            let mut keep = VecDeque::with_capacity(lane.len());
            for f in lane.drain(..) {
                if pred(&f) {
                    out.push(f);
                } else {
                    keep.push_back(f);
                }
            }
            *lane = keep;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacEvent {
    /// Re-check the medium after it was sensed busy.
    Access { node: NodeId, gen: u64 },
    /// DIFS plus backoff elapsed without interruption.
    TxStart { node: NodeId, gen: u64 },
    TxEnd { tx: u64 },
    AckDone { node: NodeId, gen: u64, success: bool },
}

impl MacEvent {
    pub fn node(&self) -> Option<NodeId> {
        match *self {
            MacEvent::Access { node, .. }
            | MacEvent::TxStart { node, .. }
            | MacEvent::AckDone { node, .. } => Some(node),
            MacEvent::TxEnd { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MacIndication<P> {
    /// A frame left `node`'s antenna. `frame` is only filled in on the
    /// first attempt.
    TxStarted {
        node: NodeId,
        kind: FrameKind,
        dst: Dest,
        attempt: u32,
        frame: Option<Frame<P>>,
    },
    /// A frame addressed to `node` (or broadcast) decoded cleanly.
    Received { node: NodeId, from: NodeId, frame: Frame<P> },
    /// Broadcast finished, or unicast acknowledged.
    Sent { node: NodeId, frame: Frame<P> },
    /// `retry_limit` consecutive ACK timeouts for a unicast frame.
    RetryLimitExceeded { node: NodeId, frame: Frame<P> },
}

#[derive(Debug)]
pub struct MacOutput<P> {
    pub timers: Vec<(SimTime, MacEvent)>,
    pub indications: Vec<MacIndication<P>>,
}

impl<P> Default for MacOutput<P> {
    fn default() -> Self {
        Self {
            timers: Vec::new(),
            indications: Vec::new(),
        }
    }
}

impl<P> MacOutput<P> {
    pub fn clear(&mut self) {
        self.timers.clear();
        self.indications.clear();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacCounters {
    /// Frames that left the antenna, counting every retry.
    pub tx_attempts: u64,
    /// Frames completed (broadcast sent, unicast acknowledged).
    pub tx_frames: u64,
    pub rx_frames: u64,
    pub collisions: u64,
    pub retries: u64,
    pub link_failures: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MacState {
    Idle,
    Contending,
    Transmitting,
    AwaitingAck,
}

#[derive(Debug, Clone)]
struct Incoming {
    tx: u64,
    power: f64,
    end: SimTime,
    corrupted: bool,
}

#[derive(Debug)]
struct NodeMac<P> {
    queue: TxQueue<P>,
    current: Option<Frame<P>>,
    state: MacState,
    failures: u32,
    backoff: Option<u32>,
    countdown_from: SimTime,
    /// Pending transmit instant while a countdown is running.
    tx_at: Option<SimTime>,
    gen: u64,
    busy_until: SimTime,
    tx_until: SimTime,
    incoming: Vec<Incoming>,
    counters: MacCounters,
}

impl<P> NodeMac<P> {
    fn new(capacity: usize) -> Self {
        Self {
            queue: TxQueue::new(capacity),
            current: None,
            state: MacState::Idle,
            failures: 0,
            backoff: None,
            countdown_from: SimTime::ZERO,
            tx_at: None,
            gen: 0,
            busy_until: SimTime::ZERO,
            tx_until: SimTime::ZERO,
            incoming: Vec::new(),
            counters: MacCounters::default(),
        }
    }
}

#[derive(Debug)]
struct Transmission<P> {
    sender: NodeId,
    frame: Frame<P>,
    receivers: Vec<(NodeId, f64)>,
}

/// Shared wireless medium plus per-node CSMA/CA state.
#[derive(Debug)]
pub struct Medium<P> {
    params: MacParams,
    channel: Channel,
    nodes: Vec<NodeMac<P>>,
    on_air: HashMap<u64, Transmission<P>>,
    next_tx: u64,
    backoff_rng: RngStream,
    fading_rng: RngStream,
}

impl<P: Clone> Medium<P> {
    pub fn new(
        n_nodes: usize,
        params: MacParams,
        channel: Channel,
        queue_capacity: usize,
        backoff_rng: RngStream,
        fading_rng: RngStream,
    ) -> Self {
        Self {
            params,
            channel,
            nodes: (0..n_nodes).map(|_| NodeMac::new(queue_capacity)).collect(),
            on_air: HashMap::new(),
            next_tx: 0,
            backoff_rng,
            fading_rng,
        }
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn counters(&self, node: NodeId) -> MacCounters {
        self.nodes[node.index()].counters
    }

    pub fn queue(&self, node: NodeId) -> &TxQueue<P> {
        &self.nodes[node.index()].queue
    }

    pub fn total_counters(&self) -> MacCounters {
        self.nodes.iter().fold(MacCounters::default(), |mut acc, n| {
            let c = n.counters;
            acc.tx_attempts += c.tx_attempts;
            acc.tx_frames += c.tx_frames;
            acc.rx_frames += c.rx_frames;
            acc.collisions += c.collisions;
            acc.retries += c.retries;
            acc.link_failures += c.link_failures;
            acc
        })
    }

    /// Airtime of a frame with `payload_bytes` at the channel's data rate.
    pub fn airtime(&self, payload_bytes: usize) -> f64 {
        frame_airtime(&self.params, self.channel.phy.data_rate, payload_bytes)
    }

    /// Hands a frame to `node`'s queue; starts contention if the MAC is idle.
    pub fn submit(
        &mut self,
        node: NodeId,
        frame: Frame<P>,
        now: SimTime,
        out: &mut MacOutput<P>,
    ) -> EnqueueOutcome {
        let outcome = self.nodes[node.index()].queue.enqueue(frame);
        if outcome == EnqueueOutcome::Accepted {
            self.start_next(node, now, out);
        }
        outcome
    }

    /// Removes queued (not in-flight) frames of `node` matching `pred`.
    pub fn purge_queue<F: FnMut(&Frame<P>) -> bool>(&mut self, node: NodeId, pred: F) -> Vec<Frame<P>> {
        self.nodes[node.index()].queue.drain_where(pred)
    }

    pub fn handle<F>(&mut self, ev: MacEvent, now: SimTime, position: F, out: &mut MacOutput<P>)
    where
        F: Fn(NodeId) -> Position,
    {
        match ev {
            MacEvent::Access { node, gen } => {
                let n = &self.nodes[node.index()];
                if n.gen == gen && n.state == MacState::Contending {
                    self.try_access(node, now, out);
                }
            }
            MacEvent::TxStart { node, gen } => {
                let n = &self.nodes[node.index()];
                if n.gen == gen && n.state == MacState::Contending {
                    self.begin_tx(node, now, &position, out);
                }
            }
            MacEvent::TxEnd { tx } => self.end_tx(tx, now, out),
            MacEvent::AckDone { node, gen, success } => {
                let n = &self.nodes[node.index()];
                if n.gen == gen && n.state == MacState::AwaitingAck {
                    self.finish_unicast(node, success, now, out);
                }
            }
        }
    }

    fn start_next(&mut self, node: NodeId, now: SimTime, out: &mut MacOutput<P>) {
        let n = &mut self.nodes[node.index()];
        if n.state != MacState::Idle {
            return;
        }
        let Some(frame) = n.queue.dequeue() else {
            return;
        };
        n.current = Some(frame);
        n.failures = 0;
        n.backoff = None;
        n.state = MacState::Contending;
        self.try_access(node, now, out);
    }

    fn try_access(&mut self, node: NodeId, now: SimTime, out: &mut MacOutput<P>) {
        let slot = self.params.slot_time;
        let difs = self.params.difs;
        let n = &mut self.nodes[node.index()];
        n.gen += 1;
        n.tx_at = None;
        if n.busy_until > now {
            out.timers.push((n.busy_until, MacEvent::Access { node, gen: n.gen }));
            return;
        }
        let slots = match n.backoff {
            Some(b) => b,
            None => {
                let b = backoff_slots(&self.params, n.failures, &mut self.backoff_rng);
                n.backoff = Some(b);
                b
            }
        };
        let at = now + (difs + f64::from(slots) * slot);
        n.countdown_from = now;
        n.tx_at = Some(at);
        out.timers.push((at, MacEvent::TxStart { node, gen: n.gen }));
    }

    /// Medium at `node` turned busy until `until`.
    fn sense_busy(&mut self, node: NodeId, now: SimTime, until: SimTime, out: &mut MacOutput<P>) {
        let slot = self.params.slot_time;
        let difs = self.params.difs;
        let n = &mut self.nodes[node.index()];
        n.busy_until = n.busy_until.max(until);
        let Some(tx_at) = n.tx_at else {
            return;
        };
        // Inside the last slot the carrier cannot be assessed in time.
        if tx_at - now < slot {
            return;
        }
        let elapsed = now - n.countdown_from - difs;
        let consumed = if elapsed > 0.0 { (elapsed / slot).floor() as u32 } else { 0 };
        n.backoff = n.backoff.map(|b| b.saturating_sub(consumed));
        n.gen += 1;
        n.tx_at = None;
        out.timers.push((n.busy_until, MacEvent::Access { node, gen: n.gen }));
    }

    fn begin_tx<F>(&mut self, node: NodeId, now: SimTime, position: &F, out: &mut MacOutput<P>)
    where
        F: Fn(NodeId) -> Position,
    {
        let rx_threshold = self.channel.phy.rx_threshold;
        let cs_threshold = self.channel.phy.cs_threshold;
        let nav_tail = self.params.sifs + self.params.ack_airtime();

        let (frame, attempt) = {
            let n = &mut self.nodes[node.index()];
            let frame = n.current.clone().expect("contending MAC holds a frame");
            n.state = MacState::Transmitting;
            n.tx_at = None;
            n.backoff = None;
            n.gen += 1;
            (frame, n.failures)
        };
        let end = now + self.airtime(frame.payload_bytes);
        {
            let n = &mut self.nodes[node.index()];
            n.tx_until = end;
            n.counters.tx_attempts += 1;
            for inc in n.incoming.iter_mut() {
                inc.corrupted = true;
            }
        }
        let tx = self.next_tx;
        self.next_tx += 1;
        out.indications.push(MacIndication::TxStarted {
            node,
            kind: frame.kind,
            dst: frame.dst,
            attempt,
            frame: (attempt == 0).then(|| frame.clone()),
        });

        let here = position(node);
        let unicast = matches!(frame.dst, Dest::Node(_));
        let mut receivers = Vec::new();
        for j in 0..self.nodes.len() {
            let other = NodeId(j as u32);
            if other == node {
                continue;
            }
            let d = distance(here, position(other));
            let Ok(Some(power)) = self.channel.sample_link(d, &mut self.fading_rng) else {
                continue;
            };
            if power < cs_threshold {
                continue;
            }
            receivers.push((other, power));
            let rx = &mut self.nodes[j];
            let mut corrupted = rx.tx_until > now;
            for inc in rx.incoming.iter_mut().filter(|i| i.end > now) {
                if power >= rx_threshold {
                    inc.corrupted = true;
                }
                if inc.power >= rx_threshold {
                    corrupted = true;
                }
            }
            rx.incoming.push(Incoming {
                tx,
                power,
                end,
                corrupted,
            });
            let busy = if unicast && power >= rx_threshold {
                end + nav_tail
            } else {
                end
            };
            self.sense_busy(other, now, busy, out);
        }
        self.on_air.insert(
            tx,
            Transmission {
                sender: node,
                frame,
                receivers,
            },
        );
        out.timers.push((end, MacEvent::TxEnd { tx }));
    }

    fn end_tx(&mut self, tx: u64, now: SimTime, out: &mut MacOutput<P>) {
        let Some(t) = self.on_air.remove(&tx) else {
            return;
        };
        let mut dst_ok = false;
        for &(j, power) in &t.receivers {
            let rx = &mut self.nodes[j.index()];
            let Some(pos) = rx.incoming.iter().position(|i| i.tx == tx) else {
                continue;
            };
            let inc = rx.incoming.swap_remove(pos);
            match reception_decision(power, &self.channel.phy, inc.corrupted) {
                Reception::Received => {
                    let addressed = match t.frame.dst {
                        Dest::Broadcast => true,
                        Dest::Node(d) => d == j,
                    };
                    if addressed {
                        dst_ok |= t.frame.dst == Dest::Node(j);
                        rx.counters.rx_frames += 1;
                        out.indications.push(MacIndication::Received {
                            node: j,
                            from: t.sender,
                            frame: t.frame.clone(),
                        });
                    }
                }
                Reception::Collided => rx.counters.collisions += 1,
                Reception::CarrierOnly | Reception::Undetected => {}
            }
        }

        let sender = t.sender;
        let n = &mut self.nodes[sender.index()];
        match t.frame.dst {
            Dest::Broadcast => {
                n.state = MacState::Idle;
                n.counters.tx_frames += 1;
                if let Some(frame) = n.current.take() {
                    out.indications.push(MacIndication::Sent { node: sender, frame });
                }
                self.start_next(sender, now, out);
            }
            Dest::Node(_) => {
                n.state = MacState::AwaitingAck;
                n.gen += 1;
                let at = if dst_ok {
                    now + (self.params.sifs + self.params.ack_airtime())
                } else {
                    now + self.params.ack_timeout
                };
                out.timers.push((
                    at,
                    MacEvent::AckDone {
                        node: sender,
                        gen: n.gen,
                        success: dst_ok,
                    },
                ));
            }
        }
    }

    fn finish_unicast(&mut self, node: NodeId, success: bool, now: SimTime, out: &mut MacOutput<P>) {
        let retry_limit = self.params.retry_limit;
        let n = &mut self.nodes[node.index()];
        if success {
            n.state = MacState::Idle;
            n.counters.tx_frames += 1;
            if let Some(frame) = n.current.take() {
                out.indications.push(MacIndication::Sent { node, frame });
            }
            self.start_next(node, now, out);
            return;
        }
        n.failures += 1;
        if n.failures >= retry_limit {
            n.state = MacState::Idle;
            n.counters.link_failures += 1;
            if let Some(frame) = n.current.take() {
                out.indications
                    .push(MacIndication::RetryLimitExceeded { node, frame });
            }
            self.start_next(node, now, out);
        } else {
            n.counters.retries += 1;
            n.backoff = None;
            n.state = MacState::Contending;
            self.try_access(node, now, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{phy_preset, NakagamiParams};
    use crate::sim::{EventQueue, Target};

    fn frame(kind: FrameKind, src: u32, dst: Dest) -> Frame<u32> {
        Frame {
            kind,
            src: NodeId(src),
            dst,
            payload_bytes: 64,
            born_at: SimTime::ZERO,
            payload: 0,
        }
    }

    #[test]
    fn queue_priority_and_drop_tail() {
        let mut q = TxQueue::new(DEFAULT_QUEUE_CAPACITY);
        assert_eq!(
            q.enqueue(frame(FrameKind::Data, 0, Dest::Broadcast)),
            EnqueueOutcome::Accepted
        );
        q.enqueue(frame(FrameKind::RoutingControl, 0, Dest::Broadcast));
        assert_eq!(q.dequeue().unwrap().kind, FrameKind::RoutingControl);
        assert_eq!(q.dequeue().unwrap().kind, FrameKind::Data);
        for _ in 0..50 {
            q.enqueue(frame(FrameKind::Data, 0, Dest::Broadcast));
        }
        assert_eq!(
            q.enqueue(frame(FrameKind::RoutingControl, 0, Dest::Broadcast)),
            EnqueueOutcome::Dropped
        );
        assert_eq!(q.offered, 53);
        assert_eq!(q.accepted + q.dropped, q.offered);
    }

    #[test]
    fn airtime_examples() {
        let mac = mac_preset(Standard::Dot11);
        let t = frame_airtime(&mac, 2e6, 512);
        assert!((t - mac.preamble_plus_header_time - 2.048e-3).abs() < 1e-15);
        let t6 = frame_airtime(&mac, 6e6, 512) - mac.preamble_plus_header_time;
        assert!((t6 - 0.682_666_666e-3).abs() < 1e-9);
        let one = frame_airtime(&mac, 2e6, 300) - mac.preamble_plus_header_time;
        let two = frame_airtime(&mac, 2e6, 600) - mac.preamble_plus_header_time;
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn contention_window_growth_and_cap() {
        let mac = mac_preset(Standard::Dot11);
        assert_eq!(contention_window(&mac, 0), 31);
        assert_eq!(contention_window(&mac, 1), 63);
        assert_eq!(contention_window(&mac, 5), 1023);
        assert_eq!(contention_window(&mac, 40), 1023);
        let mut rng = RngStream::new(1, "mac.backoff");
        for _ in 0..1000 {
            assert!(backoff_slots(&mac, 0, &mut rng) <= 31);
        }
    }

    #[test]
    fn backoff_mean_is_half_window() {
        let mac = mac_preset(Standard::Dot11);
        let mut rng = RngStream::new(5, "mac.backoff");
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| u64::from(backoff_slots(&mac, 0, &mut rng))).sum();
        let mean = sum as f64 / n as f64;
        let want = f64::from(mac.cw_min) / 2.0;
        assert!((mean - want).abs() / want < 0.02, "mean {mean}");
    }

    #[test]
    fn presets() {
        let a = mac_preset(Standard::Dot11);
        assert_eq!(a.slot_time, 20e-6);
        assert_eq!(a.sifs, 10e-6);
        assert_eq!(a.cw_min, 31);
        let p = mac_preset(Standard::Dot11p);
        assert_eq!(p.slot_time, 13e-6);
        assert_eq!(p.sifs, 32e-6);
        assert_eq!(p.cw_min, 15);
        a.validate().unwrap();
        p.validate().unwrap();
    }

    /// Runs a medium to quiescence with static positions.
    fn drive(
        medium: &mut Medium<u32>,
        positions: &[Position],
        submits: Vec<(f64, u32, Frame<u32>)>,
    ) -> Vec<MacIndication<u32>> {
        #[derive(Clone)]
        enum Ev {
            Submit(u32, Frame<u32>),
            Mac(MacEvent),
        }
        let mut q = EventQueue::new();
        for (t, node, f) in submits {
            q.schedule(SimTime::from_secs(t), Target::System, Ev::Submit(node, f))
                .unwrap();
        }
        let mut seen = Vec::new();
        let mut out = MacOutput::default();
        q.run_until(SimTime::from_secs(10.0), |q, ev| {
            out.clear();
            let now = ev.fire_at;
            match ev.payload {
                Ev::Submit(node, f) => {
                    medium.submit(NodeId(node), f, now, &mut out);
                }
                Ev::Mac(m) => medium.handle(m, now, |n| positions[n.index()], &mut out),
            }
            for (at, t) in out.timers.drain(..) {
                q.schedule(at, Target::System, Ev::Mac(t)).unwrap();
            }
            seen.append(&mut out.indications);
        })
        .unwrap();
        seen
    }

    fn medium(n: usize, phy_tweak: impl FnOnce(&mut crate::phy::PhyParams)) -> Medium<u32> {
        let mut phy = phy_preset(Standard::Dot11);
        phy_tweak(&mut phy);
        let naka = NakagamiParams::for_carrier(phy.carrier_freq);
        let mut ch = Channel::new(phy, naka).unwrap();
        ch.fading = false;
        Medium::new(
            n,
            mac_preset(Standard::Dot11),
            ch,
            DEFAULT_QUEUE_CAPACITY,
            RngStream::new(1, "mac.backoff"),
            RngStream::new(1, "channel"),
        )
    }

    #[test]
    fn close_pair_receives() {
        let mut m = medium(2, |_| {});
        let pos = [Position::new(0.0, 0.0), Position::new(10.0, 0.0)];
        let ind = drive(&mut m, &pos, vec![(0.0, 0, frame(FrameKind::Data, 0, Dest::Node(NodeId(1))))]);
        assert!(ind.iter().any(|i| matches!(i, MacIndication::Received { node: NodeId(1), .. })));
        assert!(ind.iter().any(|i| matches!(i, MacIndication::Sent { node: NodeId(0), .. })));
    }

    #[test]
    fn hidden_senders_collide_at_middle_receiver() {
        // Senders 500 m apart cannot sense each other; the receiver in the
        // middle decodes both individually.
        let mut m = medium(3, |_| {});
        let pos = [
            Position::new(0.0, 0.0),
            Position::new(250.0, 0.0),
            Position::new(500.0, 0.0),
        ];
        let mk = |src| Frame { payload_bytes: 1500, ..frame(FrameKind::Data, src, Dest::Broadcast) };
        let ind = drive(&mut m, &pos, vec![(0.0, 0, mk(0)), (0.0, 2, mk(2))]);
        assert!(!ind.iter().any(|i| matches!(i, MacIndication::Received { node: NodeId(1), .. })));
        assert!(m.counters(NodeId(1)).collisions >= 2);
    }

    #[test]
    fn nearby_senders_defer_instead_of_colliding() {
        let mut m = medium(3, |_| {});
        let pos = [
            Position::new(0.0, 0.0),
            Position::new(20.0, 0.0),
            Position::new(40.0, 0.0),
        ];
        let mk = |src| Frame { payload_bytes: 1500, ..frame(FrameKind::Data, src, Dest::Broadcast) };
        let ind = drive(&mut m, &pos, vec![(0.0, 0, mk(0)), (0.0, 2, mk(2))]);
        let got = ind
            .iter()
            .filter(|i| matches!(i, MacIndication::Received { node: NodeId(1), .. }))
            .count();
        assert_eq!(got, 2);
    }

    #[test]
    fn unicast_out_of_range_exhausts_retries() {
        let mut m = medium(2, |_| {});
        let pos = [Position::new(0.0, 0.0), Position::new(5000.0, 0.0)];
        let ind = drive(&mut m, &pos, vec![(0.0, 0, frame(FrameKind::Data, 0, Dest::Node(NodeId(1))))]);
        let attempts = ind
            .iter()
            .filter(|i| matches!(i, MacIndication::TxStarted { .. }))
            .count();
        assert_eq!(attempts as u32, m.params().retry_limit);
        assert!(ind
            .iter()
            .any(|i| matches!(i, MacIndication::RetryLimitExceeded { node: NodeId(0), .. })));
        assert_eq!(m.counters(NodeId(0)).link_failures, 1);
    }

    #[test]
    fn control_leaves_before_data() {
        let mut m = medium(2, |_| {});
        let pos = [Position::new(0.0, 0.0), Position::new(10.0, 0.0)];
        let ind = drive(
            &mut m,
            &pos,
            vec![
                (0.0, 0, frame(FrameKind::Data, 0, Dest::Broadcast)),
                (0.0, 0, frame(FrameKind::Data, 0, Dest::Broadcast)),
                (0.0, 0, frame(FrameKind::RoutingControl, 0, Dest::Broadcast)),
            ],
        );
        let kinds: Vec<_> = ind
            .iter()
            .filter_map(|i| match i {
                MacIndication::TxStarted { kind, .. } => Some(*kind),
                _ => None,
            })
            .collect();
        // The first data frame was already in contention when the others arrived.
        assert_eq!(kinds, vec![FrameKind::Data, FrameKind::RoutingControl, FrameKind::Data]);
    }
}
