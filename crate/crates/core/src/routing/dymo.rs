//! Reactive on-demand routing: RREQ floods answered by unicast RREPs,
//! RERR on link breaks. Hop-by-hop; no hellos.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{
    seq_newer, ControlKind, ControlMessage, DataDecision, RouteEntry, RoutingAction,
    RoutingError, RoutingTimer,
};
use crate::sim::{Dist, RngStream, SimTime};
use crate::NodeId;

/// Seconds a (originator, seq) pair is remembered for duplicate suppression.
const SEEN_HOLD: f64 = 10.0;
/// Upper bound of the random delay before rebroadcasting an RREQ or RERR.
const FLOOD_JITTER: f64 = 0.01;
/// Window over which the RREQ rate limit is enforced.
const RATE_WINDOW: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DymoParams {
    pub route_timeout: f64,
    pub rreq_wait_time: f64,
    pub rreq_tries: u32,
    /// RREQ originations per second.
    pub rreq_rate_limit: f64,
    /// Data packets held per destination while a discovery runs.
    pub buffer_size: usize,
    pub hop_limit: u8,
}

impl Default for DymoParams {
    fn default() -> Self {
        Self {
            route_timeout: 5.0,
            rreq_wait_time: 2.0,
            rreq_tries: 3,
            rreq_rate_limit: 10.0,
            buffer_size: 10,
            hop_limit: 10,
        }
    }
}

impl DymoParams {
    pub fn validate(&self) -> Result<(), RoutingError> {
        let all = [self.route_timeout, self.rreq_wait_time, self.rreq_rate_limit];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(RoutingError::InvalidParams("DYMO timings must be positive".into()));
        }
        if self.rreq_rate_limit < 1.0 {
            return Err(RoutingError::InvalidParams("rreq_rate_limit must be at least 1/s".into()));
        }
        if self.rreq_tries == 0 || self.hop_limit == 0 {
            return Err(RoutingError::InvalidParams(
                "rreq_tries and hop_limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteRequest {
    UseEntry(NodeId),
    RreqIssued,
    /// Rate limit reached; a retry is scheduled for when the window opens.
    RreqSuppressed,
    /// A discovery for this destination is already running.
    AwaitingReply,
    GaveUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RreqVerdict {
    ForwardRreq,
    AnswerRrep,
    Drop,
}

#[derive(Debug, Clone)]
struct Route {
    next_hop: NodeId,
    hop_count: u32,
    seq: u16,
    installed_at: SimTime,
    expires_at: SimTime,
    valid: bool,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    tries: u32,
    gen: u64,
}

#[derive(Debug, Clone)]
pub struct Dymo {
    me: NodeId,
    params: DymoParams,
    own_seq: u16,
    table: BTreeMap<NodeId, Route>,
    seen: HashMap<(NodeId, u16), SimTime>,
    pending: BTreeMap<NodeId, Pending>,
    recent_rreqs: VecDeque<SimTime>,
    originations: Vec<SimTime>,
    last_rerr: HashMap<NodeId, SimTime>,
    next_gen: u64,
}

impl Dymo {
    pub fn new(me: NodeId, params: DymoParams) -> Self {
        Self {
            me,
            params,
            own_seq: 0,
            table: BTreeMap::new(),
            seen: HashMap::new(),
            pending: BTreeMap::new(),
            recent_rreqs: VecDeque::new(),
            originations: Vec::new(),
            last_rerr: HashMap::new(),
            next_gen: 0,
        }
    }

    pub fn params(&self) -> &DymoParams {
        &self.params
    }

    /// Times at which this node originated an RREQ.
    pub fn rreq_originations(&self) -> &[SimTime] {
        &self.originations
    }

    pub fn lookup(&self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        if dest == self.me {
            return Some(self.me);
        }
        self.table
            .get(&dest)
            .filter(|r| r.valid && now <= r.expires_at)
            .map(|r| r.next_hop)
    }

    fn use_route(&mut self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        let nh = self.lookup(dest, now)?;
        if let Some(r) = self.table.get_mut(&dest) {
            r.expires_at = now + self.params.route_timeout;
        }
        Some(nh)
    }

    pub fn request_route(
        &mut self,
        dest: NodeId,
        now: SimTime,
        actions: &mut Vec<RoutingAction>,
    ) -> RouteRequest {
        if let Some(nh) = self.use_route(dest, now) {
            return RouteRequest::UseEntry(nh);
        }
        if self.pending.contains_key(&dest) {
            return RouteRequest::AwaitingReply;
        }
        self.next_gen += 1;
        self.pending.insert(
            dest,
            Pending {
                tries: 0,
                gen: self.next_gen,
            },
        );
        self.originate(dest, now, actions)
    }

    fn originate(
        &mut self,
        dest: NodeId,
        now: SimTime,
        actions: &mut Vec<RoutingAction>,
    ) -> RouteRequest {
        let Some(p) = self.pending.get_mut(&dest) else {
            return RouteRequest::GaveUp;
        };
        let gen = p.gen;
        while self
            .recent_rreqs
            .front()
            .is_some_and(|&t| t + RATE_WINDOW <= now)
        {
            self.recent_rreqs.pop_front();
        }
        if self.recent_rreqs.len() as f64 + 1.0 > self.params.rreq_rate_limit {
            // Expiry uses the same sum, so the window is open again at `reopen`
            // even when `reopen - t` rounds below RATE_WINDOW.
            let reopen = self.recent_rreqs[0] + RATE_WINDOW;
            actions.push(RoutingAction::Timer {
                at: reopen,
                timer: RoutingTimer::DymoRreqWait { dest, gen },
            });
            return RouteRequest::RreqSuppressed;
        }
        p.tries += 1;
        self.own_seq = self.own_seq.wrapping_add(1);
        self.recent_rreqs.push_back(now);
        self.originations.push(now);
        let target_seq = self.table.get(&dest).map(|r| r.seq);
        actions.push(RoutingAction::Broadcast {
            msg: ControlMessage {
                origin: self.me,
                emitted_at: now,
                kind: ControlKind::Rreq {
                    orig: self.me,
                    orig_seq: self.own_seq,
                    target: dest,
                    target_seq,
                    hop_count: 0,
                    hop_limit: self.params.hop_limit,
                },
            },
            delay: 0.0,
        });
        actions.push(RoutingAction::Timer {
            at: now + self.params.rreq_wait_time,
            timer: RoutingTimer::DymoRreqWait { dest, gen },
        });
        RouteRequest::RreqIssued
    }

    pub fn on_timer(&mut self, timer: RoutingTimer, now: SimTime) -> Vec<RoutingAction> {
        let mut actions = Vec::new();
        let RoutingTimer::DymoRreqWait { dest, gen } = timer else {
            return actions;
        };
        let Some(p) = self.pending.get(&dest).copied() else {
            return actions;
        };
        if p.gen != gen {
            return actions;
        }
        if self.lookup(dest, now).is_some() {
            self.pending.remove(&dest);
            actions.push(RoutingAction::RouteFound { dest });
        } else if p.tries >= self.params.rreq_tries {
            self.pending.remove(&dest);
            actions.push(RoutingAction::GaveUp { dest });
        } else {
            self.originate(dest, now, &mut actions);
        }
        actions
    }

    pub fn route_data(
        &mut self,
        dest: NodeId,
        originated: bool,
        now: SimTime,
        actions: &mut Vec<RoutingAction>,
    ) -> DataDecision {
        if originated {
            return match self.request_route(dest, now, actions) {
                RouteRequest::UseEntry(nh) => DataDecision::Forward(nh),
                RouteRequest::GaveUp => DataDecision::NoRoute,
                _ => DataDecision::Hold,
            };
        }
        if let Some(nh) = self.use_route(dest, now) {
            return DataDecision::Forward(nh);
        }
        let recently = self
            .last_rerr
            .get(&dest)
            .is_some_and(|&t| now < t + RATE_WINDOW);
        if !recently {
            self.last_rerr.insert(dest, now);
            let seq = self.table.get(&dest).map_or(0, |r| r.seq);
            actions.push(self.rerr(vec![(dest, seq)], now, 0.0));
        }
        DataDecision::NoRoute
    }

    fn rerr(&self, unreachable: Vec<(NodeId, u16)>, now: SimTime, delay: f64) -> RoutingAction {
        RoutingAction::Broadcast {
            msg: ControlMessage {
                origin: self.me,
                emitted_at: now,
                kind: ControlKind::Rerr { unreachable },
            },
            delay,
        }
    }

    /// Installs or refreshes a route if the information is fresher or
    /// shorter than what is held.
    fn update_route(&mut self, dest: NodeId, via: NodeId, hops: u32, seq: u16, now: SimTime) -> bool {
        if dest == self.me {
            return false;
        }
        let accept = match self.table.get(&dest) {
            None => true,
            Some(r) => {
                seq_newer(seq, r.seq)
                    || (seq == r.seq && (!r.valid || now > r.expires_at || hops < r.hop_count))
            }
        };
        if accept {
            self.table.insert(
                dest,
                Route {
                    next_hop: via,
                    hop_count: hops,
                    seq,
                    installed_at: now,
                    expires_at: now + self.params.route_timeout,
                    valid: true,
                },
            );
        }
        accept
    }

    pub fn on_control(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Vec<RoutingAction> {
        let mut actions = Vec::new();
        match &msg.kind {
            ControlKind::Rreq { .. } => {
                let delay = rng
                    .draw(Dist::Uniform { low: 0.0, high: FLOOD_JITTER })
                    .unwrap_or(0.0);
                self.process_rreq(msg, from, now, delay, &mut actions);
            }
            ControlKind::Rrep { .. } => self.process_rrep(msg, from, now, &mut actions),
            ControlKind::Rerr { unreachable } => {
                let delay = rng
                    .draw(Dist::Uniform { low: 0.0, high: FLOOD_JITTER })
                    .unwrap_or(0.0);
                self.process_rerr(unreachable, from, now, delay, &mut actions);
            }
            _ => {}
        }
        actions
    }

    pub fn process_rreq(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
        forward_delay: f64,
        actions: &mut Vec<RoutingAction>,
    ) -> RreqVerdict {
        let ControlKind::Rreq {
            orig,
            orig_seq,
            target,
            target_seq,
            hop_count,
            hop_limit,
        } = msg.kind
        else {
            return RreqVerdict::Drop;
        };
        if orig == self.me {
            return RreqVerdict::Drop;
        }
        self.seen.retain(|_, t| *t >= now);
        if self.seen.contains_key(&(orig, orig_seq)) {
            return RreqVerdict::Drop;
        }
        self.seen.insert((orig, orig_seq), now + SEEN_HOLD);
        self.update_route(orig, from, u32::from(hop_count) + 1, orig_seq, now);

        if target == self.me {
            if let Some(ts) = target_seq {
                if seq_newer(ts, self.own_seq) {
                    self.own_seq = ts;
                }
            }
            self.own_seq = self.own_seq.wrapping_add(1);
            actions.push(RoutingAction::Unicast {
                next_hop: from,
                msg: ControlMessage {
                    origin: self.me,
                    emitted_at: now,
                    kind: ControlKind::Rrep {
                        orig: self.me,
                        orig_seq: self.own_seq,
                        target: orig,
                        hop_count: 0,
                        hop_limit: self.params.hop_limit,
                    },
                },
            });
            return RreqVerdict::AnswerRrep;
        }
        if hop_limit <= 1 {
            return RreqVerdict::Drop;
        }
        let mut fwd = msg.clone();
        if let ControlKind::Rreq {
            hop_count,
            hop_limit,
            ..
        } = &mut fwd.kind
        {
            *hop_count = hop_count.saturating_add(1);
            *hop_limit -= 1;
        }
        actions.push(RoutingAction::Broadcast {
            msg: fwd,
            delay: forward_delay,
        });
        RreqVerdict::ForwardRreq
    }

    fn process_rrep(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
        actions: &mut Vec<RoutingAction>,
    ) {
        let ControlKind::Rrep {
            orig,
            orig_seq,
            target,
            hop_count,
            hop_limit,
        } = msg.kind
        else {
            return;
        };
        if orig == self.me {
            return;
        }
        self.update_route(orig, from, u32::from(hop_count) + 1, orig_seq, now);
        if target == self.me {
            if self.pending.remove(&orig).is_some() {
                actions.push(RoutingAction::RouteFound { dest: orig });
            }
            return;
        }
        if hop_limit <= 1 {
            return;
        }
        let Some(next_hop) = self.use_route(target, now) else {
            return;
        };
        let mut fwd = msg.clone();
        if let ControlKind::Rrep {
            hop_count,
            hop_limit,
            ..
        } = &mut fwd.kind
        {
            *hop_count = hop_count.saturating_add(1);
            *hop_limit -= 1;
        }
        actions.push(RoutingAction::Unicast { next_hop, msg: fwd });
    }

    /// Invalidates routes that go through `from` and are not newer than the
    /// reported sequence number; rebroadcasts what was invalidated.
    pub fn process_rerr(
        &mut self,
        unreachable: &[(NodeId, u16)],
        from: NodeId,
        now: SimTime,
        delay: f64,
        actions: &mut Vec<RoutingAction>,
    ) -> usize {
        let mut lost = Vec::new();
        for &(dest, seq) in unreachable {
            if let Some(r) = self.table.get_mut(&dest) {
                if r.valid && r.next_hop == from && !seq_newer(r.seq, seq) {
                    r.valid = false;
                    lost.push((dest, r.seq));
                }
            }
        }
        let n = lost.len();
        if n > 0 {
            actions.push(self.rerr(lost, now, delay));
        }
        n
    }

    pub fn on_link_failure(&mut self, neighbor: NodeId, now: SimTime) -> Vec<RoutingAction> {
        let mut lost = Vec::new();
        for (&dest, r) in self.table.iter_mut() {
            if r.valid && r.next_hop == neighbor {
                r.valid = false;
                lost.push((dest, r.seq));
            }
        }
        let mut actions = Vec::new();
        if !lost.is_empty() {
            actions.push(self.rerr(lost, now, 0.0));
        }
        actions
    }

    pub fn table(&self) -> Vec<RouteEntry> {
        self.table
            .iter()
            .map(|(&dest, r)| RouteEntry {
                dest,
                next_hop: r.next_hop,
                metric: r.hop_count,
                seq_num: u32::from(r.seq),
                installed_at: r.installed_at,
                expires_at: Some(r.expires_at),
                valid: r.valid,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn rreq(orig: u32, seq: u16, target: u32, hop_limit: u8) -> ControlMessage {
        ControlMessage {
            origin: NodeId(orig),
            emitted_at: t(0.0),
            kind: ControlKind::Rreq {
                orig: NodeId(orig),
                orig_seq: seq,
                target: NodeId(target),
                target_seq: None,
                hop_count: 0,
                hop_limit,
            },
        }
    }

    fn rrep(orig: u32, seq: u16, target: u32) -> ControlMessage {
        ControlMessage {
            origin: NodeId(orig),
            emitted_at: t(0.0),
            kind: ControlKind::Rrep {
                orig: NodeId(orig),
                orig_seq: seq,
                target: NodeId(target),
                hop_count: 0,
                hop_limit: 10,
            },
        }
    }

    /// Node 0 with a route to `dest` via neighbor 1.
    fn with_route(dest: u32, seq: u16) -> Dymo {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        d.request_route(NodeId(dest), t(0.0), &mut a);
        d.process_rrep(&rrep(dest, seq, 0), NodeId(1), t(0.1), &mut a);
        d
    }

    #[test]
    fn expired_entry_triggers_new_request() {
        let mut d = with_route(5, 3);
        let mut a = Vec::new();
        assert_eq!(d.request_route(NodeId(5), t(1.0), &mut a), RouteRequest::UseEntry(NodeId(1)));
        // Last use at 1.0 extends validity to 6.0.
        assert_eq!(d.lookup(NodeId(5), t(6.5)), None);
        assert_eq!(d.request_route(NodeId(5), t(6.5), &mut a), RouteRequest::RreqIssued);
    }

    #[test]
    fn eleventh_request_in_one_second_is_suppressed() {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        for k in 1..=10 {
            let r = d.request_route(NodeId(k), t(0.05 * f64::from(k)), &mut a);
            assert_eq!(r, RouteRequest::RreqIssued);
        }
        assert_eq!(d.request_route(NodeId(11), t(0.9), &mut a), RouteRequest::RreqSuppressed);
        assert_eq!(d.request_route(NodeId(11), t(0.95), &mut a), RouteRequest::AwaitingReply);
    }

    #[test]
    fn suppressed_request_reopens_at_its_timer() {
        // 7.7 + 1.0 - 7.7 rounds below 1.0; the retry must still go out.
        let params = DymoParams {
            rreq_rate_limit: 1.0,
            ..DymoParams::default()
        };
        let mut d = Dymo::new(NodeId(0), params);
        let mut a = Vec::new();
        assert_eq!(d.request_route(NodeId(1), t(7.7), &mut a), RouteRequest::RreqIssued);
        a.clear();
        assert_eq!(d.request_route(NodeId(2), t(7.9), &mut a), RouteRequest::RreqSuppressed);
        let Some(RoutingAction::Timer { at, timer }) = a.pop() else {
            panic!("expected a reopen timer")
        };
        let retry = d.on_timer(timer, at);
        assert!(retry.iter().any(|x| matches!(x, RoutingAction::Broadcast { .. })));
    }

    #[test]
    fn gives_up_after_configured_tries() {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        d.request_route(NodeId(5), t(0.0), &mut a);
        let mut issued = 1;
        let mut now = 0.0;
        loop {
            let Some(RoutingAction::Timer { at, timer }) = a.pop() else {
                panic!("expected a wait timer")
            };
            now = at.secs().max(now);
            a = d.on_timer(timer, at);
            if a.iter().any(|x| matches!(x, RoutingAction::GaveUp { .. })) {
                break;
            }
            issued += a
                .iter()
                .filter(|x| matches!(x, RoutingAction::Broadcast { .. }))
                .count();
        }
        assert_eq!(issued, 3);
        assert_eq!(now, 6.0);
    }

    #[test]
    fn duplicate_rreq_dropped() {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        let m = rreq(7, 1, 9, 5);
        assert_eq!(d.process_rreq(&m, NodeId(3), t(0.0), 0.0, &mut a), RreqVerdict::ForwardRreq);
        assert_eq!(d.process_rreq(&m, NodeId(4), t(0.01), 0.0, &mut a), RreqVerdict::Drop);
        // The reverse route points at the first sender.
        assert_eq!(d.lookup(NodeId(7), t(0.02)), Some(NodeId(3)));
    }

    #[test]
    fn target_answers_with_rrep() {
        let mut d = Dymo::new(NodeId(9), DymoParams::default());
        let mut a = Vec::new();
        assert_eq!(
            d.process_rreq(&rreq(7, 1, 9, 5), NodeId(3), t(0.0), 0.0, &mut a),
            RreqVerdict::AnswerRrep
        );
        assert!(matches!(a[0], RoutingAction::Unicast { next_hop: NodeId(3), .. }));
    }

    #[test]
    fn hop_limit_one_stops_at_intermediate() {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        assert_eq!(d.process_rreq(&rreq(7, 1, 9, 1), NodeId(3), t(0.0), 0.0, &mut a), RreqVerdict::Drop);
        assert!(a.is_empty());
        assert_eq!(d.lookup(NodeId(7), t(0.0)), Some(NodeId(3)));
    }

    #[test]
    fn link_break_invalidates_and_sends_one_rerr() {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        for dest in [5, 6, 7] {
            d.process_rrep(&rrep(dest, 1, 0), NodeId(1), t(0.0), &mut a);
        }
        d.process_rrep(&rrep(8, 1, 0), NodeId(2), t(0.0), &mut a);
        let out = d.on_link_failure(NodeId(1), t(1.0));
        assert_eq!(out.len(), 1);
        let RoutingAction::Broadcast { msg, .. } = &out[0] else { panic!() };
        let ControlKind::Rerr { unreachable } = &msg.kind else { panic!() };
        assert_eq!(unreachable.len(), 3);
        assert_eq!(d.lookup(NodeId(5), t(1.0)), None);
        assert_eq!(d.lookup(NodeId(8), t(1.0)), Some(NodeId(2)));
    }

    #[test]
    fn rerr_sequence_guard_and_unknown_dest() {
        let mut d = with_route(5, 10);
        let mut a = Vec::new();
        assert_eq!(d.process_rerr(&[(NodeId(5), 8)], NodeId(1), t(0.5), 0.0, &mut a), 0);
        assert_eq!(d.lookup(NodeId(5), t(0.5)), Some(NodeId(1)));
        assert_eq!(d.process_rerr(&[(NodeId(42), 1)], NodeId(1), t(0.5), 0.0, &mut a), 0);
        assert!(a.is_empty());
        assert_eq!(d.process_rerr(&[(NodeId(5), 10)], NodeId(1), t(0.6), 0.0, &mut a), 1);
        assert_eq!(d.lookup(NodeId(5), t(0.6)), None);
    }

    #[test]
    fn rrep_completes_pending_discovery() {
        let mut d = Dymo::new(NodeId(0), DymoParams::default());
        let mut a = Vec::new();
        d.request_route(NodeId(5), t(0.0), &mut a);
        a.clear();
        d.process_rrep(&rrep(5, 1, 0), NodeId(1), t(0.2), &mut a);
        assert_eq!(a, vec![RoutingAction::RouteFound { dest: NodeId(5) }]);
    }
}
