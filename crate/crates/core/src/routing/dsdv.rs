//! Destination-sequenced distance vector routing.

use std::collections::BTreeMap;

use super::{
    ControlKind, ControlMessage, RouteEntry, RoutingAction, RoutingError, RoutingTimer,
};
use crate::sim::{Dist, RngStream, SimTime};
use crate::NodeId;

/// Metric advertised for a broken route.
pub const DSDV_INFINITY: u32 = u32::MAX;

/// Periodic intervals without hearing a neighbor before its routes break.
const NEIGHBOR_LOSS_PERIODS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DsdvParams {
    pub periodic_update_interval: f64,
    pub min_trigger_interval: f64,
    /// Weight of the running average in the settling-time estimate.
    pub settling_weight: f64,
    /// Periodic ticks closer than this to the last full dump send only the
    /// entries changed since then.
    pub full_dump_interval: f64,
}

impl Default for DsdvParams {
    fn default() -> Self {
        Self {
            periodic_update_interval: 15.0,
            min_trigger_interval: 1.0,
            settling_weight: 0.875,
            full_dump_interval: 15.0,
        }
    }
}

impl DsdvParams {
    pub fn validate(&self) -> Result<(), RoutingError> {
        let positive = [
            self.periodic_update_interval,
            self.min_trigger_interval,
            self.full_dump_interval,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(RoutingError::InvalidParams("DSDV intervals must be positive".into()));
        }
        if self.min_trigger_interval > self.periodic_update_interval {
            return Err(RoutingError::InvalidParams(
                "min_trigger_interval exceeds periodic_update_interval".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.settling_weight) {
            return Err(RoutingError::InvalidParams("settling_weight must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsdvAdvert {
    pub dest: NodeId,
    pub seq: u32,
    pub metric: u32,
}

#[derive(Debug, Clone)]
struct Entry {
    next_hop: NodeId,
    metric: u32,
    seq: u32,
    installed_at: SimTime,
    /// Metric or reachability changed since last advertised.
    changed: bool,
    advertise_after: SimTime,
    first_seq_at: SimTime,
    settle_avg: f64,
}

impl Entry {
    fn broken(&self) -> bool {
        self.metric == DSDV_INFINITY || self.seq % 2 == 1
    }
}

#[derive(Debug, Clone)]
pub struct Dsdv {
    me: NodeId,
    params: DsdvParams,
    own_seq: u32,
    table: BTreeMap<NodeId, Entry>,
    neighbors: BTreeMap<NodeId, SimTime>,
    last_trigger: Option<SimTime>,
    last_full: Option<SimTime>,
    trigger_gen: u64,
    trigger_pending: bool,
}

impl Dsdv {
    pub fn new(me: NodeId, params: DsdvParams) -> Self {
        Self {
            me,
            params,
            own_seq: 0,
            table: BTreeMap::new(),
            neighbors: BTreeMap::new(),
            last_trigger: None,
            last_full: None,
            trigger_gen: 0,
            trigger_pending: false,
        }
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn params(&self) -> &DsdvParams {
        &self.params
    }

    pub fn start(&mut self, now: SimTime, rng: &mut RngStream) -> Vec<RoutingAction> {
        let spread = self.params.periodic_update_interval.min(1.0);
        let jitter = rng
            .draw(Dist::Uniform { low: 0.0, high: spread })
            .unwrap_or(0.0);
        vec![RoutingAction::Timer {
            at: now + jitter,
            timer: RoutingTimer::DsdvPeriodic,
        }]
    }

    pub fn on_timer(&mut self, timer: RoutingTimer, now: SimTime) -> Vec<RoutingAction> {
        let mut actions = Vec::new();
        match timer {
            RoutingTimer::DsdvPeriodic => {
                let update = self.periodic_dump(now);
                actions.push(RoutingAction::Broadcast {
                    msg: update,
                    delay: 0.0,
                });
                actions.push(RoutingAction::Timer {
                    at: now + self.params.periodic_update_interval,
                    timer: RoutingTimer::DsdvPeriodic,
                });
            }
            RoutingTimer::DsdvTrigger { gen } if gen == self.trigger_gen && self.trigger_pending => {
                self.trigger_pending = false;
                self.emit_trigger(now, &mut actions);
            }
            _ => {}
        }
        actions
    }

    /// Bumps the own sequence number, ages out silent neighbors and builds
    /// the periodic advertisement.
    pub fn periodic_dump(&mut self, now: SimTime) -> ControlMessage {
        self.own_seq += 2;
        let limit = NEIGHBOR_LOSS_PERIODS * self.params.periodic_update_interval;
        let silent: Vec<NodeId> = self
            .neighbors
            .iter()
            .filter(|(_, &heard)| now - heard > limit)
            .map(|(&n, _)| n)
            .collect();
        for n in silent {
            self.neighbors.remove(&n);
            self.break_routes_via(n, now);
        }
        let full = self
            .last_full
            .is_none_or(|t| now - t >= self.params.full_dump_interval - 1e-9);
        if full {
            self.last_full = Some(now);
        }
        let adverts = self.collect_adverts(now, full);
        self.message(adverts, now)
    }

    fn message(&self, adverts: Vec<DsdvAdvert>, now: SimTime) -> ControlMessage {
        ControlMessage {
            origin: self.me,
            emitted_at: now,
            kind: ControlKind::DsdvUpdate(adverts),
        }
    }

    /// Self first, then either every entry or the settled changed ones.
    fn collect_adverts(&mut self, now: SimTime, full: bool) -> Vec<DsdvAdvert> {
        let mut adverts = vec![DsdvAdvert {
            dest: self.me,
            seq: self.own_seq,
            metric: 0,
        }];
        for (&dest, e) in self.table.iter_mut() {
            let settled = e.advertise_after <= now;
            if full || (e.changed && settled) {
                adverts.push(DsdvAdvert {
                    dest,
                    seq: e.seq,
                    metric: e.metric,
                });
                if settled {
                    e.changed = false;
                }
            }
        }
        adverts
    }

    fn emit_trigger(&mut self, now: SimTime, actions: &mut Vec<RoutingAction>) {
        let ready = self
            .table
            .values()
            .any(|e| e.changed && e.advertise_after <= now);
        if ready {
            let adverts = self.collect_adverts(now, false);
            actions.push(RoutingAction::Broadcast {
                msg: self.message(adverts, now),
                delay: 0.0,
            });
            self.last_trigger = Some(now);
        }
        if self.table.values().any(|e| e.changed) {
            self.request_trigger(now, actions);
        }
    }

    fn request_trigger(&mut self, now: SimTime, actions: &mut Vec<RoutingAction>) {
        if self.trigger_pending {
            return;
        }
        let Some(settle) = self
            .table
            .values()
            .filter(|e| e.changed)
            .map(|e| e.advertise_after)
            .min()
        else {
            return;
        };
        let rate_ok = self
            .last_trigger
            .map_or(now, |t| t + self.params.min_trigger_interval);
        let at = settle.max(rate_ok).max(now);
        if at <= now && self.last_trigger != Some(now) {
            self.emit_trigger(now, actions);
            return;
        }
        let at = if at <= now { now + self.params.min_trigger_interval } else { at };
        self.trigger_gen += 1;
        self.trigger_pending = true;
        actions.push(RoutingAction::Timer {
            at,
            timer: RoutingTimer::DsdvTrigger { gen: self.trigger_gen },
        });
    }

    pub fn on_control(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
    ) -> Vec<RoutingAction> {
        let ControlKind::DsdvUpdate(adverts) = &msg.kind else {
            return Vec::new();
        };
        let mut actions = Vec::new();
        if self.process_update(adverts, from, now) {
            self.request_trigger(now, &mut actions);
        }
        actions
    }

    /// Applies an update heard from neighbor `from`. Returns whether any
    /// change is significant enough to trigger an advertisement.
    pub fn process_update(&mut self, adverts: &[DsdvAdvert], from: NodeId, now: SimTime) -> bool {
        self.neighbors.insert(from, now);
        let w = self.params.settling_weight;
        let mut significant = false;
        for a in adverts {
            if a.dest == self.me {
                if a.seq > self.own_seq {
                    self.own_seq = (a.seq + 1) & !1;
                    significant = true;
                }
                continue;
            }
            let metric = if a.metric == DSDV_INFINITY {
                DSDV_INFINITY
            } else {
                a.metric.saturating_add(1).min(DSDV_INFINITY - 1)
            };
            match self.table.get_mut(&a.dest) {
                None => {
                    if metric == DSDV_INFINITY {
                        continue;
                    }
                    self.table.insert(
                        a.dest,
                        Entry {
                            next_hop: from,
                            metric,
                            seq: a.seq,
                            installed_at: now,
                            changed: true,
                            advertise_after: now,
                            first_seq_at: now,
                            settle_avg: 0.0,
                        },
                    );
                    significant = true;
                }
                Some(e) => {
                    let newer = a.seq > e.seq;
                    if !(newer || (a.seq == e.seq && metric < e.metric)) {
                        continue;
                    }
                    let was_broken = e.broken();
                    let metric_changed = metric != e.metric;
                    if newer {
                        e.first_seq_at = now;
                        let delay = if metric == DSDV_INFINITY {
                            0.0
                        } else {
                            2.0 * e.settle_avg
                        };
                        if metric_changed {
                            e.advertise_after = now + delay;
                        }
                    } else {
                        let latest = now - e.first_seq_at;
                        e.settle_avg = w * e.settle_avg + (1.0 - w) * latest;
                    }
                    e.next_hop = from;
                    e.metric = metric;
                    e.seq = a.seq;
                    e.installed_at = now;
                    if metric_changed || was_broken != e.broken() {
                        e.changed = true;
                        significant = true;
                    }
                }
            }
        }
        significant
    }

    fn break_routes_via(&mut self, neighbor: NodeId, now: SimTime) -> bool {
        let mut any = false;
        for e in self.table.values_mut() {
            if e.next_hop == neighbor && !e.broken() {
                e.seq += 1;
                e.metric = DSDV_INFINITY;
                e.changed = true;
                e.advertise_after = now;
                any = true;
            }
        }
        any
    }

    pub fn on_link_failure(&mut self, neighbor: NodeId, now: SimTime) -> Vec<RoutingAction> {
        let mut actions = Vec::new();
        self.neighbors.remove(&neighbor);
        if self.break_routes_via(neighbor, now) {
            self.request_trigger(now, &mut actions);
        }
        actions
    }

    pub fn lookup(&self, dest: NodeId) -> Option<NodeId> {
        if dest == self.me {
            return Some(self.me);
        }
        self.table
            .get(&dest)
            .filter(|e| !e.broken())
            .map(|e| e.next_hop)
    }

    pub fn table(&self) -> Vec<RouteEntry> {
        std::iter::once(RouteEntry {
            dest: self.me,
            next_hop: self.me,
            metric: 0,
            seq_num: self.own_seq,
            installed_at: SimTime::ZERO,
            expires_at: None,
            valid: true,
        })
        .chain(self.table.iter().map(|(&dest, e)| RouteEntry {
            dest,
            next_hop: e.next_hop,
            metric: e.metric,
            seq_num: e.seq,
            installed_at: e.installed_at,
            expires_at: None,
            valid: !e.broken(),
        }))
        .collect()
    }
}
