//! Optimized link state routing: HELLO neighbor sensing, greedy MPR
//! selection and TC flooding restricted to MPRs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{
    seq_newer, shortest_routes, ControlKind, ControlMessage, RouteEntry, RoutingAction,
    RoutingError, RoutingTimer,
};
use crate::sim::{Dist, RngStream, SimTime};
use crate::NodeId;

/// How long a forwarded TC is remembered for duplicate suppression.
const DUPLICATE_HOLD: f64 = 30.0;
const TC_TTL: u8 = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsrParams {
    pub hello_interval: f64,
    pub tc_interval: f64,
    pub neighbor_hold_time: f64,
    pub topology_hold_time: f64,
}

impl OlsrParams {
    /// Hold times at three times their interval.
    pub fn with_intervals(hello_interval: f64, tc_interval: f64) -> Self {
        Self {
            hello_interval,
            tc_interval,
            neighbor_hold_time: 3.0 * hello_interval,
            topology_hold_time: 3.0 * tc_interval,
        }
    }

    pub fn validate(&self) -> Result<(), RoutingError> {
        let all = [
            self.hello_interval,
            self.tc_interval,
            self.neighbor_hold_time,
            self.topology_hold_time,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(RoutingError::InvalidParams("OLSR intervals must be positive".into()));
        }
        if self.neighbor_hold_time < self.hello_interval
            || self.topology_hold_time < self.tc_interval
        {
            return Err(RoutingError::InvalidParams(
                "OLSR hold times must not be shorter than their intervals".into(),
            ));
        }
        Ok(())
    }
}

impl Default for OlsrParams {
    fn default() -> Self {
        Self::with_intervals(2.0, 5.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkCode {
    /// Heard, not yet confirmed both ways.
    Asym,
    Sym,
    /// Symmetric and chosen as MPR by the sender.
    Mpr,
}

/// Greedy MPR selection: neighbors that are the only way to reach some
/// strict 2-hop node first, then whichever neighbor covers the most
/// still-uncovered nodes (lowest id on ties) until everything is covered.
pub fn select_mprs(
    one_hop: &BTreeSet<NodeId>,
    two_hop: &BTreeMap<NodeId, BTreeSet<NodeId>>,
) -> Result<BTreeSet<NodeId>, RoutingError> {
    if let Some(bad) = two_hop.keys().find(|k| !one_hop.contains(k)) {
        return Err(RoutingError::InconsistentTopologySets(*bad));
    }
    let cover: BTreeMap<NodeId, BTreeSet<NodeId>> = two_hop
        .iter()
        .map(|(&n, reach)| (n, reach.difference(one_hop).copied().collect()))
        .collect();
    let mut uncovered: BTreeSet<NodeId> = cover.values().flatten().copied().collect();
    let mut mprs = BTreeSet::new();
    for y in &uncovered {
        let mut providers = cover.iter().filter(|(_, c)| c.contains(y));
        if let (Some((&n, _)), None) = (providers.next(), providers.next()) {
            mprs.insert(n);
        }
    }
    for n in &mprs {
        for y in &cover[n] {
            uncovered.remove(y);
        }
    }
    while !uncovered.is_empty() {
        let mut best: Option<(NodeId, usize)> = None;
        for (&n, c) in &cover {
            if mprs.contains(&n) {
                continue;
            }
            let gain = c.intersection(&uncovered).count();
            if gain > best.map_or(0, |b| b.1) {
                best = Some((n, gain));
            }
        }
        let (n, _) = best.expect("every uncovered node has a provider");
        mprs.insert(n);
        for y in &cover[&n] {
            uncovered.remove(y);
        }
    }
    Ok(mprs)
}

#[derive(Debug, Clone)]
struct Link {
    heard_until: SimTime,
    sym_until: Option<SimTime>,
}

#[derive(Debug, Clone)]
struct Topology {
    ansn: u16,
    advertised: BTreeSet<NodeId>,
    expires: SimTime,
}

#[derive(Debug, Clone)]
pub struct Olsr {
    me: NodeId,
    params: OlsrParams,
    links: BTreeMap<NodeId, Link>,
    two_hop: BTreeMap<NodeId, (BTreeSet<NodeId>, SimTime)>,
    mprs: BTreeSet<NodeId>,
    /// Set when the neighborhood changed after `mprs` was computed.
    mprs_stale: Option<SimTime>,
    selectors: BTreeMap<NodeId, SimTime>,
    topology: BTreeMap<NodeId, Topology>,
    duplicates: HashMap<(NodeId, u16), SimTime>,
    ansn: u16,
    msg_seq: u16,
    last_advertised: BTreeSet<NodeId>,
    routes: BTreeMap<NodeId, (NodeId, u32)>,
    dirty: bool,
    next_expiry: Option<SimTime>,
}

impl Olsr {
    pub fn new(me: NodeId, params: OlsrParams) -> Self {
        Self {
            me,
            params,
            links: BTreeMap::new(),
            two_hop: BTreeMap::new(),
            mprs: BTreeSet::new(),
            mprs_stale: None,
            selectors: BTreeMap::new(),
            topology: BTreeMap::new(),
            duplicates: HashMap::new(),
            ansn: 0,
            msg_seq: 0,
            last_advertised: BTreeSet::new(),
            routes: BTreeMap::new(),
            dirty: false,
            next_expiry: None,
        }
    }

    pub fn params(&self) -> &OlsrParams {
        &self.params
    }

    pub fn mprs(&mut self) -> &BTreeSet<NodeId> {
        self.refresh_mprs();
        &self.mprs
    }

    pub fn symmetric_neighbors(&self, now: SimTime) -> BTreeSet<NodeId> {
        self.links
            .iter()
            .filter(|(_, l)| l.sym_until.is_some_and(|t| t >= now))
            .map(|(&n, _)| n)
            .collect()
    }

    pub fn mpr_selectors(&self) -> BTreeSet<NodeId> {
        self.selectors.keys().copied().collect()
    }

    pub fn two_hop_set(&self) -> BTreeSet<NodeId> {
        self.two_hop.values().flat_map(|(s, _)| s.iter().copied()).collect()
    }

    pub fn start(&mut self, now: SimTime, rng: &mut RngStream) -> Vec<RoutingAction> {
        let mut first = |interval: f64| {
            now + rng
                .draw(Dist::Uniform { low: 0.0, high: interval })
                .unwrap_or(0.0)
        };
        vec![
            RoutingAction::Timer {
                at: first(self.params.hello_interval),
                timer: RoutingTimer::OlsrHello,
            },
            RoutingAction::Timer {
                at: first(self.params.tc_interval),
                timer: RoutingTimer::OlsrTc,
            },
        ]
    }

    /// Interval shortened by up to a quarter, as emission jitter.
    fn jittered(interval: f64, rng: &mut RngStream) -> f64 {
        interval
            - rng
                .draw(Dist::Uniform { low: 0.0, high: interval / 4.0 })
                .unwrap_or(0.0)
    }

    pub fn on_timer(
        &mut self,
        timer: RoutingTimer,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Vec<RoutingAction> {
        self.purge(now);
        let mut actions = Vec::new();
        match timer {
            RoutingTimer::OlsrHello => {
                actions.push(RoutingAction::Broadcast {
                    msg: self.hello(now),
                    delay: 0.0,
                });
                actions.push(RoutingAction::Timer {
                    at: now + Self::jittered(self.params.hello_interval, rng),
                    timer: RoutingTimer::OlsrHello,
                });
            }
            RoutingTimer::OlsrTc => {
                if let Some(tc) = self.tc(now) {
                    actions.push(RoutingAction::Broadcast { msg: tc, delay: 0.0 });
                }
                actions.push(RoutingAction::Timer {
                    at: now + Self::jittered(self.params.tc_interval, rng),
                    timer: RoutingTimer::OlsrTc,
                });
            }
            _ => {}
        }
        actions
    }

    pub fn hello(&mut self, now: SimTime) -> ControlMessage {
        self.refresh_mprs();
        let neighbors = self
            .links
            .iter()
            .filter(|(_, l)| l.heard_until >= now)
            .map(|(&n, l)| {
                let code = if !l.sym_until.is_some_and(|t| t >= now) {
                    LinkCode::Asym
                } else if self.mprs.contains(&n) {
                    LinkCode::Mpr
                } else {
                    LinkCode::Sym
                };
                (n, code)
            })
            .collect();
        ControlMessage {
            origin: self.me,
            emitted_at: now,
            kind: ControlKind::Hello { neighbors },
        }
    }

    /// A TC advertising the current MPR selectors, if there are any.
    pub fn tc(&mut self, now: SimTime) -> Option<ControlMessage> {
        if self.selectors.is_empty() {
            return None;
        }
        let advertised: BTreeSet<NodeId> = self.selectors.keys().copied().collect();
        if advertised != self.last_advertised {
            self.ansn = self.ansn.wrapping_add(1);
            self.last_advertised = advertised.clone();
        }
        self.msg_seq = self.msg_seq.wrapping_add(1);
        Some(ControlMessage {
            origin: self.me,
            emitted_at: now,
            kind: ControlKind::Tc {
                ansn: self.ansn,
                msg_seq: self.msg_seq,
                ttl: TC_TTL,
                advertised: advertised.into_iter().collect(),
            },
        })
    }

    pub fn on_control(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Vec<RoutingAction> {
        self.purge(now);
        match &msg.kind {
            ControlKind::Hello { neighbors } => {
                self.process_hello(neighbors, from, now);
                Vec::new()
            }
            ControlKind::Tc { .. } => self.process_tc(msg, from, now, rng),
            _ => Vec::new(),
        }
    }

    pub fn process_hello(&mut self, neighbors: &[(NodeId, LinkCode)], from: NodeId, now: SimTime) {
        let hold = now + self.params.neighbor_hold_time;
        let listed_me = neighbors.iter().find(|(n, _)| *n == self.me).map(|(_, c)| *c);
        let was_sym = self.is_sym(&from, now);
        let link = self.links.entry(from).or_insert(Link {
            heard_until: hold,
            sym_until: None,
        });
        link.heard_until = hold;
        if listed_me.is_some() {
            link.sym_until = Some(hold);
        }
        self.note_expiry(hold);
        let is_sym = self.is_sym(&from, now);
        // MPRs and routes depend only on which neighbors are symmetric and
        // what they reach, so an unchanged HELLO just refreshes timers.
        let mut changed = was_sym != is_sym;
        if is_sym {
            let reach: BTreeSet<NodeId> = neighbors
                .iter()
                .filter(|(n, c)| *n != self.me && *c != LinkCode::Asym)
                .map(|(n, _)| *n)
                .collect();
            match self.two_hop.get_mut(&from) {
                Some((old, t)) if *old == reach => *t = hold,
                _ => {
                    self.two_hop.insert(from, (reach, hold));
                    changed = true;
                }
            }
        } else {
            changed |= self.two_hop.remove(&from).is_some();
        }
        if listed_me == Some(LinkCode::Mpr) {
            self.selectors.insert(from, hold);
        } else {
            self.selectors.remove(&from);
        }
        if changed {
            self.topology_changed(now);
        }
    }

    fn process_tc(
        &mut self,
        msg: &ControlMessage,
        from: NodeId,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Vec<RoutingAction> {
        let ControlKind::Tc {
            ansn,
            msg_seq,
            ttl,
            ref advertised,
        } = msg.kind
        else {
            return Vec::new();
        };
        if !self.is_sym(&from, now) || msg.origin == self.me {
            return Vec::new();
        }
        let key = (msg.origin, msg_seq);
        if self.duplicates.contains_key(&key) {
            return Vec::new();
        }
        self.duplicates.insert(key, now + DUPLICATE_HOLD);
        self.note_expiry(now + DUPLICATE_HOLD);
        self.apply_tc(msg.origin, ansn, advertised, now);

        let mut actions = Vec::new();
        if ttl > 1 && self.selectors.contains_key(&from) {
            let mut fwd = msg.clone();
            if let ControlKind::Tc { ttl, .. } = &mut fwd.kind {
                *ttl -= 1;
            }
            let delay = rng
                .draw(Dist::Uniform {
                    low: 0.0,
                    high: self.params.hello_interval / 4.0,
                })
                .unwrap_or(0.0);
            actions.push(RoutingAction::Broadcast { msg: fwd, delay });
        }
        actions
    }

    /// Installs a topology advertisement unless an equal-or-newer one
    /// from the same origin is already held. Returns whether it was used.
    pub fn apply_tc(
        &mut self,
        origin: NodeId,
        ansn: u16,
        advertised: &[NodeId],
        now: SimTime,
    ) -> bool {
        if let Some(t) = self.topology.get(&origin) {
            if seq_newer(t.ansn, ansn) {
                return false;
            }
        }
        let expires = now + self.params.topology_hold_time;
        self.topology.insert(
            origin,
            Topology {
                ansn,
                advertised: advertised.iter().copied().collect(),
                expires,
            },
        );
        self.note_expiry(expires);
        self.dirty = true;
        true
    }

    fn note_expiry(&mut self, at: SimTime) {
        self.next_expiry = Some(self.next_expiry.map_or(at, |t| t.min(at)));
    }

    fn is_sym(&self, n: &NodeId, now: SimTime) -> bool {
        self.links
            .get(n)
            .and_then(|l| l.sym_until)
            .is_some_and(|t| t >= now)
    }

    /// Marks MPRs and routes for recomputation after a neighborhood change.
    /// MPRs are only consumed by HELLOs, so they are selected lazily.
    fn topology_changed(&mut self, now: SimTime) {
        self.mprs_stale = Some(now);
        self.dirty = true;
    }

    fn refresh_mprs(&mut self) {
        let Some(at) = self.mprs_stale.take() else {
            return;
        };
        let sym = self.symmetric_neighbors(at);
        let two_hop: BTreeMap<NodeId, BTreeSet<NodeId>> = self
            .two_hop
            .iter()
            .filter(|(n, _)| sym.contains(n))
            .map(|(&n, (s, _))| (n, s.iter().copied().filter(|x| *x != self.me).collect()))
            .collect();
        self.mprs = select_mprs(&sym, &two_hop).unwrap_or_default();
    }

    /// Drops every expired tuple and refreshes derived state if needed.
    pub fn purge(&mut self, now: SimTime) {
        if self.next_expiry.is_none_or(|t| t >= now) {
            return;
        }
        let mut changed = false;
        self.links.retain(|_, l| {
            let keep = l.heard_until >= now;
            changed |= !keep;
            keep
        });
        for l in self.links.values_mut() {
            if l.sym_until.is_some_and(|t| t < now) {
                l.sym_until = None;
                changed = true;
            }
        }
        let sym = self.symmetric_neighbors(now);
        self.two_hop.retain(|n, (_, t)| {
            let keep = *t >= now && sym.contains(n);
            changed |= !keep;
            keep
        });
        self.selectors.retain(|_, t| {
            let keep = *t >= now;
            changed |= !keep;
            keep
        });
        let topo_before = self.topology.len();
        self.topology.retain(|_, t| t.expires >= now);
        if self.topology.len() != topo_before {
            self.dirty = true;
        }
        self.duplicates.retain(|_, t| *t >= now);
        if changed {
            self.topology_changed(now);
        }
        self.next_expiry = self
            .links
            .values()
            .flat_map(|l| std::iter::once(l.heard_until).chain(l.sym_until))
            .chain(self.two_hop.values().map(|(_, t)| *t))
            .chain(self.selectors.values().copied())
            .chain(self.topology.values().map(|t| t.expires))
            .chain(self.duplicates.values().copied())
            .min();
    }

    pub fn on_link_failure(&mut self, neighbor: NodeId, now: SimTime) -> Vec<RoutingAction> {
        if self.links.remove(&neighbor).is_some() {
            self.two_hop.remove(&neighbor);
            self.selectors.remove(&neighbor);
            self.topology_changed(now);
        }
        Vec::new()
    }

    fn adjacency(&self, now: SimTime) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        let sym = self.symmetric_neighbors(now);
        for n in &sym {
            if let Some((reach, _)) = self.two_hop.get(n) {
                adj.entry(*n).or_default().extend(reach.iter().copied());
            }
        }
        adj.insert(self.me, sym);
        for (&origin, t) in &self.topology {
            if origin != self.me {
                adj.entry(origin).or_default().extend(t.advertised.iter().copied());
            }
        }
        adj
    }

    fn refresh_routes(&mut self, now: SimTime) {
        self.purge(now);
        if self.dirty {
            self.routes = shortest_routes(self.me, &self.adjacency(now));
            self.dirty = false;
        }
    }

    pub fn lookup(&mut self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        if dest == self.me {
            return Some(self.me);
        }
        self.refresh_routes(now);
        self.routes.get(&dest).map(|r| r.0)
    }

    pub fn table(&mut self, now: SimTime) -> Vec<RouteEntry> {
        self.refresh_routes(now);
        self.routes
            .iter()
            .map(|(&dest, &(next_hop, metric))| RouteEntry {
                dest,
                next_hop,
                metric,
                seq_num: 0,
                installed_at: now,
                expires_at: None,
                valid: true,
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

    fn ids(v: &[u32]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn single_covering_neighbor_is_the_mpr_set() {
        let one = ids(&[1, 2, 3]);
        let mut two = BTreeMap::new();
        two.insert(NodeId(1), ids(&[10, 11, 12]));
        two.insert(NodeId(2), ids(&[10]));
        two.insert(NodeId(3), ids(&[11]));
        assert_eq!(select_mprs(&one, &two).unwrap(), ids(&[1]));
    }

    #[test]
    fn no_two_hop_nodes_means_no_mprs() {
        let one = ids(&[1, 2]);
        let mut two = BTreeMap::new();
        two.insert(NodeId(1), ids(&[2]));
        assert!(select_mprs(&one, &two).unwrap().is_empty());
        assert!(select_mprs(&one, &BTreeMap::new()).unwrap().is_empty());
    }

    #[test]
    fn inconsistent_sets_rejected() {
        let mut two = BTreeMap::new();
        two.insert(NodeId(7), ids(&[8]));
        assert_eq!(
            select_mprs(&ids(&[1]), &two),
            Err(RoutingError::InconsistentTopologySets(NodeId(7)))
        );
    }

    fn hello_from(o: &mut Olsr, from: u32, listed: &[(u32, LinkCode)], now: f64) {
        let n: Vec<_> = listed.iter().map(|&(i, c)| (NodeId(i), c)).collect();
        o.process_hello(&n, NodeId(from), t(now));
    }

    #[test]
    fn hello_listing_self_makes_link_symmetric() {
        let mut o = Olsr::new(NodeId(0), OlsrParams::default());
        hello_from(&mut o, 1, &[], 0.5);
        assert!(o.symmetric_neighbors(t(0.5)).is_empty());
        hello_from(&mut o, 1, &[(0, LinkCode::Asym), (2, LinkCode::Sym)], 1.0);
        assert_eq!(o.symmetric_neighbors(t(1.0)), ids(&[1]));
        assert_eq!(o.two_hop_set(), ids(&[2]));
        assert_eq!(o.lookup(NodeId(2), t(1.0)), Some(NodeId(1)));
        assert_eq!(o.mprs(), &ids(&[1]));
    }

    #[test]
    fn silent_link_expires_after_hold_time() {
        let mut o = Olsr::new(NodeId(0), OlsrParams::default());
        hello_from(&mut o, 1, &[(0, LinkCode::Sym)], 1.0);
        assert_eq!(o.lookup(NodeId(1), t(6.9)), Some(NodeId(1)));
        assert_eq!(o.lookup(NodeId(1), t(7.1)), None);
        assert!(o.symmetric_neighbors(t(7.1)).is_empty());
    }

    #[test]
    fn mpr_code_registers_selector() {
        let mut o = Olsr::new(NodeId(0), OlsrParams::default());
        hello_from(&mut o, 1, &[(0, LinkCode::Mpr)], 1.0);
        assert_eq!(o.mpr_selectors(), ids(&[1]));
        let tc = o.tc(t(1.0)).unwrap();
        let ControlKind::Tc { advertised, ansn, .. } = tc.kind else { panic!() };
        assert_eq!(advertised, vec![NodeId(1)]);
        assert_eq!(ansn, 1);
        hello_from(&mut o, 1, &[(0, LinkCode::Sym)], 2.0);
        assert!(o.tc(t(2.0)).is_none());
    }

    #[test]
    fn stale_ansn_discarded() {
        let mut o = Olsr::new(NodeId(0), OlsrParams::default());
        assert!(o.apply_tc(NodeId(5), 7, &[NodeId(6)], t(1.0)));
        assert!(!o.apply_tc(NodeId(5), 5, &[NodeId(8)], t(1.5)));
        assert!(o.apply_tc(NodeId(5), 7, &[NodeId(6)], t(2.0)));
    }

    #[test]
    fn line_route_via_topology_and_expiry() {
        // 0 - 1 - 2 - 3: node 3 learned only through a TC from 2.
        let mut o = Olsr::new(NodeId(0), OlsrParams::default());
        hello_from(&mut o, 1, &[(0, LinkCode::Mpr), (2, LinkCode::Sym)], 1.0);
        o.apply_tc(NodeId(2), 1, &[NodeId(1), NodeId(3)], t(1.0));
        assert_eq!(o.lookup(NodeId(2), t(1.0)), Some(NodeId(1)));
        assert_eq!(o.lookup(NodeId(3), t(1.0)), Some(NodeId(1)));
        let table = o.table(t(1.0));
        let row = table.iter().find(|r| r.dest == NodeId(3)).unwrap();
        assert_eq!(row.metric, 3);
        // Keep the link alive but let the TC lapse (15 s hold).
        for k in 1..8 {
            hello_from(&mut o, 1, &[(0, LinkCode::Mpr), (2, LinkCode::Sym)], 1.0 + 2.0 * f64::from(k));
        }
        assert_eq!(o.lookup(NodeId(3), t(16.5)), None);
        assert_eq!(o.lookup(NodeId(2), t(16.5)), Some(NodeId(1)));
    }

    #[test]
    fn tc_forwarded_only_for_selectors() {
        let mut rng = RngStream::new(1, "olsr");
        let mut o = Olsr::new(NodeId(0), OlsrParams::default());
        hello_from(&mut o, 1, &[(0, LinkCode::Sym)], 1.0);
        hello_from(&mut o, 2, &[(0, LinkCode::Mpr)], 1.0);
        let tc = |seq| ControlMessage {
            origin: NodeId(9),
            emitted_at: t(1.0),
            kind: ControlKind::Tc { ansn: 1, msg_seq: seq, ttl: 5, advertised: vec![NodeId(8)] },
        };
        assert!(o.on_control(&tc(1), NodeId(1), t(1.1), &mut rng).is_empty());
        let a = o.on_control(&tc(2), NodeId(2), t(1.2), &mut rng);
        assert_eq!(a.len(), 1);
        // Duplicate from another selector is ignored.
        assert!(o.on_control(&tc(2), NodeId(2), t(1.3), &mut rng).is_empty());
    }
}
