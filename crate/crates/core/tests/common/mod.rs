//! Loss-free message exchange over a fixed graph: every broadcast reaches
//! exactly the graph neighbors after a fixed link delay. Lets routing state
//! be checked against graph algorithms without MAC or channel effects.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use vanetsim_core::routing::{
    ControlMessage, DataDecision, Protocol, ProtocolParams, RoutingAction, RoutingTimer,
};
use vanetsim_core::sim::{EventQueue, RngStream, SimTime, Target};
use vanetsim_core::NodeId;

const LINK_DELAY: f64 = 1e-3;

enum Ev {
    Timer(RoutingTimer),
    Emit(ControlMessage),
    Deliver { msg: ControlMessage, from: NodeId },
}

pub type Adjacency = BTreeMap<NodeId, BTreeSet<NodeId>>;

pub struct GraphNet {
    pub adj: Adjacency,
    pub protocols: Vec<Protocol>,
    rngs: Vec<RngStream>,
    queue: EventQueue<Ev>,
    pub control_tx: u64,
}

impl GraphNet {
    pub fn new(adj: Adjacency, params: &ProtocolParams, seed: u64) -> Self {
        let n = adj.len();
        let mut net = GraphNet {
            adj,
            protocols: (0..n)
                .map(|i| Protocol::new(NodeId(i as u32), params).unwrap())
                .collect(),
            rngs: (0..n)
                .map(|i| RngStream::new(seed, &format!("graph.{i}")))
                .collect(),
            queue: EventQueue::new(),
            control_tx: 0,
        };
        for i in 0..n {
            let actions = net.protocols[i].start(SimTime::from_secs(0.0), &mut net.rngs[i]);
            net.apply(NodeId(i as u32), actions);
        }
        net
    }

    fn apply(&mut self, node: NodeId, actions: Vec<RoutingAction>) {
        let target = Target::Node(node);
        for a in actions {
            match a {
                RoutingAction::Broadcast { msg, delay } => {
                    self.queue.schedule_in(delay, target, Ev::Emit(msg)).unwrap();
                }
                RoutingAction::Unicast { next_hop, msg } => {
                    self.control_tx += 1;
                    if self.adj[&node].contains(&next_hop) {
                        self.queue
                            .schedule_in(LINK_DELAY, Target::Node(next_hop), Ev::Deliver { msg, from: node })
                            .unwrap();
                    }
                }
                RoutingAction::Timer { at, timer } => {
                    self.queue.schedule(at, target, Ev::Timer(timer)).unwrap();
                }
                RoutingAction::RouteFound { .. } | RoutingAction::GaveUp { .. } => {}
            }
        }
    }

    pub fn run_until(&mut self, t: f64) {
        let end = SimTime::from_secs(t);
        while let Some(ev) = self.queue.pop_until(end) {
            let Target::Node(node) = ev.target else { continue };
            let now = ev.fire_at;
            let i = node.index();
            let actions = match ev.payload {
                Ev::Timer(timer) => self.protocols[i].on_timer(timer, now, &mut self.rngs[i]),
                Ev::Emit(msg) => {
                    self.control_tx += 1;
                    let neighbors: Vec<NodeId> = self.adj[&node].iter().copied().collect();
                    for nb in neighbors {
                        self.queue
                            .schedule_in(
                                LINK_DELAY,
                                Target::Node(nb),
                                Ev::Deliver { msg: msg.clone(), from: node },
                            )
                            .unwrap();
                    }
                    Vec::new()
                }
                Ev::Deliver { msg, from } => {
                    self.protocols[i].on_control(&msg, from, now, &mut self.rngs[i])
                }
            };
            self.apply(node, actions);
        }
    }

    /// Asks `node` to route a data packet it originates, applying any
    /// discovery actions.
    pub fn route_data(&mut self, node: NodeId, dest: NodeId) -> DataDecision {
        let mut actions = Vec::new();
        let now = self.queue.now();
        let d = self.protocols[node.index()].route_data(dest, true, now, &mut actions);
        self.apply(node, actions);
        d
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }
}

/// Undirected G(n, p) graph from `rng`.
pub fn random_graph(n: usize, p: f64, rng: &mut RngStream) -> Adjacency {
    let mut adj: Adjacency = (0..n).map(|i| (NodeId(i as u32), BTreeSet::new())).collect();
    for a in 0..n {
        for b in a + 1..n {
            if rng.unit() < p {
                adj.get_mut(&NodeId(a as u32)).unwrap().insert(NodeId(b as u32));
                adj.get_mut(&NodeId(b as u32)).unwrap().insert(NodeId(a as u32));
            }
        }
    }
    adj
}

/// Plain BFS hop counts from `src`, written independently of the library's
/// route computation.
pub fn bfs_hops(adj: &Adjacency, src: NodeId) -> BTreeMap<NodeId, u32> {
    let mut dist = BTreeMap::from([(src, 0u32)]);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let d = dist[&u];
        for &v in &adj[&u] {
            if !dist.contains_key(&v) {
                dist.insert(v, d + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Follows next hops from `src` toward `dest`. Returns the hop count, or
/// `None` if the chain breaks or revisits a node.
pub fn follow_chain(
    next_hop: &mut dyn FnMut(NodeId, NodeId) -> Option<NodeId>,
    src: NodeId,
    dest: NodeId,
    max_hops: usize,
) -> Option<usize> {
    let mut at = src;
    let mut seen = BTreeSet::from([src]);
    let mut hops = 0;
    while at != dest {
        let nh = next_hop(at, dest)?;
        hops += 1;
        if !seen.insert(nh) || hops > max_hops {
            return None;
        }
        at = nh;
    }
    Some(hops)
}
