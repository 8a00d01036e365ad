//! Event queue and run loop.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use super::{SimError, SimTime};
use crate::NodeId;

/// Who an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Node(NodeId),
    System,
}

/// Returned by [`EventQueue::schedule`]; used to cancel a pending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A dequeued event.
#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: Target,
    pub payload: P,
}

struct Entry<P> {
    fire_at: SimTime,
    seq: u64,
    target: Target,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fire_at
            .cmp(&other.fire_at)
            .then(self.seq.cmp(&other.seq))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_mix(hash: u64, value: u64) -> u64 {
    value
        .to_le_bytes()
        .iter()
        .fold(hash, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Min-queue of events ordered by `(fire_at, seq)`, where `seq` is a global
/// insertion counter. Owns the virtual clock.
pub struct EventQueue<P> {
    heap: BinaryHeap<Reverse<Entry<P>>>,
    cancelled: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
    processed: u64,
    trace: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            processed: 0,
            trace: FNV_OFFSET,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events delivered so far (cancelled events excluded).
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Pending events, including cancelled ones not yet discarded.
    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Running hash over every delivered `(fire_at, seq, target)` plus any
    /// values fed through [`EventQueue::mix_trace`].
    pub fn trace_hash(&self) -> u64 {
        self.trace
    }

    pub fn mix_trace(&mut self, value: u64) {
        self.trace = fnv_mix(self.trace, value);
    }

    pub fn schedule(
        &mut self,
        at: SimTime,
        target: Target,
        payload: P,
    ) -> Result<EventHandle, SimError> {
        if at < self.now {
            return Err(SimError::SchedulingInPast {
                at: at.secs(),
                now: self.now.secs(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry {
            fire_at: at,
            seq,
            target,
            payload,
        }));
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` seconds from now. Negative delays are rejected.
    pub fn schedule_in(
        &mut self,
        delay: f64,
        target: Target,
        payload: P,
    ) -> Result<EventHandle, SimError> {
        let at = SimTime::new(self.now.secs() + delay)?;
        self.schedule(at, target, payload)
    }

    /// Returns false if the handle was already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_at <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        loop {
            let head = self.heap.peek()?;
            if head.0.fire_at > t_end {
                return None;
            }
            let Reverse(entry) = self.heap.pop()?;
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.processed += 1;
            self.trace = fnv_mix(self.trace, entry.fire_at.secs().to_bits());
            self.trace = fnv_mix(self.trace, entry.seq);
            let tag = match entry.target {
                Target::Node(n) => u64::from(n.0),
                Target::System => u64::MAX,
            };
            self.trace = fnv_mix(self.trace, tag);
            return Some(Event {
                fire_at: entry.fire_at,
                seq: entry.seq,
                target: entry.target,
                payload: entry.payload,
            });
        }
    }

    /// Processes every event with `fire_at <= t_end` in `(fire_at, seq)`
    /// order and leaves the clock at `t_end`. Returns the number processed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut EventQueue<P>, Event<P>),
    {
        if t_end < self.now {
            return Err(SimError::SchedulingInPast {
                at: t_end.secs(),
                now: self.now.secs(),
            });
        }
        let start = self.processed;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
        }
        self.now = t_end;
        Ok(self.processed - start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    #[test]
    fn equal_times_dequeue_fifo() {
        let mut q = EventQueue::new();
        q.schedule(t(5.0), Target::System, "first").unwrap();
        q.schedule(t(5.0), Target::System, "second").unwrap();
        let mut order = Vec::new();
        q.run_until(t(10.0), |_, ev| order.push(ev.payload)).unwrap();
        assert_eq!(order, vec!["first", "second"]);
    }

    #[test]
    fn event_at_current_time_fires_before_advance() {
        let mut q = EventQueue::new();
        q.schedule(t(1.0), Target::System, 0).unwrap();
        let mut seen = Vec::new();
        q.run_until(t(3.0), |q, ev| {
            seen.push((ev.payload, q.now().secs()));
            if ev.payload == 0 {
                q.schedule(q.now(), Target::System, 1).unwrap();
                q.schedule(t(2.0), Target::System, 2).unwrap();
            }
        })
        .unwrap();
        assert_eq!(seen, vec![(0, 1.0), (1, 1.0), (2, 2.0)]);
    }

    #[test]
    fn cancelled_event_is_never_delivered() {
        let mut q = EventQueue::new();
        let h = q.schedule(t(1.0), Target::System, 'a').unwrap();
        q.schedule(t(2.0), Target::System, 'b').unwrap();
        assert!(q.cancel(h));
        let mut seen = Vec::new();
        let n = q.run_until(t(5.0), |_, ev| seen.push(ev.payload)).unwrap();
        assert_eq!(seen, vec!['b']);
        assert_eq!(n, 1);
    }

    #[test]
    fn scheduling_in_past_is_rejected() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.run_until(t(4.0), |_, _| {}).unwrap();
        assert!(matches!(
            q.schedule(t(3.0), Target::System, ()),
            Err(SimError::SchedulingInPast { .. })
        ));
        assert!(q.schedule_in(-0.5, Target::System, ()).is_err());
    }

    #[test]
    fn empty_queue_advances_to_end() {
        let mut q: EventQueue<()> = EventQueue::new();
        let n = q.run_until(t(900.0), |_, _| {}).unwrap();
        assert_eq!(n, 0);
        assert_eq!(q.now().secs(), 900.0);
    }

    #[test]
    fn run_until_stops_at_horizon() {
        let mut q = EventQueue::new();
        for s in [1.0, 2.0, 3.0] {
            q.schedule(t(s), Target::System, s).unwrap();
        }
        let n = q.run_until(t(2.0), |_, _| {}).unwrap();
        assert_eq!(n, 2);
        assert_eq!(q.pending(), 1);
        assert_eq!(q.now().secs(), 2.0);
    }

    #[test]
    fn identical_schedules_hash_identically() {
        let build = || {
            let mut q = EventQueue::new();
            for i in 0..50u32 {
                let at = t(f64::from(i % 7) * 0.5);
                q.schedule(at, Target::Node(NodeId(i)), i).unwrap();
            }
            q.run_until(t(10.0), |_, _| {}).unwrap();
            q.trace_hash()
        };
        assert_eq!(build(), build());
    }
}
