//! Event types and the time-ordered queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scenario::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Uplink finished serving the packet at the head of the BS queue.
    LrTxEnd,
    /// A short-range frame from `node` left the air.
    SrTxEnd { node: NodeId },
    MobilityTick,
    TableSweep,
    BeaconDue { node: NodeId },
    CbrArrival { node: NodeId },
    /// `node` tries to seize the short-range medium.
    MediumAttempt { node: NodeId },
}

impl EventKind {
    /// Order among events sharing a timestamp: completions free resources
    /// first, then topology and table upkeep, then new work.
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::LrTxEnd => 0,
            EventKind::SrTxEnd { .. } => 1,
            EventKind::MobilityTick => 2,
            EventKind::TableSweep => 3,
            EventKind::BeaconDue { .. } => 4,
            EventKind::CbrArrival { .. } => 5,
            EventKind::MediumAttempt { .. } => 6,
        }
    }

    pub fn node(&self) -> Option<NodeId> {
        match *self {
            EventKind::SrTxEnd { node }
            | EventKind::BeaconDue { node }
            | EventKind::CbrArrival { node }
            | EventKind::MediumAttempt { node } => Some(node),
            _ => None,
        }
    }
}

/// Dequeue order is `(time, priority, seq)`. `seq` is unique, so no two
/// events compare equal, and same-instant contenders are served in the
/// order they were scheduled.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    pub fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.priority(), self.seq)
    }
}

pub fn key_cmp(a: (f64, u8, u64), b: (f64, u8, u64)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        key_cmp(other.key(), self.key())
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    /// Reserves a sequence number for an event produced outside the heap.
    pub fn take_seq(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    pub fn peek(&self) -> Option<&Event> {
        self.heap.peek()
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Constant-bit-rate arrivals of all sources merged into one stream.
///
/// Source `i` emits at `phase_i + k / rate` for `k = 0, 1, ...`. Since every
/// phase lies in `[0, 1/rate)`, sorting sources by phase once gives the
/// global arrival order without a heap.
#[derive(Debug, Clone)]
pub struct CbrStream {
    rate: f64,
    order: Vec<(f64, NodeId)>,
    period_index: u64,
    cursor: usize,
}

impl CbrStream {
    /// `phases` pairs each source with its offset in `[0, 1/rate)`. A zero
    /// rate or no sources yields an empty stream.
    pub fn new(rate: f64, mut phases: Vec<(f64, NodeId)>) -> Self {
        if rate <= 0.0 {
            phases.clear();
        }
        phases.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self {
            rate,
            order: phases,
            period_index: 0,
            cursor: 0,
        }
    }

    pub fn peek(&self) -> Option<(f64, NodeId)> {
        let &(phase, node) = self.order.get(self.cursor)?;
        Some((phase + self.period_index as f64 / self.rate, node))
    }

    pub fn advance(&mut self) {
        self.cursor += 1;
        if self.cursor == self.order.len() {
            self.cursor = 0;
            self.period_index += 1;
        }
    }

    /// Arrivals source `node` has emitted strictly before `end`.
    pub fn count_before(&self, node: NodeId, end: f64) -> u64 {
        let Some(&(phase, _)) = self.order.iter().find(|(_, n)| *n == node) else {
            return 0;
        };
        if phase >= end {
            return 0;
        }
        let mut k = ((end - phase) * self.rate).floor() as u64;
        while k > 0 && phase + (k - 1) as f64 / self.rate >= end {
            k -= 1;
        }
        while phase + k as f64 / self.rate < end {
            k += 1;
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_orders_by_time_then_priority_then_seq() {
        let mut q = EventQueue::new();
        q.schedule(2.0, EventKind::CbrArrival { node: 0 });
        q.schedule(1.0, EventKind::MediumAttempt { node: 3 });
        q.schedule(1.0, EventKind::LrTxEnd);
        q.schedule(1.0, EventKind::MediumAttempt { node: 1 });
        let order: Vec<EventKind> = std::iter::from_fn(|| q.pop().map(|e| e.kind)).collect();
        assert_eq!(
            order,
            vec![
                EventKind::LrTxEnd,
                EventKind::MediumAttempt { node: 3 },
                EventKind::MediumAttempt { node: 1 },
                EventKind::CbrArrival { node: 0 },
            ]
        );
    }

    #[test]
    fn cbr_inter_arrival_is_exact() {
        let mut s = CbrStream::new(1000.0, vec![(0.0, 0)]);
        let mut times = Vec::new();
        for _ in 0..5 {
            times.push(s.peek().unwrap().0);
            s.advance();
        }
        assert_eq!(times, vec![0.0, 0.001, 0.002, 0.003, 0.004]);
    }

    #[test]
    fn zero_rate_is_silent() {
        assert!(CbrStream::new(0.0, vec![(0.0, 0), (0.0, 1)]).peek().is_none());
        assert!(CbrStream::new(10.0, vec![]).peek().is_none());
    }

    #[test]
    fn merged_stream_is_monotone_and_complete() {
        let rate = 3000.0;
        let phases = vec![(0.0002, 0), (0.0, 1), (0.000_333, 2)];
        let mut s = CbrStream::new(rate, phases);
        let mut last = -1.0;
        let mut counts = [0u64; 3];
        while let Some((t, n)) = s.peek() {
            if t >= 100.0 {
                break;
            }
            assert!(t >= last);
            last = t;
            counts[n] += 1;
            s.advance();
        }
        assert_eq!(counts, [300_000; 3]);
        for n in 0..3 {
            assert_eq!(s.count_before(n, 100.0), 300_000);
        }
    }
}
