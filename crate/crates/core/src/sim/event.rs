//! Event queue with a fixed, documented tie-breaking order.
//!
//! Events are ordered by `(time, kind rank, subject, insertion sequence)`.
//! Protocol deliveries and timers come first at equal times so a session
//! settles before traffic reacts to it; metric samples come last so they see
//! the state after every other event at that instant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::negotiation::{ProtocolMessage, SessionId, SessionRequest, TimerKind};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    ProtocolDelivery { msg: ProtocolMessage, copy: u8 },
    TimerExpiry { session: SessionId, timer: TimerKind },
    ProtocolRetry { request: SessionRequest },
    FlowEnd { slot: usize },
    MobilityTick,
    FlowArrival { slot: usize },
    MacAttempt { slot: usize },
    MetricSample,
}

impl EventKind {
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::ProtocolDelivery { .. } => 0,
            EventKind::TimerExpiry { .. } => 1,
            EventKind::ProtocolRetry { .. } => 2,
            EventKind::FlowEnd { .. } => 3,
            EventKind::MobilityTick => 4,
            EventKind::FlowArrival { .. } => 5,
            EventKind::MacAttempt { .. } => 6,
            EventKind::MetricSample => 7,
        }
    }

    /// Secondary key within a rank.
    pub fn subject(&self) -> u64 {
        match self {
            EventKind::ProtocolDelivery { msg, copy } => {
                (msg.session_id << 24) ^ ((msg.receiver as u64) << 2) ^ u64::from(*copy)
            }
            EventKind::TimerExpiry { session, .. } => *session,
            EventKind::ProtocolRetry { request } => request.initiator as u64,
            EventKind::FlowEnd { slot } | EventKind::FlowArrival { slot } | EventKind::MacAttempt { slot } => {
                *slot as u64
            }
            EventKind::MobilityTick | EventKind::MetricSample => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    seq: u64,
}

impl Event {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.kind.rank().cmp(&other.kind.rank()))
            .then_with(|| self.kind.subject().cmp(&other.kind.subject()))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event { time, kind, seq: self.seq });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_time_then_rank_then_subject_then_fifo() {
        let mut q = EventQueue::new();
        q.push(2.0, EventKind::MetricSample);
        q.push(1.0, EventKind::MetricSample);
        q.push(1.0, EventKind::FlowArrival { slot: 3 });
        q.push(1.0, EventKind::FlowArrival { slot: 1 });
        q.push(1.0, EventKind::MobilityTick);
        q.push(1.0, EventKind::FlowEnd { slot: 9 });
        q.push(1.0, EventKind::MobilityTick);
        let got: Vec<(f64, u8, u64)> = std::iter::from_fn(|| q.pop())
            .map(|e| (e.time, e.kind.rank(), e.kind.subject()))
            .collect();
        assert_eq!(
            got,
            vec![(1.0, 3, 9), (1.0, 4, 0), (1.0, 4, 0), (1.0, 5, 1), (1.0, 5, 3), (1.0, 7, 0), (2.0, 7, 0)]
        );
    }

    #[test]
    fn equal_keys_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        q.push(0.5, EventKind::MacAttempt { slot: 2 });
        q.push(0.5, EventKind::MacAttempt { slot: 2 });
        let a = q.pop().unwrap();
        let b = q.pop().unwrap();
        assert!(a.seq < b.seq);
        assert!(q.is_empty());
    }
}
