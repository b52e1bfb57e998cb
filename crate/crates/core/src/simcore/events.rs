//! Simulation clock and the deterministic event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Simulated time in steps. One step is one millisecond.
pub type Step = u64;

/// Identifier handed out by [`EventQueue::schedule`]. Equal to the insertion
/// sequence number, so it is unique for the lifetime of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u64);

/// Monotone simulation clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    now: Step,
}

impl SimClock {
    pub fn new() -> Self {
        Self { now: 0 }
    }

    pub fn now(&self) -> Step {
        self.now
    }

    /// Moves the clock forward. Moving backwards is a causality bug.
    pub fn advance_to(&mut self, t: Step) -> Result<()> {
        if t < self.now {
            return Err(Error::Causality { at: t, now: self.now });
        }
        self.now = t;
        Ok(())
    }
}

struct Entry<E> {
    at: Step,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the smallest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Priority queue ordered by `(timestamp, insertion sequence)`.
///
/// Events scheduled for the same step fire in insertion order, so a run is
/// fully determined by the order of `schedule` calls.
pub struct EventQueue<E> {
    clock: SimClock,
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            clock: SimClock::new(),
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    pub fn now(&self) -> Step {
        self.clock.now()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, payload: E, at: Step) -> Result<EventId> {
        if at < self.clock.now() {
            return Err(Error::Causality {
                at,
                now: self.clock.now(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, payload });
        Ok(EventId(seq))
    }

    /// Advances the clock. Fails if an event earlier than `t` is still queued,
    /// since skipping it would let a handler observe a later clock.
    pub fn advance_to(&mut self, t: Step) -> Result<()> {
        if let Some(head) = self.heap.peek() {
            if head.at < t {
                return Err(Error::Causality { at: head.at, now: t });
            }
        }
        self.clock.advance_to(t)
    }

    /// Timestamp of the next queued event.
    pub fn peek_time(&self) -> Option<Step> {
        self.heap.peek().map(|e| e.at)
    }

    /// Pops the next event due at the current step, if any.
    pub fn pop_due(&mut self) -> Option<(EventId, Step, E)> {
        match self.heap.peek() {
            Some(head) if head.at <= self.clock.now() => {
                let e = self.heap.pop().expect("peeked");
                Some((EventId(e.seq), e.at, e.payload))
            }
            _ => None,
        }
    }
}
