use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::frame::MacFrame;
use crate::qos::StationId;
use crate::time::Micros;

/// A frame on the air and when it started.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxDescriptor {
    pub frame: MacFrame,
    pub start: Micros,
    /// Discarded in flight; the receiver never sees it.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Beacon,
    CapStart,
    FrameGenerated { station: StationId, frame_index: usize },
    TxComplete(TxDescriptor),
    PollTimeout { station: StationId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub at: Micros,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue on `(timestamp, insertion sequence)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, at: Micros, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { at, seq, kind });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
