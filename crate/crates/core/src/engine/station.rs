use std::collections::VecDeque;
use std::sync::Arc;

use super::frame::{encode_next_arrival, encode_queue_size, MacFrame, MsduRef};
use crate::policy::QsSemantics;
use crate::qos::{PhyProfile, StationId, TrafficSpec};
use crate::time::Micros;
use crate::trace::VideoTrace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedMsdu {
    pub frame_index: usize,
    pub generated: Micros,
    pub size_bits: u64,
}

/// An uplink video source: replays its trace into a FIFO transmit queue.
#[derive(Debug, Clone)]
pub struct StationModel {
    pub id: StationId,
    pub spec: TrafficSpec,
    trace: Arc<VideoTrace>,
    /// Absolute time of the trace's 0 ms.
    origin: Micros,
    queue: VecDeque<QueuedMsdu>,
    generated: usize,
}

impl StationModel {
    pub fn new(id: StationId, spec: TrafficSpec, trace: Arc<VideoTrace>, origin: Micros) -> Self {
        StationModel { id, spec, trace, origin, queue: VecDeque::new(), generated: 0 }
    }

    pub fn arrival_of(&self, frame_index: usize) -> Option<Micros> {
        self.trace.records().get(frame_index).map(|r| self.origin + Micros::from_ms(r.arrival_ms as i64))
    }

    /// Absolute arrival times of every trace frame before `end`.
    pub fn arrivals_before(&self, end: Micros) -> impl Iterator<Item = (usize, Micros)> + '_ {
        (0..self.trace.len())
            .map(|i| (i, self.arrival_of(i).expect("index in range")))
            .take_while(move |&(_, t)| t < end)
    }

    /// Moves trace frame `frame_index` into the transmit queue.
    pub fn generate(&mut self, frame_index: usize) -> &QueuedMsdu {
        debug_assert_eq!(frame_index, self.generated, "frames must be generated in order");
        let rec = self.trace.records()[frame_index];
        self.queue.push_back(QueuedMsdu {
            frame_index,
            generated: self.origin + Micros::from_ms(rec.arrival_ms as i64),
            size_bits: rec.size_bits as u64,
        });
        self.generated += 1;
        self.queue.back().expect("just pushed")
    }

    pub fn generated(&self) -> usize {
        self.generated
    }

    pub fn queue(&self) -> &VecDeque<QueuedMsdu> {
        &self.queue
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queue.iter().map(|m| m.size_bits.div_ceil(8)).sum()
    }

    /// Removes the head MSDU once it has been put on the air.
    pub fn pop_sent(&mut self, frame_index: usize) -> QueuedMsdu {
        let head = self.queue.pop_front().expect("sent frame must be queued");
        assert_eq!(head.frame_index, frame_index, "frames leave the queue in order");
        head
    }

    /// Frames this station answers a poll with, given `grant` and a first
    /// transmission at `start`.
    ///
    /// MSDUs go oldest-first while their whole exchange (data, SIFS, ACK,
    /// SIFS) still fits the grant; the first one that does not fit ends the
    /// burst. With nothing to send the answer is a single QoS Null. Every
    /// frame's QS field follows `semantics`. The queue itself is unchanged.
    pub fn serve_poll(&self, grant: Micros, start: Micros, phy: &PhyProfile, semantics: QsSemantics) -> Vec<MacFrame> {
        let mut frames = Vec::new();
        let mut used = Micros::ZERO;
        let mut remaining_bytes = self.queued_bytes();
        for m in &self.queue {
            let cost = phy.msdu_exchange_time(m.size_bits);
            if used + cost > grant {
                break;
            }
            let tx_at = start + used;
            remaining_bytes -= m.size_bits.div_ceil(8);
            let qs = match semantics {
                QsSemantics::NextArrival => encode_next_arrival(self.arrival_of(m.frame_index + 1), tx_at),
                QsSemantics::QueueSize => encode_queue_size(remaining_bytes),
            };
            frames.push(MacFrame::data(
                self.id,
                m.size_bits,
                qs,
                MsduRef { frame_index: m.frame_index, generated: m.generated },
            ));
            used += cost;
        }
        if frames.is_empty() {
            let qs = match semantics {
                QsSemantics::NextArrival => {
                    let next = self.queue.front().map_or(self.generated, |m| m.frame_index);
                    encode_next_arrival(self.arrival_of(next), start)
                }
                QsSemantics::QueueSize => encode_queue_size(self.queued_bytes()),
            };
            frames.push(MacFrame::null(self.id, qs));
        }
        frames
    }
}
