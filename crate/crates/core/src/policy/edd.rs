//! Enhanced EDD: TXOPs sized from the average demand plus reported backlog,
//! and per-station service advanced by backlog or unused TXOP.
//!
//! CAPs stay on the beacon-anchored SI grid. A station's advanced next-service
//! time only decides whether it is eligible at a given CAP.

use super::{FeedbackOutcome, PolicyContext, PollGrant, PollingPolicy, QsSemantics, SchedulerKind};
use crate::engine::frame::decode_queue_size;
use crate::qos::{compute_txop, edd_update, EddStreamState, StationId};
use crate::time::{airtime, Micros};

#[derive(Debug, Clone)]
struct Slot {
    state: EddStreamState,
    next_service: Micros,
    /// Floor grant: one maximum-size MSDU plus overhead.
    min_txop: Micros,
    reported_backlog_bits: u64,
}

pub struct EnhancedEdd {
    ctx: PolicyContext,
    slots: Vec<Slot>,
    cap_start: Micros,
}

impl EnhancedEdd {
    pub fn new(ctx: PolicyContext) -> Self {
        let slots = ctx
            .streams
            .iter()
            .map(|s| Slot {
                state: EddStreamState::new(ctx.si),
                next_service: Micros::ZERO,
                min_txop: compute_txop(0, &s.spec, ctx.overhead),
                reported_backlog_bits: 0,
            })
            .collect();
        EnhancedEdd { ctx, slots, cap_start: Micros::ZERO }
    }

    fn slot(&self, station: StationId) -> usize {
        self.ctx
            .streams
            .iter()
            .position(|s| s.station == station)
            .unwrap_or_else(|| panic!("station {station} is not admitted"))
    }

    pub fn state(&self, station: StationId) -> &EddStreamState {
        &self.slots[self.slot(station)].state
    }

    pub fn next_service(&self, station: StationId) -> Micros {
        self.slots[self.slot(station)].next_service
    }

    fn record_backlog(&mut self, station: StationId, qs: Option<u16>) {
        let i = self.slot(station);
        self.slots[i].reported_backlog_bits = qs.map_or(0, |v| decode_queue_size(v) * 8);
    }
}

impl PollingPolicy for EnhancedEdd {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::Edd
    }

    fn qs_semantics(&self) -> QsSemantics {
        QsSemantics::QueueSize
    }

    fn on_cap_start(&mut self, now: Micros, budget: Micros) -> Vec<PollGrant> {
        self.cap_start = now;
        let mut remaining = budget;
        let mut out = Vec::new();
        for (s, slot) in self.ctx.streams.iter().zip(&self.slots) {
            if slot.next_service > now {
                continue;
            }
            let wanted = slot.state.next_txop().max(slot.min_txop);
            let available = remaining - self.ctx.poll_exchange;
            // a grant that cannot carry even an empty exchange is not worth a poll
            if available < self.ctx.overhead {
                continue;
            }
            let grant = wanted.min(available);
            remaining = available - grant;
            out.push(PollGrant { station: s.station, grant });
        }
        out
    }

    fn on_data_received(&mut self, station: StationId, qs: Option<u16>, _now: Micros) -> FeedbackOutcome {
        self.record_backlog(station, qs);
        FeedbackOutcome::NotUsed
    }

    fn on_null_received(&mut self, station: StationId, qs: Option<u16>, _now: Micros) {
        self.record_backlog(station, qs);
    }

    fn on_no_response(&mut self, _station: StationId, _now: Micros) {}

    fn on_txop_end(&mut self, station: StationId, used: Micros, granted: Micros) {
        let i = self.slot(station);
        let rate = self.ctx.streams[i].spec.min_phy_rate;
        let slot = &mut self.slots[i];
        let backlog = if slot.reported_backlog_bits > 0 {
            airtime(slot.reported_backlog_bits, rate) + self.ctx.overhead
        } else {
            Micros::ZERO
        };
        slot.state = edd_update(&slot.state, backlog, used.min(granted), granted, self.ctx.si);
        slot.next_service = self.cap_start + slot.state.msi_new;
        slot.reported_backlog_bits = 0;
    }
}
