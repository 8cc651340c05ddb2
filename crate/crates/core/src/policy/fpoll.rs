//! Feedback polling: stations report when their next video frame arrives and
//! the coordinator skips them until then.

use super::{FeedbackOutcome, PolicyContext, PollGrant, PollingPolicy, QsSemantics, SchedulerKind};
use crate::engine::frame::decode_next_arrival;
use crate::qos::StationId;
use crate::time::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpollMode {
    /// Not polled yet.
    FirstCap,
    /// Polled only once the reported arrival time has been reached.
    Feedback,
    /// Polled every SI until feedback can be trusted again.
    Fallback,
}

/// Coordinator-side state for one station.
#[derive(Debug, Clone, PartialEq)]
pub struct FpollEntry {
    pub mode: FpollMode,
    /// Absolute time of the next frame, anchored at the start of the CAP in
    /// which the feedback arrived. `None` means no further frame is known.
    pub next_arrival: Option<Micros>,
    /// Data frames received since entering fallback. Feedback is adopted from
    /// the second one; a startup fallback begins at 1.
    pub post_loss_packets_seen: u8,
}

impl FpollEntry {
    fn new() -> Self {
        FpollEntry { mode: FpollMode::FirstCap, next_arrival: None, post_loss_packets_seen: 0 }
    }

    /// Remaining wait as of the CAP at `now`, the countdown form of the state.
    pub fn arrival_countdown(&self, now: Micros) -> Option<Micros> {
        self.next_arrival.map(|a| a - now)
    }

    fn pollable(&self, now: Micros) -> bool {
        match self.mode {
            FpollMode::FirstCap | FpollMode::Fallback => true,
            FpollMode::Feedback => self.next_arrival.is_none_or(|a| a <= now),
        }
    }
}

pub struct FPoll {
    ctx: PolicyContext,
    entries: Vec<FpollEntry>,
    cap_start: Micros,
}

impl FPoll {
    pub fn new(ctx: PolicyContext) -> Self {
        let entries = vec![FpollEntry::new(); ctx.streams.len()];
        FPoll { ctx, entries, cap_start: Micros::ZERO }
    }

    fn slot(&self, station: StationId) -> usize {
        self.ctx
            .streams
            .iter()
            .position(|s| s.station == station)
            .unwrap_or_else(|| panic!("station {station} is not admitted"))
    }

    pub fn entry(&self, station: StationId) -> &FpollEntry {
        &self.entries[self.slot(station)]
    }

    fn adopt(&mut self, i: usize, qs: Option<u16>) -> FeedbackOutcome {
        let anchor = self.cap_start;
        let e = &mut self.entries[i];
        e.mode = FpollMode::Feedback;
        e.post_loss_packets_seen = 0;
        e.next_arrival = qs.and_then(decode_next_arrival).map(|d| anchor + d);
        if e.next_arrival.is_some() {
            FeedbackOutcome::Adopted
        } else {
            FeedbackOutcome::NoNextFrame
        }
    }

    fn on_no_data(&mut self, station: StationId) {
        let i = self.slot(station);
        let e = &mut self.entries[i];
        match e.mode {
            FpollMode::FirstCap => {
                e.mode = FpollMode::Fallback;
                e.post_loss_packets_seen = 1;
            }
            FpollMode::Feedback => {
                e.mode = FpollMode::Fallback;
                e.post_loss_packets_seen = 0;
            }
            FpollMode::Fallback => {}
        }
    }
}

impl PollingPolicy for FPoll {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::Fpoll
    }

    fn qs_semantics(&self) -> QsSemantics {
        QsSemantics::NextArrival
    }

    fn on_cap_start(&mut self, now: Micros, _budget: Micros) -> Vec<PollGrant> {
        self.cap_start = now;
        self.ctx
            .streams
            .iter()
            .zip(&self.entries)
            .filter(|(_, e)| e.pollable(now))
            .map(|(s, _)| PollGrant { station: s.station, grant: s.txop })
            .collect()
    }

    fn on_data_received(&mut self, station: StationId, qs: Option<u16>, _now: Micros) -> FeedbackOutcome {
        let i = self.slot(station);
        let e = &mut self.entries[i];
        match e.mode {
            FpollMode::FirstCap | FpollMode::Feedback => self.adopt(i, qs),
            FpollMode::Fallback => {
                e.post_loss_packets_seen += 1;
                if e.post_loss_packets_seen >= 2 {
                    self.adopt(i, qs)
                } else {
                    FeedbackOutcome::Ignored
                }
            }
        }
    }

    fn on_null_received(&mut self, station: StationId, _qs: Option<u16>, _now: Micros) {
        self.on_no_data(station);
    }

    fn on_no_response(&mut self, station: StationId, _now: Micros) {
        self.on_no_data(station);
    }
}
