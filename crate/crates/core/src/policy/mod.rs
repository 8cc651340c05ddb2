//! Polling policies: which stations the hybrid coordinator polls at each CAP,
//! and with what TXOP.

mod edd;
mod fpoll;
mod hcca;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::qos::{per_msdu_overhead, PhyProfile, ScheduleState, StationId, TrafficSpec};
use crate::time::Micros;

pub use edd::EnhancedEdd;
pub use fpoll::{FPoll, FpollEntry, FpollMode};
pub use hcca::ReferenceHcca;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Hcca,
    Edd,
    Fpoll,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [SchedulerKind::Hcca, SchedulerKind::Edd, SchedulerKind::Fpoll];

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Hcca => "hcca",
            SchedulerKind::Edd => "edd",
            SchedulerKind::Fpoll => "fpoll",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "hcca" => Ok(SchedulerKind::Hcca),
            "edd" => Ok(SchedulerKind::Edd),
            "fpoll" => Ok(SchedulerKind::Fpoll),
            other => Err(format!("unknown scheduler `{other}` (expected hcca, edd or fpoll)")),
        }
    }
}

/// One entry of a CAP's poll list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollGrant {
    pub station: StationId,
    pub grant: Micros,
}

/// What stations put in the QS subfield of their QoS Data/Null frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsSemantics {
    /// Milliseconds until the sender's next video frame.
    NextArrival,
    /// Standard queue size, in units of 256 octets.
    QueueSize,
}

/// How a policy treated the QS value of a received data frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackOutcome {
    Adopted,
    Ignored,
    /// The sender reported no further frame.
    NoNextFrame,
    /// The policy does not use arrival feedback.
    NotUsed,
}

impl FeedbackOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackOutcome::Adopted => "adopted",
            FeedbackOutcome::Ignored => "ignored",
            FeedbackOutcome::NoNextFrame => "no-next",
            FeedbackOutcome::NotUsed => "unused",
        }
    }
}

/// Hybrid-coordinator side of a polling scheme.
///
/// The engine calls `on_cap_start` at each SI boundary, then reports what each
/// polled station sent back. `on_data_received` fires once per QoS Data frame
/// that reached the coordinator; `on_txop_end` fires once per poll after the
/// station's TXOP is over.
pub trait PollingPolicy: Send {
    fn kind(&self) -> SchedulerKind;

    fn qs_semantics(&self) -> QsSemantics;

    /// Ordered poll set for the CAP starting at `now`. `budget` is the channel
    /// time available to the CAP, polls included.
    fn on_cap_start(&mut self, now: Micros, budget: Micros) -> Vec<PollGrant>;

    fn on_data_received(&mut self, station: StationId, qs: Option<u16>, now: Micros) -> FeedbackOutcome;

    fn on_null_received(&mut self, station: StationId, qs: Option<u16>, now: Micros);

    /// The station was polled but nothing it sent was received.
    fn on_no_response(&mut self, station: StationId, now: Micros);

    fn on_txop_end(&mut self, _station: StationId, _used: Micros, _granted: Micros) {}
}

/// Admitted roster shared by all policies.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    pub si: Micros,
    pub overhead: Micros,
    pub poll_exchange: Micros,
    pub streams: Vec<RosterEntry>,
}

#[derive(Debug, Clone)]
pub struct RosterEntry {
    pub station: StationId,
    pub spec: TrafficSpec,
    pub txop: Micros,
}

impl PolicyContext {
    pub fn new(schedule: &ScheduleState, phy: &PhyProfile) -> Self {
        PolicyContext {
            si: schedule.si().unwrap_or(phy.beacon_interval),
            overhead: per_msdu_overhead(phy),
            poll_exchange: phy.poll_exchange_time(),
            streams: schedule
                .admitted()
                .iter()
                .map(|s| RosterEntry { station: s.id, spec: s.spec.clone(), txop: s.txop })
                .collect(),
        }
    }
}

pub fn build_policy(kind: SchedulerKind, ctx: PolicyContext) -> Box<dyn PollingPolicy> {
    match kind {
        SchedulerKind::Hcca => Box::new(ReferenceHcca::new(ctx)),
        SchedulerKind::Edd => Box::new(EnhancedEdd::new(ctx)),
        SchedulerKind::Fpoll => Box::new(FPoll::new(ctx)),
    }
}
