use super::{FeedbackOutcome, PolicyContext, PollGrant, PollingPolicy, QsSemantics, SchedulerKind};
use crate::qos::StationId;
use crate::time::Micros;

/// Reference round-robin scheduler: every admitted station, every SI, with
/// its fixed TXOP.
pub struct ReferenceHcca {
    ctx: PolicyContext,
}

impl ReferenceHcca {
    pub fn new(ctx: PolicyContext) -> Self {
        ReferenceHcca { ctx }
    }
}

impl PollingPolicy for ReferenceHcca {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::Hcca
    }

    fn qs_semantics(&self) -> QsSemantics {
        QsSemantics::QueueSize
    }

    fn on_cap_start(&mut self, _now: Micros, _budget: Micros) -> Vec<PollGrant> {
        self.ctx.streams.iter().map(|s| PollGrant { station: s.station, grant: s.txop }).collect()
    }

    fn on_data_received(&mut self, _: StationId, _: Option<u16>, _: Micros) -> FeedbackOutcome {
        FeedbackOutcome::NotUsed
    }

    fn on_null_received(&mut self, _: StationId, _: Option<u16>, _: Micros) {}

    fn on_no_response(&mut self, _: StationId, _: Micros) {}
}
