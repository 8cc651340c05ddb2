//! Deterministic discrete-event core.
//!
//! Beacons fire every beacon interval and each beacon opens `BI / SI` CAPs.
//! Within a CAP the coordinator polls stations one at a time; a polled
//! station answers after SIFS with QoS Data frames (each acknowledged) or a
//! single QoS Null, and the next poll follows SIFS after the last ACK. A data
//! frame lost in flight is never acknowledged: the coordinator reclaims the
//! channel PIFS after it ends. Unused CAP time is left to the contention
//! period.
//!
//! Events are dispatched in `(timestamp, sequence)` order. Frame arrivals are
//! queued before the run starts, so an arrival always precedes any
//! transmission ending at the same microsecond.

pub mod event;
pub mod frame;
pub mod station;

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::metrics::{MetricsLedger, PacketRecord, PollOutcome, PollRecord};
use crate::policy::{build_policy, PolicyContext, PollGrant, PollingPolicy, SchedulerKind};
use crate::qos::{AdmissionRejected, PhyProfile, QosError, ScheduleState, StationId, TrafficSpec};
use crate::time::Micros;
use crate::trace::VideoTrace;

use event::{EventKind, EventQueue, TxDescriptor};
use frame::{frame_duration, FrameKind, MacFrame};
use station::StationModel;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Qos(#[from] QosError),
    #[error("admission failed: {0}")]
    Admission(#[from] AdmissionRejected),
    #[error("schedule infeasible at {at}: {reason}\nrecent events:\n{}", timeline.join("\n"))]
    Infeasible { at: Micros, reason: String, timeline: Vec<String> },
}

/// Frames to discard in flight, by `(station, trace frame index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LossInjector {
    drops: BTreeSet<(StationId, usize)>,
}

impl LossInjector {
    pub fn new(drops: impl IntoIterator<Item = (StationId, usize)>) -> Self {
        LossInjector { drops: drops.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.drops.is_empty()
    }

    pub fn drops(&self, station: StationId, frame_index: usize) -> bool {
        self.drops.contains(&(station, frame_index))
    }

    pub fn entries(&self) -> impl Iterator<Item = &(StationId, usize)> {
        self.drops.iter()
    }
}

#[derive(Debug, Clone)]
pub struct StationSetup {
    pub trace: Arc<VideoTrace>,
    pub spec: TrafficSpec,
    /// Added to the common traffic start time.
    pub start_offset: Micros,
}

/// A fully resolved scenario, traces loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub phy: PhyProfile,
    pub stations: Vec<StationSetup>,
    pub scheduler: SchedulerKind,
    pub duration: Micros,
    pub traffic_start: Micros,
    pub loss: LossInjector,
    pub record_events: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        self.phy.validate()?;
        if !self.duration.is_positive() {
            return bad("simulation duration must be positive".into());
        }
        if self.traffic_start < Micros::ZERO || self.traffic_start >= self.duration {
            return bad(format!(
                "traffic start {} must lie within the simulation duration {}",
                self.traffic_start, self.duration
            ));
        }
        for (i, s) in self.stations.iter().enumerate() {
            s.spec.validate()?;
            if s.start_offset < Micros::ZERO {
                return bad(format!("station {i}: negative start offset"));
            }
            let max_bits = s.spec.max_msdu_size as u64 * 8;
            if s.trace.max_size_bits() as u64 > max_bits {
                return bad(format!(
                    "station {i}: trace frame of {} bits exceeds the maximum MSDU size of {max_bits} bits",
                    s.trace.max_size_bits()
                ));
            }
        }
        if let Some(&(st, _)) = self.loss.entries().find(|(st, _)| *st >= self.stations.len()) {
            return bad(format!("loss schedule names unknown station {st}"));
        }
        Ok(())
    }

    /// Admits every station in order.
    pub fn admit_all(&self) -> Result<ScheduleState, SimError> {
        let mut state = ScheduleState::new();
        for (i, s) in self.stations.iter().enumerate() {
            state = state.admit(i, &s.spec, &self.phy)??;
        }
        Ok(state)
    }
}

/// One line of the event log.
///
/// CSV columns: `timestamp_us,event,station,frame,bits,start_us,detail`.
/// Empty fields are left blank. `TxComplete` lines carry the transmission
/// start in `start_us`; `detail` holds `key=value` pairs separated by `;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    pub at: Micros,
    pub event: &'static str,
    pub station: Option<StationId>,
    pub frame: Option<FrameKind>,
    pub bits: Option<u64>,
    pub start: Option<Micros>,
    pub detail: String,
}

impl LogLine {
    pub const CSV_HEADER: &'static str = "timestamp_us,event,station,frame,bits,start_us,detail";

    pub fn to_csv(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{}",
            self.at.as_us(),
            self.event,
            opt(self.station),
            self.frame.map(|f| f.as_str()).unwrap_or(""),
            opt(self.bits),
            opt(self.start.map(|s| s.as_us())),
            self.detail
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub lines: Vec<LogLine>,
}

impl EventLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.lines.len() * 48);
        s.push_str(LogLine::CSV_HEADER);
        s.push('\n');
        for l in &self.lines {
            let _ = writeln!(s, "{}", l.to_csv());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PollTranscript {
    pub station: StationId,
    pub grant: Micros,
    pub polled_at: Micros,
    pub outcome: PollOutcome,
    /// Channel time of the station's data exchanges.
    pub used: Micros,
}

/// What happened during one CAP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapTranscript {
    pub start: Micros,
    pub end: Micros,
    pub polls: Vec<PollTranscript>,
}

impl CapTranscript {
    pub fn polled(&self) -> Vec<StationId> {
        self.polls.iter().map(|p| p.station).collect()
    }

    pub fn nulls(&self) -> usize {
        self.polls.iter().filter(|p| p.outcome == PollOutcome::Null).count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: MetricsLedger,
    pub caps: Vec<CapTranscript>,
    pub schedule: ScheduleState,
    pub event_log: Option<EventLog>,
}

/// Runs the scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let schedule = scenario.admit_all()?;
    let mut engine = Engine::new(scenario, &schedule);
    engine.prime();
    while let Some(ev) = engine.queue.pop() {
        engine.dispatch(ev.at, ev.kind)?;
    }
    Ok(engine.finish(schedule))
}

const RECENT_LINES: usize = 32;

struct ActiveTxop {
    station: StationId,
    grant: Micros,
    polled_at: Micros,
    plan: VecDeque<MacFrame>,
    data_received: u32,
    null_received: bool,
    used: Micros,
}

struct ActiveCap {
    start: Micros,
    pending: VecDeque<PollGrant>,
    polls: Vec<PollTranscript>,
    txop: Option<ActiveTxop>,
}

struct Engine<'a> {
    sc: &'a Scenario,
    si: Micros,
    caps_per_beacon: i64,
    cap_budget: Micros,
    policy: Box<dyn PollingPolicy>,
    stations: Vec<StationModel>,
    queue: EventQueue,
    ledger: MetricsLedger,
    caps: Vec<CapTranscript>,
    cap: Option<ActiveCap>,
    channel_free_at: Micros,
    log: Option<Vec<LogLine>>,
    recent: VecDeque<LogLine>,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, schedule: &ScheduleState) -> Self {
        let phy = &sc.phy;
        let si = schedule.si().unwrap_or(phy.beacon_interval);
        let t = phy.superframe().as_us() as i128;
        let cap_budget = Micros(((t - phy.contention_budget.as_us() as i128) * si.as_us() as i128 / t) as i64);
        let stations = sc
            .stations
            .iter()
            .enumerate()
            .map(|(i, s)| StationModel::new(i, s.spec.clone(), Arc::clone(&s.trace), sc.traffic_start + s.start_offset))
            .collect();
        Engine {
            sc,
            si,
            caps_per_beacon: phy.beacon_interval.as_us() / si.as_us(),
            cap_budget,
            policy: build_policy(sc.scheduler, PolicyContext::new(schedule, phy)),
            stations,
            queue: EventQueue::default(),
            ledger: MetricsLedger::new(sc.stations.len(), sc.duration),
            caps: Vec::new(),
            cap: None,
            channel_free_at: Micros::ZERO,
            log: sc.record_events.then(Vec::new),
            recent: VecDeque::with_capacity(RECENT_LINES),
        }
    }

    fn prime(&mut self) {
        for s in &self.stations {
            for (i, t) in s.arrivals_before(self.sc.duration) {
                self.queue.push(t, EventKind::FrameGenerated { station: s.id, frame_index: i });
            }
        }
        self.queue.push(Micros::ZERO, EventKind::Beacon);
    }

    fn emit(&mut self, line: LogLine) {
        if self.recent.len() == RECENT_LINES {
            self.recent.pop_front();
        }
        if let Some(log) = &mut self.log {
            log.push(line.clone());
        }
        self.recent.push_back(line);
    }

    fn fault(&self, at: Micros, reason: String) -> SimError {
        SimError::Infeasible { at, reason, timeline: self.recent.iter().map(LogLine::to_csv).collect() }
    }

    fn dispatch(&mut self, at: Micros, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::Beacon => self.on_beacon(at),
            EventKind::CapStart => self.on_cap_start(at),
            EventKind::FrameGenerated { station, frame_index } => {
                let m = self.stations[station].generate(frame_index);
                let bits = m.size_bits;
                self.ledger.stations[station].generated += 1;
                self.emit(LogLine {
                    at,
                    event: "FrameGenerated",
                    station: Some(station),
                    frame: None,
                    bits: Some(bits),
                    start: None,
                    detail: format!("idx={frame_index}"),
                });
                Ok(())
            }
            EventKind::TxComplete(tx) => self.on_tx_complete(at, tx),
            EventKind::PollTimeout { station } => {
                self.emit(LogLine {
                    at,
                    event: "PollTimeout",
                    station: Some(station),
                    frame: None,
                    bits: None,
                    start: None,
                    detail: String::new(),
                });
                self.finish_txop(at)
            }
        }
    }

    fn on_beacon(&mut self, at: Micros) -> Result<(), SimError> {
        self.emit(LogLine {
            at,
            event: "Beacon",
            station: None,
            frame: None,
            bits: None,
            start: None,
            detail: String::new(),
        });
        let next = at + self.sc.phy.beacon_interval;
        if next < self.sc.duration {
            self.queue.push(next, EventKind::Beacon);
        }
        if !self.stations.is_empty() {
            for j in 0..self.caps_per_beacon {
                let c = at + self.si * j;
                if c < self.sc.duration {
                    self.queue.push(c, EventKind::CapStart);
                }
            }
        }
        Ok(())
    }

    fn on_cap_start(&mut self, at: Micros) -> Result<(), SimError> {
        if self.cap.is_some() || self.channel_free_at > at {
            return Err(self.fault(at, "CAP starts while the previous one is still running".into()));
        }
        let grants = self.policy.on_cap_start(at, self.cap_budget);
        let poll_cost = self.sc.phy.poll_exchange_time();
        let demand: Micros = grants.iter().map(|g| poll_cost + g.grant).sum();
        let mut detail = String::from("polls=");
        for (k, g) in grants.iter().enumerate() {
            if k > 0 {
                detail.push(';');
            }
            let _ = write!(detail, "{}:{}", g.station, g.grant.as_us());
        }
        self.emit(LogLine { at, event: "CapStart", station: None, frame: None, bits: None, start: None, detail });
        if demand > self.cap_budget {
            return Err(self.fault(at, format!("granted time {demand} exceeds the CAP budget {}", self.cap_budget)));
        }
        self.cap = Some(ActiveCap { start: at, pending: grants.into(), polls: Vec::new(), txop: None });
        self.next_poll(at)
    }

    fn next_poll(&mut self, at: Micros) -> Result<(), SimError> {
        let cap = self.cap.as_mut().expect("inside a CAP");
        match cap.pending.pop_front() {
            Some(g) => {
                cap.txop = Some(ActiveTxop {
                    station: g.station,
                    grant: g.grant,
                    polled_at: at,
                    plan: VecDeque::new(),
                    data_received: 0,
                    null_received: false,
                    used: Micros::ZERO,
                });
                let poll = MacFrame::poll(g.station, g.grant, &self.sc.phy);
                self.transmit(poll, at, false)
            }
            None => {
                let cap = self.cap.take().expect("inside a CAP");
                let end = self.channel_free_at.max(cap.start);
                if end - cap.start > self.cap_budget {
                    return Err(self.fault(
                        end,
                        format!("CAP from {} ran {} past its budget", cap.start, end - cap.start - self.cap_budget),
                    ));
                }
                self.caps.push(CapTranscript { start: cap.start, end, polls: cap.polls });
                Ok(())
            }
        }
    }

    fn transmit(&mut self, frame: MacFrame, start: Micros, dropped: bool) -> Result<(), SimError> {
        if start < self.channel_free_at {
            return Err(self.fault(
                start,
                format!("{} overlaps a transmission ending at {}", frame.kind.as_str(), self.channel_free_at),
            ));
        }
        let end = start + frame_duration(&frame, &self.sc.phy);
        self.channel_free_at = end;
        self.queue.push(end, EventKind::TxComplete(TxDescriptor { frame, start, dropped }));
        Ok(())
    }

    fn on_tx_complete(&mut self, at: Micros, tx: TxDescriptor) -> Result<(), SimError> {
        let sifs = self.sc.phy.sifs;
        let f = &tx.frame;
        let s = f.station;
        let mut detail = String::new();
        match f.kind {
            FrameKind::QosPoll => {
                let grant = f.txop_grant.expect("polls carry a grant");
                let _ = write!(detail, "grant={}", grant.as_us());
                self.log_tx(at, &tx, detail);
                let plan = self.stations[s].serve_poll(grant, at + sifs, &self.sc.phy, self.policy.qs_semantics());
                self.txop_mut().plan = plan.into();
                return self.send_station_frame(at + sifs);
            }
            FrameKind::QosData => {
                let msdu = f.msdu.expect("data frames carry an MSDU");
                self.stations[s].pop_sent(msdu.frame_index);
                let qs = f.qs.expect("QoS data carries QS");
                if tx.dropped {
                    let _ = write!(detail, "idx={};qs={qs};dropped", msdu.frame_index);
                    self.log_tx(at, &tx, detail);
                    self.ledger.dropped.push((s, msdu.frame_index));
                    self.ledger.stations[s].dropped += 1;
                    self.queue.push(at + self.sc.phy.pifs, EventKind::PollTimeout { station: s });
                    return Ok(());
                }
                self.ledger.record_packet(PacketRecord {
                    stream: s,
                    frame_index: msdu.frame_index,
                    generated: msdu.generated,
                    sent: tx.start,
                    received: at,
                    size_bits: f.payload_bits,
                });
                let outcome = self.policy.on_data_received(s, Some(qs), at);
                let cost = self.sc.phy.msdu_exchange_time(f.payload_bits);
                let txop = self.txop_mut();
                txop.data_received += 1;
                txop.used += cost;
                let _ = write!(detail, "idx={};qs={qs};fb={}", msdu.frame_index, outcome.as_str());
            }
            FrameKind::QosNull => {
                let qs = f.qs;
                self.policy.on_null_received(s, qs, at);
                self.txop_mut().null_received = true;
                if let Some(qs) = qs {
                    let _ = write!(detail, "qs={qs}");
                }
            }
            FrameKind::Ack => {
                self.log_tx(at, &tx, detail);
                let more = !self.txop_mut().plan.is_empty();
                return if more { self.send_station_frame(at + sifs) } else { self.finish_txop(at + sifs) };
            }
        }
        self.log_tx(at, &tx, detail);
        let ack = MacFrame::ack(s, &self.sc.phy);
        self.transmit(ack, at + sifs, false)
    }

    fn log_tx(&mut self, at: Micros, tx: &TxDescriptor, detail: String) {
        self.emit(LogLine {
            at,
            event: "TxComplete",
            station: Some(tx.frame.station),
            frame: Some(tx.frame.kind),
            bits: Some(tx.frame.payload_bits),
            start: Some(tx.start),
            detail,
        });
    }

    fn txop_mut(&mut self) -> &mut ActiveTxop {
        self.cap.as_mut().and_then(|c| c.txop.as_mut()).expect("inside a TXOP")
    }

    fn send_station_frame(&mut self, at: Micros) -> Result<(), SimError> {
        let frame = self.txop_mut().plan.pop_front().expect("a polled station always answers");
        let dropped = frame.kind == FrameKind::QosData
            && self.sc.loss.drops(frame.station, frame.msdu.expect("data carries an MSDU").frame_index);
        self.transmit(frame, at, dropped)
    }

    fn finish_txop(&mut self, next_at: Micros) -> Result<(), SimError> {
        let cap = self.cap.as_mut().expect("inside a CAP");
        let cap_start = cap.start;
        let t = cap.txop.take().expect("inside a TXOP");
        let outcome = if t.data_received > 0 {
            PollOutcome::Data { frames: t.data_received }
        } else if t.null_received {
            PollOutcome::Null
        } else {
            PollOutcome::NoResponse
        };
        cap.polls.push(PollTranscript {
            station: t.station,
            grant: t.grant,
            polled_at: t.polled_at,
            outcome,
            used: t.used,
        });
        if outcome == PollOutcome::NoResponse {
            self.policy.on_no_response(t.station, next_at);
        }
        self.policy.on_txop_end(t.station, t.used, t.grant);
        self.ledger.record_poll(PollRecord { cap_start, polled_at: t.polled_at, station: t.station, outcome });
        self.next_poll(next_at)
    }

    fn finish(mut self, schedule: ScheduleState) -> RunOutput {
        for s in &self.stations {
            self.ledger.stations[s.id].queued_at_end = s.queue().len() as u64;
        }
        RunOutput {
            ledger: self.ledger,
            caps: self.caps,
            schedule,
            event_log: self.log.map(|lines| EventLog { lines }),
        }
    }
}
