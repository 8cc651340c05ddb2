//! TSPEC model and the reference scheduler's arithmetic: service interval,
//! per-stream TXOP, admission control, plus the Enhanced EDD adaptive terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{airtime, airtime_sum, Micros};

pub type StationId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum QosError {
    #[error("no traffic specifications supplied")]
    NoStreams,
    #[error("invalid traffic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid PHY profile: {0}")]
    InvalidPhy(String),
}

/// Negotiated TSPEC for one uplink traffic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    #[serde(rename = "mean_data_rate_bps")]
    pub mean_data_rate: u64,
    #[serde(rename = "nominal_msdu_bytes")]
    pub nominal_msdu_size: u32,
    #[serde(rename = "max_msdu_bytes")]
    pub max_msdu_size: u32,
    #[serde(rename = "delay_bound_us")]
    pub delay_bound: Micros,
    #[serde(rename = "min_service_interval_us")]
    pub min_service_interval: Micros,
    #[serde(rename = "max_service_interval_us")]
    pub max_service_interval: Micros,
    #[serde(rename = "min_phy_rate_bps")]
    pub min_phy_rate: u64,
}

impl TrafficSpec {
    fn video(nominal: u32, max: u32) -> Self {
        TrafficSpec {
            mean_data_rate: 16_000,
            nominal_msdu_size: nominal,
            max_msdu_size: max,
            delay_bound: Micros::from_ms(80),
            min_service_interval: Micros::from_ms(40),
            max_service_interval: Micros::from_ms(40),
            min_phy_rate: 54_000_000,
        }
    }

    /// H.263 "Formula 1" stream at 16 kbit/s.
    pub fn formula1() -> Self {
        Self::video(519, 4831)
    }

    /// H.263 "Soccer" stream at 16 kbit/s.
    pub fn soccer() -> Self {
        Self::video(655, 4647)
    }

    /// H.263 "Mr Bean" stream at 16 kbit/s.
    pub fn mr_bean() -> Self {
        Self::video(403, 3265)
    }

    pub fn validate(&self) -> Result<(), QosError> {
        let bad = |m: &str| Err(QosError::InvalidSpec(m.to_string()));
        if self.nominal_msdu_size == 0 {
            return bad("nominal MSDU size must be positive");
        }
        if self.max_msdu_size < self.nominal_msdu_size {
            return bad("maximum MSDU size is below the nominal size");
        }
        if self.mean_data_rate == 0 {
            return bad("mean data rate must be positive");
        }
        if self.min_phy_rate == 0 {
            return bad("minimum PHY rate must be positive");
        }
        if !self.min_service_interval.is_positive() {
            return bad("minimum service interval must be positive");
        }
        if self.max_service_interval < self.min_service_interval {
            return bad("maximum service interval is below the minimum");
        }
        if !self.delay_bound.is_positive() {
            return bad("delay bound must be positive");
        }
        Ok(())
    }
}

/// PHY/MAC timing constants. Defaults are an 802.11g PHY at 54 Mbit/s with a
/// 200 ms beacon interval and no contention period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyProfile {
    #[serde(rename = "sifs_us")]
    pub sifs: Micros,
    #[serde(rename = "pifs_us")]
    pub pifs: Micros,
    #[serde(rename = "slot_time_us")]
    pub slot_time: Micros,
    pub preamble_bits: u64,
    pub plcp_header_bits: u64,
    #[serde(rename = "plcp_rate_bps")]
    pub plcp_rate: u64,
    pub mac_header_bytes: u64,
    #[serde(rename = "data_rate_bps")]
    pub data_rate: u64,
    #[serde(rename = "basic_rate_bps")]
    pub basic_rate: u64,
    pub ack_body_bytes: u64,
    pub poll_body_bytes: u64,
    #[serde(rename = "beacon_interval_us")]
    pub beacon_interval: Micros,
    #[serde(rename = "contention_budget_us")]
    pub contention_budget: Micros,
}

impl Default for PhyProfile {
    fn default() -> Self {
        PhyProfile {
            sifs: Micros(10),
            pifs: Micros(30),
            slot_time: Micros(20),
            preamble_bits: 144,
            plcp_header_bits: 48,
            plcp_rate: 1_000_000,
            mac_header_bytes: 36,
            data_rate: 54_000_000,
            basic_rate: 6_000_000,
            ack_body_bytes: 14,
            poll_body_bytes: 36,
            beacon_interval: Micros::from_ms(200),
            contention_budget: Micros::ZERO,
        }
    }
}

impl PhyProfile {
    /// Superframe duration; equal to the beacon interval.
    pub fn superframe(&self) -> Micros {
        self.beacon_interval
    }

    pub fn validate(&self) -> Result<(), QosError> {
        let bad = |m: &str| Err(QosError::InvalidPhy(m.to_string()));
        if !self.sifs.is_positive() || !self.pifs.is_positive() || !self.slot_time.is_positive() {
            return bad("inter-frame spaces and slot time must be positive");
        }
        if self.plcp_rate == 0 || self.data_rate == 0 || self.basic_rate == 0 {
            return bad("rates must be positive");
        }
        if self.preamble_bits + self.plcp_header_bits == 0 {
            return bad("PLCP preamble and header cannot both be empty");
        }
        if self.mac_header_bytes == 0 || self.ack_body_bytes == 0 || self.poll_body_bytes == 0 {
            return bad("frame header and control frame sizes must be positive");
        }
        if !self.beacon_interval.is_positive() {
            return bad("beacon interval must be positive");
        }
        if self.contention_budget < Micros::ZERO || self.contention_budget >= self.beacon_interval {
            return bad("contention budget must lie in [0, beacon interval)");
        }
        Ok(())
    }

    fn plcp_segment(&self) -> (u64, u64) {
        (self.preamble_bits + self.plcp_header_bits, self.plcp_rate)
    }

    /// Preamble plus PLCP header, sent at the PLCP rate.
    pub fn plcp_time(&self) -> Micros {
        airtime(self.preamble_bits + self.plcp_header_bits, self.plcp_rate)
    }

    /// QoS Data or QoS Null frame: PLCP, then MAC header and payload at the data rate.
    pub fn data_frame_airtime(&self, payload_bits: u64) -> Micros {
        airtime_sum(&[self.plcp_segment(), (self.mac_header_bytes * 8 + payload_bits, self.data_rate)])
    }

    /// Control frame (poll, ACK): PLCP, then the frame body at the basic rate.
    pub fn control_frame_airtime(&self, body_bits: u64) -> Micros {
        airtime_sum(&[self.plcp_segment(), (body_bits, self.basic_rate)])
    }

    pub fn ack_airtime(&self) -> Micros {
        self.control_frame_airtime(self.ack_body_bytes * 8)
    }

    pub fn poll_airtime(&self) -> Micros {
        self.control_frame_airtime(self.poll_body_bytes * 8)
    }

    /// Channel time for one MSDU exchange: data, SIFS, ACK, SIFS.
    pub fn msdu_exchange_time(&self, payload_bits: u64) -> Micros {
        self.data_frame_airtime(payload_bits) + self.sifs + self.ack_airtime() + self.sifs
    }

    /// Channel time for one poll and the SIFS that follows it.
    pub fn poll_exchange_time(&self) -> Micros {
        self.poll_airtime() + self.sifs
    }
}

/// Fixed per-TXOP overhead `O`: headers, IFSs and the acknowledgment.
///
/// Equal to an MSDU exchange with an empty payload, so for any payload `p`,
/// `msdu_exchange_time(p) <= airtime(p, R) + O`. Poll airtime is charged by
/// the engine once per poll and is not part of `O`.
pub fn per_msdu_overhead(phy: &PhyProfile) -> Micros {
    phy.msdu_exchange_time(0)
}

/// Service interval: the largest submultiple of the beacon interval that does
/// not exceed the smallest maximum service interval.
pub fn compute_si(specs: &[&TrafficSpec], phy: &PhyProfile) -> Result<Micros, QosError> {
    let msi_min = specs.iter().map(|s| s.max_service_interval).min().ok_or(QosError::NoStreams)?;
    if !msi_min.is_positive() {
        return Err(QosError::InvalidSpec("maximum service interval must be positive".into()));
    }
    let bi = phy.beacon_interval.as_us();
    let k = (bi as u64).div_ceil(msi_min.as_us() as u64) as i64;
    Ok(Micros(bi / k))
}

/// MSDUs expected to arrive at the mean rate during one service interval.
pub fn compute_packet_count(si: Micros, spec: &TrafficSpec) -> u32 {
    let num = si.as_us().max(0) as u128 * spec.mean_data_rate as u128;
    let den = 1_000_000u128 * spec.nominal_msdu_size as u128 * 8;
    num.div_ceil(den) as u32
}

/// TXOP long enough for `n` nominal MSDUs or one maximum MSDU, whichever is
/// larger, plus overhead. Rounded up to the next microsecond.
pub fn compute_txop(n: u32, spec: &TrafficSpec, overhead: Micros) -> Micros {
    let nominal = n as u64 * spec.nominal_msdu_size as u64 * 8;
    let maximum = spec.max_msdu_size as u64 * 8;
    airtime(nominal.max(maximum), spec.min_phy_rate) + overhead
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmittedStream {
    pub id: StationId,
    pub spec: TrafficSpec,
    pub packets_per_si: u32,
    pub txop: Micros,
}

/// Admission outcome when the budget inequality fails.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("stream {candidate} rejected: TXOP demand {demand} per SI {si} exceeds the available {available}")]
pub struct AdmissionRejected {
    pub candidate: StationId,
    pub si: Micros,
    /// Sum of all TXOPs, candidate included, at the new SI.
    pub demand: Micros,
    /// `SI * (T - T_CP) / T`.
    pub available: Micros,
}

/// Streams admitted so far, in admission (polling-list) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleState {
    admitted: Vec<AdmittedStream>,
    si: Option<Micros>,
}

impl ScheduleState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admitted(&self) -> &[AdmittedStream] {
        &self.admitted
    }

    /// Global service interval, or `None` while nothing is admitted.
    pub fn si(&self) -> Option<Micros> {
        self.si
    }

    pub fn txop_of(&self, id: StationId) -> Option<Micros> {
        self.admitted.iter().find(|s| s.id == id).map(|s| s.txop)
    }

    /// Sum of TXOPs per SI, as a fraction.
    pub fn utilization(&self) -> f64 {
        match self.si {
            Some(si) => {
                let total: Micros = self.admitted.iter().map(|s| s.txop).sum();
                total.as_us() as f64 / si.as_us() as f64
            }
            None => 0.0,
        }
    }

    /// Tries to add `candidate`. The SI and every stream's TXOP are recomputed
    /// with the candidate included; `self` is never modified.
    pub fn admit(
        &self,
        id: StationId,
        candidate: &TrafficSpec,
        phy: &PhyProfile,
    ) -> Result<Result<ScheduleState, AdmissionRejected>, QosError> {
        candidate.validate()?;
        phy.validate()?;
        let mut specs: Vec<&TrafficSpec> = self.admitted.iter().map(|s| &s.spec).collect();
        specs.push(candidate);
        let si = compute_si(&specs, phy)?;
        let overhead = per_msdu_overhead(phy);

        let mut next: Vec<AdmittedStream> = self
            .admitted
            .iter()
            .map(|s| (s.id, s.spec.clone()))
            .chain(std::iter::once((id, candidate.clone())))
            .map(|(id, spec)| {
                let n = compute_packet_count(si, &spec);
                let txop = compute_txop(n, &spec, overhead);
                AdmittedStream { id, spec, packets_per_si: n, txop }
            })
            .collect();

        let t = phy.superframe().as_us() as i128;
        let t_cp = phy.contention_budget.as_us() as i128;
        let demand: Micros = next.iter().map(|s| s.txop).sum();
        // sum(TXOP)/SI <= (T - T_CP)/T, cross-multiplied to stay in integers
        if demand.as_us() as i128 * t > (t - t_cp) * si.as_us() as i128 {
            let available = Micros(((t - t_cp) * si.as_us() as i128 / t) as i64);
            return Ok(Err(AdmissionRejected { candidate: id, si, demand, available }));
        }
        next.shrink_to_fit();
        Ok(Ok(ScheduleState { admitted: next, si: Some(si) }))
    }
}

/// Per-stream Enhanced EDD bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EddStreamState {
    /// Running mean of airtime used per completed SI.
    pub txop_avg: Micros,
    /// Time needed to clear the backlog reported at the last SI.
    pub td_backlog: Micros,
    pub td_cur: Micros,
    /// TXOP left unused at the last SI.
    pub td_free: Micros,
    pub msi_new: Micros,
    used_total: i64,
    samples: i64,
}

impl EddStreamState {
    pub fn new(msi: Micros) -> Self {
        EddStreamState { msi_new: msi, ..Default::default() }
    }

    /// Grant for the next SI: average requirement plus the backlog term.
    pub fn next_txop(&self) -> Micros {
        self.txop_avg + self.td_backlog
    }

    pub fn samples(&self) -> i64 {
        self.samples
    }
}

/// Folds one SI's outcome into the EDD state.
///
/// A reported backlog advances the next service by the time needed to clear
/// it; otherwise unused TXOP advances it by the leftover. The base interval is
/// `msi` every time, so advances do not compound.
pub fn edd_update(
    stream: &EddStreamState,
    backlog: Micros,
    used_txop: Micros,
    granted_txop: Micros,
    msi: Micros,
) -> EddStreamState {
    debug_assert!(used_txop <= granted_txop, "used {used_txop} > granted {granted_txop}");
    let backlog = backlog.max(Micros::ZERO);
    let used = used_txop.max(Micros::ZERO);
    let used_total = stream.used_total + used.as_us();
    let samples = stream.samples + 1;
    let txop_avg = Micros((used_total + samples - 1) / samples);
    let td_free = granted_txop.saturating_sub(used);
    let advance = if backlog.is_positive() { backlog } else { td_free };
    EddStreamState {
        txop_avg,
        td_backlog: backlog,
        td_cur: backlog,
        td_free,
        msi_new: msi.saturating_sub(advance),
        used_total,
        samples,
    }
}
