//! MAC frames exchanged during a CAP and the QS subfield encodings.

use crate::qos::{PhyProfile, StationId};
use crate::time::Micros;

/// QS value meaning "no further frame known".
pub const QS_NO_NEXT_FRAME: u16 = u16::MAX;
/// Largest next-arrival value that can be reported, in milliseconds.
pub const QS_MAX_MS: u16 = u16::MAX - 1;
/// Largest queue-size report (802.11e saturates at 254 units of 256 octets).
pub const QS_MAX_QUEUE_UNITS: u16 = 254;

/// Encodes the time until `next` as whole milliseconds, rounded up.
pub fn encode_next_arrival(next: Option<Micros>, now: Micros) -> u16 {
    match next {
        None => QS_NO_NEXT_FRAME,
        Some(t) => {
            let us = (t - now).as_us().max(0);
            let ms = (us + 999) / 1000;
            ms.min(QS_MAX_MS as i64) as u16
        }
    }
}

pub fn decode_next_arrival(value: u16) -> Option<Micros> {
    (value != QS_NO_NEXT_FRAME).then(|| Micros::from_ms(value as i64))
}

pub fn encode_queue_size(bytes: u64) -> u16 {
    bytes.div_ceil(256).min(QS_MAX_QUEUE_UNITS as u64) as u16
}

pub fn decode_queue_size(value: u16) -> u64 {
    value as u64 * 256
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    QosPoll,
    QosData,
    QosNull,
    Ack,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::QosPoll => "QosPoll",
            FrameKind::QosData => "QosData",
            FrameKind::QosNull => "QosNull",
            FrameKind::Ack => "Ack",
        }
    }
}

/// Identity of the MSDU carried by a QoS Data frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsduRef {
    pub frame_index: usize,
    pub generated: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacFrame {
    pub kind: FrameKind,
    pub payload_bits: u64,
    pub qs: Option<u16>,
    pub station: StationId,
    /// Set on polls only.
    pub txop_grant: Option<Micros>,
    /// Set on QoS Data only.
    pub msdu: Option<MsduRef>,
}

impl MacFrame {
    pub fn poll(station: StationId, grant: Micros, phy: &PhyProfile) -> Self {
        MacFrame {
            kind: FrameKind::QosPoll,
            payload_bits: phy.poll_body_bytes * 8,
            qs: None,
            station,
            txop_grant: Some(grant),
            msdu: None,
        }
    }

    pub fn null(station: StationId, qs: u16) -> Self {
        MacFrame { kind: FrameKind::QosNull, payload_bits: 0, qs: Some(qs), station, txop_grant: None, msdu: None }
    }

    pub fn data(station: StationId, size_bits: u64, qs: u16, msdu: MsduRef) -> Self {
        MacFrame {
            kind: FrameKind::QosData,
            payload_bits: size_bits,
            qs: Some(qs),
            station,
            txop_grant: None,
            msdu: Some(msdu),
        }
    }

    pub fn ack(station: StationId, phy: &PhyProfile) -> Self {
        MacFrame {
            kind: FrameKind::Ack,
            payload_bits: phy.ack_body_bytes * 8,
            qs: None,
            station,
            txop_grant: None,
            msdu: None,
        }
    }
}

/// On-air duration of a frame, rounded up to the microsecond.
///
/// Data and Null frames carry the MAC header at the data rate; polls and ACKs
/// are sent at the basic rate.
pub fn frame_duration(frame: &MacFrame, phy: &PhyProfile) -> Micros {
    match frame.kind {
        FrameKind::QosData | FrameKind::QosNull => phy.data_frame_airtime(frame.payload_bits),
        FrameKind::QosPoll | FrameKind::Ack => phy.control_frame_airtime(frame.payload_bits),
    }
}
