//! Per-node statistics and the line-delimited event trace.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::mac::{CwCause, Medium};
use crate::scenario::Tech;
use crate::units::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    WifiPpdu,
    NruBurst,
    Reservation,
    Ack,
}

impl TxKind {
    /// Energy that Wi-Fi receivers decode as a Wi-Fi preamble.
    pub fn is_wifi(self) -> bool {
        matches!(self, TxKind::WifiPpdu | TxKind::Ack)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub tech: Tech,
    pub payload_delivered_bits: f64,
    pub airtime_success: SimTime,
    pub airtime_collision: SimTime,
    pub tx_attempts: u64,
    /// Transmissions per MCS index.
    pub mcs_histogram: Vec<u64>,
    /// Total reservation-signal time (gNBs).
    pub reservation_time: SimTime,
    /// Channel accesses that went through the reservation step (gNBs).
    pub reservations: u64,
}

impl NodeStats {
    pub fn new(tech: Tech, n_rates: usize) -> Self {
        NodeStats {
            tech,
            payload_delivered_bits: 0.0,
            airtime_success: SimTime::ZERO,
            airtime_collision: SimTime::ZERO,
            tx_attempts: 0,
            mcs_histogram: vec![0; n_rates],
            reservation_time: SimTime::ZERO,
            reservations: 0,
        }
    }

    pub fn throughput_mbps(&self, duration: SimTime) -> f64 {
        self.payload_delivered_bits / duration.as_micros_f64()
    }

    pub fn mean_reservation_us(&self) -> Option<f64> {
        (self.reservations > 0).then(|| self.reservation_time.as_micros_f64() / self.reservations as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    TxStart { kind: TxKind, end_ns: u64, rate_mbps: f64, payload_bytes: u32, power_dbm: f64 },
    TxEnd { kind: TxKind, segments: u32, segments_ok: u32, delivered_bits: f64 },
    Medium { state: Medium, wifi_dbm: f64, total_dbm: f64 },
    Cw { old: u32, new: u32, cause: CwCause },
    Drop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t_ns: u64,
    pub node: usize,
    #[serde(flatten)]
    pub event: LogEvent,
}

impl LogRecord {
    pub fn time(&self) -> SimTime {
        SimTime(self.t_ns)
    }
}

/// Writes one JSON object per line.
pub fn write_trace<W: Write>(mut out: W, log: &[LogRecord]) -> io::Result<()> {
    for rec in log {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
