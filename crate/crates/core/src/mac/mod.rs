//! Channel-access state machines.
//!
//! Both technologies share the same listen-before-talk skeleton, implemented
//! once in [`backoff::Contention`]: a fixed idle deferral followed by a slotted
//! random countdown that freezes while the medium is busy and restarts the
//! deferral once it clears. [`wifi`] and [`nru`] add the technology-specific
//! transmission, feedback and contention-window rules.
//!
//! The state machines are event-driven: the owner reports medium changes and
//! calls `step` whenever the machine's `wake_time` is reached. Countdown
//! progress between events is computed arithmetically, which keeps the slot
//! accounting exact without one event per idle slot.

pub mod backoff;
pub mod nru;
pub mod wifi;

use serde::{Deserialize, Serialize};

/// Carrier-sense outcome at one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    Idle,
    /// Wi-Fi-originated energy at or above the preamble-detection threshold.
    BusyWifi,
    /// Total energy at or above the energy-detection threshold.
    BusyOther,
}

impl Medium {
    pub fn is_idle(self) -> bool {
        self == Medium::Idle
    }
}

/// Why a contention window changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CwCause {
    Success,
    Failure,
    Dropped,
    Harq,
}
