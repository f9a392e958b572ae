//! 802.11 DCF (best effort, basic access) for a saturated downlink AP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backoff::Contention;
use super::{CwCause, Medium};
use crate::phy::{wifi_tx_duration, Aggregation, FrameTiming, RateController, RateTable, WifiPpdu, MAX_PPDU_US};
use crate::units::SimTime;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WifiMacConfig {
    pub cw_min: u32,
    pub cw_max: u32,
    /// Threshold for Wi-Fi-originated energy (preamble detection).
    pub preamble_detect_dbm: f64,
    /// Threshold for any energy.
    pub energy_detect_dbm: f64,
    pub aggregation: Aggregation,
    pub max_ppdu_us: f64,
    pub retry_limit: u32,
}

impl Default for WifiMacConfig {
    fn default() -> Self {
        WifiMacConfig {
            cw_min: 15,
            cw_max: 1023,
            preamble_detect_dbm: -82.0,
            energy_detect_dbm: -62.0,
            aggregation: Aggregation::None,
            max_ppdu_us: MAX_PPDU_US,
            retry_limit: 7,
        }
    }
}

impl WifiMacConfig {
    /// Applies an experiment's ED threshold: it replaces the energy-detection
    /// level, and the preamble threshold never sits above it.
    pub fn with_energy_detect(mut self, ed_dbm: f64) -> Self {
        self.energy_detect_dbm = ed_dbm;
        self.preamble_detect_dbm = self.preamble_detect_dbm.min(ed_dbm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pow2m1 = |v: u32| (v + 1).is_power_of_two();
        if !(pow2m1(self.cw_min) && pow2m1(self.cw_max) && self.cw_min <= self.cw_max) {
            return Err(Error::InvalidParameter("Wi-Fi CW bounds must be 2^k-1 with cw_min <= cw_max".into()));
        }
        if self.preamble_detect_dbm > self.energy_detect_dbm {
            return Err(Error::InvalidParameter("preamble threshold must not exceed the ED threshold".into()));
        }
        if !(self.max_ppdu_us > 0.0) {
            return Err(Error::InvalidParameter("max_ppdu_us must be positive".into()));
        }
        Ok(())
    }

    /// Carrier sense at an AP given Wi-Fi-originated and total energy (mW).
    pub fn classify(&self, wifi_mw: f64, total_mw: f64) -> Medium {
        let ed = crate::units::dbm_to_mw(self.energy_detect_dbm);
        let pd = crate::units::dbm_to_mw(self.preamble_detect_dbm);
        if wifi_mw >= pd {
            Medium::BusyWifi
        } else if total_mw >= ed {
            Medium::BusyOther
        } else {
            Medium::Idle
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WifiPhase {
    Idle,
    Defer,
    Backoff,
    Tx,
    WaitAck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WifiMacState {
    pub phase: WifiPhase,
    pub backoff_counter: u32,
    pub cw: u32,
    pub retries: u32,
}

/// PPDU handed to the medium.
#[derive(Clone, Debug, PartialEq)]
pub struct WifiTx {
    pub duration: SimTime,
    pub rate_idx: usize,
    pub rate_mbps: f64,
    pub ppdu: WifiPpdu,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WifiAction {
    None,
    StartTx(WifiTx),
    /// The PPDU in flight has reached its end.
    EndTx,
    /// The frame exceeded the retry limit and was discarded.
    Abort,
}

/// Contention-window change, reported for auditing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CwChange {
    pub old: u32,
    pub new: u32,
    pub cause: CwCause,
}

#[derive(Clone, Debug)]
pub struct WifiMac {
    cfg: WifiMacConfig,
    timing: FrameTiming,
    access: Contention,
    phase: WifiPhase,
    cw: u32,
    retries: u32,
    tx_end: SimTime,
    ack_deadline: SimTime,
    pending: Option<bool>,
    rates: RateController,
    last_cw_change: Option<CwChange>,
}

impl WifiMac {
    pub fn new(cfg: WifiMacConfig, timing: FrameTiming, n_rates: usize) -> Self {
        let access =
            Contention::new(SimTime::from_micros_f64(timing.difs_us), SimTime::from_micros_f64(timing.slot_us));
        let cw = cfg.cw_min;
        WifiMac {
            cfg,
            timing,
            access,
            phase: WifiPhase::Idle,
            cw,
            retries: 0,
            tx_end: SimTime::ZERO,
            ack_deadline: SimTime::ZERO,
            pending: None,
            rates: RateController::new(n_rates),
            last_cw_change: None,
        }
    }

    pub fn config(&self) -> &WifiMacConfig {
        &self.cfg
    }

    pub fn state(&self, now: SimTime) -> WifiMacState {
        let phase = match self.phase {
            WifiPhase::Defer | WifiPhase::Backoff if !self.access.deferring(now) => WifiPhase::Backoff,
            WifiPhase::Defer | WifiPhase::Backoff => WifiPhase::Defer,
            p => p,
        };
        WifiMacState { phase, backoff_counter: self.access.counter(now), cw: self.cw, retries: self.retries }
    }

    pub fn cw(&self) -> u32 {
        self.cw
    }

    /// Takes the most recent contention-window change, if any.
    pub fn take_cw_change(&mut self) -> Option<CwChange> {
        self.last_cw_change.take()
    }

    /// Saturated queue: the first frame is ready at `now`.
    pub fn start<R: Rng + ?Sized>(&mut self, now: SimTime, medium: Medium, rng: &mut R) {
        self.contend(now, medium, rng);
    }

    fn contend<R: Rng + ?Sized>(&mut self, now: SimTime, medium: Medium, rng: &mut R) {
        self.phase = WifiPhase::Defer;
        self.access.arm(self.cw, now, medium.is_idle(), rng);
    }

    pub fn on_medium(&mut self, now: SimTime, medium: Medium) {
        if matches!(self.phase, WifiPhase::Defer | WifiPhase::Backoff) {
            self.access.on_medium(now, medium.is_idle());
        }
    }

    /// Next instant at which [`step`](Self::step) must run.
    pub fn wake_time(&self) -> Option<SimTime> {
        match self.phase {
            WifiPhase::Defer | WifiPhase::Backoff => self.access.expiry(),
            WifiPhase::Tx => Some(self.tx_end),
            WifiPhase::WaitAck => Some(self.ack_deadline),
            WifiPhase::Idle => None,
        }
    }

    /// Advances the state machine at `now` under the given carrier-sense
    /// observation.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        medium: Medium,
        now: SimTime,
        table: &RateTable,
        rng: &mut R,
    ) -> WifiAction {
        self.on_medium(now, medium);
        match self.phase {
            WifiPhase::Defer | WifiPhase::Backoff if self.access.expiry() == Some(now) => {
                self.access.disarm();
                let rate_idx = self.rates.select(table);
                let rate_mbps = table.rate(rate_idx);
                let ppdu = wifi_tx_duration(&self.timing, self.cfg.aggregation, rate_mbps, self.cfg.max_ppdu_us);
                let duration = SimTime::from_micros_f64(ppdu.duration_us);
                self.phase = WifiPhase::Tx;
                self.tx_end = now + duration;
                WifiAction::StartTx(WifiTx { duration, rate_idx, rate_mbps, ppdu })
            }
            WifiPhase::Tx if now >= self.tx_end => WifiAction::EndTx,
            WifiPhase::WaitAck if now >= self.ack_deadline => {
                let acked = self.pending.take().unwrap_or(false);
                let old = self.cw;
                let mut action = WifiAction::None;
                let cause = if acked {
                    self.cw = self.cfg.cw_min;
                    self.retries = 0;
                    CwCause::Success
                } else {
                    self.retries += 1;
                    if self.retries > self.cfg.retry_limit {
                        self.cw = self.cfg.cw_min;
                        self.retries = 0;
                        action = WifiAction::Abort;
                        CwCause::Dropped
                    } else {
                        self.cw = (2 * (self.cw + 1) - 1).min(self.cfg.cw_max);
                        CwCause::Failure
                    }
                };
                self.last_cw_change = Some(CwChange { old, new: self.cw, cause });
                self.contend(now, medium, rng);
                action
            }
            _ => WifiAction::None,
        }
    }

    /// Reports the per-MPDU outcome of the PPDU that just ended. The AP then
    /// waits SIFS plus the block-ACK airtime, whether or not the ACK arrives.
    pub fn tx_complete(
        &mut self,
        now: SimTime,
        rate_idx: usize,
        delivered_mpdus: u32,
        sent_mpdus: u32,
        min_rate_mbps: f64,
    ) {
        debug_assert_eq!(self.phase, WifiPhase::Tx);
        self.rates.report(rate_idx, delivered_mpdus, sent_mpdus);
        self.pending = Some(delivered_mpdus > 0);
        self.phase = WifiPhase::WaitAck;
        self.ack_deadline = now + self.ack_gap(min_rate_mbps);
    }

    /// SIFS plus block-ACK airtime.
    pub fn ack_gap(&self, min_rate_mbps: f64) -> SimTime {
        SimTime::from_micros_f64(self.timing.sifs_us) + self.ack_duration(min_rate_mbps)
    }

    pub fn ack_duration(&self, min_rate_mbps: f64) -> SimTime {
        SimTime::from_micros_f64(self.timing.ack_duration_us(min_rate_mbps))
    }
}
