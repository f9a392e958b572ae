//! NR-U Type-1 channel access for a saturated downlink gNB.
//!
//! After deferral and backoff the gNB emits a reservation signal up to the
//! next mini-slot boundary and then transmits a slot-aligned burst. The
//! channel occupancy time is counted from the start of the reservation, so
//! reservation plus burst never exceeds the MCOT.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backoff::Contention;
use super::Medium;
use crate::units::{dbm_to_mw, SimTime};
use crate::{Error, Result};

/// Allowed mini-slot alignment periods (µs).
pub const MINISLOT_CHOICES_US: [u64; 8] = [9, 18, 36, 63, 126, 250, 500, 1000];

/// HARQ-feedback rule driving contention-window updates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CwRule {
    /// Reset when at least `min_ack` of the feedback is ACK, else grow.
    AckFraction { min_ack: f64 },
    /// Grow when at least `min_nack` of the feedback is NACK, else reset.
    NackFraction { min_nack: f64 },
}

impl Default for CwRule {
    fn default() -> Self {
        CwRule::AckFraction { min_ack: 0.10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NruMacConfig {
    pub t_f_us: u64,
    pub d_i: u32,
    pub t_cca_us: u64,
    pub cw_set: Vec<u32>,
    pub mcot_ms: f64,
    pub energy_detect_dbm: f64,
    /// Transmission alignment grid; also the upper bound of the reservation.
    pub minislot_us: u64,
    pub lbt: bool,
    pub cw_rule: CwRule,
}

impl Default for NruMacConfig {
    fn default() -> Self {
        NruMacConfig {
            t_f_us: 16,
            d_i: 3,
            t_cca_us: 9,
            cw_set: vec![15, 31, 63],
            mcot_ms: 8.0,
            energy_detect_dbm: -62.0,
            minislot_us: 500,
            lbt: true,
            cw_rule: CwRule::default(),
        }
    }
}

impl NruMacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.cw_set.is_empty()
            || !self.cw_set.iter().all(|&v| (v + 1).is_power_of_two())
            || !self.cw_set.windows(2).all(|w| w[0] < w[1])
        {
            return bad("NR-U cw_set must be increasing values of the form 2^k-1");
        }
        if self.mcot_ms != 5.0 && self.mcot_ms != 8.0 {
            return bad("MCOT must be 5 or 8 ms");
        }
        if !MINISLOT_CHOICES_US.contains(&self.minislot_us) {
            return bad("mini-slot must be one of 9, 18, 36, 63, 126, 250, 500, 1000 us");
        }
        if self.t_cca_us == 0 {
            return bad("t_cca_us must be positive");
        }
        match self.cw_rule {
            CwRule::AckFraction { min_ack: f } | CwRule::NackFraction { min_nack: f } if !(0.0..=1.0).contains(&f) => {
                bad("CW rule fraction must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    /// Deferral: `T_f + d_i * T_cca`.
    pub fn defer(&self) -> SimTime {
        SimTime::from_micros(self.t_f_us + self.d_i as u64 * self.t_cca_us)
    }

    pub fn mcot(&self) -> SimTime {
        SimTime::from_micros_f64(self.mcot_ms * 1000.0)
    }

    pub fn minislot(&self) -> SimTime {
        SimTime::from_micros(self.minislot_us)
    }

    pub fn classify(&self, total_mw: f64) -> Medium {
        if total_mw >= dbm_to_mw(self.energy_detect_dbm) {
            Medium::BusyOther
        } else {
            Medium::Idle
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NruPhase {
    Idle,
    Defer,
    Backoff,
    Reserving,
    TxBurst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NruMacState {
    pub phase: NruPhase,
    pub backoff_counter: u32,
    pub cw: u32,
    pub cot_deadline: Option<SimTime>,
}

/// HARQ feedback of one burst at code-block-group granularity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarqWindow {
    pub acks: u32,
    pub nacks: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NruAction {
    None,
    StartReservation { until: SimTime },
    StartBurst { until: SimTime },
    EndBurst,
}

/// Next contention window after a burst's HARQ feedback. Empty feedback
/// resets the window.
pub fn update_cw(cfg: &NruMacConfig, cw: u32, window: HarqWindow) -> u32 {
    let total = window.acks + window.nacks;
    let grow = total > 0
        && match cfg.cw_rule {
            CwRule::AckFraction { min_ack } => (window.acks as f64) < min_ack * total as f64 - 1e-12,
            CwRule::NackFraction { min_nack } => window.nacks as f64 >= min_nack * total as f64 - 1e-12,
        };
    if grow {
        cfg.cw_set.iter().copied().find(|&v| v > cw).unwrap_or(*cfg.cw_set.last().unwrap())
    } else {
        cfg.cw_set[0]
    }
}

#[derive(Clone, Debug)]
pub struct NruMac {
    cfg: NruMacConfig,
    access: Contention,
    phase: NruPhase,
    cw: u32,
    reservation_end: SimTime,
    cot_deadline: SimTime,
}

impl NruMac {
    pub fn new(cfg: NruMacConfig) -> Self {
        let access = Contention::new(cfg.defer(), SimTime::from_micros(cfg.t_cca_us));
        let cw = cfg.cw_set[0];
        NruMac { cfg, access, phase: NruPhase::Idle, cw, reservation_end: SimTime::ZERO, cot_deadline: SimTime::ZERO }
    }

    pub fn config(&self) -> &NruMacConfig {
        &self.cfg
    }

    pub fn cw(&self) -> u32 {
        self.cw
    }

    pub fn state(&self, now: SimTime) -> NruMacState {
        let phase = match self.phase {
            NruPhase::Defer | NruPhase::Backoff if !self.access.deferring(now) => NruPhase::Backoff,
            NruPhase::Defer | NruPhase::Backoff => NruPhase::Defer,
            p => p,
        };
        let cot_deadline = matches!(phase, NruPhase::Reserving | NruPhase::TxBurst).then_some(self.cot_deadline);
        NruMacState { phase, backoff_counter: self.access.counter(now), cw: self.cw, cot_deadline }
    }

    pub fn start<R: Rng + ?Sized>(&mut self, now: SimTime, medium: Medium, rng: &mut R) {
        self.contend(now, medium, rng);
    }

    fn contend<R: Rng + ?Sized>(&mut self, now: SimTime, medium: Medium, rng: &mut R) {
        self.phase = NruPhase::Defer;
        if self.cfg.lbt {
            self.access.arm(self.cw, now, medium.is_idle(), rng);
        } else {
            // Always-on: no sensing, access is immediate.
            self.access = Contention::new(SimTime::ZERO, SimTime::from_micros(self.cfg.t_cca_us));
            self.access.arm_with(0, now, true);
        }
    }

    pub fn on_medium(&mut self, now: SimTime, medium: Medium) {
        if self.cfg.lbt && matches!(self.phase, NruPhase::Defer | NruPhase::Backoff) {
            self.access.on_medium(now, medium.is_idle());
        }
    }

    pub fn wake_time(&self) -> Option<SimTime> {
        match self.phase {
            NruPhase::Defer | NruPhase::Backoff => self.access.expiry(),
            NruPhase::Reserving => Some(self.reservation_end),
            NruPhase::TxBurst => Some(self.cot_deadline),
            NruPhase::Idle => None,
        }
    }

    pub fn step(&mut self, medium: Medium, now: SimTime) -> NruAction {
        self.on_medium(now, medium);
        match self.phase {
            NruPhase::Defer | NruPhase::Backoff if self.access.expiry() == Some(now) => {
                self.access.disarm();
                self.cot_deadline = now + self.cfg.mcot();
                self.reservation_end = now.ceil_to(self.cfg.minislot());
                if self.reservation_end == now {
                    self.phase = NruPhase::TxBurst;
                    NruAction::StartBurst { until: self.cot_deadline }
                } else {
                    self.phase = NruPhase::Reserving;
                    NruAction::StartReservation { until: self.reservation_end }
                }
            }
            NruPhase::Reserving if now >= self.reservation_end => {
                self.phase = NruPhase::TxBurst;
                NruAction::StartBurst { until: self.cot_deadline }
            }
            NruPhase::TxBurst if now >= self.cot_deadline => NruAction::EndBurst,
            _ => NruAction::None,
        }
    }

    /// Applies the finished burst's HARQ feedback and starts the next access.
    /// Returns the previous and new contention window.
    pub fn burst_complete<R: Rng + ?Sized>(
        &mut self,
        now: SimTime,
        window: HarqWindow,
        medium: Medium,
        rng: &mut R,
    ) -> (u32, u32) {
        debug_assert_eq!(self.phase, NruPhase::TxBurst);
        let old = self.cw;
        self.cw = update_cw(&self.cfg, self.cw, window);
        self.contend(now, medium, rng);
        (old, self.cw)
    }
}
