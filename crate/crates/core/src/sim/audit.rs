//! Replays an event log and checks it against the channel-access rules.
//!
//! The checks only use what the log itself records plus the configuration,
//! so they hold any simulator run to account independently of its internals.

use std::fmt;

use crate::mac::nru::{update_cw, HarqWindow};
use crate::mac::{CwCause, Medium};
use crate::scenario::Scenario;
use crate::units::SimTime;

use super::{LogEvent, LogRecord, SimConfig, TxKind};

/// First rule broken by a log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub t_ns: u64,
    pub node: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {} at {} ns: {}", self.node, self.t_ns, self.message)
    }
}

impl std::error::Error for Violation {}

/// Event counts of an audited log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AuditTally {
    pub ppdus: usize,
    pub acks: usize,
    pub bursts: usize,
    pub reservations: usize,
    pub wifi_cw_updates: usize,
    pub nru_cw_updates: usize,
    pub drops: usize,
}

#[derive(Clone, Default)]
struct NodeAudit {
    /// Start of the current idle period, as of the latest logged change.
    idle_since: Option<SimTime>,
    /// Same, as of just before `changed_at`.
    idle_since_before: Option<SimTime>,
    changed_at: SimTime,
    cw: u32,
    failures: u32,
    /// Outcome of the Wi-Fi PPDU awaiting its CW update.
    ppdu_ok: Option<bool>,
    last_ppdu_end: Option<SimTime>,
    /// Active reservation: (start, end).
    reservation: Option<(SimTime, SimTime)>,
    harq: Option<(u32, u32)>,
}

impl NodeAudit {
    /// Idle-period start seen by decisions taken at `t`: changes logged at
    /// `t` itself come from transmissions starting at the same instant.
    fn idle_since_strictly_before(&self, t: SimTime) -> Option<SimTime> {
        if self.changed_at == t {
            self.idle_since_before
        } else {
            self.idle_since
        }
    }
}

fn ns(us: f64) -> u64 {
    (us * 1000.0).round() as u64
}

/// Checks a log recorded with `cfg.trace` set:
///
/// * every PPDU, reservation and reservation-less burst starts after at least
///   the deferral time of idle medium at its transmitter;
/// * PPDUs respect the length cap and ACKs follow delivered PPDUs by SIFS;
/// * Wi-Fi CW resets on success, doubles on failure and drops after the retry
///   limit; NR-U CW follows the HARQ rule over `cw_set`;
/// * reservations end on the mini-slot grid, bursts start on it, and
///   reservation plus burst stay within the MCOT.
pub fn audit_log(scenario: &Scenario, cfg: &SimConfig, log: &[LogRecord]) -> Result<AuditTally, Violation> {
    let mut nodes: Vec<NodeAudit> = scenario
        .nodes
        .iter()
        .map(|n| NodeAudit {
            idle_since: Some(SimTime::ZERO),
            idle_since_before: Some(SimTime::ZERO),
            cw: if n.tech.is_wifi() { cfg.wifi.cw_min } else { cfg.nru.cw_set[0] },
            ..Default::default()
        })
        .collect();
    let slot = cfg.nru.minislot().as_nanos();
    let mcot = cfg.nru.mcot().as_nanos();
    let difs = SimTime(ns(cfg.timing.difs_us));
    let sifs = SimTime(ns(cfg.timing.sifs_us));
    let mut tally = AuditTally::default();
    let mut last_t = 0;

    for rec in log {
        let fail = |message: String| Err(Violation { t_ns: rec.t_ns, node: rec.node, message });
        macro_rules! check {
            ($cond:expr, $($msg:tt)+) => {
                if !$cond {
                    return fail(format!($($msg)+));
                }
            };
        }
        check!(rec.t_ns >= last_t, "log out of order");
        check!(rec.node < nodes.len(), "unknown node");
        last_t = rec.t_ns;
        let t = rec.time();
        let tech = scenario.nodes[rec.node].tech;
        let a = &mut nodes[rec.node];
        let cca_ok = |a: &NodeAudit, defer: SimTime| a.idle_since_strictly_before(t).is_some_and(|s| t >= s + defer);
        match &rec.event {
            LogEvent::Medium { state, .. } => {
                if a.changed_at != t {
                    a.idle_since_before = a.idle_since;
                    a.changed_at = t;
                }
                a.idle_since = match (a.idle_since, state) {
                    (Some(s), Medium::Idle) => Some(s),
                    (None, Medium::Idle) => Some(t),
                    (_, _) => None,
                };
            }
            LogEvent::TxStart { kind: TxKind::WifiPpdu, end_ns, .. } => {
                check!(cca_ok(a, difs), "PPDU started without DIFS of idle medium");
                check!(*end_ns - rec.t_ns <= ns(cfg.wifi.max_ppdu_us) + 1, "PPDU longer than the cap");
                check!(a.ppdu_ok.is_none(), "new PPDU before the previous one was resolved");
                tally.ppdus += 1;
            }
            LogEvent::TxEnd { kind: TxKind::WifiPpdu, segments, segments_ok, .. } => {
                check!(*segments >= 1 && segments_ok <= segments, "bad segment counts");
                a.ppdu_ok = Some(*segments_ok > 0);
                a.last_ppdu_end = Some(t);
            }
            LogEvent::TxStart { kind: TxKind::Ack, .. } => {
                check!(a.last_ppdu_end.map(|e| e + sifs) == Some(t), "ACK not SIFS after a PPDU");
                check!(a.ppdu_ok == Some(true), "ACK for a PPDU with no delivered MPDU");
                tally.acks += 1;
            }
            LogEvent::Cw { old, new, cause } if tech.is_wifi() => {
                check!(*old == a.cw, "CW changed from {} outside a logged update", a.cw);
                let Some(ok) = a.ppdu_ok.take() else {
                    return fail("CW update without a PPDU".into());
                };
                match cause {
                    CwCause::Success => {
                        check!(ok && *new == cfg.wifi.cw_min, "success must follow a delivery and reset CW");
                        a.failures = 0;
                    }
                    CwCause::Failure => {
                        a.failures += 1;
                        check!(
                            !ok && a.failures <= cfg.wifi.retry_limit,
                            "failure after delivery or past the retry limit"
                        );
                        check!(*new == (2 * old + 1).min(cfg.wifi.cw_max), "CW {old} -> {new} is not a doubling");
                    }
                    CwCause::Dropped => {
                        check!(!ok && a.failures == cfg.wifi.retry_limit, "drop before the retry limit");
                        check!(*new == cfg.wifi.cw_min, "drop must reset CW");
                        a.failures = 0;
                    }
                    CwCause::Harq => return fail("HARQ cause on an AP".into()),
                }
                a.cw = *new;
                tally.wifi_cw_updates += 1;
            }
            LogEvent::Drop => {
                check!(tech.is_wifi(), "drop logged by a gNB");
                tally.drops += 1;
            }
            LogEvent::TxStart { kind: TxKind::Reservation, end_ns, .. } => {
                check!(!cfg.nru.lbt || cca_ok(a, cfg.nru.defer()), "reservation started without deferral");
                check!(a.reservation.is_none(), "overlapping reservations");
                check!(end_ns % slot == 0, "reservation ends off the mini-slot grid");
                check!(*end_ns > rec.t_ns && end_ns - rec.t_ns < slot, "reservation longer than a mini-slot");
                a.reservation = Some((t, SimTime(*end_ns)));
                tally.reservations += 1;
            }
            LogEvent::TxStart { kind: TxKind::NruBurst, end_ns, .. } => {
                check!(rec.t_ns % slot == 0, "burst starts off the mini-slot grid");
                let access = match a.reservation.take() {
                    Some((start, end)) => {
                        check!(end == t, "burst does not follow its reservation");
                        start
                    }
                    None => {
                        check!(!cfg.nru.lbt || cca_ok(a, cfg.nru.defer()), "burst started without deferral");
                        t
                    }
                };
                check!(end_ns - access.as_nanos() <= mcot, "reservation plus burst exceed the MCOT");
                tally.bursts += 1;
            }
            LogEvent::TxEnd { kind: TxKind::NruBurst, segments, segments_ok, .. } => {
                a.harq = Some((*segments_ok, segments - segments_ok));
            }
            LogEvent::Cw { old, new, cause } => {
                check!(*cause == CwCause::Harq, "gNB CW update not driven by HARQ");
                check!(*old == a.cw, "CW changed from {} outside a logged update", a.cw);
                let Some((acks, nacks)) = a.harq.take() else {
                    return fail("CW update without HARQ feedback".into());
                };
                let expect = update_cw(&cfg.nru, *old, HarqWindow { acks, nacks });
                check!(*new == expect, "HARQ acks={acks} nacks={nacks} gave CW {new}, expected {expect}");
                check!(cfg.nru.cw_set.contains(new), "CW {new} outside cw_set");
                a.cw = *new;
                tally.nru_cw_updates += 1;
            }
            LogEvent::TxEnd { .. } => {}
        }
    }
    Ok(tally)
}
