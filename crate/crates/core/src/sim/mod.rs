//! Discrete-event simulation of one scenario realization.
//!
//! The engine keeps the set of transmissions currently on the air. Whenever
//! that set changes it recomputes, in the linear domain, the energy each node
//! senses (classified by the node's own thresholds) and the SINR at the UE of
//! every frame in flight. MAC state machines are woken only at medium changes
//! and at their own deadlines.

mod audit;
mod reception;
mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use audit::{audit_log, AuditTally, Violation};
pub use reception::Reception;
pub use trace::{write_trace, LogEvent, LogRecord, NodeStats, TxKind};

use crate::mac::nru::{HarqWindow, NruAction, NruMac, NruMacConfig};
use crate::mac::wifi::{WifiAction, WifiMac, WifiMacConfig, WifiTx};
use crate::mac::{CwCause, Medium};
use crate::phy::{CqiReport, FrameTiming, RateTable};
use crate::propagation::{LinkBudget, PathLossParams};
use crate::scenario::{Scenario, Tech};
use crate::units::{mw_to_dbm, SimTime};
use crate::{Error, Result};

/// Everything a realization needs besides the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub wifi: WifiMacConfig,
    pub nru: NruMacConfig,
    pub timing: FrameTiming,
    pub wifi_rates: RateTable,
    pub nru_rates: RateTable,
    pub path_loss: PathLossParams,
    /// HARQ code-block-group duration.
    pub cbg_us: u64,
    /// Record the event log.
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            wifi: WifiMacConfig::default(),
            nru: NruMacConfig::default(),
            timing: FrameTiming::default(),
            wifi_rates: RateTable::wifi_default(),
            nru_rates: RateTable::nru_default(),
            path_loss: PathLossParams::default(),
            cbg_us: 1000,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.wifi.validate()?;
        self.nru.validate()?;
        self.timing.validate()?;
        self.wifi_rates.validate()?;
        self.nru_rates.validate()?;
        self.path_loss.validate()?;
        if self.cbg_us == 0 {
            return Err(Error::InvalidParameter("cbg_us must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ActiveTransmission {
    pub id: u64,
    /// Node owning the transmission (for ACKs, the AP whose UE sends it).
    pub tx: usize,
    pub kind: TxKind,
    /// Radiating point in the link budget.
    pub source: usize,
    pub start: SimTime,
    pub end: SimTime,
    pub power_dbm: f64,
    pub rate_mbps: f64,
    pub payload_bytes: u32,
    rate_idx: usize,
    mpdu_msdus: Vec<u32>,
    reception: Option<Reception>,
}

/// Result of one realization.
#[derive(Clone, Debug)]
pub struct RealizationOutput {
    pub duration: SimTime,
    pub stats: Vec<NodeStats>,
    pub log: Vec<LogRecord>,
}

impl RealizationOutput {
    pub fn throughput_mbps(&self, node: usize) -> f64 {
        self.stats[node].throughput_mbps(self.duration)
    }
}

/// Runs a saturated-downlink realization for `duration`.
pub fn run_realization(
    scenario: &Scenario,
    cfg: &SimConfig,
    duration: SimTime,
    seed: u64,
) -> Result<RealizationOutput> {
    if duration == SimTime::ZERO {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    let mut sim = Simulator::new(scenario, cfg, seed)?;
    sim.run_until(duration);
    Ok(sim.finish())
}

enum Mac {
    Wifi(WifiMac),
    Nru { mac: NruMac, cqi: CqiReport, access_start: SimTime },
}

struct NodeRt {
    mac: Mac,
    medium: Medium,
    wifi_mw: f64,
    total_mw: f64,
    timer_gen: u64,
    scheduled: Option<SimTime>,
    data_tx: Option<u64>,
    reservation_tx: Option<u64>,
    ack_tx: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum What {
    MacTimer { gen: u64 },
    AckStart,
    AckEnd,
}

/// Queue entry; ties on time resolve by class (ends first), node, then
/// insertion order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct QueuedEvent {
    time: SimTime,
    class: u8,
    node: usize,
    seq: u64,
    what: What,
}

const CLASS_END: u8 = 0;
const CLASS_ACK: u8 = 1;
const CLASS_ACCESS: u8 = 2;

pub struct Simulator<'a> {
    cfg: &'a SimConfig,
    link: LinkBudget,
    now: SimTime,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    seq: u64,
    nodes: Vec<NodeRt>,
    active: Vec<ActiveTransmission>,
    next_tx_id: u64,
    rng: ChaCha8Rng,
    stats: Vec<NodeStats>,
    log: Vec<LogRecord>,
    noise_mw: f64,
    ack_duration: SimTime,
    sifs: SimTime,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &Scenario, cfg: &'a SimConfig, seed: u64) -> Result<Self> {
        if scenario.nodes.is_empty() {
            return Err(Error::EmptyScenario);
        }
        if scenario.nodes.iter().enumerate().any(|(i, n)| n.id != i) {
            return Err(Error::InvalidParameter("node ids must equal their index".into()));
        }
        cfg.validate()?;
        let link = LinkBudget::new(scenario, &cfg.path_loss);
        let nodes = scenario
            .nodes
            .iter()
            .map(|n| NodeRt {
                mac: match n.tech {
                    Tech::WifiAp => Mac::Wifi(WifiMac::new(cfg.wifi.clone(), cfg.timing, cfg.wifi_rates.len())),
                    Tech::NrUGnb => Mac::Nru {
                        mac: NruMac::new(cfg.nru.clone()),
                        cqi: CqiReport::default(),
                        access_start: SimTime::ZERO,
                    },
                },
                medium: Medium::Idle,
                wifi_mw: 0.0,
                total_mw: 0.0,
                timer_gen: 0,
                scheduled: None,
                data_tx: None,
                reservation_tx: None,
                ack_tx: None,
            })
            .collect();
        let stats = scenario
            .nodes
            .iter()
            .map(|n| {
                let rates = if n.tech.is_wifi() { cfg.wifi_rates.len() } else { cfg.nru_rates.len() };
                NodeStats::new(n.tech, rates)
            })
            .collect();
        let mut sim = Simulator {
            cfg,
            noise_mw: link.noise_mw(),
            link,
            now: SimTime::ZERO,
            queue: BinaryHeap::new(),
            seq: 0,
            nodes,
            active: Vec::new(),
            next_tx_id: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats,
            log: Vec::new(),
            ack_duration: SimTime::from_micros_f64(cfg.timing.ack_duration_us(cfg.wifi_rates.min_rate())),
            sifs: SimTime::from_micros_f64(cfg.timing.sifs_us),
        };
        for i in 0..sim.nodes.len() {
            let rng = &mut sim.rng;
            match &mut sim.nodes[i].mac {
                Mac::Wifi(m) => m.start(SimTime::ZERO, Medium::Idle, rng),
                Mac::Nru { mac, .. } => mac.start(SimTime::ZERO, Medium::Idle, rng),
            }
            sim.reschedule(i);
        }
        Ok(sim)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn link(&self) -> &LinkBudget {
        &self.link
    }

    pub fn active(&self) -> &[ActiveTransmission] {
        &self.active
    }

    pub fn stats(&self) -> &[NodeStats] {
        &self.stats
    }

    /// Carrier-sense state and total sensed energy (dBm) at `node`.
    pub fn medium_observation(&self, node: usize) -> (Medium, f64) {
        let n = &self.nodes[node];
        (n.medium, mw_to_dbm(n.total_mw))
    }

    /// Wi-Fi-originated and total energy (mW) sensed at `node`.
    pub fn sensed_energy_mw(&self, node: usize) -> (f64, f64) {
        (self.nodes[node].wifi_mw, self.nodes[node].total_mw)
    }

    /// Processes every event at or before `until`.
    pub fn run_until(&mut self, until: SimTime) {
        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            if ev.time > until {
                break;
            }
            self.queue.pop();
            self.now = ev.time;
            match ev.what {
                What::MacTimer { gen } => {
                    if gen == self.nodes[ev.node].timer_gen {
                        self.nodes[ev.node].scheduled = None;
                        self.on_mac_timer(ev.node);
                    }
                }
                What::AckStart => self.start_ack(ev.node),
                What::AckEnd => {
                    if let Some(id) = self.nodes[ev.node].ack_tx.take() {
                        self.end_tx(id);
                    }
                }
            }
        }
        self.now = self.now.max(until);
    }

    pub fn finish(self) -> RealizationOutput {
        RealizationOutput { duration: self.now, stats: self.stats, log: self.log }
    }

    fn push(&mut self, time: SimTime, class: u8, node: usize, what: What) {
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent { time, class, node, seq: self.seq, what }));
    }

    fn record(&mut self, node: usize, event: LogEvent) {
        if self.cfg.trace {
            self.log.push(LogRecord { t_ns: self.now.0, node, event });
        }
    }

    fn reschedule(&mut self, node: usize) {
        let n = &self.nodes[node];
        let (wake, class) = match &n.mac {
            Mac::Wifi(m) => (m.wake_time(), if n.data_tx.is_some() { CLASS_END } else { CLASS_ACCESS }),
            Mac::Nru { mac, .. } => (mac.wake_time(), if n.data_tx.is_some() { CLASS_END } else { CLASS_ACCESS }),
        };
        if wake == n.scheduled {
            return;
        }
        let n = &mut self.nodes[node];
        n.timer_gen += 1;
        n.scheduled = wake;
        let gen = n.timer_gen;
        if let Some(t) = wake {
            debug_assert!(t >= self.now);
            self.push(t, class, node, What::MacTimer { gen });
        }
    }

    fn on_mac_timer(&mut self, node: usize) {
        let now = self.now;
        let medium = self.nodes[node].medium;
        let cfg = self.cfg;
        match &mut self.nodes[node].mac {
            Mac::Wifi(mac) => match mac.step(medium, now, &cfg.wifi_rates, &mut self.rng) {
                WifiAction::StartTx(tx) => self.start_ppdu(node, tx),
                WifiAction::EndTx => self.end_ppdu(node),
                WifiAction::Abort => {
                    self.log_wifi_cw(node);
                    self.record(node, LogEvent::Drop);
                }
                WifiAction::None => self.log_wifi_cw(node),
            },
            Mac::Nru { mac, .. } => match mac.step(medium, now) {
                NruAction::StartReservation { until } => {
                    self.set_access_start(node);
                    let tx = self.new_tx(node, TxKind::Reservation, node, until);
                    let id = self.begin_tx(tx, None);
                    self.nodes[node].reservation_tx = Some(id);
                }
                NruAction::StartBurst { until } => {
                    if self.nodes[node].reservation_tx.is_none() {
                        self.set_access_start(node);
                    }
                    self.start_burst(node, until);
                }
                NruAction::EndBurst => self.end_burst(node),
                NruAction::None => {}
            },
        }
        self.reschedule(node);
    }

    fn set_access_start(&mut self, node: usize) {
        if let Mac::Nru { access_start, .. } = &mut self.nodes[node].mac {
            *access_start = self.now;
        }
    }

    fn new_tx(&self, node: usize, kind: TxKind, source: usize, end: SimTime) -> ActiveTransmission {
        ActiveTransmission {
            id: 0,
            tx: node,
            kind,
            source,
            start: self.now,
            end,
            power_dbm: self.link.tx_power_dbm(),
            rate_mbps: 0.0,
            payload_bytes: 0,
            rate_idx: 0,
            mpdu_msdus: Vec::new(),
            reception: None,
        }
    }

    fn log_wifi_cw(&mut self, node: usize) {
        if let Mac::Wifi(mac) = &mut self.nodes[node].mac {
            if let Some(c) = mac.take_cw_change() {
                self.record(node, LogEvent::Cw { old: c.old, new: c.new, cause: c.cause });
            }
        }
    }

    fn start_ppdu(&mut self, node: usize, w: WifiTx) {
        let start = self.now;
        let end = start + w.duration;
        let at = |us: f64| (start + SimTime::from_micros_f64(us)).min(end);
        let mut segments = vec![(start, at(self.cfg.timing.phy_header_us))];
        segments.extend(w.ppdu.mpdu_spans(&self.cfg.timing, w.rate_mbps).into_iter().map(|(a, b)| (at(a), at(b))));
        let st = &mut self.stats[node];
        st.tx_attempts += 1;
        st.mcs_histogram[w.rate_idx] += 1;
        let mut tx = self.new_tx(node, TxKind::WifiPpdu, node, end);
        tx.rate_mbps = w.rate_mbps;
        tx.rate_idx = w.rate_idx;
        tx.payload_bytes = w.ppdu.payload_bytes;
        tx.reception = Some(Reception::new(self.cfg.wifi_rates.threshold(w.rate_idx), true, segments, start));
        tx.mpdu_msdus = w.ppdu.mpdu_msdus;
        let id = self.begin_tx(tx, None);
        self.nodes[node].data_tx = Some(id);
    }

    fn end_ppdu(&mut self, node: usize) {
        let id = self.nodes[node].data_tx.take().expect("PPDU in flight");
        let tx = self.end_tx(id);
        let outcomes = tx.reception.as_ref().unwrap().outcomes();
        let msdu_bits = self.cfg.timing.msdu_bytes as f64 * 8.0;
        let delivered_bits: f64 =
            outcomes.iter().zip(&tx.mpdu_msdus).filter(|(ok, _)| **ok).map(|(_, &k)| k as f64 * msdu_bits).sum();
        let ok = outcomes.iter().filter(|&&o| o).count() as u32;
        let Mac::Wifi(mac) = &mut self.nodes[node].mac else { unreachable!() };
        mac.tx_complete(self.now, tx.rate_idx, ok, outcomes.len() as u32, self.cfg.wifi_rates.min_rate());
        let airtime = tx.end - tx.start;
        let st = &mut self.stats[node];
        if ok > 0 {
            st.payload_delivered_bits += delivered_bits;
            st.airtime_success += airtime;
            let at = self.now + self.sifs;
            self.push(at, CLASS_ACK, node, What::AckStart);
        } else {
            st.airtime_collision += airtime;
        }
        self.record(
            node,
            LogEvent::TxEnd {
                kind: TxKind::WifiPpdu,
                segments: outcomes.len() as u32,
                segments_ok: ok,
                delivered_bits,
            },
        );
    }

    fn start_ack(&mut self, node: usize) {
        let end = self.now + self.ack_duration;
        let mut tx = self.new_tx(node, TxKind::Ack, self.link.ue_point(node), end);
        tx.rate_mbps = self.cfg.wifi_rates.min_rate();
        tx.payload_bytes = self.cfg.timing.ack_bytes;
        let id = self.begin_tx(tx, None);
        self.nodes[node].ack_tx = Some(id);
        self.push(end, CLASS_END, node, What::AckEnd);
    }

    fn start_burst(&mut self, node: usize, until: SimTime) {
        let start = self.now;
        let Mac::Nru { cqi, access_start, .. } = &self.nodes[node].mac else { unreachable!() };
        let mcs = cqi.select(&self.cfg.nru_rates);
        let reserved = start - *access_start;
        let cbg = SimTime::from_micros(self.cfg.cbg_us);
        let mut segments = Vec::new();
        let mut t = start;
        while t < until {
            let e = (t + cbg).min(until);
            segments.push((t, e));
            t = e;
        }
        let st = &mut self.stats[node];
        st.tx_attempts += 1;
        st.mcs_histogram[mcs] += 1;
        st.reservations += 1;
        st.reservation_time += reserved;
        let mut tx = self.new_tx(node, TxKind::NruBurst, node, until);
        tx.rate_mbps = self.cfg.nru_rates.rate(mcs);
        tx.rate_idx = mcs;
        tx.reception = Some(Reception::new(self.cfg.nru_rates.threshold(mcs), false, segments, start));
        let replaces = self.nodes[node].reservation_tx.take();
        let id = self.begin_tx(tx, replaces);
        self.nodes[node].data_tx = Some(id);
    }

    fn end_burst(&mut self, node: usize) {
        let id = self.nodes[node].data_tx.take().expect("burst in flight");
        let tx = self.end_tx(id);
        let rx = tx.reception.as_ref().unwrap();
        let outcomes = rx.outcomes();
        let delivered_bits: f64 = outcomes
            .iter()
            .zip(rx.data_segment_spans())
            .filter(|(ok, _)| **ok)
            .map(|(_, (a, b))| tx.rate_mbps * (*b - *a).as_micros_f64())
            .sum();
        let acks = outcomes.iter().filter(|&&o| o).count() as u32;
        let window = HarqWindow { acks, nacks: outcomes.len() as u32 - acks };
        let medium = self.nodes[node].medium;
        let Mac::Nru { mac, cqi, access_start } = &mut self.nodes[node].mac else { unreachable!() };
        cqi.update(rx.mean_sinr_db());
        let occupied = tx.end - *access_start;
        let (old, new) = mac.burst_complete(self.now, window, medium, &mut self.rng);
        let st = &mut self.stats[node];
        if acks > 0 {
            st.payload_delivered_bits += delivered_bits;
            st.airtime_success += occupied;
        } else {
            st.airtime_collision += occupied;
        }
        self.record(
            node,
            LogEvent::TxEnd {
                kind: TxKind::NruBurst,
                segments: outcomes.len() as u32,
                segments_ok: acks,
                delivered_bits,
            },
        );
        self.record(node, LogEvent::Cw { old, new, cause: CwCause::Harq });
    }

    /// Puts `tx` on the air, atomically replacing transmission `replaces`.
    fn begin_tx(&mut self, mut tx: ActiveTransmission, replaces: Option<u64>) -> u64 {
        self.flush_receptions();
        if let Some(old) = replaces {
            self.active.retain(|a| a.id != old);
        }
        self.next_tx_id += 1;
        tx.id = self.next_tx_id;
        let (id, node) = (tx.id, tx.tx);
        let event = LogEvent::TxStart {
            kind: tx.kind,
            end_ns: tx.end.0,
            rate_mbps: tx.rate_mbps,
            payload_bytes: tx.payload_bytes,
            power_dbm: tx.power_dbm,
        };
        self.active.push(tx);
        self.record(node, event);
        self.medium_changed();
        id
    }

    fn end_tx(&mut self, id: u64) -> ActiveTransmission {
        self.flush_receptions();
        let pos = self.active.iter().position(|a| a.id == id).expect("active transmission");
        let tx = self.active.swap_remove(pos);
        if !matches!(tx.kind, TxKind::WifiPpdu | TxKind::NruBurst) {
            self.record(tx.tx, LogEvent::TxEnd { kind: tx.kind, segments: 0, segments_ok: 0, delivered_bits: 0.0 });
        }
        self.medium_changed();
        tx
    }

    fn flush_receptions(&mut self) {
        let now = self.now;
        for a in &mut self.active {
            if let Some(r) = &mut a.reception {
                r.flush(now);
            }
        }
    }

    /// Recomputes sensed energy at every node and SINR at every receiving UE.
    fn medium_changed(&mut self) {
        for i in 0..self.nodes.len() {
            let point = self.link.node_point(i);
            let (mut wifi, mut total) = (0.0, 0.0);
            for a in self.active.iter().filter(|a| a.tx != i) {
                let p = self.link.rx_mw(a.source, point);
                total += p;
                if a.kind.is_wifi() {
                    wifi += p;
                }
            }
            let n = &mut self.nodes[i];
            n.wifi_mw = wifi;
            n.total_mw = total;
            let medium = match &n.mac {
                Mac::Wifi(m) => m.config().classify(wifi, total),
                Mac::Nru { mac, .. } => mac.config().classify(total),
            };
            if medium != n.medium {
                let was_idle = n.medium.is_idle();
                n.medium = medium;
                if was_idle != medium.is_idle() {
                    match &mut n.mac {
                        Mac::Wifi(m) => m.on_medium(self.now, medium),
                        Mac::Nru { mac, .. } => mac.on_medium(self.now, medium),
                    }
                    self.reschedule(i);
                }
                if self.cfg.trace {
                    let event =
                        LogEvent::Medium { state: medium, wifi_dbm: mw_to_dbm(wifi), total_dbm: mw_to_dbm(total) };
                    self.record(i, event);
                }
            }
        }
        for k in 0..self.active.len() {
            if self.active[k].reception.is_none() {
                continue;
            }
            let (id, node) = (self.active[k].id, self.active[k].tx);
            let ue = self.link.ue_point(node);
            let interference: f64 =
                self.active.iter().filter(|a| a.id != id).map(|a| self.link.rx_mw(a.source, ue)).sum();
            let sinr = crate::units::linear_to_db(self.link.serving_mw(node) / (interference + self.noise_mw));
            self.active[k].reception.as_mut().unwrap().set_current(sinr);
        }
    }
}
