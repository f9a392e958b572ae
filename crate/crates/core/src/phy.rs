//! SINR-to-rate tables, Wi-Fi PPDU timing and link adaptation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A-MSDU size cap (octets).
pub const AMSDU_MAX_BYTES: u32 = 11_398;
/// A-MPDU size cap (octets).
pub const AMPDU_MAX_BYTES: u32 = 6_500_631;
/// Maximum PPDU duration (µs).
pub const MAX_PPDU_US: f64 = 5_484.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub min_sinr_db: f64,
    pub rate_mbps: f64,
    pub spectral_efficiency: f64,
}

/// Ordered MCS ladder. Entry thresholds and rates are strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateTable {
    entries: Vec<RateEntry>,
}

impl RateTable {
    pub fn new(entries: Vec<RateEntry>) -> Result<Self> {
        let t = RateTable { entries };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidParameter("rate table is empty".into()));
        }
        let sorted =
            self.entries.windows(2).all(|w| w[0].min_sinr_db < w[1].min_sinr_db && w[0].rate_mbps < w[1].rate_mbps);
        if !sorted || self.entries.iter().any(|e| !(e.rate_mbps > 0.0) || !e.min_sinr_db.is_finite()) {
            return Err(Error::InvalidParameter(
                "rate table must have strictly increasing thresholds and positive, increasing rates".into(),
            ));
        }
        Ok(())
    }

    /// 802.11ax, 20 MHz, one spatial stream, 0.8 µs GI, MCS 0-11.
    pub fn wifi_default() -> Self {
        const ROWS: [(f64, f64, f64); 12] = [
            (2.0, 8.6, 0.5),
            (5.0, 17.2, 1.0),
            (9.0, 25.8, 1.5),
            (11.0, 34.4, 2.0),
            (15.0, 51.6, 3.0),
            (18.0, 68.8, 4.0),
            (20.0, 77.4, 4.5),
            (25.0, 86.0, 5.0),
            (29.0, 103.2, 6.0),
            (31.0, 114.7, 6.67),
            (34.0, 129.0, 7.5),
            (37.0, 143.4, 8.33),
        ];
        Self::from_rows(&ROWS)
    }

    /// NR CQI table 1 (QPSK to 64QAM) on 51 PRBs at 30 kHz SCS with ~14 %
    /// control and reference-signal overhead: 14.74 M data REs per second.
    pub fn nru_default() -> Self {
        const RE_PER_S: f64 = 14.74;
        const ROWS: [(f64, f64); 15] = [
            (-6.7, 0.1523),
            (-4.7, 0.2344),
            (-2.3, 0.3770),
            (0.2, 0.6016),
            (2.4, 0.8770),
            (4.3, 1.1758),
            (5.9, 1.4766),
            (8.1, 1.9141),
            (10.3, 2.4063),
            (11.7, 2.7305),
            (14.1, 3.3223),
            (16.3, 3.9023),
            (18.7, 4.5234),
            (21.0, 5.1152),
            (22.7, 5.5547),
        ];
        let rows: Vec<_> = ROWS.iter().map(|&(s, se)| (s, se * RE_PER_S, se)).collect();
        Self::from_rows(&rows)
    }

    fn from_rows(rows: &[(f64, f64, f64)]) -> Self {
        let entries = rows
            .iter()
            .map(|&(min_sinr_db, rate_mbps, spectral_efficiency)| RateEntry {
                min_sinr_db,
                rate_mbps,
                spectral_efficiency,
            })
            .collect();
        RateTable { entries }
    }

    pub fn entries(&self) -> &[RateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rate(&self, idx: usize) -> f64 {
        self.entries[idx].rate_mbps
    }

    pub fn threshold(&self, idx: usize) -> f64 {
        self.entries[idx].min_sinr_db
    }

    pub fn min_rate(&self) -> f64 {
        self.entries[0].rate_mbps
    }

    pub fn max_rate(&self) -> f64 {
        self.entries[self.entries.len() - 1].rate_mbps
    }

    /// Highest entry whose threshold is at or below `sinr_db`.
    pub fn index_for_sinr(&self, sinr_db: f64) -> Option<usize> {
        self.entries.iter().rposition(|e| e.min_sinr_db <= sinr_db)
    }
}

/// Highest supported rate at `sinr_db`, or 0 when below the lowest threshold.
pub fn rate_for_sinr(table: &RateTable, sinr_db: f64) -> f64 {
    table.index_for_sinr(sinr_db).map_or(0.0, |i| table.rate(i))
}

/// Wi-Fi framing constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameTiming {
    pub phy_header_us: f64,
    pub mac_header_bytes: u32,
    pub msdu_bytes: u32,
    /// Block-ACK frame body.
    pub ack_bytes: u32,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub slot_us: f64,
    /// NR-U defer time used by the closed-form model.
    pub t_d_us: f64,
}

impl Default for FrameTiming {
    fn default() -> Self {
        FrameTiming {
            phy_header_us: 44.0,
            mac_header_bytes: 40,
            msdu_bytes: 1474,
            ack_bytes: 32,
            sifs_us: 16.0,
            difs_us: 34.0,
            slot_us: 9.0,
            t_d_us: 34.0,
        }
    }
}

impl FrameTiming {
    pub fn validate(&self) -> Result<()> {
        let positive =
            [self.phy_header_us, self.sifs_us, self.difs_us, self.slot_us, self.t_d_us].iter().all(|&v| v > 0.0)
                && self.mac_header_bytes > 0
                && self.msdu_bytes > 0
                && self.ack_bytes > 0;
        if !positive || self.sifs_us >= self.difs_us {
            return Err(Error::InvalidParameter(format!("frame timing out of range: {self:?}")));
        }
        Ok(())
    }

    /// ACK airtime at the lowest table rate.
    pub fn ack_duration_us(&self, min_rate_mbps: f64) -> f64 {
        self.phy_header_us + self.ack_bytes as f64 * 8.0 / min_rate_mbps
    }

    fn airtime_us(&self, mpdus: usize, payload_bytes: u32, rate_mbps: f64) -> f64 {
        self.phy_header_us + (mpdus as f64 * self.mac_header_bytes as f64 + payload_bytes as f64) * 8.0 / rate_mbps
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    None,
    Amsdu,
    Ampdu,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::None => "none",
            Aggregation::Amsdu => "amsdu",
            Aggregation::Ampdu => "ampdu",
        }
    }
}

/// Layout of one Wi-Fi PPDU.
#[derive(Clone, Debug, PartialEq)]
pub struct WifiPpdu {
    pub duration_us: f64,
    pub payload_bytes: u32,
    /// MSDUs carried by each MPDU, in transmission order.
    pub mpdu_msdus: Vec<u32>,
}

impl WifiPpdu {
    /// Offsets (µs from PPDU start) of each MPDU's data portion.
    pub fn mpdu_spans(&self, timing: &FrameTiming, rate_mbps: f64) -> Vec<(f64, f64)> {
        let mut t = timing.phy_header_us;
        self.mpdu_msdus
            .iter()
            .map(|&k| {
                let bytes = timing.mac_header_bytes + k * timing.msdu_bytes;
                let end = t + bytes as f64 * 8.0 / rate_mbps;
                let span = (t, end);
                t = end;
                span
            })
            .collect()
    }
}

/// Builds the PPDU an AP sends at `rate_mbps` under `aggregation`.
///
/// A-MSDUs hold at most `floor(11398 / msdu)` MSDUs; A-MPDUs pack MSDUs
/// greedily into such A-MSDU subframes. Every PPDU carries at least one MSDU
/// and, when more than one, stays within `max_ppdu_us`.
pub fn wifi_tx_duration(timing: &FrameTiming, aggregation: Aggregation, rate_mbps: f64, max_ppdu_us: f64) -> WifiPpdu {
    debug_assert!(rate_mbps > 0.0);
    let per_amsdu = (AMSDU_MAX_BYTES / timing.msdu_bytes).max(1);
    let fits = |mpdus: usize, msdus: u32| timing.airtime_us(mpdus, msdus * timing.msdu_bytes, rate_mbps) <= max_ppdu_us;
    let mpdu_msdus = match aggregation {
        Aggregation::None => vec![1],
        Aggregation::Amsdu => {
            let mut k = 1;
            while k < per_amsdu && fits(1, k + 1) {
                k += 1;
            }
            vec![k]
        }
        Aggregation::Ampdu => {
            let mut layout = vec![1u32];
            let mut total = 1u32;
            loop {
                let last = *layout.last().unwrap();
                let (mpdus, next) =
                    if last < per_amsdu { (layout.len(), total + 1) } else { (layout.len() + 1, total + 1) };
                if !fits(mpdus, next) || (next * timing.msdu_bytes) as u64 > AMPDU_MAX_BYTES as u64 {
                    break;
                }
                if last < per_amsdu {
                    *layout.last_mut().unwrap() += 1;
                } else {
                    layout.push(1);
                }
                total = next;
            }
            layout
        }
    };
    let msdus: u32 = mpdu_msdus.iter().sum();
    let payload_bytes = msdus * timing.msdu_bytes;
    WifiPpdu { duration_us: timing.airtime_us(mpdu_msdus.len(), payload_bytes, rate_mbps), payload_bytes, mpdu_msdus }
}

/// Exponentially windowed per-rate delivery statistics for one link.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkHistory {
    successes: Vec<f64>,
    attempts: Vec<f64>,
}

impl LinkHistory {
    /// Rates whose decayed attempt count falls below this are forgotten.
    pub const MIN_WEIGHT: f64 = 0.05;

    pub fn new(n_rates: usize) -> Self {
        LinkHistory { successes: vec![0.0; n_rates], attempts: vec![0.0; n_rates] }
    }

    pub fn record(&mut self, rate_idx: usize, successes: u32, attempts: u32) {
        self.successes[rate_idx] += successes as f64;
        self.attempts[rate_idx] += attempts as f64;
    }

    /// Scales all counts by `factor`, ageing older outcomes.
    pub fn decay(&mut self, factor: f64) {
        self.successes.iter_mut().chain(self.attempts.iter_mut()).for_each(|v| *v *= factor);
    }

    pub fn success_probability(&self, rate_idx: usize) -> Option<f64> {
        let a = *self.attempts.get(rate_idx)?;
        (a >= Self::MIN_WEIGHT).then(|| self.successes[rate_idx] / a)
    }
}

/// Index of the rate maximising `rate * estimated success probability` among
/// rates with recent attempts; the lowest rate when nothing has been tried.
pub fn adapt_rate_index(history: &LinkHistory, table: &RateTable) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..table.len() {
        if let Some(p) = history.success_probability(i) {
            let tput = p * table.rate(i);
            if best.is_none_or(|(_, b)| tput > b) {
                best = Some((i, tput));
            }
        }
    }
    best.map_or(0, |(i, _)| i)
}

pub fn adapt_rate(history: &LinkHistory, table: &RateTable) -> f64 {
    table.rate(adapt_rate_index(history, table))
}

/// Probing rate controller for one Wi-Fi link.
///
/// Every `probe_interval`-th PPDU goes out at a neighbouring rate of the
/// current best (alternating up and down); other PPDUs use
/// [`adapt_rate_index`]. Until the first failed upward probe the controller
/// bisects towards the top of the table, probing every other PPDU.
#[derive(Clone, Debug)]
pub struct RateController {
    history: LinkHistory,
    n_rates: usize,
    frames: u64,
    probe_up: bool,
    /// Lowest rate that failed a start-up probe (exclusive upper bound of the search).
    ceiling: usize,
    searching: bool,
    best: usize,
    pub probe_interval: u64,
    pub decay: f64,
}

impl RateController {
    pub fn new(n_rates: usize) -> Self {
        RateController {
            history: LinkHistory::new(n_rates),
            n_rates,
            frames: 0,
            probe_up: true,
            ceiling: n_rates,
            searching: true,
            best: 0,
            probe_interval: 10,
            decay: 0.75,
        }
    }

    pub fn history(&self) -> &LinkHistory {
        &self.history
    }

    /// Rate index for the next PPDU.
    pub fn select(&mut self, table: &RateTable) -> usize {
        self.frames += 1;
        if self.frames % self.probe_interval == 0 {
            self.history.decay(self.decay);
        }
        let best = adapt_rate_index(&self.history, table);
        self.best = best;
        if self.searching {
            if best + 1 >= self.ceiling {
                self.searching = false;
            } else if self.frames % 2 == 0 {
                return (best + self.ceiling).div_ceil(2).min(self.n_rates - 1);
            } else {
                return best;
            }
        }
        if self.frames % self.probe_interval != 0 || self.n_rates == 1 {
            return best;
        }
        self.probe_up = !self.probe_up;
        let up = best + 1 < self.n_rates;
        let down = best > 0;
        match (self.probe_up, up, down) {
            (true, true, _) | (false, true, false) => best + 1,
            (_, _, true) => best - 1,
            _ => best,
        }
    }

    /// Feeds back the per-MPDU outcome of a PPDU sent at `rate_idx`.
    pub fn report(&mut self, rate_idx: usize, delivered: u32, sent: u32) {
        self.history.record(rate_idx, delivered, sent);
        if self.searching && rate_idx > self.best && delivered * 2 < sent {
            self.ceiling = self.ceiling.min(rate_idx);
        }
    }
}

/// CQI-driven MCS selection for an NR-U link.
///
/// The UE reports the burst-averaged SINR with its HARQ feedback; the next
/// burst uses the highest MCS that report supports.
#[derive(Clone, Debug, Default)]
pub struct CqiReport {
    last_sinr_db: Option<f64>,
}

impl CqiReport {
    pub fn update(&mut self, sinr_db: f64) {
        self.last_sinr_db = Some(sinr_db);
    }

    pub fn last(&self) -> Option<f64> {
        self.last_sinr_db
    }

    /// MCS index for the next burst; the lowest before any report or when
    /// the report is below every threshold.
    pub fn select(&self, table: &RateTable) -> usize {
        self.last_sinr_db.and_then(|s| table.index_for_sinr(s)).unwrap_or(0)
    }
}
