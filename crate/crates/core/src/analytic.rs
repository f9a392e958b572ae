//! Closed-form per-node throughput model, evaluated per scenario realization.
//!
//! `R_x = S_x * AirTime_x * rho_x(SINR_u)`, where the MAC efficiency `S_x`
//! follows a Bianchi-style saturation expression over neighborhood-averaged
//! frame, success and collision durations, `AirTime_x` splits the channel
//! among the nodes `x` can sense, and `SINR_u` counts only interferers outside
//! the sensing range, each weighted by its own chance of holding its channel.

use serde::{Deserialize, Serialize};

use crate::phy::{wifi_tx_duration, Aggregation, FrameTiming, RateTable};
use crate::propagation::{LinkBudget, PathLossParams};
use crate::scenario::{generate_scenario, Scenario, Tech};
use crate::sim::SimConfig;
use crate::units::linear_to_db;
use crate::{Error, Result};

/// Which contender count enters the efficiency expression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contenders {
    /// `1 + |A_x| + |B_x|`.
    #[default]
    Local,
    /// Every node of the scenario.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticParams {
    /// Per-slot transmission probability.
    pub tau: f64,
    pub sigma_us: f64,
    /// Upper bound of the NR-U reservation signal.
    pub delta_us: f64,
    pub mcot_ms: f64,
    pub contenders: Contenders,
    pub timing: FrameTiming,
    pub aggregation: Aggregation,
    pub max_ppdu_us: f64,
    pub wifi_preamble_dbm: f64,
    pub wifi_ed_dbm: f64,
    pub nru_ed_dbm: f64,
    pub wifi_rates: RateTable,
    pub nru_rates: RateTable,
    pub path_loss: PathLossParams,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        Self::from_sim(&SimConfig::default())
    }
}

impl AnalyticParams {
    /// Model parameters matching a simulator configuration, with
    /// `tau = 2 / (CW_min + 1)`.
    pub fn from_sim(cfg: &SimConfig) -> Self {
        AnalyticParams {
            tau: 2.0 / (cfg.wifi.cw_min as f64 + 1.0),
            sigma_us: cfg.timing.slot_us,
            delta_us: cfg.nru.minislot_us as f64,
            mcot_ms: cfg.nru.mcot_ms,
            contenders: Contenders::Local,
            timing: cfg.timing,
            aggregation: cfg.wifi.aggregation,
            max_ppdu_us: cfg.wifi.max_ppdu_us,
            wifi_preamble_dbm: cfg.wifi.preamble_detect_dbm,
            wifi_ed_dbm: cfg.wifi.energy_detect_dbm,
            nru_ed_dbm: cfg.nru.energy_detect_dbm,
            wifi_rates: cfg.wifi_rates.clone(),
            nru_rates: cfg.nru_rates.clone(),
            path_loss: cfg.path_loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if !(self.sigma_us > 0.0 && self.delta_us >= 0.0 && self.mcot_ms * 1000.0 > self.delta_us / 2.0) {
            return Err(Error::InvalidParameter("sigma, delta or MCOT out of range".into()));
        }
        self.timing.validate()?;
        self.wifi_rates.validate()?;
        self.nru_rates.validate()?;
        self.path_loss.validate()
    }
}

/// Who senses whom: `wifi[x]` and `nru[x]` list the APs and gNBs node `x`
/// detects at its own thresholds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensingGraph {
    pub wifi: Vec<Vec<usize>>,
    pub nru: Vec<Vec<usize>>,
}

impl SensingGraph {
    pub fn build(scenario: &Scenario, link: &LinkBudget, params: &AnalyticParams) -> Self {
        let n = scenario.nodes.len();
        let mut wifi = vec![Vec::new(); n];
        let mut nru = vec![Vec::new(); n];
        for (x, node) in scenario.nodes.iter().enumerate() {
            for (z, other) in scenario.nodes.iter().enumerate() {
                if z == x {
                    continue;
                }
                let p = link.rx_dbm(link.node_point(z), link.node_point(x));
                let threshold = match (node.tech, other.tech) {
                    (Tech::WifiAp, Tech::WifiAp) => params.wifi_preamble_dbm.min(params.wifi_ed_dbm),
                    (Tech::WifiAp, Tech::NrUGnb) => params.wifi_ed_dbm,
                    (Tech::NrUGnb, _) => params.nru_ed_dbm,
                };
                if p >= threshold {
                    match other.tech {
                        Tech::WifiAp => wifi[x].push(z),
                        Tech::NrUGnb => nru[x].push(z),
                    }
                }
            }
        }
        SensingGraph { wifi, nru }
    }

    pub fn len(&self) -> usize {
        self.wifi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wifi.is_empty()
    }

    /// `|A_x| + |B_x|`.
    pub fn degree(&self, x: usize) -> usize {
        self.wifi[x].len() + self.nru[x].len()
    }

    pub fn senses(&self, x: usize, z: usize) -> bool {
        self.wifi[x].contains(&z) || self.nru[x].contains(&z)
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.wifi[x].iter().chain(&self.nru[x]).copied()
    }
}

/// Data-frame duration: the PPDU at `rate_mbps` for an AP, `MCOT - Δ/2` for a
/// gNB.
pub fn frame_duration(tech: Tech, params: &AnalyticParams, rate_mbps: f64) -> f64 {
    match tech {
        Tech::WifiAp => wifi_tx_duration(&params.timing, params.aggregation, rate_mbps, params.max_ppdu_us).duration_us,
        Tech::NrUGnb => params.mcot_ms * 1000.0 - params.delta_us / 2.0,
    }
}

/// Durations of a successful and of a collided channel access.
pub fn success_collision_durations(tech: Tech, t_f_us: f64, params: &AnalyticParams) -> (f64, f64) {
    let t = &params.timing;
    match tech {
        Tech::WifiAp => {
            let ack = t.phy_header_us + t.ack_bytes as f64 * 8.0 / params.wifi_rates.min_rate();
            (t_f_us + t.difs_us + t.sifs_us + ack, t_f_us + t.difs_us)
        }
        Tech::NrUGnb => {
            let t_s = t_f_us + t.t_d_us + params.delta_us / 2.0;
            (t_s, t_s)
        }
    }
}

/// Mean of `values` over `x` and the nodes it senses.
pub fn neighborhood_average(x: usize, values: &[f64], graph: &SensingGraph) -> f64 {
    let sum: f64 = values[x] + graph.neighbors(x).map(|z| values[z]).sum::<f64>();
    sum / (1 + graph.degree(x)) as f64
}

/// Unclamped MAC efficiency from averaged durations and `n` contenders.
pub fn mac_efficiency(t_f: f64, t_s: f64, t_c: f64, tau: f64, sigma: f64, n: usize) -> f64 {
    let n_f = n as f64;
    let idle = (1.0 - tau).powi(n as i32);
    let bracket = (t_c / sigma - idle * (t_c / sigma - 1.0)) / (n_f * tau * (1.0 - tau).powi(n as i32 - 1));
    t_f / (t_s - t_c + sigma * bracket)
}

/// Share of time node `x` holds the channel among the nodes it senses.
pub fn airtime_share(x: usize, graph: &SensingGraph, frame_us: &[f64]) -> f64 {
    let weight = |y: usize| frame_us[y] / (1 + graph.degree(y)) as f64;
    let own = weight(x);
    own / (own + graph.neighbors(x).map(weight).sum::<f64>())
}

/// Interference at node `x`'s UE from Wi-Fi and NR-U nodes outside its
/// sensing sets (mW), and the resulting SINR (dB).
pub fn interference_and_sinr(
    x: usize,
    link: &LinkBudget,
    scenario: &Scenario,
    graph: &SensingGraph,
) -> (f64, f64, f64) {
    let ue = link.ue_point(x);
    let (mut i_wifi, mut i_nru) = (0.0, 0.0);
    for (z, node) in scenario.nodes.iter().enumerate() {
        if z == x || graph.senses(x, z) {
            continue;
        }
        let p = link.rx_mw(link.node_point(z), ue) / (1 + graph.degree(z)) as f64;
        match node.tech {
            Tech::WifiAp => i_wifi += p,
            Tech::NrUGnb => i_nru += p,
        }
    }
    let sinr = linear_to_db(link.serving_mw(x) / (i_wifi + i_nru + link.noise_mw()));
    (i_wifi, i_nru, sinr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeAnalytic {
    pub tech: Tech,
    pub sinr_db: f64,
    /// Rate index supported by `sinr_db`; `None` below the lowest threshold.
    pub rate_idx: Option<usize>,
    pub t_f_us: f64,
    pub t_s_us: f64,
    pub t_c_us: f64,
    pub contenders: usize,
    pub s_raw: f64,
    pub s: f64,
    pub airtime: f64,
    pub rho_mbps: f64,
    pub throughput_mbps: f64,
    /// Efficiency denominator was non-positive or not finite.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResult {
    pub tau: f64,
    pub nodes: Vec<NodeAnalytic>,
}

impl AnalyticResult {
    /// Mean throughput over the nodes of one technology.
    pub fn mean(&self, tech: Tech) -> Option<f64> {
        let v: Vec<f64> = self.nodes.iter().filter(|n| n.tech == tech).map(|n| n.throughput_mbps).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn degenerate_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.degenerate).count()
    }
}

/// Evaluates the model on one realization.
pub fn evaluate(scenario: &Scenario, params: &AnalyticParams) -> Result<AnalyticResult> {
    params.validate()?;
    if scenario.nodes.is_empty() {
        return Err(Error::EmptyScenario);
    }
    let link = LinkBudget::new(scenario, &params.path_loss);
    let graph = SensingGraph::build(scenario, &link, params);
    let n = scenario.nodes.len();

    let mut sinr = vec![0.0; n];
    let mut rate_idx = vec![None; n];
    let mut t_f = vec![0.0; n];
    let mut t_s = vec![0.0; n];
    let mut t_c = vec![0.0; n];
    for (x, node) in scenario.nodes.iter().enumerate() {
        sinr[x] = interference_and_sinr(x, &link, scenario, &graph).2;
        let table = if node.tech.is_wifi() { &params.wifi_rates } else { &params.nru_rates };
        rate_idx[x] = table.index_for_sinr(sinr[x]);
        let rate = table.rate(rate_idx[x].unwrap_or(0));
        t_f[x] = frame_duration(node.tech, params, rate);
        (t_s[x], t_c[x]) = success_collision_durations(node.tech, t_f[x], params);
    }

    let nodes = scenario
        .nodes
        .iter()
        .enumerate()
        .map(|(x, node)| {
            let contenders = match params.contenders {
                Contenders::Local => 1 + graph.degree(x),
                Contenders::Global => n,
            };
            let (f, s, c) = (
                neighborhood_average(x, &t_f, &graph),
                neighborhood_average(x, &t_s, &graph),
                neighborhood_average(x, &t_c, &graph),
            );
            let s_raw = mac_efficiency(f, s, c, params.tau, params.sigma_us, contenders);
            let degenerate = !s_raw.is_finite() || s_raw < 0.0;
            let s = if degenerate { 0.0 } else { s_raw.min(1.0) };
            let airtime = airtime_share(x, &graph, &t_f);
            let rho = match (node.tech, rate_idx[x]) {
                (_, None) => 0.0,
                (Tech::WifiAp, Some(i)) => {
                    let ppdu = wifi_tx_duration(
                        &params.timing,
                        params.aggregation,
                        params.wifi_rates.rate(i),
                        params.max_ppdu_us,
                    );
                    ppdu.payload_bytes as f64 * 8.0 / ppdu.duration_us
                }
                (Tech::NrUGnb, Some(i)) => params.nru_rates.rate(i),
            };
            NodeAnalytic {
                tech: node.tech,
                sinr_db: sinr[x],
                rate_idx: rate_idx[x],
                t_f_us: t_f[x],
                t_s_us: t_s[x],
                t_c_us: t_c[x],
                contenders,
                s_raw,
                s,
                airtime,
                rho_mbps: rho,
                throughput_mbps: s * airtime * rho,
                degenerate,
            }
        })
        .collect();
    Ok(AnalyticResult { tau: params.tau, nodes })
}

/// Per-network means (Wi-Fi, NR-U) over `n_realizations` scenarios seeded
/// `base_seed, base_seed + 1, ...`.
pub fn analytic_mean_throughput(
    n_gnb: usize,
    n_realizations: usize,
    base_seed: u64,
    params: &AnalyticParams,
) -> Result<(f64, Option<f64>)> {
    if n_realizations == 0 {
        return Err(Error::InvalidParameter("at least one realization required".into()));
    }
    let (mut wifi, mut nru) = (0.0, 0.0);
    for i in 0..n_realizations as u64 {
        let r = evaluate(&generate_scenario(base_seed.wrapping_add(i), n_gnb)?, params)?;
        wifi += r.mean(Tech::WifiAp).unwrap_or(0.0);
        nru += r.mean(Tech::NrUGnb).unwrap_or(0.0);
    }
    let k = n_realizations as f64;
    Ok((wifi / k, (n_gnb > 0).then_some(nru / k)))
}
