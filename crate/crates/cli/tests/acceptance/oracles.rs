//! Independent recomputation of the closed-form model on small hand-built
//! scenarios. Durations, averages, efficiency and airtime are evaluated in
//! exact rational arithmetic from the same f64 inputs; powers and SINR are
//! summed directly from geometry.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use coexist_core::analytic::{
    airtime_share, evaluate, interference_and_sinr, mac_efficiency, neighborhood_average, AnalyticParams, Contenders,
    SensingGraph,
};
use coexist_core::metrics::jain_index;
use coexist_core::phy::{Aggregation, AMPDU_MAX_BYTES, AMSDU_MAX_BYTES};
use coexist_core::propagation::{LinkBudget, NOISE_FLOOR_DBM, TX_POWER_DBM};
use coexist_core::scenario::{Building, Node, Point, Scenario, Tech};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

type Q = BigRational;

fn q(x: f64) -> Q {
    Q::from_float(x).expect("finite input")
}

fn qi(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

fn rel(got: f64, want: &Q) -> f64 {
    let w = want.to_f64().unwrap();
    if want.is_zero() {
        got.abs()
    } else {
        ((got - w) / w).abs()
    }
}

/// Largest relative error seen, with a label for the report.
#[derive(Default)]
pub struct Worst {
    pub err: f64,
    pub what: String,
    pub checks: usize,
}

impl Worst {
    fn see(&mut self, got: f64, want: &Q, what: impl FnOnce() -> String) {
        let e = rel(got, want);
        self.checks += 1;
        if !(e <= self.err) {
            self.err = if e.is_nan() { f64::INFINITY } else { e };
            self.what = what();
        }
    }
}

fn node(id: usize, tech: Tech, pos: (f64, f64), ue: (f64, f64)) -> Node {
    Node { id, tech, pos: Point::new(pos.0, pos.1, 1.5), ue_pos: Point::new(ue.0, ue.1, 1.5) }
}

pub fn scenarios() -> Vec<Scenario> {
    let s = |nodes| Scenario { building: Building::default(), nodes, seed: 0 };
    use Tech::*;
    vec![
        s(vec![node(0, WifiAp, (2.0, 2.0), (7.5, 8.0)), node(1, NrUGnb, (6.0, 3.0), (3.0, 9.0))]),
        s(vec![
            node(0, WifiAp, (5.0, 5.0), (8.0, 2.0)),
            node(1, NrUGnb, (15.0, 5.0), (12.0, 8.0)),
            node(2, WifiAp, (28.0, 4.0), (23.0, 9.0)),
        ]),
        s(vec![
            node(0, WifiAp, (3.0, 3.0), (6.0, 9.0)),
            node(1, WifiAp, (13.0, 14.0), (18.0, 18.0)),
            node(2, NrUGnb, (35.0, 6.0), (31.0, 2.0)),
            node(3, NrUGnb, (26.0, 17.0), (24.0, 12.0)),
        ]),
        s(vec![
            node(0, NrUGnb, (1.0, 1.0), (9.0, 9.0)),
            node(1, WifiAp, (19.0, 9.0), (11.0, 1.0)),
            node(2, WifiAp, (21.0, 11.0), (29.0, 19.0)),
            node(3, NrUGnb, (58.0, 15.0), (55.0, 12.0)),
        ]),
    ]
}

pub fn param_sets() -> Vec<AnalyticParams> {
    let base = AnalyticParams::default();
    let mut v = Vec::new();
    for (agg, wifi_ed, nru_ed, delta, mcot, contenders) in [
        (Aggregation::Ampdu, -62.0, -62.0, 500.0, 8.0, Contenders::Local),
        (Aggregation::None, -62.0, -82.0, 1000.0, 8.0, Contenders::Local),
        (Aggregation::Amsdu, -72.0, -72.0, 250.0, 5.0, Contenders::Global),
        (Aggregation::Ampdu, -82.0, -62.0, 0.0, 5.0, Contenders::Local),
    ] {
        let mut p = base.clone();
        p.aggregation = agg;
        p.wifi_ed_dbm = wifi_ed;
        p.wifi_preamble_dbm = p.wifi_preamble_dbm.min(wifi_ed);
        p.nru_ed_dbm = nru_ed;
        p.delta_us = delta;
        p.mcot_ms = mcot;
        p.contenders = contenders;
        v.push(p);
    }
    v
}

/// Walls crossed between two points of the default 10 m grid.
fn walls(a: &Point, b: &Point) -> usize {
    let col = |x: f64| (x / 10.0).floor() as i64;
    let row = |y: f64| (y / 10.0).floor() as i64;
    ((col(a.x) - col(b.x)).abs() + (row(a.y) - row(b.y)).abs()) as usize
}

fn rx_dbm(p: &AnalyticParams, a: &Point, b: &Point) -> f64 {
    let pl = &p.path_loss;
    let w = walls(a, b);
    let wall_db = if w == 0 { 0.0 } else { pl.wall_first_db + pl.wall_next_db * (w - 1) as f64 };
    TX_POWER_DBM - (pl.l0_db + 10.0 * pl.exponent * a.distance(b).log10() + wall_db)
}

fn mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Neighbor sets from raw powers and thresholds.
fn sensing(sc: &Scenario, p: &AnalyticParams) -> Vec<Vec<usize>> {
    sc.nodes
        .iter()
        .map(|x| {
            (0..sc.nodes.len())
                .filter(|&z| z != x.id)
                .filter(|&z| {
                    let other = &sc.nodes[z];
                    let thr = match (x.tech, other.tech) {
                        (Tech::WifiAp, Tech::WifiAp) => p.wifi_preamble_dbm,
                        (Tech::WifiAp, Tech::NrUGnb) => p.wifi_ed_dbm,
                        (Tech::NrUGnb, _) => p.nru_ed_dbm,
                    };
                    rx_dbm(p, &other.pos, &x.pos) >= thr
                })
                .collect()
        })
        .collect()
}

/// Payload bytes and frame time of the PPDU an AP builds at `rate`.
fn wifi_frame(p: &AnalyticParams, rate: f64) -> (u64, Q) {
    let t = &p.timing;
    let msdu = t.msdu_bytes as u64;
    let per_amsdu = (AMSDU_MAX_BYTES as u64 / msdu).max(1);
    let airtime = |k: u64| {
        let mpdus = match p.aggregation {
            Aggregation::Ampdu => k.div_ceil(per_amsdu),
            _ => 1,
        };
        q(t.phy_header_us) + qi(8 * (mpdus * t.mac_header_bytes as u64 + k * msdu) as i64) / q(rate)
    };
    let max_k = match p.aggregation {
        Aggregation::None => 1,
        Aggregation::Amsdu => per_amsdu,
        Aggregation::Ampdu => AMPDU_MAX_BYTES as u64 / msdu,
    };
    let mut k = 1;
    while k < max_k && airtime(k + 1) <= q(p.max_ppdu_us) {
        k += 1;
    }
    (k * msdu, airtime(k))
}

fn pow(x: &Q, n: usize) -> Q {
    (0..n).fold(Q::one(), |acc, _| acc * x)
}

/// Saturation efficiency from averaged durations, exactly.
fn efficiency(t_f: &Q, t_s: &Q, t_c: &Q, tau: &Q, sigma: &Q, n: usize) -> Q {
    let one = Q::one();
    let idle = pow(&(&one - tau), n);
    let nq = qi(n as i64);
    let bracket = (t_c / sigma - &idle * (t_c / sigma - &one)) / (nq * tau * pow(&(&one - tau), n - 1));
    t_f / (t_s - t_c + sigma * bracket)
}

struct Expected {
    t_f: Vec<Q>,
    t_s: Vec<Q>,
    t_c: Vec<Q>,
    s_raw: Vec<Q>,
    airtime: Vec<Q>,
    i_wifi: Vec<f64>,
    i_nru: Vec<f64>,
    sinr_lin: Vec<f64>,
    throughput: Vec<f64>,
}

fn expected(sc: &Scenario, p: &AnalyticParams) -> Expected {
    let n = sc.nodes.len();
    let nb = sensing(sc, p);
    let deg = |x: usize| nb[x].len();
    let noise = mw(NOISE_FLOOR_DBM);

    let (mut i_wifi, mut i_nru, mut sinr_lin) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for x in 0..n {
        for z in (0..n).filter(|&z| z != x && !nb[x].contains(&z)) {
            let i = mw(rx_dbm(p, &sc.nodes[z].pos, &sc.nodes[x].ue_pos)) / (1 + deg(z)) as f64;
            match sc.nodes[z].tech {
                Tech::WifiAp => i_wifi[x] += i,
                Tech::NrUGnb => i_nru[x] += i,
            }
        }
        let signal = mw(rx_dbm(p, &sc.nodes[x].pos, &sc.nodes[x].ue_pos));
        sinr_lin[x] = signal / (i_wifi[x] + i_nru[x] + noise);
    }

    let t = &p.timing;
    let half_delta = q(p.delta_us) / qi(2);
    let mut t_f = Vec::new();
    let mut t_s = Vec::new();
    let mut t_c = Vec::new();
    let mut rho = Vec::new();
    for x in 0..n {
        let table = if sc.nodes[x].tech.is_wifi() { &p.wifi_rates } else { &p.nru_rates };
        let sinr_db = 10.0 * sinr_lin[x].log10();
        let supported = table.entries().iter().rev().find(|e| e.min_sinr_db <= sinr_db);
        let rate = supported.map_or(table.entries()[0].rate_mbps, |e| e.rate_mbps);
        match sc.nodes[x].tech {
            Tech::WifiAp => {
                let (payload, f) = wifi_frame(p, rate);
                let ack = q(t.phy_header_us) + qi(8 * t.ack_bytes as i64) / q(table.entries()[0].rate_mbps);
                t_s.push(&f + q(t.difs_us) + q(t.sifs_us) + ack);
                t_c.push(&f + q(t.difs_us));
                rho.push(supported.map_or(0.0, |_| (qi(8 * payload as i64) / &f).to_f64().unwrap()));
                t_f.push(f);
            }
            Tech::NrUGnb => {
                let f = q(p.mcot_ms) * qi(1000) - &half_delta;
                let s = &f + q(t.t_d_us) + &half_delta;
                t_c.push(s.clone());
                t_s.push(s);
                rho.push(supported.map_or(0.0, |e| e.rate_mbps));
                t_f.push(f);
            }
        }
    }

    let avg = |x: usize, v: &[Q]| {
        let sum = nb[x].iter().fold(v[x].clone(), |acc, &z| acc + &v[z]);
        sum / qi(1 + deg(x) as i64)
    };
    let tau = q(p.tau);
    let sigma = q(p.sigma_us);
    let mut s_raw = Vec::new();
    let mut airtime = Vec::new();
    let mut throughput = Vec::new();
    for x in 0..n {
        let contenders = match p.contenders {
            Contenders::Local => 1 + deg(x),
            Contenders::Global => n,
        };
        let s = efficiency(&avg(x, &t_f), &avg(x, &t_s), &avg(x, &t_c), &tau, &sigma, contenders);
        let w = |y: usize| &t_f[y] / qi(1 + deg(y) as i64);
        let share = w(x) / nb[x].iter().fold(w(x), |acc, &z| acc + w(z));
        let clamped = if s.is_negative() {
            Q::zero()
        } else if s > Q::one() {
            Q::one()
        } else {
            s.clone()
        };
        throughput.push((clamped * &share).to_f64().unwrap() * rho[x]);
        s_raw.push(s);
        airtime.push(share);
    }
    Expected { t_f, t_s, t_c, s_raw, airtime, i_wifi, i_nru, sinr_lin, throughput }
}

/// Full per-node comparison over every scenario and parameter set, plus the
/// stand-alone building blocks.
pub fn check_model(worst: &mut Worst) -> Result<(), String> {
    let (mut sensed_pairs, mut hidden_pairs) = (0, 0);
    for (si, sc) in scenarios().iter().enumerate() {
        for (pi, p) in param_sets().iter().enumerate() {
            let want = expected(sc, p);
            let got = evaluate(sc, p).map_err(|e| e.to_string())?;
            let link = LinkBudget::new(sc, &p.path_loss);
            let graph = SensingGraph::build(sc, &link, p);
            let mine = sensing(sc, p);
            for x in 0..sc.nodes.len() {
                let mut g: Vec<usize> = graph.neighbors(x).collect();
                g.sort_unstable();
                if g != mine[x] {
                    return Err(format!("scenario {si} params {pi}: node {x} senses {g:?}, expected {:?}", mine[x]));
                }
                sensed_pairs += g.len();
                hidden_pairs += sc.nodes.len() - 1 - g.len();
            }
            for (x, na) in got.nodes.iter().enumerate() {
                let tag = |f: &'static str| move || format!("{f} of node {x}, scenario {si}, params {pi}");
                worst.see(na.t_f_us, &want.t_f[x], tag("frame duration"));
                worst.see(na.t_s_us, &want.t_s[x], tag("success duration"));
                worst.see(na.t_c_us, &want.t_c[x], tag("collision duration"));
                worst.see(na.s_raw, &want.s_raw[x], tag("MAC efficiency"));
                worst.see(na.airtime, &want.airtime[x], tag("airtime share"));
                worst.see(10f64.powf(na.sinr_db / 10.0), &q(want.sinr_lin[x]), tag("SINR"));
                worst.see(na.throughput_mbps, &q(want.throughput[x]), tag("throughput"));
                let (iw, inr, _) = interference_and_sinr(x, &link, sc, &graph);
                worst.see(iw, &q(want.i_wifi[x]), tag("Wi-Fi interference"));
                worst.see(inr, &q(want.i_nru[x]), tag("NR-U interference"));

                let t_f: Vec<f64> = got.nodes.iter().map(|n| n.t_f_us).collect();
                let nb_avg = mine[x].iter().fold(q(t_f[x]), |acc, &z| acc + q(t_f[z])) / qi(1 + mine[x].len() as i64);
                worst.see(neighborhood_average(x, &t_f, &graph), &nb_avg, tag("neighborhood average"));
                worst.see(airtime_share(x, &graph, &t_f), &want.airtime[x], tag("airtime share (direct)"));
            }
        }
    }
    if sensed_pairs == 0 || hidden_pairs == 0 {
        return Err("hand-built scenarios do not exercise both sensed and hidden pairs".into());
    }

    // Efficiency alone, including 20 mutually sensing contenders.
    for &(t_f, t_s, t_c, n) in &[
        (5484.0, 5690.4, 5518.0, 1usize),
        (7500.0, 8034.0, 8034.0, 2),
        (6200.5, 6431.25, 6302.0, 3),
        (6492.0, 6862.0, 6776.0, 20),
        (9.0, 40.0, 9.0, 4),
    ] {
        let want = efficiency(&q(t_f), &q(t_s), &q(t_c), &q(0.125), &q(9.0), n);
        worst.see(mac_efficiency(t_f, t_s, t_c, 0.125, 9.0, n), &want, || format!("efficiency n={n}"));
    }
    Ok(())
}

/// Jain index examples with exact expectations.
pub fn check_jain(worst: &mut Worst) -> Result<(), String> {
    let cases: [(&[f64], Q); 4] = [
        (&[30.0, 30.0], Q::one()),
        (&[17.0, 0.0], Q::new(BigInt::from(1), BigInt::from(2))),
        (&[24.0, 38.0], Q::new(BigInt::from(62 * 62), BigInt::from(2 * (24 * 24 + 38 * 38)))),
        (&[1.0, 2.0, 3.0, 4.0], Q::new(BigInt::from(100), BigInt::from(120))),
    ];
    for (v, want) in cases {
        let got = jain_index(v).ok_or_else(|| format!("no Jain index for {v:?}"))?;
        worst.see(got, &want, || format!("Jain {v:?}"));
    }
    let j = jain_index(&[24.0, 38.0]).unwrap();
    if (j * 1000.0).round() != 951.0 {
        return Err(format!("Jain [24, 38] = {j}, expected 0.951"));
    }
    Ok(())
}
