//! Multi-wall path loss, received powers and SINR.

use serde::{Deserialize, Serialize};

use crate::scenario::{walls_between, Building, Point, Scenario};
use crate::units::{dbm_to_mw, linear_to_db};
use crate::{Error, Result};

/// Shortest separation accepted by [`path_loss`].
pub const MIN_DISTANCE_M: f64 = 0.01;

/// Transmit power of every AP, gNB and UE.
pub const TX_POWER_DBM: f64 = 23.0;

/// Thermal noise over 20 MHz (-101 dBm) plus a 7 dB receiver noise figure.
pub const NOISE_FLOOR_DBM: f64 = -94.0;

/// Log-distance plus per-wall attenuation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    /// Loss at 1 m; free-space value at 5.955 GHz.
    pub l0_db: f64,
    pub exponent: f64,
    pub wall_first_db: f64,
    pub wall_next_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams { l0_db: 47.9, exponent: 2.0, wall_first_db: 16.0, wall_next_db: 14.0 }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l0_db > 0.0 && self.exponent > 0.0 && self.wall_first_db >= 0.0 && self.wall_next_db >= 0.0) {
            return Err(Error::InvalidParameter(format!("path loss parameters out of range: {self:?}")));
        }
        Ok(())
    }

    /// Attenuation of `walls` traversed walls.
    pub fn wall_loss(&self, walls: usize) -> f64 {
        match walls {
            0 => 0.0,
            k => self.wall_first_db + self.wall_next_db * (k - 1) as f64,
        }
    }

    pub fn loss_db(&self, distance_m: f64, walls: usize) -> f64 {
        self.l0_db + 10.0 * self.exponent * distance_m.log10() + self.wall_loss(walls)
    }
}

pub fn path_loss(params: &PathLossParams, building: &Building, a: &Point, b: &Point) -> Result<f64> {
    let d = a.distance(b);
    if d < MIN_DISTANCE_M {
        return Err(Error::CoincidentPoints);
    }
    Ok(params.loss_db(d, walls_between(building, a, b)))
}

pub fn rx_power(tx_power_dbm: f64, loss_db: f64) -> f64 {
    tx_power_dbm - loss_db
}

/// SINR in dB for a received power against interferers and noise, all summed
/// in milliwatts.
pub fn sinr_db(signal_mw: f64, interferers_mw: impl IntoIterator<Item = f64>, noise_mw: f64) -> f64 {
    let interference: f64 = interferers_mw.into_iter().sum();
    linear_to_db(signal_mw / (interference + noise_mw))
}

/// Received powers between every pair of radiating points of a scenario.
///
/// Point `i < n` is node `i`'s antenna, point `n + i` is its UE. The matrix
/// is symmetric; the diagonal is unused and holds `-inf`.
#[derive(Clone, Debug)]
pub struct LinkBudget {
    n_nodes: usize,
    tx_power_dbm: f64,
    noise_floor_dbm: f64,
    rx_dbm: Vec<f64>,
    rx_mw: Vec<f64>,
    walls: Vec<u8>,
}

impl LinkBudget {
    pub fn new(scenario: &Scenario, params: &PathLossParams) -> Self {
        Self::with_powers(scenario, params, TX_POWER_DBM, NOISE_FLOOR_DBM)
    }

    pub fn with_powers(scenario: &Scenario, params: &PathLossParams, tx_power_dbm: f64, noise_floor_dbm: f64) -> Self {
        let n = scenario.nodes.len();
        let points: Vec<Point> =
            scenario.nodes.iter().map(|n| n.pos).chain(scenario.nodes.iter().map(|n| n.ue_pos)).collect();
        let m = points.len();
        let mut rx_dbm = vec![f64::NEG_INFINITY; m * m];
        let mut walls = vec![0u8; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                // Clamp instead of rejecting: placements are continuous, a sub-centimetre pair is a
                // measure-zero event.
                let d = points[i].distance(&points[j]).max(MIN_DISTANCE_M);
                let k = walls_between(&scenario.building, &points[i], &points[j]);
                let p = rx_power(tx_power_dbm, params.loss_db(d, k));
                rx_dbm[i * m + j] = p;
                rx_dbm[j * m + i] = p;
                walls[i * m + j] = k as u8;
                walls[j * m + i] = k as u8;
            }
        }
        let rx_mw = rx_dbm.iter().map(|&p| dbm_to_mw(p)).collect();
        LinkBudget { n_nodes: n, tx_power_dbm, noise_floor_dbm, rx_dbm, rx_mw, walls }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_points(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn node_point(&self, node: usize) -> usize {
        node
    }

    pub fn ue_point(&self, node: usize) -> usize {
        self.n_nodes + node
    }

    pub fn tx_power_dbm(&self) -> f64 {
        self.tx_power_dbm
    }

    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_floor_dbm
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_floor_dbm)
    }

    /// Power in dBm received at point `rx` from a transmitter at point `tx`.
    pub fn rx_dbm(&self, tx: usize, rx: usize) -> f64 {
        self.rx_dbm[tx * self.n_points() + rx]
    }

    pub fn rx_mw(&self, tx: usize, rx: usize) -> f64 {
        self.rx_mw[tx * self.n_points() + rx]
    }

    pub fn walls(&self, tx: usize, rx: usize) -> usize {
        self.walls[tx * self.n_points() + rx] as usize
    }

    /// Serving-link signal at node `x`'s UE.
    pub fn serving_mw(&self, x: usize) -> f64 {
        self.rx_mw(self.node_point(x), self.ue_point(x))
    }

    /// SINR at node `serving`'s UE against the given interferer powers.
    pub fn sinr(&self, serving: usize, interferers_mw: impl IntoIterator<Item = f64>) -> f64 {
        sinr_db(self.serving_mw(serving), interferers_mw, self.noise_mw())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_scenario;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_distance_no_walls_is_l0() {
        let p = PathLossParams::default();
        let b = Building::default();
        let l = path_loss(&p, &b, &Point::new(1.0, 1.0, 1.5), &Point::new(2.0, 1.0, 1.5)).unwrap();
        assert_eq!(l, p.l0_db);
    }

    #[test]
    fn ten_metres_through_walls() {
        let p = PathLossParams::default();
        let b = Building::default();
        let one = path_loss(&p, &b, &Point::new(5.0, 5.0, 1.5), &Point::new(15.0, 5.0, 1.5)).unwrap();
        assert!(close(one, 83.9, 1e-12), "{one}");
        assert!(close(p.loss_db(10.0, 3), 111.9, 1e-12));
    }

    #[test]
    fn coincident_rejected() {
        let p = PathLossParams::default();
        let a = Point::new(1.0, 1.0, 1.5);
        assert_eq!(path_loss(&p, &Building::default(), &a, &a), Err(Error::CoincidentPoints));
    }

    #[test]
    fn rx_power_examples() {
        assert!(close(rx_power(23.0, 83.9), -60.9, 1e-12));
        assert_eq!(rx_power(23.0, 0.0), 23.0);
        assert!(close(rx_power(23.0, 111.9), -88.9, 1e-12));
    }

    #[test]
    fn sinr_examples() {
        let noise = dbm_to_mw(-94.0);
        assert!(close(sinr_db(noise, [], noise), 0.0, 1e-12));
        let s = dbm_to_mw(-60.0);
        assert!(close(sinr_db(s, [s], 1e-30), 0.0, 1e-9));
        // Independent linear evaluation: 1e-6 / (1e-9 + 10^-9.4).
        let expect = 10.0 * (1e-6f64 / (1e-9 + 10f64.powf(-9.4))).log10();
        let got = sinr_db(dbm_to_mw(-60.0), [dbm_to_mw(-90.0)], noise);
        assert!(close(got, expect, 1e-9), "{got} vs {expect}");
    }

    #[test]
    fn link_budget_matches_path_loss() {
        let s = generate_scenario(9, 12).unwrap();
        let p = PathLossParams::default();
        let lb = LinkBudget::new(&s, &p);
        for (i, a) in s.nodes.iter().enumerate() {
            for (j, b) in s.nodes.iter().enumerate() {
                if i != j {
                    let want = TX_POWER_DBM - path_loss(&p, &s.building, &a.pos, &b.ue_pos).unwrap();
                    assert!(close(lb.rx_dbm(lb.node_point(i), lb.ue_point(j)), want, 1e-9));
                    assert!(lb.rx_dbm(i, j).is_finite());
                }
            }
        }
    }

    proptest! {
        #[test]
        fn loss_monotone(d in 0.05f64..100.0, extra in 0.01f64..50.0, k in 0usize..10) {
            let p = PathLossParams::default();
            prop_assert!(p.loss_db(d + extra, k) > p.loss_db(d, k));
            prop_assert!(p.loss_db(d, k + 1) > p.loss_db(d, k));
        }

        #[test]
        fn more_interferers_never_raise_sinr(
            s in -90.0f64..-30.0,
            base in proptest::collection::vec(-110.0f64..-40.0, 0..5),
            more in proptest::collection::vec(-110.0f64..-40.0, 1..5),
        ) {
            let noise = dbm_to_mw(NOISE_FLOOR_DBM);
            let a = sinr_db(dbm_to_mw(s), base.iter().map(|&x| dbm_to_mw(x)), noise);
            let b = sinr_db(dbm_to_mw(s), base.iter().chain(&more).map(|&x| dbm_to_mw(x)), noise);
            prop_assert!(b <= a);
        }
    }
}
