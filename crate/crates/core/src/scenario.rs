//! Residential single-floor building and random AP/gNB/UE placement.

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of Wi-Fi APs in every generated scenario.
pub const N_APS: usize = 10;
/// Upper bound on the gNB count.
pub const MAX_GNBS: usize = 30;
/// Maximum number of APs/gNBs sharing one apartment.
pub const MAX_PER_APARTMENT: usize = 2;
/// Antenna height of every AP, gNB and UE.
pub const NODE_HEIGHT_M: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point { x, y, z }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }
}

/// Grid of equally sized apartments on one floor.
///
/// Apartment `k` sits at row `k / cols`, column `k % cols`; its footprint is
/// `[col * w, (col + 1) * w] x [row * d, (row + 1) * d]`. Interior walls are
/// the grid planes strictly inside the footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub rows: usize,
    pub cols: usize,
    pub apartment_w: f64,
    pub apartment_d: f64,
    pub apartment_h: f64,
}

impl Default for Building {
    fn default() -> Self {
        Building { rows: 2, cols: 10, apartment_w: 10.0, apartment_d: 10.0, apartment_h: 3.0 }
    }
}

impl Building {
    pub fn apartments(&self) -> usize {
        self.rows * self.cols
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.apartment_w
    }

    pub fn depth(&self) -> f64 {
        self.rows as f64 * self.apartment_d
    }

    /// Lower-left corner of apartment `k`.
    pub fn apartment_origin(&self, k: usize) -> (f64, f64) {
        let (row, col) = (k / self.cols, k % self.cols);
        (col as f64 * self.apartment_w, row as f64 * self.apartment_d)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width()).contains(&p.x)
            && (0.0..=self.depth()).contains(&p.y)
            && (0.0..=self.apartment_h).contains(&p.z)
    }

    /// Apartment index holding `p`. Points on a wall resolve to the
    /// apartment with the larger index.
    pub fn apartment_of(&self, p: &Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let col = ((p.x / self.apartment_w).floor() as usize).min(self.cols - 1);
        let row = ((p.y / self.apartment_d).floor() as usize).min(self.rows - 1);
        Some(row * self.cols + col)
    }

    /// X coordinates of the interior walls running parallel to the y axis.
    pub fn x_walls(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.cols).map(move |c| c as f64 * self.apartment_w)
    }

    /// Y coordinates of the interior walls running parallel to the x axis.
    pub fn y_walls(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.rows).map(move |r| r as f64 * self.apartment_d)
    }

    /// Uniform random point strictly inside apartment `k` at node height.
    pub fn sample_in_apartment<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Point {
        let (x0, y0) = self.apartment_origin(k);
        let u: f64 = rng.sample(Open01);
        let v: f64 = rng.sample(Open01);
        Point::new(x0 + u * self.apartment_w, y0 + v * self.apartment_d, NODE_HEIGHT_M)
    }
}

/// Number of interior walls crossed by the open segment `(a, b)`.
///
/// A wall plane counts when it lies strictly between the endpoints' coordinates,
/// so a segment through a wall intersection counts both planes.
pub fn walls_between(building: &Building, a: &Point, b: &Point) -> usize {
    let strictly_between = |w: f64, p: f64, q: f64| p.min(q) < w && w < p.max(q);
    let xs = building.x_walls().filter(|&w| strictly_between(w, a.x, b.x)).count();
    let ys = building.y_walls().filter(|&w| strictly_between(w, a.y, b.y)).count();
    xs + ys
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tech {
    WifiAp,
    NrUGnb,
}

impl Tech {
    pub fn is_wifi(self) -> bool {
        matches!(self, Tech::WifiAp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub tech: Tech,
    pub pos: Point,
    pub ue_pos: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub building: Building,
    pub nodes: Vec<Node>,
    pub seed: u64,
}

/// Technology mix applied on top of a generated placement.
///
/// Baselines keep the exact geometry of the coexistence realization and only
/// relabel nodes: `WifiOnly` turns every gNB into an AP, `NruOnly` turns the
/// ten APs into gNBs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    #[default]
    Coexist,
    WifiOnly,
    NruOnly,
}

impl Deployment {
    pub fn as_str(self) -> &'static str {
        match self {
            Deployment::Coexist => "coexist",
            Deployment::WifiOnly => "wifi_only",
            Deployment::NruOnly => "nru_only",
        }
    }
}

/// Places 10 APs and `n_gnb` gNBs, each with one UE in the same apartment.
///
/// APs go to 10 distinct random apartments. The first `min(n_gnb, 10)` gNBs
/// fill the remaining apartments one each; further gNBs are dropped into
/// uniformly chosen apartments that still hold fewer than two nodes.
pub fn generate_scenario(seed: u64, n_gnb: usize) -> Result<Scenario> {
    generate_in(Building::default(), seed, n_gnb)
}

pub fn generate_in(building: Building, seed: u64, n_gnb: usize) -> Result<Scenario> {
    let n_apts = building.apartments();
    if n_gnb > MAX_GNBS || N_APS + n_gnb > MAX_PER_APARTMENT * n_apts || n_apts < N_APS {
        return Err(Error::TooManyGnbs(n_gnb));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..n_apts).collect();
    order.shuffle(&mut rng);
    let mut occupancy = vec![0usize; n_apts];
    let mut homes = Vec::with_capacity(N_APS + n_gnb);

    for &apt in &order[..N_APS] {
        homes.push((Tech::WifiAp, apt));
        occupancy[apt] += 1;
    }
    let free = &order[N_APS..];
    for &apt in free.iter().take(n_gnb) {
        homes.push((Tech::NrUGnb, apt));
        occupancy[apt] += 1;
    }
    for _ in free.len().min(n_gnb)..n_gnb {
        let open: Vec<usize> = (0..n_apts).filter(|&k| occupancy[k] < MAX_PER_APARTMENT).collect();
        let apt = open[rng.random_range(0..open.len())];
        homes.push((Tech::NrUGnb, apt));
        occupancy[apt] += 1;
    }

    let nodes = homes
        .into_iter()
        .enumerate()
        .map(|(id, (tech, apt))| {
            let pos = building.sample_in_apartment(apt, &mut rng);
            let ue_pos = building.sample_in_apartment(apt, &mut rng);
            Node { id, tech, pos, ue_pos }
        })
        .collect();

    Ok(Scenario { building, nodes, seed })
}

impl Scenario {
    pub fn n_wifi(&self) -> usize {
        self.nodes.iter().filter(|n| n.tech.is_wifi()).count()
    }

    pub fn n_nru(&self) -> usize {
        self.nodes.len() - self.n_wifi()
    }

    /// Number of nodes per apartment.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0; self.building.apartments()];
        for n in &self.nodes {
            if let Some(k) = self.building.apartment_of(&n.pos) {
                occ[k] += 1;
            }
        }
        occ
    }

    pub fn with_deployment(mut self, deployment: Deployment) -> Self {
        for node in &mut self.nodes {
            node.tech = match deployment {
                Deployment::Coexist => node.tech,
                Deployment::WifiOnly => Tech::WifiAp,
                Deployment::NruOnly => Tech::NrUGnb,
            };
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }
}
