//! Experiment configuration files.
//!
//! A config is TOML: top-level keys give the sweep axes and run settings, and
//! optional `[[sweep]]` tables add further cell groups that override some of
//! the axes (baselines, always-on gNBs and the like). Every axis accepts a
//! single value or a list.
//!
//! ```toml
//! experiment = "demo"
//! mode = "both"            # simulate | analytic | both
//! n_gnb = [0, 10, 20]
//! aggregation = "ampdu"    # none | amsdu | ampdu
//! ed = [[-62, -62]]        # [wifi, nru] energy-detect pairs, dBm
//! mcot_ms = 8
//! delta_us = 500           # NR-U mini-slot, bounds the reservation signal
//! duration_s = 1.0
//! n_seeds = 20
//!
//! [[sweep]]                # Wi-Fi-only baseline on the same geometries
//! deployment = "wifi_only"
//! ```

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use coexist_core::analytic::{AnalyticParams, Contenders};
use coexist_core::mac::nru::MINISLOT_CHOICES_US;
use coexist_core::metrics::CellKey;
use coexist_core::phy::Aggregation;
use coexist_core::scenario::{Deployment, MAX_GNBS};
use coexist_core::sim::SimConfig;
use serde::Deserialize;
use toml::Spanned;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Simulate,
    Analytic,
    Both,
}

impl Mode {
    pub fn simulate(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }

    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }
}

/// Run length and seed count presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// 1 s per realization, 20 seeds.
    Ci,
    /// 4 s per realization, 100 seeds.
    Paper,
}

impl Profile {
    pub fn duration_s(self) -> f64 {
        match self {
            Profile::Ci => 1.0,
            Profile::Paper => 4.0,
        }
    }

    pub fn n_seeds(self) -> usize {
        match self {
            Profile::Ci => 20,
            Profile::Paper => 100,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

type Axis<T> = Option<Spanned<OneOrMany<T>>>;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxes {
    n_gnb: Axis<usize>,
    aggregation: Axis<Aggregation>,
    ed: Axis<[f64; 2]>,
    mcot_ms: Axis<f64>,
    delta_us: Axis<u64>,
    deployment: Axis<Deployment>,
    nru_lbt: Axis<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Spanned<String>,
    #[serde(default)]
    mode: Mode,
    n_gnb: Axis<usize>,
    aggregation: Axis<Aggregation>,
    ed: Axis<[f64; 2]>,
    mcot_ms: Axis<f64>,
    delta_us: Axis<u64>,
    deployment: Axis<Deployment>,
    nru_lbt: Axis<bool>,
    duration_s: Option<Spanned<f64>>,
    n_seeds: Option<Spanned<usize>>,
    #[serde(default)]
    base_seed: u64,
    output: Option<String>,
    #[serde(default)]
    workers: usize,
    #[serde(default)]
    contenders: Contenders,
    tau: Option<Spanned<f64>>,
    #[serde(default)]
    sweep: Vec<RawAxes>,
}

/// A configuration problem, located in the source file when possible.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// One point of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub key: CellKey,
    pub sim: SimConfig,
    pub analytic: AnalyticParams,
}

impl Cell {
    pub fn describe(&self) -> String {
        let k = &self.key;
        let mut s = format!(
            "n_gnb={} agg={} ed={}/{} mcot={}ms delta={}us",
            k.n_gnb,
            k.aggregation.as_str(),
            k.wifi_ed,
            k.nru_ed,
            k.mcot_ms,
            k.delta_us
        );
        if k.deployment != Deployment::Coexist {
            s.push_str(&format!(" {}", k.deployment.as_str()));
        }
        if !k.nru_lbt {
            s.push_str(" always-on");
        }
        s
    }
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub mode: Mode,
    pub cells: Vec<Cell>,
    pub duration_s: f64,
    pub n_seeds: usize,
    pub base_seed: u64,
    /// File name of the results CSV inside the output directory.
    pub output: String,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path, profile: Option<Profile>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path, profile)
    }

    /// Parses and validates config text; `path` is used for diagnostics only.
    pub fn parse(text: &str, path: &Path, profile: Option<Profile>) -> Result<Self, ConfigError> {
        let err = |span: Option<Range<usize>>, message: String| {
            let (line, column) = match span {
                Some(s) => {
                    let (l, c) = line_col(text, s.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError { path: path.to_path_buf(), line, column, message }
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| err(e.span(), e.message().to_string()))?;

        let experiment = raw.experiment.get_ref().trim().to_string();
        if experiment.is_empty() || !experiment.chars().all(|c| c.is_ascii_alphanumeric() || "_-".contains(c)) {
            return Err(err(Some(raw.experiment.span()), "experiment must be a non-empty [A-Za-z0-9_-] name".into()));
        }
        let duration_s = match (profile, &raw.duration_s) {
            (Some(p), _) => p.duration_s(),
            (None, Some(d)) => *d.get_ref(),
            (None, None) => Profile::Ci.duration_s(),
        };
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(err(raw.duration_s.as_ref().map(|d| d.span()), "duration_s must be positive".into()));
        }
        let n_seeds = match (profile, &raw.n_seeds) {
            (Some(p), _) => p.n_seeds(),
            (None, Some(n)) => *n.get_ref(),
            (None, None) => Profile::Ci.n_seeds(),
        };
        if n_seeds == 0 {
            return Err(err(raw.n_seeds.as_ref().map(|n| n.span()), "n_seeds must be at least 1".into()));
        }
        if let Some(t) = &raw.tau {
            if !(*t.get_ref() > 0.0 && *t.get_ref() < 1.0) {
                return Err(err(Some(t.span()), "tau must lie in (0, 1)".into()));
            }
        }

        let top = RawAxes {
            n_gnb: raw.n_gnb,
            aggregation: raw.aggregation,
            ed: raw.ed,
            mcot_ms: raw.mcot_ms,
            delta_us: raw.delta_us,
            deployment: raw.deployment,
            nru_lbt: raw.nru_lbt,
        };
        let mut groups = vec![top.clone()];
        groups.extend(raw.sweep.into_iter().map(|s| RawAxes {
            n_gnb: s.n_gnb.or(top.n_gnb.clone()),
            aggregation: s.aggregation.or(top.aggregation.clone()),
            ed: s.ed.or(top.ed.clone()),
            mcot_ms: s.mcot_ms.or(top.mcot_ms.clone()),
            delta_us: s.delta_us.or(top.delta_us.clone()),
            deployment: s.deployment.or(top.deployment.clone()),
            nru_lbt: s.nru_lbt.or(top.nru_lbt.clone()),
        }));

        let mut cells = Vec::new();
        for g in groups {
            let axes = Axes::resolve(g, &err)?;
            for &n_gnb in &axes.n_gnb {
                for &aggregation in &axes.aggregation {
                    for &[wifi_ed, nru_ed] in &axes.ed {
                        for &mcot_ms in &axes.mcot_ms {
                            for &delta_us in &axes.delta_us {
                                for &deployment in &axes.deployment {
                                    for &nru_lbt in &axes.nru_lbt {
                                        let key = CellKey {
                                            experiment: experiment.clone(),
                                            n_gnb,
                                            aggregation,
                                            wifi_ed,
                                            nru_ed,
                                            mcot_ms,
                                            delta_us,
                                            deployment,
                                            nru_lbt,
                                        };
                                        if cells.iter().any(|c: &Cell| c.key == key) {
                                            continue;
                                        }
                                        let sim = sim_config(&key);
                                        let mut analytic = AnalyticParams::from_sim(&sim);
                                        analytic.contenders = raw.contenders;
                                        if let Some(t) = &raw.tau {
                                            analytic.tau = *t.get_ref();
                                        }
                                        cells.push(Cell { key, sim, analytic });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        let output = raw.output.unwrap_or_else(|| format!("{experiment}.csv"));
        if output.contains(['/', '\\']) || output.is_empty() {
            return Err(err(None, format!("output must be a plain file name, got {output:?}")));
        }
        Ok(ExperimentConfig {
            experiment,
            mode: raw.mode,
            cells,
            duration_s,
            n_seeds,
            base_seed: raw.base_seed,
            output,
            workers: raw.workers,
        })
    }

    /// Rows the run will produce.
    pub fn n_rows(&self) -> usize {
        self.cells.iter().map(|c| self.sources(c).len()).sum()
    }

    /// Sources evaluated for a cell. The closed-form model assumes LBT, so
    /// always-on cells are simulated only.
    pub fn sources(&self, cell: &Cell) -> Vec<coexist_core::metrics::Source> {
        use coexist_core::metrics::Source;
        let mut v = Vec::new();
        if self.mode.analytic() && cell.key.nru_lbt {
            v.push(Source::Analytic);
        }
        if self.mode.simulate() {
            v.push(Source::Simulated);
        }
        v
    }
}

struct Axes {
    n_gnb: Vec<usize>,
    aggregation: Vec<Aggregation>,
    ed: Vec<[f64; 2]>,
    mcot_ms: Vec<f64>,
    delta_us: Vec<u64>,
    deployment: Vec<Deployment>,
    nru_lbt: Vec<bool>,
}

impl Axes {
    fn resolve(raw: RawAxes, err: &dyn Fn(Option<Range<usize>>, String) -> ConfigError) -> Result<Self, ConfigError> {
        fn take<T: Clone>(
            axis: Axis<T>,
            default: T,
            name: &str,
            check: impl Fn(&T) -> Option<String>,
            err: &dyn Fn(Option<Range<usize>>, String) -> ConfigError,
        ) -> Result<Vec<T>, ConfigError> {
            let Some(axis) = axis else { return Ok(vec![default]) };
            let span = axis.span();
            let values = axis.into_inner().into_vec();
            if values.is_empty() {
                return Err(err(Some(span), format!("axis `{name}` is empty")));
            }
            for v in &values {
                if let Some(msg) = check(v) {
                    return Err(err(Some(span), format!("axis `{name}`: {msg}")));
                }
            }
            Ok(values)
        }
        Ok(Axes {
            n_gnb: take(
                raw.n_gnb,
                10,
                "n_gnb",
                |&n| (n > MAX_GNBS).then(|| format!("{n} gNBs exceeds the maximum of {MAX_GNBS}")),
                err,
            )?,
            aggregation: take(raw.aggregation, Aggregation::Ampdu, "aggregation", |_| None, err)?,
            ed: take(
                raw.ed,
                [-62.0, -62.0],
                "ed",
                |e| {
                    e.iter()
                        .any(|t| !(-100.0..=-40.0).contains(t))
                        .then(|| format!("thresholds {e:?} outside [-100, -40] dBm"))
                },
                err,
            )?,
            mcot_ms: take(
                raw.mcot_ms,
                8.0,
                "mcot_ms",
                |&m| (m != 5.0 && m != 8.0).then(|| format!("MCOT {m} ms is not one of 5, 8")),
                err,
            )?,
            delta_us: take(
                raw.delta_us,
                500,
                "delta_us",
                |d| {
                    (!MINISLOT_CHOICES_US.contains(d))
                        .then(|| format!("mini-slot {d} us is not one of {MINISLOT_CHOICES_US:?}"))
                },
                err,
            )?,
            deployment: take(raw.deployment, Deployment::Coexist, "deployment", |_| None, err)?,
            nru_lbt: take(raw.nru_lbt, true, "nru_lbt", |_| None, err)?,
        })
    }
}

/// Simulator configuration of one cell.
pub fn sim_config(key: &CellKey) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.wifi = cfg.wifi.with_energy_detect(key.wifi_ed);
    cfg.wifi.aggregation = key.aggregation;
    cfg.nru.energy_detect_dbm = key.nru_ed;
    cfg.nru.mcot_ms = key.mcot_ms;
    cfg.nru.minislot_us = key.delta_us;
    cfg.nru.lbt = key.nru_lbt;
    cfg
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}
