//! Parallel sweep execution.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use anyhow::{anyhow, Context, Result};
use coexist_core::analytic;
use coexist_core::metrics::{self, ExperimentRow, SeedSample, Source};
use coexist_core::phy::Aggregation;
use coexist_core::scenario::{generate_scenario, Deployment, Scenario};
use coexist_core::sim::{run_realization, write_trace};
use coexist_core::{SimTime, Tech};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, ExperimentConfig};
use crate::seeds::{realization_seed, scenario_seed};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    /// Directory for CSV files and traces; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub trace: bool,
    pub progress: bool,
}

/// Throughput of one node in one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub experiment: String,
    pub n_gnb: usize,
    pub aggregation: Aggregation,
    pub wifi_ed: f64,
    pub nru_ed: f64,
    pub mcot_ms: f64,
    pub delta_us: u64,
    pub deployment: Deployment,
    pub nru_lbt: bool,
    pub source: Source,
    pub seed_index: usize,
    pub node: usize,
    pub tech: Tech,
    pub throughput_mbps: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    /// One row per cell and source, canonically ordered.
    pub rows: Vec<ExperimentRow>,
    pub nodes: Vec<NodeRow>,
}

struct TaskResult {
    cell: usize,
    seed: usize,
    per_source: Vec<(Source, Vec<(Tech, f64)>)>,
}

/// Scenario of realization `seed` of `cell`.
pub fn cell_scenario(config: &ExperimentConfig, cell: &Cell, seed: usize) -> Result<Scenario> {
    let s = generate_scenario(scenario_seed(config.base_seed, cell.key.n_gnb, seed), cell.key.n_gnb)?;
    Ok(s.with_deployment(cell.key.deployment))
}

fn run_task(config: &ExperimentConfig, ci: usize, seed: usize, opts: &RunOptions) -> Result<TaskResult> {
    let cell = &config.cells[ci];
    let scenario = cell_scenario(config, cell, seed)?;
    let techs: Vec<Tech> = scenario.nodes.iter().map(|n| n.tech).collect();
    let mut per_source = Vec::new();
    for source in config.sources(cell) {
        let values: Vec<f64> = match source {
            Source::Analytic => {
                analytic::evaluate(&scenario, &cell.analytic)?.nodes.iter().map(|n| n.throughput_mbps).collect()
            }
            Source::Simulated => {
                let mut sim = cell.sim.clone();
                sim.trace = opts.trace && opts.out_dir.is_some();
                let duration = SimTime::from_secs_f64(config.duration_s);
                let out = run_realization(&scenario, &sim, duration, realization_seed(config.base_seed, ci, seed))?;
                if sim.trace {
                    let dir = opts.out_dir.as_ref().unwrap().join("traces").join(&config.experiment);
                    fs::create_dir_all(&dir)?;
                    let path = dir.join(format!("cell{ci:03}_seed{seed:03}.jsonl"));
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_trace(BufWriter::new(file), &out.log)?;
                }
                (0..techs.len()).map(|i| out.throughput_mbps(i)).collect()
            }
        };
        per_source.push((source, techs.iter().copied().zip(values).collect()));
    }
    Ok(TaskResult { cell: ci, seed, per_source })
}

fn sample(values: &[(Tech, f64)]) -> SeedSample {
    let pick = |t: Tech| values.iter().filter(|v| v.0 == t).map(|v| v.1).collect();
    SeedSample { wifi: pick(Tech::WifiAp), nru: pick(Tech::NrUGnb) }
}

fn cell_rows(
    config: &ExperimentConfig,
    ci: usize,
    results: &BTreeMap<usize, TaskResult>,
) -> Result<Vec<ExperimentRow>> {
    let cell = &config.cells[ci];
    config
        .sources(cell)
        .into_iter()
        .map(|source| {
            let samples: Vec<SeedSample> =
                results.values().map(|r| sample(&r.per_source.iter().find(|p| p.0 == source).unwrap().1)).collect();
            Ok(metrics::aggregate(&cell.key, source, &samples)?)
        })
        .collect()
}

fn node_rows(config: &ExperimentConfig, r: &TaskResult) -> Vec<NodeRow> {
    let k = &config.cells[r.cell].key;
    r.per_source
        .iter()
        .flat_map(|(source, values)| {
            values.iter().enumerate().map(move |(node, &(tech, throughput_mbps))| NodeRow {
                experiment: k.experiment.clone(),
                n_gnb: k.n_gnb,
                aggregation: k.aggregation,
                wifi_ed: k.wifi_ed,
                nru_ed: k.nru_ed,
                mcot_ms: k.mcot_ms,
                delta_us: k.delta_us,
                deployment: k.deployment,
                nru_lbt: k.nru_lbt,
                source: *source,
                seed_index: r.seed,
                node,
                tech,
                throughput_mbps,
            })
        })
        .collect()
}

/// Path of the per-node CSV that accompanies `output`.
pub fn nodes_file_name(output: &str) -> String {
    match output.strip_suffix(".csv") {
        Some(stem) => format!("{stem}_nodes.csv"),
        None => format!("{output}_nodes.csv"),
    }
}

fn write_atomically(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
    write(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Runs every (cell, seed) task on a work-stealing pool. Rows of a cell are
/// appended to the results file as soon as its last seed finishes; at the end
/// the file is rewritten in canonical order, so output never depends on
/// scheduling.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let workers = if opts.workers > 0 { opts.workers } else { config.workers };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let out_path = opts.out_dir.as_ref().map(|d| d.join(&config.output));
    let mut partial = match &out_path {
        Some(p) => {
            fs::create_dir_all(p.parent().unwrap())
                .with_context(|| format!("creating {}", p.parent().unwrap().display()))?;
            let mut w = csv::Writer::from_writer(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            w.write_record(metrics::CSV_COLUMNS)?;
            w.flush()?;
            Some(csv::WriterBuilder::new().has_headers(false).from_writer(w.into_inner()?))
        }
        None => None,
    };

    let tasks: Vec<(usize, usize)> =
        (0..config.cells.len()).flat_map(|c| (0..config.n_seeds).map(move |s| (c, s))).collect();
    let (tx, rx) = mpsc::channel::<Result<TaskResult>>();
    let mut pending: Vec<BTreeMap<usize, TaskResult>> = (0..config.cells.len()).map(|_| BTreeMap::new()).collect();
    let mut rows = Vec::new();
    let mut nodes = Vec::new();
    let mut done_cells = 0;

    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(|| {
            pool.install(|| {
                tasks.par_iter().for_each_with(tx, |tx, &(c, s)| {
                    let _ = tx.send(run_task(config, c, s, opts));
                });
            });
        });
        for result in rx {
            let r = result?;
            let c = r.cell;
            pending[c].insert(r.seed, r);
            if pending[c].len() < config.n_seeds {
                continue;
            }
            let finished = std::mem::take(&mut pending[c]);
            let new_rows = cell_rows(config, c, &finished)?;
            nodes.extend(finished.values().flat_map(|r| node_rows(config, r)));
            if let Some(w) = partial.as_mut() {
                for row in &new_rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            done_cells += 1;
            if opts.progress {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
                for row in &new_rows {
                    eprintln!(
                        "[{done_cells}/{}] {} {:?}: wifi {} nru {} jain {}",
                        config.cells.len(),
                        config.cells[c].describe(),
                        row.source,
                        fmt(row.mean_wifi),
                        fmt(row.mean_nru),
                        fmt(row.jain)
                    );
                }
            }
            rows.extend(new_rows);
        }
        Ok(())
    })?;
    if done_cells != config.cells.len() {
        return Err(anyhow!("sweep ended with {done_cells} of {} cells complete", config.cells.len()));
    }

    rows.sort_by(metrics::canonical_order);
    nodes.sort_by(|a, b| {
        let (ka, kb) = (cell_index(config, a), cell_index(config, b));
        ka.cmp(&kb).then(a.source.cmp(&b.source)).then(a.seed_index.cmp(&b.seed_index)).then(a.node.cmp(&b.node))
    });
    if let Some(path) = &out_path {
        drop(partial);
        write_atomically(path, |w| Ok(metrics::write_csv(w, &rows)?))?;
        let nodes_path = path.with_file_name(nodes_file_name(&config.output));
        write_atomically(&nodes_path, |w| {
            let mut cw = csv::Writer::from_writer(w);
            for n in &nodes {
                cw.serialize(n)?;
            }
            cw.flush()?;
            Ok(())
        })?;
    }
    Ok(RunOutput { rows, nodes })
}

fn cell_index(config: &ExperimentConfig, n: &NodeRow) -> usize {
    config
        .cells
        .iter()
        .position(|c| {
            let k = &c.key;
            k.n_gnb == n.n_gnb
                && k.aggregation == n.aggregation
                && k.wifi_ed == n.wifi_ed
                && k.nru_ed == n.nru_ed
                && k.mcot_ms == n.mcot_ms
                && k.delta_us == n.delta_us
                && k.deployment == n.deployment
                && k.nru_lbt == n.nru_lbt
        })
        .unwrap_or(usize::MAX)
}

/// Human-readable sweep plan.
pub fn describe(config: &ExperimentConfig, workers: usize) -> String {
    let workers = if workers > 0 {
        workers
    } else if config.workers > 0 {
        config.workers
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    };
    let mut s = format!(
        "experiment {}: {} cells x {} seeds, {:.1} s per realization, mode {:?}\n",
        config.experiment,
        config.cells.len(),
        config.n_seeds,
        config.duration_s,
        config.mode
    );
    let mut cpu_s = 0.0;
    for (i, cell) in config.cells.iter().enumerate() {
        let sources: Vec<String> = config.sources(cell).iter().map(|s| format!("{s:?}").to_lowercase()).collect();
        s.push_str(&format!("  cell {i:3}: {} [{}]\n", cell.describe(), sources.join(", ")));
        if config.mode.simulate() {
            cpu_s += config.n_seeds as f64 * config.duration_s * sim_cost_s(cell);
        }
    }
    s.push_str(&format!(
        "{} rows ({} realizations); estimated runtime {:.0} s on {workers} workers\n",
        config.n_rows(),
        config.cells.len() * config.n_seeds,
        (cpu_s / workers as f64).ceil()
    ));
    s
}

/// Rough wall-clock cost of one simulated second of a cell on one core.
fn sim_cost_s(cell: &Cell) -> f64 {
    let nodes = (10 + cell.key.n_gnb) as f64;
    let per_node = match cell.key.aggregation {
        Aggregation::None => 6e-3,
        Aggregation::Amsdu => 2e-3,
        Aggregation::Ampdu => 5e-4,
    };
    nodes * per_node
}
