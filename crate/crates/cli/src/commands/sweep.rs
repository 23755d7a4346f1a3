//! `vgs sweep`: grid experiments over budgets, widths, block sizes, and
//! methods, with per-cell isolation and resumability.
//!
//! Each cell is one (method, budget, width, block_size, seed) combination
//! run over the whole corpus. Completed cells are recorded in a manifest
//! keyed by the config hash; re-running a completed cell is a no-op. A
//! failed cell is recorded and the sweep continues.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use vgs_core::derive_seed;
use vgs_core::metrics::{bootstrap_stat, run_flops, ModelShape};
use vgs_core::search::Totals;

use crate::config::RunConfig;
use crate::run::{
    effective_dvts, is_correct, load_backend, load_corpus, make_scorer, run_episode,
    EpisodeSpec, Method,
};

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Run configuration (TOML) with a [sweep] section.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (manifest + cells.csv).
    #[arg(long)]
    pub out: PathBuf,
    /// Concurrent cell workers (overrides sweep.workers).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CellRow {
    pub method: String,
    pub budget: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub flops_total: f64,
    pub flops_overhead_fraction: f64,
    pub tokens_total: u64,
    pub value_calls: u64,
    pub width: usize,
    pub block_size: usize,
    pub seed: u64,
    pub cell_id: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellStatus {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<CellRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SweepManifest {
    pub config_hash: String,
    pub cells: BTreeMap<String, CellStatus>,
}

impl SweepManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Ok(serde_json::from_str(&body)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Cell {
    id: String,
    method: Method,
    budget: usize,
    width: usize,
    block_size: usize,
    seed: u64,
}

fn build_grid(config: &RunConfig) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for method_name in &config.sweep.methods {
        let method: Method = method_name.parse()?;
        for &budget in &config.sweep.budgets {
            for &seed in &config.eval.seeds {
                if method.is_search() {
                    for &width in &config.sweep.widths {
                        if budget % width != 0 {
                            continue;
                        }
                        for &block_size in &config.sweep.block_sizes {
                            let id = format!(
                                "method={},budget={budget},width={width},block={block_size},seed={seed}",
                                method.name()
                            );
                            cells.push(Cell { id, method, budget, width, block_size, seed });
                        }
                    }
                } else {
                    let block_size =
                        config.sweep.block_sizes.first().copied().unwrap_or(config.search.block_size);
                    let id = format!(
                        "method={},budget={budget},width=-,block={block_size},seed={seed}",
                        method.name()
                    );
                    cells.push(Cell { id, method, budget, width: 1, block_size, seed });
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(cell: &Cell, config: &RunConfig) -> Result<CellRow> {
    let corpus_path =
        config.corpus.path.clone().ok_or_else(|| anyhow!("config needs corpus.path"))?;
    let corpus = load_corpus(&corpus_path)?;
    let backend = load_backend(config)?;
    let horizon = backend.env().map(|e| e.horizon);
    let block_size = cell.block_size.min(horizon.unwrap_or(usize::MAX));
    let gen_config = config.generator_config(block_size, horizon);
    let guidance = match cell.method {
        Method::Random => vgs_core::search::Guidance::Random,
        Method::Hybrid => vgs_core::search::Guidance::Hybrid,
        _ => vgs_core::search::Guidance::Value,
    };
    let spec = EpisodeSpec {
        method: cell.method,
        budget: cell.budget,
        width: cell.width,
        dvts: effective_dvts(config.search.dvts, cell.budget, cell.width, guidance),
        aggregation: config.search.aggregation,
        selection_scope: config.search.selection_scope,
        seed: cell.seed,
    };
    let mut outcomes: Vec<Vec<f64>> = Vec::with_capacity(corpus.len());
    let mut totals = Totals::default();
    for (p_idx, record) in corpus.iter().enumerate() {
        let problem = backend.prepare_problem(record)?;
        let scorer = make_scorer(config, &backend, &problem, &gen_config)?;
        let run_seed = derive_seed(&[cell.seed, p_idx as u64]);
        let spec = EpisodeSpec { seed: run_seed, ..spec };
        let episode =
            run_episode(&spec, &problem, backend.generator(), scorer.as_ref(), &gen_config)
                .map_err(|e| anyhow!("problem {}: {e}", problem.id))?;
        let correct = is_correct(&episode.chosen, gen_config.max_len, &problem.ground_truth);
        outcomes.push(vec![if correct { 1.0 } else { 0.0 }]);
        totals.blocks_sampled += episode.totals.blocks_sampled;
        totals.tokens_generated += episode.totals.tokens_generated;
        totals.value_calls += episode.totals.value_calls;
    }
    let stat = bootstrap_stat(&outcomes, config.eval.bootstrap_reps, cell.seed)
        .map_err(|e| anyhow!("bootstrap failed: {e}"))?;
    let flops = run_flops(
        &totals,
        &ModelShape::from_params(config.flops.generator_params),
        &ModelShape::from_params(config.flops.scorer_params),
        cell.budget * corpus.len(),
    )
    .map_err(|e| anyhow!("flops accounting failed: {e}"))?;
    Ok(CellRow {
        method: cell.method.name().to_string(),
        budget: cell.budget,
        accuracy_mean: stat.mean,
        accuracy_std: stat.std,
        flops_total: flops.total(),
        flops_overhead_fraction: flops.overhead_fraction,
        tokens_total: totals.tokens_generated,
        value_calls: totals.value_calls,
        width: cell.width,
        block_size: cell.block_size,
        seed: cell.seed,
        cell_id: cell.id.clone(),
    })
}

pub fn write_cells_csv(path: &Path, rows: &[CellRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "method",
        "budget",
        "accuracy_mean",
        "accuracy_std",
        "flops_total",
        "flops_overhead_fraction",
        "tokens_total",
        "value_calls",
        "width",
        "block_size",
        "seed",
        "cell_id",
    ])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.budget.to_string(),
            r.accuracy_mean.to_string(),
            r.accuracy_std.to_string(),
            r.flops_total.to_string(),
            r.flops_overhead_fraction.to_string(),
            r.tokens_total.to_string(),
            r.value_calls.to_string(),
            r.width.to_string(),
            r.block_size.to_string(),
            r.seed.to_string(),
            r.cell_id.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let manifest_path = args.out.join("sweep_manifest.json");
    let config_hash = config.hash();

    let mut manifest = if manifest_path.exists() {
        let m = SweepManifest::load(&manifest_path)?;
        if m.config_hash != config_hash {
            return Err(anyhow!(
                "sweep dir {} holds results for a different config hash",
                args.out.display()
            ));
        }
        m
    } else {
        SweepManifest { config_hash: config_hash.clone(), cells: BTreeMap::new() }
    };

    let grid = build_grid(&config)?;
    let pending: Vec<Cell> = grid
        .iter()
        .filter(|c| {
            manifest
                .cells
                .get(&c.id)
                .map(|s| s.status != "done")
                .unwrap_or(true)
        })
        .cloned()
        .collect();
    let resumed = grid.len() - pending.len();

    let workers = args.workers.unwrap_or(config.sweep.workers).max(1);
    let manifest_lock = Mutex::new(&mut manifest);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| anyhow!("cannot build worker pool: {e}"))?;
    pool.install(|| {
        use rayon::prelude::*;
        pending.par_iter().for_each(|cell| {
            let status = match run_cell(cell, &config) {
                Ok(row) => CellStatus { status: "done".into(), row: Some(row), error: None },
                Err(e) => {
                    CellStatus { status: "failed".into(), row: None, error: Some(e.to_string()) }
                }
            };
            let mut m = manifest_lock.lock().expect("manifest lock");
            m.cells.insert(cell.id.clone(), status);
            // Persist progress after every cell; rename keeps it atomic.
            let _ = m.save(&manifest_path);
        });
    });
    manifest.save(&manifest_path)?;

    let rows: Vec<CellRow> =
        manifest.cells.values().filter_map(|s| s.row.clone()).collect();
    let failed: Vec<(&String, &CellStatus)> =
        manifest.cells.iter().filter(|(_, s)| s.status == "failed").collect();
    write_cells_csv(&args.out.join("cells.csv"), &rows)?;

    println!(
        "sweep: {} cells ({} resumed, {} failed), results in {}",
        grid.len(),
        resumed,
        failed.len(),
        args.out.join("cells.csv").display()
    );
    for (id, s) in failed {
        println!("  FAILED {id}: {}", s.error.as_deref().unwrap_or("unknown"));
    }
    Ok(())
}
