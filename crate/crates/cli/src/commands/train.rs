//! `vgs train`: fit the value classifier or the Bradley-Terry model on a
//! collected trace dataset, writing a checkpoint and a loss curve.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use vgs_core::bt::{build_bt_pairs, train_bt, BtModel};
use vgs_core::pipeline::{read_jsonl, TraceRecord};
use vgs_core::types::{ClassLabel, ProblemRecord, Sequence};
use vgs_core::value::{
    train, FeatureMap, LrSchedule, OptimizerKind, TraceItem, TrainConfig,
    ValueClassifier,
};

use crate::config::RunConfig;
use crate::run::{load_corpus, load_env};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run configuration (TOML); provides the [env] feature dimensions.
    #[arg(long)]
    pub config: PathBuf,
    /// Trace dataset: a shard file or a directory of *.jsonl shards.
    #[arg(long)]
    pub data: PathBuf,
    /// Corpus with the prompts the traces reference.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Model kind to train.
    #[arg(long, default_value = "value")]
    pub kind: String,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Held-out validation items (value model only).
    #[arg(long, default_value_t = 500)]
    pub val_split: usize,
    /// Cap on preference pairs per problem (BT only).
    #[arg(long, default_value_t = 4)]
    pub max_pairs: usize,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-epoch loss curve CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

/// Serialized Bradley-Terry training artifact.
#[derive(Serialize, Deserialize)]
pub struct BtCheckpoint {
    pub model: BtModel,
    pub config: TrainConfig,
    pub curve: Vec<(usize, f64)>,
    pub pairs: usize,
}

fn load_shards(data: &Path) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    if data.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(data)
            .with_context(|| format!("cannot read {}", data.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        for p in paths {
            records.extend(read_jsonl::<TraceRecord>(&p)?);
        }
    } else {
        records = read_jsonl(data)?;
    }
    if records.is_empty() {
        bail!("no trace records found under {}", data.display());
    }
    Ok(records)
}

fn prompts_by_problem(corpus: &[ProblemRecord]) -> BTreeMap<String, Sequence> {
    corpus.iter().map(|p| (p.id.clone(), p.prompt.clone())).collect()
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let env_cfg =
        config.env.as_ref().ok_or_else(|| anyhow!("train needs the [env] backend for features"))?;
    let env = load_env(&env_cfg.path)?;
    let corpus_path = args
        .corpus
        .clone()
        .or(config.corpus.path.clone())
        .ok_or_else(|| anyhow!("train needs --corpus or corpus.path"))?;
    let corpus = load_corpus(&corpus_path)?;
    let prompts = prompts_by_problem(&corpus);
    let records = load_shards(&args.data)?;

    let feature_map = FeatureMap::state_step(env.num_states, env.horizon);
    let train_config = TrainConfig {
        lr: args.lr,
        schedule: LrSchedule::Constant,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        val_split: args.val_split,
        optimizer: OptimizerKind::Sgd,
        grad_clip: None,
    };

    match args.kind.as_str() {
        "value" => {
            let mut items: Vec<TraceItem> = Vec::new();
            let mut skipped_empty = 0usize;
            let mut skipped_orphan = 0usize;
            for r in &records {
                let Some(prompt) = prompts.get(&r.problem_id) else {
                    skipped_orphan += 1;
                    continue;
                };
                match r.to_item(prompt) {
                    Some(item) => items.push(item.map_err(|e| anyhow!("bad record: {e}"))?),
                    None => skipped_empty += 1,
                }
            }
            if items.is_empty() {
                bail!("no trainable items (every roll-out empty or orphaned)");
            }
            let val_split = args.val_split.min(items.len() / 5);
            let train_config = TrainConfig { val_split, ..train_config };
            let output = train(ValueClassifier::zeros(feature_map), &items, &train_config)
                .map_err(|e| anyhow!("training failed: {e}"))?;
            let best = &output.checkpoints[output.best_epoch];
            std::fs::write(&args.out, best.to_json())
                .with_context(|| format!("cannot write {}", args.out.display()))?;
            if let Some(curve_path) = &args.curve {
                write_curve(curve_path, &output.curve)?;
            }
            println!(
                "train: {} items ({skipped_empty} empty roll-outs skipped, {skipped_orphan} orphaned), best epoch {} (val loss {:?})",
                items.len(),
                output.best_epoch,
                output.curve[output.best_epoch].val_loss
            );
            println!("  checkpoint: {}", args.out.display());
        }
        "bt" => {
            let mut groups_map: BTreeMap<String, Vec<(Sequence, ClassLabel)>> = BTreeMap::new();
            for r in &records {
                let Some(_) = prompts.get(&r.problem_id) else { continue };
                let full = r.roll_in.token_prefix(r.cut_index).concat(&r.roll_out);
                groups_map.entry(r.problem_id.clone()).or_default().push((full, r.label));
            }
            let groups: Vec<(Sequence, Vec<(Sequence, ClassLabel)>)> = groups_map
                .into_iter()
                .map(|(id, responses)| (prompts[&id].clone(), responses))
                .collect();
            let pairs = build_bt_pairs(&groups, args.max_pairs, args.seed);
            if pairs.is_empty() {
                bail!("no preference pairs (every problem lacks a correct or a failed response)");
            }
            let train_config = TrainConfig { val_split: 0, ..train_config };
            let output = train_bt(BtModel::zeros(feature_map), &pairs, &train_config)
                .map_err(|e| anyhow!("training failed: {e}"))?;
            let ckpt = BtCheckpoint {
                model: output.model,
                config: train_config,
                curve: output.curve.clone(),
                pairs: pairs.len(),
            };
            std::fs::write(&args.out, serde_json::to_string_pretty(&ckpt)?)
                .with_context(|| format!("cannot write {}", args.out.display()))?;
            if let Some(curve_path) = &args.curve {
                let points: Vec<(usize, f64, Option<f64>)> =
                    output.curve.iter().map(|&(e, l)| (e, l, None)).collect();
                write_curve_raw(curve_path, &points)?;
            }
            println!("train: {} pairs from {} problems", pairs.len(), groups.len());
            println!("  checkpoint: {}", args.out.display());
        }
        other => bail!("unknown model kind {other:?} (expected value|bt)"),
    }
    Ok(())
}

fn write_curve(path: &Path, curve: &[vgs_core::value::EpochPoint]) -> Result<()> {
    let points: Vec<(usize, f64, Option<f64>)> =
        curve.iter().map(|p| (p.epoch, p.train_loss, p.val_loss)).collect();
    write_curve_raw(path, &points)
}

fn write_curve_raw(path: &Path, points: &[(usize, f64, Option<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for (epoch, train_loss, val_loss) in points {
        w.write_record([
            epoch.to_string(),
            train_loss.to_string(),
            val_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
