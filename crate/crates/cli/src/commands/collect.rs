//! `vgs collect`: build the roll-in/roll-out trace dataset.
//!
//! One JSONL shard per roll-in policy plus a manifest carrying the config
//! hash, seeds, and per-label counts. Collection is resumable: problems
//! whose full record count is already on disk are skipped.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use vgs_core::pipeline::{
    append_jsonl, collect_traces, post_filter, read_jsonl, CollectConfig, Manifest, ShardEntry,
    TraceRecord,
};
use vgs_core::synthetic::SyntheticGenerator;
use vgs_core::Generator;

use crate::config::RunConfig;
use crate::run::{load_backend, load_corpus, Backend};

#[derive(Args, Debug)]
pub struct CollectArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the corpus path.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Override roll-ins per problem.
    #[arg(long)]
    pub rollins: Option<usize>,
    /// Override cuts per roll-in.
    #[arg(long)]
    pub cuts: Option<usize>,
    /// Override the collection seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the block size used while generating.
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Output directory for shards and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &CollectArgs) -> Result<()> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(c) = &args.corpus {
        config.corpus.path = Some(c.clone());
    }
    if let Some(r) = args.rollins {
        config.collect.n_rollins = r;
    }
    if let Some(c) = args.cuts {
        config.collect.cuts_per_rollin = c;
    }
    if let Some(s) = args.seed {
        config.collect.seed = s;
    }
    let corpus_path =
        config.corpus.path.clone().ok_or_else(|| anyhow!("config needs corpus.path"))?;
    let corpus = load_corpus(&corpus_path)?;
    let backend = load_backend(&config)?;
    let env = match &backend {
        Backend::Synthetic { env, .. } => env.clone(),
        Backend::Http { .. } => bail!("collect currently supports the synthetic [env] backend"),
    };
    let block_size = args.block_size.unwrap_or(config.search.block_size).min(
        config.decoding.max_len.unwrap_or(env.horizon),
    );
    let gen_config = config.generator_config(block_size, Some(env.horizon));

    // One synthetic roll-in policy per configured temperature; the roll-out
    // policy is the raw chain.
    let policies: Vec<SyntheticGenerator> = config
        .collect
        .rollin_temperatures
        .iter()
        .map(|&t| {
            SyntheticGenerator::named(env.clone(), format!("synthetic-t{t}"))
                .with_temperature(t)
        })
        .collect();
    let policy_refs: Vec<&dyn Generator> = policies.iter().map(|p| p as &dyn Generator).collect();
    let rollout = SyntheticGenerator::new(env.clone());

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let manifest_path = args.out.join("manifest.json");
    let config_hash = config.hash();

    // Resume: count records already on disk per problem.
    let mut existing: BTreeMap<String, usize> = BTreeMap::new();
    let mut shard_records: BTreeMap<String, u64> = BTreeMap::new();
    if manifest_path.exists() {
        let manifest = Manifest::load(&manifest_path)?;
        if manifest.config_hash != config_hash {
            bail!(
                "output dir {} holds a collection with a different config hash; use a fresh dir",
                args.out.display()
            );
        }
        for shard in &manifest.shards {
            let path = args.out.join(&shard.path);
            if path.exists() {
                let records: Vec<TraceRecord> = read_jsonl(&path)?;
                for r in &records {
                    *existing.entry(r.problem_id.clone()).or_insert(0) += 1;
                }
                shard_records.insert(shard.roll_in_policy.clone(), records.len() as u64);
            }
        }
    }

    let per_problem = config.collect.n_rollins * config.collect.cuts_per_rollin;
    let pending: Vec<_> = corpus
        .iter()
        .filter(|p| existing.get(&p.id).copied().unwrap_or(0) < per_problem)
        .cloned()
        .collect();
    let skipped = corpus.len() - pending.len();

    let collect_config = CollectConfig {
        gen_config,
        n_rollins: config.collect.n_rollins,
        cuts_per_rollin: config.collect.cuts_per_rollin,
        cut_weighting: config.collect.cut_weighting,
        seed: config.collect.seed,
    };

    let shard_path =
        |policy: &str| args.out.join(format!("shard-{}.jsonl", policy.replace('/', "_")));
    let mut manifest = Manifest {
        config_hash: config_hash.clone(),
        seed: config.collect.seed,
        shards: Vec::new(),
        label_counts: BTreeMap::new(),
    };
    let mut by_problem: BTreeMap<String, Vec<TraceRecord>> = BTreeMap::new();
    let mut write_error: Option<anyhow::Error> = None;
    {
        let mut sink = |record: TraceRecord| {
            if write_error.is_some() {
                return;
            }
            let path = shard_path(&record.roll_in_policy);
            if let Err(e) = append_jsonl(&path, &record) {
                write_error = Some(e.into());
                return;
            }
            *shard_records.entry(record.roll_in_policy.clone()).or_insert(0) += 1;
            by_problem.entry(record.problem_id.clone()).or_default().push(record);
        };
        collect_traces(&pending, &policy_refs, &rollout, &collect_config, &mut sink)
            .map_err(|e| anyhow!("collection failed: {e}"))?;
    }
    if let Some(e) = write_error {
        return Err(e);
    }

    // Post-filter report (problems whose every record has reward zero).
    let mut all_records: Vec<TraceRecord> = Vec::new();
    for policy in &policies {
        let path = shard_path(policy.name());
        if path.exists() {
            all_records.extend(read_jsonl::<TraceRecord>(&path)?);
        }
    }
    let mut grouped: BTreeMap<String, Vec<TraceRecord>> = BTreeMap::new();
    for r in all_records {
        manifest.count_label(r.label);
        grouped.entry(r.problem_id.clone()).or_default().push(r);
    }
    let dropped_by_post: Vec<&String> =
        grouped.iter().filter(|(_, rs)| !post_filter(rs).keep).map(|(id, _)| id).collect();

    for policy in &policies {
        let name = policy.name().to_string();
        manifest.shards.push(ShardEntry {
            path: format!("shard-{}.jsonl", name.replace('/', "_")),
            roll_in_policy: name.clone(),
            records: shard_records.get(&name).copied().unwrap_or(0),
        });
    }
    manifest.save(&manifest_path)?;

    println!(
        "collect: {} problems ({} resumed), {} records per problem, {} total records",
        corpus.len(),
        skipped,
        per_problem,
        manifest.shards.iter().map(|s| s.records).sum::<u64>()
    );
    println!("  label counts: {:?}", manifest.label_counts);
    println!(
        "  post-filter would drop {} of {} problems (all reward zero)",
        dropped_by_post.len(),
        grouped.len()
    );
    Ok(())
}
