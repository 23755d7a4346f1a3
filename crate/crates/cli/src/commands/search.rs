//! `vgs search`: one search run per corpus problem, emitting a transcript
//! JSONL (one line per round per tree) and a summary JSON.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use serde::Serialize;

use vgs_core::metrics::{run_flops, FlopsReport, ModelShape};
use vgs_core::pipeline::append_jsonl;
use vgs_core::search::{Totals, TranscriptLine};

use crate::config::RunConfig;
use crate::run::{
    effective_dvts, is_correct, load_backend, load_corpus, make_scorer, run_episode,
    EpisodeSpec, Method,
};

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Run only this problem id.
    #[arg(long)]
    pub problem: Option<String>,
    /// Method to run.
    #[arg(long, default_value = "vgs")]
    pub method: String,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    /// DVTS parallelism.
    #[arg(long)]
    pub dvts: Option<usize>,
    /// Intermediate selection rule: value, random, or hybrid.
    #[arg(long)]
    pub guidance: Option<String>,
    /// Final aggregation: wmv or bon.
    #[arg(long)]
    pub aggregation: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator endpooint override (OpenAI-compatible completions URL).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ProblemSummary {
    problem_id: String,
    method: String,
    chosen_answer: Option<String>,
    correct: bool,
    responses: Vec<Option<String>>,
    budget: usize,
    tokens: u64,
    value_calls: u64,
    dropped_trees: usize,
    flops: FlopsReport,
}

#[derive(Serialize)]
struct RunSummary {
    config_hash: String,
    method: String,
    budget: usize,
    width: usize,
    block_size: usize,
    dvts: usize,
    seed: u64,
    problems: usize,
    solved: usize,
    accuracy: f64,
    tokens: u64,
    value_calls: u64,
    flops: FlopsReport,
    results: Vec<ProblemSummary>,
}

pub fn apply_overrides(config: &mut RunConfig, args: &SearchArgs) -> Result<()> {
    if let Some(b) = args.budget {
        config.search.budget = b;
    }
    if let Some(w) = args.width {
        config.search.width = w;
    }
    if let Some(bs) = args.block_size {
        config.search.block_size = bs;
    }
    if let Some(m) = args.dvts {
        config.search.dvts = m;
    }
    if let Some(g) = &args.guidance {
        config.search.guidance = match g.as_str() {
            "value" => vgs_core::search::Guidance::Value,
            "random" => vgs_core::search::Guidance::Random,
            "hybrid" => vgs_core::search::Guidance::Hybrid,
            other => return Err(anyhow!("unknown guidance {other:?}")),
        };
    }
    if let Some(a) = &args.aggregation {
        config.search.aggregation = match a.as_str() {
            "wmv" => vgs_core::search::Aggregation::Wmv,
            "bon" => vgs_core::search::Aggregation::Bon,
            other => return Err(anyhow!("unknown aggregation {other:?}")),
        };
    }
    if let Some(s) = args.seed {
        config.search.seed = s;
    }
    if let Some(e) = &args.endpoint {
        match &mut config.generator {
            Some(g) => g.endpoint = e.clone(),
            None => {
                return Err(anyhow!("--endpoint given but config has no [generator] section"))
            }
        }
    }
    Ok(())
}

pub fn run(args: &SearchArgs) -> Result<()> {
    let mut config = RunConfig::load(&args.config)?;
    apply_overrides(&mut config, args)?;

    let mut method: Method = args.method.parse()?;
    // The guidance knob reuses the vgs machinery.
    if method == Method::Vgs {
        method = match config.search.guidance {
            vgs_core::search::Guidance::Value => Method::Vgs,
            vgs_core::search::Guidance::Random => Method::Random,
            vgs_core::search::Guidance::Hybrid => Method::Hybrid,
        };
    }

    let corpus_path =
        config.corpus.path.clone().ok_or_else(|| anyhow!("config needs corpus.path"))?;
    let mut corpus = load_corpus(&corpus_path)?;
    if let Some(id) = &args.problem {
        corpus.retain(|p| &p.id == id);
        if corpus.is_empty() {
            return Err(anyhow!("problem {id:?} not found in corpus"));
        }
    }

    let backend = load_backend(&config)?;
    let horizon = backend.env().map(|e| e.horizon);
    let block_size = config.search.block_size.min(config.decoding.max_len.unwrap_or(
        horizon.unwrap_or(usize::MAX),
    ));
    let gen_config = config.generator_config(block_size, horizon);
    gen_config
        .validate()
        .map_err(|msgs| crate::CliError::Config(msgs.clone()))?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let transcript_path = args.out.join("transcript.jsonl");
    if transcript_path.exists() {
        std::fs::remove_file(&transcript_path)?;
    }

    let dvts_m = effective_dvts(
        config.search.dvts,
        config.search.budget,
        config.search.width,
        config.search.guidance,
    );
    let spec = EpisodeSpec {
        method,
        budget: config.search.budget,
        width: config.search.width,
        dvts: dvts_m,
        aggregation: config.search.aggregation,
        selection_scope: config.search.selection_scope,
        seed: config.search.seed,
    };

    let gen_shape = ModelShape::from_params(config.flops.generator_params);
    let scorer_shape = ModelShape::from_params(config.flops.scorer_params);
    let mut results = Vec::new();
    let mut grand_totals = Totals::default();
    let mut solved = 0usize;
    for (p_idx, record) in corpus.iter().enumerate() {
        let problem = backend.prepare_problem(record)?;
        let scorer = make_scorer(&config, &backend, &problem, &gen_config)?;
        // Independent seed stream per problem, derived from the run seed.
        let spec = EpisodeSpec {
            seed: vgs_core::derive_seed(&[config.search.seed, p_idx as u64]),
            ..spec
        };
        let episode = run_episode(&spec, &problem, backend.generator(), scorer.as_ref(), &gen_config)
            .map_err(crate::CliError::from_search)?;
        for transcript in &episode.transcripts {
            for round in &transcript.rounds {
                append_jsonl(
                    &transcript_path,
                    &TranscriptLine {
                        tree: transcript.tree,
                        round: round.round,
                        candidates: &round.candidates,
                        selected: &round.selected,
                    },
                )?;
            }
        }
        let correct = is_correct(&episode.chosen, gen_config.max_len, &problem.ground_truth);
        if correct {
            solved += 1;
        }
        grand_totals.blocks_sampled += episode.totals.blocks_sampled;
        grand_totals.tokens_generated += episode.totals.tokens_generated;
        grand_totals.value_calls += episode.totals.value_calls;
        let flops =
            run_flops(&episode.totals, &gen_shape, &scorer_shape, config.search.budget)
                .map_err(|e| anyhow!("flops accounting failed: {e}"))?;
        results.push(ProblemSummary {
            problem_id: problem.id.clone(),
            method: method.name().to_string(),
            chosen_answer: episode.chosen.answer.clone(),
            correct,
            responses: episode.responses.iter().map(|r| r.answer.clone()).collect(),
            budget: config.search.budget,
            tokens: episode.totals.tokens_generated,
            value_calls: episode.totals.value_calls,
            dropped_trees: episode.dropped_trees,
            flops,
        });
    }

    let accuracy = solved as f64 / corpus.len() as f64;
    let flops = run_flops(
        &grand_totals,
        &gen_shape,
        &scorer_shape,
        config.search.budget * corpus.len(),
    )
    .map_err(|e| anyhow!("flops accounting failed: {e}"))?;
    let summary = RunSummary {
        config_hash: config.hash(),
        method: method.name().to_string(),
        budget: config.search.budget,
        width: config.search.width,
        block_size,
        dvts: dvts_m,
        seed: config.search.seed,
        problems: corpus.len(),
        solved,
        accuracy,
        tokens: grand_totals.tokens_generated,
        value_calls: grand_totals.value_calls,
        flops,
        results,
    };
    let summary_path = args.out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;
    println!(
        "search: {} on {} problems, accuracy {:.3}, tokens {}, value calls {}",
        method.name(),
        corpus.len(),
        accuracy,
        grand_totals.tokens_generated,
        grand_totals.value_calls
    );
    println!("  summary: {}", summary_path.display());
    println!("  transcript: {}", transcript_path.display());
    Ok(())
}
