//! Backend construction and the shared episode runner used by `search` and
//! `sweep`.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use vgs_core::answer::assign_label;
use vgs_core::bt::{BtModel, BtScorer};
use vgs_core::generator::{Generator, GeneratorConfig};
use vgs_core::http::{format_prompt, HttpGenerator, HttpScorer};
use vgs_core::scorer::{PerturbedScorer, Scorer};
use vgs_core::search::{
    bfs, bon_baseline, dvts, hybrid_search, mv_baseline, random_search, wmv_baseline,
    Aggregation, Guidance, SearchConfig, SearchError, Totals, TreeTranscript,
};
use vgs_core::synthetic::{DpOracleScorer, SyntheticEnv, SyntheticGenerator};
use vgs_core::types::{ClassLabel, ProblemRecord, Response, Sequence};
use vgs_core::value::Checkpoint;

use crate::config::{RunConfig, ScorerKind};

pub enum Backend {
    Synthetic { env: Arc<SyntheticEnv>, generator: SyntheticGenerator },
    Http { generator: HttpGenerator },
}

impl Backend {
    pub fn generator(&self) -> &dyn Generator {
        match self {
            Backend::Synthetic { generator, .. } => generator,
            Backend::Http { generator } => generator,
        }
    }

    pub fn env(&self) -> Option<&Arc<SyntheticEnv>> {
        match self {
            Backend::Synthetic { env, .. } => Some(env),
            Backend::Http { .. } => None,
        }
    }

    /// HTTP prompts get the completion template; synthetic prompts are the
    /// raw start-state tokens.
    pub fn prepare_problem(&self, record: &ProblemRecord) -> Result<ProblemRecord> {
        match self {
            Backend::Synthetic { env, .. } => {
                let tokens = record
                    .prompt
                    .as_tokens()
                    .ok_or_else(|| anyhow!("problem {}: synthetic prompts must be token arrays", record.id))?;
                for t in tokens {
                    if t.id() >= env.num_states {
                        bail!("problem {}: state {} out of range", record.id, t.id());
                    }
                }
                Ok(record.clone())
            }
            Backend::Http { .. } => {
                let text = record
                    .prompt
                    .as_text()
                    .ok_or_else(|| anyhow!("problem {}: http prompts must be text", record.id))?;
                let mut prepared = record.clone();
                prepared.prompt = Sequence::Text(format_prompt(text));
                Ok(prepared)
            }
        }
    }
}

pub fn load_env(path: &Path) -> Result<SyntheticEnv> {
    let body = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read env file {}", path.display()))?;
    let env: SyntheticEnv = serde_json::from_str(&body)
        .with_context(|| format!("invalid env file {}", path.display()))?;
    env.validate().map_err(|e| anyhow!("invalid env file {}: {e}", path.display()))?;
    Ok(env)
}

pub fn load_backend(config: &RunConfig) -> Result<Backend> {
    match (&config.env, &config.generator) {
        (Some(env_cfg), None) => {
            let env = Arc::new(load_env(&env_cfg.path)?);
            let generator = SyntheticGenerator::new(env.clone());
            Ok(Backend::Synthetic { env, generator })
        }
        (None, Some(http)) => {
            Ok(Backend::Http { generator: HttpGenerator::new(http.to_http_config()) })
        }
        (Some(_), Some(_)) => bail!("config sets both [env] and [generator]; pick one backend"),
        (None, None) => bail!("config needs an [env] or a [generator] backend"),
    }
}

pub fn load_corpus(path: &Path) -> Result<Vec<ProblemRecord>> {
    let records: Vec<ProblemRecord> = vgs_core::pipeline::read_jsonl(path)
        .map_err(|e| anyhow!("cannot load corpus: {e}"))?;
    if records.is_empty() {
        bail!("corpus {} is empty", path.display());
    }
    let mut seen = std::collections::HashSet::new();
    for r in &records {
        if !seen.insert(r.id.clone()) {
            bail!("duplicate problem id {:?} in corpus", r.id);
        }
    }
    Ok(records)
}

/// Build the scorer for one problem. The oracle is problem-specific (it
/// conditions on the ground-truth answer); trained and HTTP scorers are
/// problem-independent.
pub fn make_scorer(
    config: &RunConfig,
    backend: &Backend,
    problem: &ProblemRecord,
    gen_config: &GeneratorConfig,
) -> Result<Box<dyn Scorer>> {
    let base: Box<dyn Scorer> = match config.scorer.kind {
        ScorerKind::Oracle => {
            let env = backend
                .env()
                .ok_or_else(|| anyhow!("oracle scorer needs the synthetic [env] backend"))?;
            Box::new(
                DpOracleScorer::for_problem(env, problem, gen_config)
                    .map_err(|e| anyhow!("oracle construction failed: {e}"))?,
            )
        }
        ScorerKind::Checkpoint => {
            let path = config
                .scorer
                .path
                .as_ref()
                .ok_or_else(|| anyhow!("scorer.kind = checkpoint needs scorer.path"))?;
            let body = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
            let ckpt = Checkpoint::from_json(&body)
                .with_context(|| format!("invalid checkpoint {}", path.display()))?;
            Box::new(vgs_core::value::ClassifierScorer::new(ckpt.model()))
        }
        ScorerKind::BtCheckpoint => {
            let path = config
                .scorer
                .path
                .as_ref()
                .ok_or_else(|| anyhow!("scorer.kind = bt_checkpoint needs scorer.path"))?;
            let body = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
            let ckpt: crate::commands::train::BtCheckpoint = serde_json::from_str(&body)
                .with_context(|| format!("invalid BT checkpoint {}", path.display()))?;
            let model: BtModel = ckpt.model;
            Box::new(BtScorer::new(model))
        }
        ScorerKind::Http => {
            let endpoint = config
                .scorer
                .endpoint
                .clone()
                .ok_or_else(|| anyhow!("scorer.kind = http needs scorer.endpoint"))?;
            let mut http = config
                .generator
                .clone()
                .map(|g| g.to_http_config())
                .unwrap_or_default();
            http.endpoint = endpoint;
            http.model = config.scorer.model.clone().unwrap_or_default();
            Box::new(HttpScorer::new(http))
        }
    };
    if config.scorer.noise_sigma > 0.0 {
        return Ok(Box::new(PerturbedScorer::new(
            BoxedScorer(base),
            config.scorer.noise_sigma,
            config.scorer.noise_seed,
        )));
    }
    Ok(base)
}

/// Newtype so a boxed scorer can feed the noise wrapper.
pub struct BoxedScorer(pub Box<dyn Scorer>);

impl Scorer for BoxedScorer {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn score(&self, p: &Sequence, r: &Sequence) -> Result<f64, vgs_core::scorer::ScorerError> {
        self.0.score(p, r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Mv,
    Wmv,
    Bon,
    Vgs,
    Bfs,
    Random,
    Hybrid,
}

impl Method {
    /// Search methods honor width/block/dvts; vote baselines only the budget.
    pub fn is_search(self) -> bool {
        matches!(self, Method::Vgs | Method::Bfs | Method::Random | Method::Hybrid)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Mv => "mv",
            Method::Wmv => "wmv",
            Method::Bon => "bon",
            Method::Vgs => "vgs",
            Method::Bfs => "bfs",
            Method::Random => "random",
            Method::Hybrid => "hybrid",
        }
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "mv" => Ok(Method::Mv),
            "wmv" => Ok(Method::Wmv),
            "bon" => Ok(Method::Bon),
            "vgs" => Ok(Method::Vgs),
            "bfs" => Ok(Method::Bfs),
            "random" => Ok(Method::Random),
            "hybrid" => Ok(Method::Hybrid),
            other => bail!("unknown method {other:?} (expected mv|wmv|bon|vgs|bfs|random|hybrid)"),
        }
    }
}

/// Largest-effort fallback: the configured parallelism when it is valid for
/// (budget, width), otherwise a single tree.
pub fn effective_dvts(m: usize, budget: usize, width: usize, guidance: Guidance) -> usize {
    let valid = m >= 1
        && budget % m == 0
        && (budget / m) % width == 0
        && budget / m >= width
        && (guidance != Guidance::Hybrid || m % 2 == 0);
    if valid {
        m
    } else {
        1
    }
}

pub struct EpisodeResult {
    pub chosen: Response,
    pub responses: Vec<Response>,
    pub totals: Totals,
    pub transcripts: Vec<TreeTranscript>,
    pub dropped_trees: usize,
}

pub struct EpisodeSpec {
    pub method: Method,
    pub budget: usize,
    pub width: usize,
    pub dvts: usize,
    pub aggregation: Aggregation,
    pub selection_scope: vgs_core::search::SelectionScope,
    pub seed: u64,
}

/// Run one method on one problem. `gen_config.block_size` is the search
/// block size.
pub fn run_episode(
    spec: &EpisodeSpec,
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
) -> Result<EpisodeResult, SearchError> {
    let search_config = SearchConfig {
        budget: spec.budget,
        beam_width: spec.width,
        block_size: gen_config.block_size,
        dvts_parallelism: spec.dvts,
        final_aggregation: spec.aggregation,
        guidance: Guidance::Value,
        seed: spec.seed,
        selection_scope: spec.selection_scope,
    };
    match spec.method {
        Method::Mv => {
            let run = mv_baseline(problem, generator, gen_config, spec.budget, spec.seed)?;
            Ok(EpisodeResult {
                chosen: run.responses[run.chosen].clone(),
                responses: run.responses,
                totals: run.totals,
                transcripts: Vec::new(),
                dropped_trees: 0,
            })
        }
        Method::Wmv => {
            let run =
                wmv_baseline(problem, generator, scorer, gen_config, spec.budget, spec.seed)?;
            Ok(EpisodeResult {
                chosen: run.responses[run.chosen].clone(),
                responses: run.responses,
                totals: run.totals,
                transcripts: Vec::new(),
                dropped_trees: 0,
            })
        }
        Method::Bon => {
            let run =
                bon_baseline(problem, generator, scorer, gen_config, spec.budget, spec.seed)?;
            Ok(EpisodeResult {
                chosen: run.responses[run.chosen].clone(),
                responses: run.responses,
                totals: run.totals,
                transcripts: Vec::new(),
                dropped_trees: 0,
            })
        }
        Method::Bfs => {
            let cfg = SearchConfig { beam_width: spec.budget, dvts_parallelism: 1, ..search_config };
            let (response, transcript) = bfs(problem, generator, scorer, gen_config, &cfg)?;
            let totals = transcript.totals.clone();
            Ok(EpisodeResult {
                chosen: response.clone(),
                responses: vec![response],
                totals,
                transcripts: vec![transcript],
                dropped_trees: 0,
            })
        }
        Method::Vgs | Method::Random | Method::Hybrid => {
            let run = match spec.method {
                Method::Vgs => dvts(problem, generator, scorer, gen_config, &search_config)?,
                Method::Random => {
                    random_search(problem, generator, scorer, gen_config, &search_config)?
                }
                _ => hybrid_search(problem, generator, scorer, gen_config, &search_config)?,
            };
            Ok(EpisodeResult {
                chosen: run.responses[run.chosen].clone(),
                totals: run.totals(),
                responses: run.responses,
                transcripts: run.transcripts,
                dropped_trees: run.dropped_trees.len(),
            })
        }
    }
}

/// Whether the chosen response solves the problem.
pub fn is_correct(chosen: &Response, max_len: usize, truth: &str) -> bool {
    assign_label(chosen, max_len, truth) == ClassLabel::Correct
}
