//! Budget-constrained block-wise search.
//!
//! Beam search keeps B = N/w partial responses; every round each unfinished
//! beam proposes w i.i.d. blocks, the candidate pool is scored, and the k
//! best continuations fill the k unfinished slots. Finished candidates
//! permanently occupy their slot and stop consuming budget; freed sampling
//! capacity is not reallocated, so rounds shrink. BFS is the width = N
//! special case. DVTS runs M independent trees of budget N/M and merges the
//! finals with a weighted majority vote (or best-of-n).
//!
//! Every sampling site derives its seed from (run seed, tree, round, beam,
//! candidate), so identical configurations replay bit-identically on the
//! synthetic backend regardless of execution order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{
    derive_seed, seed_role, FinishReason, Generator, GeneratorConfig, GeneratorError,
};
use crate::scorer::{Scorer, ScorerError};
use crate::types::{ProblemRecord, Response, ScoredResponse, Sequence};
use crate::vote::{best_of_n, weighted_majority_vote, VoteError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0:?}")]
    Config(Vec<String>),
    #[error("generation failed in tree {tree}: {source}")]
    Generation { tree: u64, source: GeneratorError },
    #[error("scoring failed in tree {tree}: {source}")]
    Scoring { tree: u64, source: ScorerError },
    #[error(transparent)]
    Vote(#[from] VoteError),
    #[error("all {0} search trees failed")]
    AllTreesFailed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Wmv,
    Bon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guidance {
    Value,
    Random,
    /// Half of the DVTS trees value-guided, half random.
    Hybrid,
}

/// How the round's best continuations are chosen: pooled across all
/// unfinished beams (subsumes per-beam selection and matches standard beam
/// search), or per-beam top-1 for the ablation harness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    #[default]
    Global,
    PerBeam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Inference budget N: total blocks sampled per round never exceeds it.
    pub budget: usize,
    /// Beam width w; the number of beams is N/w.
    pub beam_width: usize,
    pub block_size: usize,
    /// DVTS parallelism M: independent trees of budget N/M.
    pub dvts_parallelism: usize,
    pub final_aggregation: Aggregation,
    pub guidance: Guidance,
    pub seed: u64,
    #[serde(default)]
    pub selection_scope: SelectionScope,
}

impl SearchConfig {
    /// Reference defaults: width 2, block 4096, WMV aggregation, and
    /// budget-dependent parallelism M = max(1, N/64).
    pub fn defaults_for_budget(budget: usize) -> Self {
        SearchConfig {
            budget,
            beam_width: 2,
            block_size: 4096,
            dvts_parallelism: (budget / 64).max(1),
            final_aggregation: Aggregation::Wmv,
            guidance: Guidance::Value,
            seed: 0,
            selection_scope: SelectionScope::Global,
        }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.budget == 0 {
            errs.push("budget must be positive".into());
        }
        if self.beam_width == 0 {
            errs.push("beam_width must be positive".into());
        }
        if self.block_size == 0 {
            errs.push("block_size must be positive".into());
        }
        if self.dvts_parallelism == 0 {
            errs.push("dvts_parallelism must be positive".into());
        }
        if self.budget > 0 && self.beam_width > 0 && self.budget % self.beam_width != 0 {
            errs.push(format!(
                "beam_width ({}) must divide budget ({})",
                self.beam_width, self.budget
            ));
        }
        if self.dvts_parallelism > 0 && self.budget > 0 {
            if self.budget % self.dvts_parallelism != 0 {
                errs.push(format!(
                    "dvts_parallelism ({}) must divide budget ({})",
                    self.dvts_parallelism, self.budget
                ));
            } else if self.beam_width > 0 {
                let per_tree = self.budget / self.dvts_parallelism;
                if per_tree % self.beam_width != 0 {
                    errs.push(format!(
                        "per-tree budget ({per_tree}) must be divisible by beam_width ({})",
                        self.beam_width
                    ));
                }
                if per_tree < self.beam_width {
                    errs.push(format!(
                        "per-tree budget ({per_tree}) must be at least beam_width ({})",
                        self.beam_width
                    ));
                }
            }
        }
        if self.guidance == Guidance::Hybrid && self.dvts_parallelism % 2 != 0 {
            errs.push(format!(
                "hybrid guidance requires even dvts_parallelism, got {}",
                self.dvts_parallelism
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub blocks_sampled: u64,
    pub tokens_generated: u64,
    pub value_calls: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub beam: usize,
    pub idx: usize,
    /// Candidate response tokens for token backends; text backends record
    /// lengths only.
    pub tokens: Option<Sequence>,
    pub token_len: usize,
    pub value: f64,
    pub finished: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    /// Index into the round's candidate pool.
    pub pool_index: usize,
    /// Beam slot the candidate was assigned to.
    pub slot: usize,
    pub rule: SelectionRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Value,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub candidates: Vec<CandidateRecord>,
    pub selected: Vec<SelectionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub beam: usize,
    pub token_len: usize,
    pub value: f64,
    pub finished: bool,
    pub answer: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeTranscript {
    pub tree: u64,
    pub guidance: Option<SelectionRule>,
    pub rounds: Vec<RoundRecord>,
    pub finals: Vec<FinalRecord>,
    pub totals: Totals,
}

impl TreeTranscript {
    /// Verify the budget invariants: per-round candidate blocks never exceed
    /// `n`, and value calls equal candidates plus finals (one call per block
    /// boundary and one per final response).
    pub fn check_budget(&self, n: usize) -> Result<(), String> {
        for r in &self.rounds {
            if r.candidates.len() > n {
                return Err(format!(
                    "round {} sampled {} candidates, budget {n}",
                    r.round,
                    r.candidates.len()
                ));
            }
        }
        let candidates: u64 = self.rounds.iter().map(|r| r.candidates.len() as u64).sum();
        if self.totals.blocks_sampled != candidates {
            return Err(format!(
                "blocks_sampled {} != recorded candidates {candidates}",
                self.totals.blocks_sampled
            ));
        }
        let expected_calls = candidates + self.finals.len() as u64;
        if self.totals.value_calls != expected_calls {
            return Err(format!(
                "value calls {} != candidates {candidates} + finals {}",
                self.totals.value_calls,
                self.finals.len()
            ));
        }
        Ok(())
    }

    /// Maximum candidate blocks sampled in any round.
    pub fn max_round_candidates(&self) -> usize {
        self.rounds.iter().map(|r| r.candidates.len()).max().unwrap_or(0)
    }
}

/// One JSONL line per round per tree.
#[derive(Serialize)]
pub struct TranscriptLine<'a> {
    pub tree: u64,
    pub round: usize,
    pub candidates: &'a [CandidateRecord],
    pub selected: &'a [SelectionRecord],
}

// ---------------------------------------------------------------------------
// Single-tree engine
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct BeamState {
    tokens: Sequence,
    done: bool,
    finish: Option<FinishReason>,
    last_value: f64,
    lineage: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct TreeSearchResult {
    pub responses: Vec<Response>,
    pub final_scores: Vec<f64>,
}

struct Candidate {
    beam: usize,
    idx: usize,
    tokens: Sequence,
    block_len: usize,
    finish: Option<FinishReason>,
    value: f64,
}

fn run_tree(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    budget: usize,
    width: usize,
    rule: SelectionRule,
    scope: SelectionScope,
    run_seed: u64,
    tree: u64,
    transcript: &mut TreeTranscript,
) -> Result<TreeSearchResult, SearchError> {
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;

    let num_beams = budget / width;
    transcript.tree = tree;
    transcript.guidance = Some(rule);
    let mut beams: Vec<BeamState> = (0..num_beams)
        .map(|_| BeamState {
            tokens: problem.prompt.empty_like(),
            done: false,
            finish: None,
            last_value: 0.0,
            lineage: Vec::new(),
        })
        .collect();

    let mut round = 0usize;
    loop {
        let unfinished: Vec<usize> =
            (0..beams.len()).filter(|&i| !beams[i].done).collect();
        if unfinished.is_empty() {
            break;
        }
        let mut pool: Vec<Candidate> = Vec::with_capacity(unfinished.len() * width);
        for &beam_idx in &unfinished {
            let prefix = problem.prompt.concat(&beams[beam_idx].tokens);
            for c in 0..width {
                let seed = derive_seed(&[
                    run_seed,
                    seed_role::SEARCH_BLOCK,
                    tree,
                    round as u64,
                    beam_idx as u64,
                    c as u64,
                ]);
                let block = generator
                    .sample_block(&prefix, gen_config, seed)
                    .map_err(|source| SearchError::Generation { tree, source })?;
                let cand_tokens = beams[beam_idx].tokens.concat(&block.tokens);
                let value = scorer
                    .score(&problem.prompt, &cand_tokens)
                    .map_err(|source| SearchError::Scoring { tree, source })?;
                transcript.totals.blocks_sampled += 1;
                transcript.totals.tokens_generated += block.token_len as u64;
                transcript.totals.value_calls += 1;
                pool.push(Candidate {
                    beam: beam_idx,
                    idx: c,
                    tokens: cand_tokens,
                    block_len: block.token_len,
                    finish: block.finish_reason,
                    value,
                });
            }
        }

        let k = unfinished.len();
        let order = |a: &usize, b: &usize| {
            let (ca, cb) = (&pool[*a], &pool[*b]);
            cb.value
                .partial_cmp(&ca.value)
                .unwrap()
                .then(ca.beam.cmp(&cb.beam))
                .then(ca.idx.cmp(&cb.idx))
        };
        let selected_pool: Vec<usize> = match (rule, scope) {
            (SelectionRule::Value, SelectionScope::Global) => {
                let mut idx: Vec<usize> = (0..pool.len()).collect();
                idx.sort_by(order);
                idx.truncate(k);
                idx
            }
            (SelectionRule::Value, SelectionScope::PerBeam) => unfinished
                .iter()
                .map(|&b| {
                    (0..pool.len())
                        .filter(|&i| pool[i].beam == b)
                        .min_by(|a, b| order(a, b))
                        .expect("each unfinished beam has candidates")
                })
                .collect(),
            (SelectionRule::Random, SelectionScope::Global) => {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(derive_seed(&[
                    run_seed,
                    seed_role::SELECTION,
                    tree,
                    round as u64,
                ]));
                let mut idx: Vec<usize> = (0..pool.len()).collect();
                idx.shuffle(&mut rng);
                idx.truncate(k);
                idx.sort_unstable();
                idx
            }
            (SelectionRule::Random, SelectionScope::PerBeam) => {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(derive_seed(&[
                    run_seed,
                    seed_role::SELECTION,
                    tree,
                    round as u64,
                ]));
                unfinished
                    .iter()
                    .map(|&b| {
                        let ids: Vec<usize> =
                            (0..pool.len()).filter(|&i| pool[i].beam == b).collect();
                        *ids.choose(&mut rng).expect("each unfinished beam has candidates")
                    })
                    .collect()
            }
        };

        transcript.rounds.push(RoundRecord {
            round,
            candidates: pool
                .iter()
                .map(|c| CandidateRecord {
                    beam: c.beam,
                    idx: c.idx,
                    tokens: c.tokens.as_tokens().map(|_| c.tokens.clone()),
                    token_len: c.block_len,
                    value: c.value,
                    finished: c.finish.is_some(),
                })
                .collect(),
            selected: selected_pool
                .iter()
                .zip(&unfinished)
                .map(|(&pool_index, &slot)| SelectionRecord { pool_index, slot, rule })
                .collect(),
        });

        // The k selected continuations fill the k unfinished slots in order.
        for (&pool_index, &slot) in selected_pool.iter().zip(&unfinished) {
            let cand = &pool[pool_index];
            let beam = &mut beams[slot];
            beam.tokens = cand.tokens.clone();
            beam.last_value = cand.value;
            beam.lineage.push((round, pool_index));
            if let Some(reason) = cand.finish {
                beam.done = true;
                beam.finish = Some(reason);
            }
        }
        round += 1;
    }

    // Score every final response once (the outcome-level call used by the
    // final aggregation) and materialize the responses.
    let mut responses = Vec::with_capacity(beams.len());
    let mut final_scores = Vec::with_capacity(beams.len());
    for (i, beam) in beams.iter().enumerate() {
        let value = scorer
            .score(&problem.prompt, &beam.tokens)
            .map_err(|source| SearchError::Scoring { tree, source })?;
        transcript.totals.value_calls += 1;
        let finished = matches!(
            beam.finish,
            Some(FinishReason::Terminal) | Some(FinishReason::StopMarker)
        );
        let full = problem.prompt.concat(&beam.tokens);
        let answer = if finished { generator.extract_answer(&full) } else { None };
        transcript.finals.push(FinalRecord {
            beam: i,
            token_len: beam.tokens.token_len(),
            value,
            finished,
            answer: answer.clone(),
        });
        responses.push(
            Response::new(problem.id.clone(), beam.tokens.clone(), finished).with_answer(answer),
        );
        final_scores.push(value);
    }
    Ok(TreeSearchResult { responses, final_scores })
}

// ---------------------------------------------------------------------------
// Public search operations
// ---------------------------------------------------------------------------

/// Beam search with width w over a single tree. Returns all B = N/w final
/// responses, their final scores, and the transcript. Tree id 0, so a
/// DVTS run with M = 1 replays it exactly.
pub fn beam_search(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    config: &SearchConfig,
) -> Result<(TreeSearchResult, TreeTranscript), SearchError> {
    let single = SearchConfig { dvts_parallelism: 1, ..config.clone() };
    single.validate().map_err(SearchError::Config)?;
    let rule = match config.guidance {
        Guidance::Random => SelectionRule::Random,
        _ => SelectionRule::Value,
    };
    let mut transcript = TreeTranscript::default();
    let result = run_tree(
        problem,
        generator,
        scorer,
        gen_config,
        config.budget,
        config.beam_width,
        rule,
        config.selection_scope,
        config.seed,
        0,
        &mut transcript,
    )?;
    Ok((result, transcript))
}

/// Breadth-first block search: beam search with width = N, i.e. one beam
/// and N candidates per round, keeping the argmax-value block.
pub fn bfs(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    config: &SearchConfig,
) -> Result<(Response, TreeTranscript), SearchError> {
    let cfg = SearchConfig { beam_width: config.budget, ..config.clone() };
    let (result, transcript) = beam_search(problem, generator, scorer, gen_config, &cfg)?;
    let response =
        result.responses.into_iter().next().expect("width = budget leaves one beam");
    Ok((response, transcript))
}

#[derive(Clone, Debug)]
pub struct SearchRun {
    pub responses: Vec<Response>,
    pub final_scores: Vec<f64>,
    /// Index into `responses` of the aggregated answer.
    pub chosen: usize,
    pub transcripts: Vec<TreeTranscript>,
    /// Trees dropped after a transport failure, with their partial
    /// transcripts retained in `transcripts`.
    pub dropped_trees: Vec<(u64, String)>,
}

impl SearchRun {
    pub fn chosen_response(&self) -> &Response {
        &self.responses[self.chosen]
    }

    pub fn totals(&self) -> Totals {
        let mut t = Totals::default();
        for tr in &self.transcripts {
            t.blocks_sampled += tr.totals.blocks_sampled;
            t.tokens_generated += tr.totals.tokens_generated;
            t.value_calls += tr.totals.value_calls;
        }
        t
    }
}

/// Diverse tree search: M independent trees, each a beam search with budget
/// N/M, merged by the configured final aggregation (weighted majority vote
/// by default). A failed tree is dropped with a warning and aggregation
/// proceeds over the survivors.
pub fn dvts(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    config: &SearchConfig,
) -> Result<SearchRun, SearchError> {
    config.validate().map_err(SearchError::Config)?;
    let m = config.dvts_parallelism;
    let per_tree = config.budget / m;
    let mut responses = Vec::new();
    let mut final_scores = Vec::new();
    let mut transcripts = Vec::new();
    let mut dropped = Vec::new();
    for tree in 0..m as u64 {
        let rule = match config.guidance {
            Guidance::Value => SelectionRule::Value,
            Guidance::Random => SelectionRule::Random,
            Guidance::Hybrid => {
                if tree < (m as u64) / 2 {
                    SelectionRule::Value
                } else {
                    SelectionRule::Random
                }
            }
        };
        let mut transcript = TreeTranscript::default();
        match run_tree(
            problem,
            generator,
            scorer,
            gen_config,
            per_tree,
            config.beam_width,
            rule,
            config.selection_scope,
            config.seed,
            tree,
            &mut transcript,
        ) {
            Ok(result) => {
                responses.extend(result.responses);
                final_scores.extend(result.final_scores);
                transcripts.push(transcript);
            }
            Err(e) => {
                dropped.push((tree, e.to_string()));
                transcripts.push(transcript);
            }
        }
    }
    if responses.is_empty() {
        return Err(SearchError::AllTreesFailed(m));
    }
    let scored: Vec<ScoredResponse> = responses
        .iter()
        .zip(&final_scores)
        .map(|(r, &s)| ScoredResponse::new(r.clone(), s))
        .collect();
    let chosen = match config.final_aggregation {
        Aggregation::Wmv => {
            weighted_majority_vote(&scored, derive_seed(&[config.seed, seed_role::TIE_BREAK]))?
        }
        Aggregation::Bon => best_of_n(&scored)?,
    };
    Ok(SearchRun { responses, final_scores, chosen, transcripts, dropped_trees: dropped })
}

/// Random search: the DVTS control flow with seeded-uniform intermediate
/// selection; the final aggregation still uses scorer values.
pub fn random_search(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    config: &SearchConfig,
) -> Result<SearchRun, SearchError> {
    let cfg = SearchConfig { guidance: Guidance::Random, ..config.clone() };
    dvts(problem, generator, scorer, gen_config, &cfg)
}

/// Hybrid search: half of the DVTS trees value-guided, half random.
/// Requires even parallelism.
pub fn hybrid_search(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    config: &SearchConfig,
) -> Result<SearchRun, SearchError> {
    let cfg = SearchConfig { guidance: Guidance::Hybrid, ..config.clone() };
    dvts(problem, generator, scorer, gen_config, &cfg)
}

// ---------------------------------------------------------------------------
// Score-free and outcome-level baselines
// ---------------------------------------------------------------------------

/// N independent full generations. Seed streams match a DVTS run with
/// M = N, w = 1 (tree i, beam 0, candidate 0), so the structural reduction
/// is checkable by equality.
pub fn independent_rollouts(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    gen_config: &GeneratorConfig,
    n: usize,
    run_seed: u64,
) -> Result<(Vec<Response>, Totals), SearchError> {
    let mut responses = Vec::with_capacity(n);
    let mut totals = Totals::default();
    for tree in 0..n as u64 {
        let mut tokens = problem.prompt.empty_like();
        let finished;
        let mut round = 0u64;
        loop {
            let prefix = problem.prompt.concat(&tokens);
            let seed =
                derive_seed(&[run_seed, seed_role::SEARCH_BLOCK, tree, round, 0, 0]);
            let block = generator
                .sample_block(&prefix, gen_config, seed)
                .map_err(|source| SearchError::Generation { tree, source })?;
            totals.blocks_sampled += 1;
            totals.tokens_generated += block.token_len as u64;
            tokens.extend(&block.tokens);
            if block.finished {
                finished = block.reached_terminal();
                break;
            }
            round += 1;
        }
        let full = problem.prompt.concat(&tokens);
        let answer = if finished { generator.extract_answer(&full) } else { None };
        responses
            .push(Response::new(problem.id.clone(), tokens, finished).with_answer(answer));
    }
    Ok((responses, totals))
}

#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub responses: Vec<Response>,
    pub final_scores: Vec<f64>,
    pub chosen: usize,
    pub totals: Totals,
}

/// Majority vote over N independent generations (score-free).
pub fn mv_baseline(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    gen_config: &GeneratorConfig,
    n: usize,
    run_seed: u64,
) -> Result<BaselineRun, SearchError> {
    let (responses, totals) = independent_rollouts(problem, generator, gen_config, n, run_seed)?;
    let chosen = crate::vote::majority_vote(
        &responses,
        derive_seed(&[run_seed, seed_role::TIE_BREAK]),
    )?;
    Ok(BaselineRun { final_scores: vec![1.0; responses.len()], responses, chosen, totals })
}

fn scored_rollouts(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    n: usize,
    run_seed: u64,
) -> Result<(Vec<Response>, Vec<f64>, Totals), SearchError> {
    let (responses, mut totals) =
        independent_rollouts(problem, generator, gen_config, n, run_seed)?;
    let mut scores = Vec::with_capacity(n);
    for r in &responses {
        let s = scorer
            .score(&problem.prompt, &r.tokens)
            .map_err(|source| SearchError::Scoring { tree: 0, source })?;
        totals.value_calls += 1;
        scores.push(s);
    }
    Ok((responses, scores, totals))
}

/// Weighted majority vote over N independent scored generations.
pub fn wmv_baseline(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    n: usize,
    run_seed: u64,
) -> Result<BaselineRun, SearchError> {
    let (responses, final_scores, totals) =
        scored_rollouts(problem, generator, scorer, gen_config, n, run_seed)?;
    let scored: Vec<ScoredResponse> = responses
        .iter()
        .zip(&final_scores)
        .map(|(r, &s)| ScoredResponse::new(r.clone(), s))
        .collect();
    let chosen =
        weighted_majority_vote(&scored, derive_seed(&[run_seed, seed_role::TIE_BREAK]))?;
    Ok(BaselineRun { responses, final_scores, chosen, totals })
}

/// Best-of-n over N independent scored generations.
pub fn bon_baseline(
    problem: &ProblemRecord,
    generator: &dyn Generator,
    scorer: &dyn Scorer,
    gen_config: &GeneratorConfig,
    n: usize,
    run_seed: u64,
) -> Result<BaselineRun, SearchError> {
    let (responses, final_scores, totals) =
        scored_rollouts(problem, generator, scorer, gen_config, n, run_seed)?;
    let scored: Vec<ScoredResponse> = responses
        .iter()
        .zip(&final_scores)
        .map(|(r, &s)| ScoredResponse::new(r.clone(), s))
        .collect();
    let chosen = best_of_n(&scored)?;
    Ok(BaselineRun { responses, final_scores, chosen, totals })
}
