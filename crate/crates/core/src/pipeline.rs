//! Corpus pre-filtering, roll-in/roll-out trace collection, post-filtering,
//! n-gram contamination checks, and JSONL persistence.
//!
//! Collection per problem: `n_rollins` roll-ins spread round-robin over the
//! roll-in policies; each roll-in is truncated at `cuts_per_rollin` sampled
//! cut indices and completed once by the fixed roll-out policy; the full
//! concatenation is labeled. Every task derives its seed from the run seed
//! and its coordinates, so results are independent of execution order.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::assign_label;
use crate::generator::{derive_seed, seed_role, Generator, GeneratorConfig, GeneratorError};
use crate::types::{ClassLabel, ProblemRecord, Response, Sequence};
use crate::value::{TraceItem, ValueError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cut index requires a roll-in of length >= 1")]
    EmptyRollIn,
    #[error("problem {problem_id}: {source}")]
    Generation { problem_id: String, source: GeneratorError },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error in {path} line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

// ---------------------------------------------------------------------------
// Pre- and post-filtering
// ---------------------------------------------------------------------------

/// Which filtering rule dropped a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    /// Solution has zero or more than one \boxed{} answer.
    BoxedCount,
    /// Answer contains a marker that defeats automatic verification.
    UnverifiableAnswer,
    /// question_type is MCQ.
    MultipleChoice,
    /// Enumerated multi-part question.
    MultiPart,
    /// Problem text contains a link.
    ContainsLink,
    /// Post-filter: every collected trace had reward zero.
    AllRewardZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub keep: bool,
    pub rule_fired: Option<FilterRule>,
}

impl FilterVerdict {
    fn keep() -> Self {
        FilterVerdict { keep: true, rule_fired: None }
    }

    fn drop(rule: FilterRule) -> Self {
        FilterVerdict { keep: false, rule_fired: Some(rule) }
    }
}

/// Answer markers that defeat automatic verification. Alphabetic markers
/// match as standalone words; the rest match as substrings.
const UNVERIFIABLE_WORDS: &[&str] = &["or", "and"];
const UNVERIFIABLE_SUBSTRINGS: &[&str] = &[
    "\\mathrm", "\\quad", "=", ",", ";", "\\cup", "\\cap", "<", ">", "\\le", "\\ge", "\u{2264}",
    "\u{2265}", "\u{2260}", "\\neq", "\u{2248}", "\\approx", "\\sim",
];

/// Enumerated-part patterns: the question is multi-part when both members of
/// a pair occur. Conservative by design.
const MULTI_PART_PAIRS: &[(&str, &str)] = &[
    ("(a)", "(b)"),
    ("(i)", "(ii)"),
    ("(1)", "(2)"),
    ("part a", "part b"),
    ("part (i)", "part (ii)"),
];

fn contains_word(haystack: &str, word: &str) -> bool {
    let lower = haystack.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| w == word)
}

fn count_boxed(text: &str) -> usize {
    // Counting occurrences is enough here; balanced extraction is the
    // answer module's concern.
    text.matches("\\boxed{").count()
}

/// Apply the pre-filtering rules in order; the first matching rule is
/// reported. A record with no solution metadata counts as zero boxed
/// answers.
pub fn pre_filter(record: &ProblemRecord) -> FilterVerdict {
    // Rule 1: exactly one boxed answer in the solution.
    let solution = record.solution().unwrap_or("");
    if count_boxed(solution) != 1 {
        return FilterVerdict::drop(FilterRule::BoxedCount);
    }
    // Rule 2: unverifiable answer markers.
    let answer = &record.ground_truth;
    if UNVERIFIABLE_WORDS.iter().any(|w| contains_word(answer, w))
        || UNVERIFIABLE_SUBSTRINGS.iter().any(|s| answer.contains(s))
    {
        return FilterVerdict::drop(FilterRule::UnverifiableAnswer);
    }
    // Rule 3: multiple choice.
    if record.question_type() == Some("MCQ") {
        return FilterVerdict::drop(FilterRule::MultipleChoice);
    }
    // Rule 4: multi-part questions.
    let text = record.prompt.as_text().unwrap_or("").to_lowercase();
    if MULTI_PART_PAIRS.iter().any(|(a, b)| text.contains(a) && text.contains(b)) {
        return FilterVerdict::drop(FilterRule::MultiPart);
    }
    // Rule 5: links.
    if text.contains("http://") || text.contains("https://") {
        return FilterVerdict::drop(FilterRule::ContainsLink);
    }
    FilterVerdict::keep()
}

/// Drop a problem iff every one of its records has reward 0 (incorrect or
/// incomplete).
pub fn post_filter(records: &[TraceRecord]) -> FilterVerdict {
    if records.iter().any(|r| r.label == ClassLabel::Correct) {
        FilterVerdict::keep()
    } else {
        FilterVerdict::drop(FilterRule::AllRewardZero)
    }
}

// ---------------------------------------------------------------------------
// Cut-index sampling
// ---------------------------------------------------------------------------

/// Cut-index weighting: probability of index i in [1, L] proportional to
/// sqrt(i) (the reference formula) or 1/sqrt(i) (the alternative that favors
/// earlier positions).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutWeighting {
    #[default]
    Sqrt,
    InverseSqrt,
}

/// Exact cut-index distribution p(i) for i in [1, L].
pub fn cut_index_probabilities(len: usize, weighting: CutWeighting) -> Vec<f64> {
    let weights: Vec<f64> = (1..=len)
        .map(|i| match weighting {
            CutWeighting::Sqrt => (i as f64).sqrt(),
            CutWeighting::InverseSqrt => 1.0 / (i as f64).sqrt(),
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Draw a cut index in [1, L] with probability exactly p(i). Deterministic
/// given the rng state.
pub fn sample_cut_index(
    len: usize,
    weighting: CutWeighting,
    rng: &mut ChaCha12Rng,
) -> Result<usize, PipelineError> {
    if len == 0 {
        return Err(PipelineError::EmptyRollIn);
    }
    let probs = cut_index_probabilities(len, weighting);
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return Ok(i + 1);
        }
    }
    Ok(len)
}

// ---------------------------------------------------------------------------
// Trace records
// ---------------------------------------------------------------------------

/// One persisted roll-in/roll-out datapoint. `roll_in` is the full roll-in;
/// the training prefix is its first `cut_index` tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub problem_id: String,
    pub roll_in_policy: String,
    pub cut_index: usize,
    pub roll_in: Sequence,
    pub roll_out: Sequence,
    pub label: ClassLabel,
    pub seed: u64,
    pub created_at: String,
}

impl TraceRecord {
    /// Convert to a training item against the corpus prompt. Records whose
    /// truncated roll-in already finished the response have an empty
    /// roll-out and carry no trainable prefix loss terms; they yield None.
    pub fn to_item(&self, prompt: &Sequence) -> Option<Result<TraceItem, ValueError>> {
        if self.roll_out.is_empty() {
            return None;
        }
        Some(TraceItem::new(
            prompt.clone(),
            self.roll_in.token_prefix(self.cut_index),
            self.roll_out.clone(),
            self.label,
        ))
    }
}

/// Collection knobs. The record seed of task (problem p, roll-in r, cut c)
/// is derived from `seed` and those coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CollectConfig {
    pub gen_config: GeneratorConfig,
    pub n_rollins: usize,
    pub cuts_per_rollin: usize,
    pub cut_weighting: CutWeighting,
    pub seed: u64,
}

/// Generate a full response from `generator` by sampling blocks until it
/// finishes. Returns the response portion (prompt excluded) and whether it
/// reached a terminal.
pub fn roll_to_completion(
    generator: &dyn Generator,
    prompt: &Sequence,
    config: &GeneratorConfig,
    seed: u64,
) -> Result<(Sequence, bool), GeneratorError> {
    let mut response = prompt.empty_like();
    let mut round = 0u64;
    loop {
        let prefix = prompt.concat(&response);
        if prefix.token_len() >= config.max_len {
            return Ok((response, false));
        }
        let block = generator.sample_block(&prefix, config, derive_seed(&[seed, round]))?;
        response.extend(&block.tokens);
        if block.finished {
            return Ok((response, block.reached_terminal()));
        }
        round += 1;
    }
}

/// Collect labeled roll-in/roll-out records for every problem in the
/// corpus: exactly `n_rollins x cuts_per_rollin` records per problem.
/// Records are appended to `sink` as they complete, so partial progress
/// survives a failed problem; the error carries the problem id.
pub fn collect_traces(
    corpus: &[ProblemRecord],
    roll_in_policies: &[&dyn Generator],
    rollout_policy: &dyn Generator,
    config: &CollectConfig,
    sink: &mut dyn FnMut(TraceRecord),
) -> Result<(), PipelineError> {
    assert!(!roll_in_policies.is_empty(), "need at least one roll-in policy");
    for (p_idx, problem) in corpus.iter().enumerate() {
        collect_problem(problem, p_idx as u64, roll_in_policies, rollout_policy, config, sink)
            .map_err(|source| PipelineError::Generation {
                problem_id: problem.id.clone(),
                source,
            })?;
    }
    Ok(())
}

fn collect_problem(
    problem: &ProblemRecord,
    p_idx: u64,
    roll_in_policies: &[&dyn Generator],
    rollout_policy: &dyn Generator,
    config: &CollectConfig,
    sink: &mut dyn FnMut(TraceRecord),
) -> Result<(), GeneratorError> {
    for r in 0..config.n_rollins {
        let policy = roll_in_policies[r % roll_in_policies.len()];
        let rollin_seed = derive_seed(&[config.seed, seed_role::ROLL_IN, p_idx, r as u64]);
        let (roll_in, rollin_finished) =
            roll_to_completion(policy, &problem.prompt, &config.gen_config, rollin_seed)?;
        let len = roll_in.token_len();
        for c in 0..config.cuts_per_rollin {
            let task_seed = derive_seed(&[config.seed, seed_role::CUT, p_idx, r as u64, c as u64]);
            let mut rng = ChaCha12Rng::seed_from_u64(task_seed);
            let cut = sample_cut_index(len, config.cut_weighting, &mut rng)
                .map_err(|_| GeneratorError::InvalidState("empty roll-in".into()))?;
            let prefix_resp = roll_in.token_prefix(cut);
            let roll_out_seed =
                derive_seed(&[config.seed, seed_role::ROLL_OUT, p_idx, r as u64, c as u64]);
            // A truncated roll-in that already reached a terminal has nothing
            // left to complete; the roll-out is empty by construction.
            let (roll_out, finished) = if cut == len && rollin_finished {
                (roll_in.empty_like(), true)
            } else {
                let full_prefix = problem.prompt.concat(&prefix_resp);
                let (out, fin) = roll_to_completion(
                    rollout_policy,
                    &full_prefix,
                    &config.gen_config,
                    roll_out_seed,
                )?;
                // roll_to_completion extends from the prompt argument; here the
                // prompt is prompt+prefix, so `out` is the roll-out itself.
                (out, fin)
            };
            let full_response = prefix_resp.concat(&roll_out);
            let full_seq = problem.prompt.concat(&full_response);
            let answer = if finished { rollout_policy.extract_answer(&full_seq) } else { None };
            let response = Response {
                problem_id: problem.id.clone(),
                tokens: full_response,
                finished,
                answer,
                label: None,
            };
            let label = assign_label(&response, config.gen_config.max_len, &problem.ground_truth);
            sink(TraceRecord {
                problem_id: problem.id.clone(),
                roll_in_policy: policy.name().to_string(),
                cut_index: cut,
                roll_in: roll_in.clone(),
                roll_out,
                label,
                seed: roll_out_seed,
                created_at: chrono::Utc::now().to_rfc3339(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// N-gram contamination
// ---------------------------------------------------------------------------

/// Fraction of `a`'s n-grams that appear in `b`'s n-gram set. Sequences
/// shorter than n have overlap 0.
pub fn ngram_overlap<T: std::hash::Hash + Eq>(a: &[T], b: &[T], n: usize) -> f64 {
    assert!(n >= 1);
    if a.len() < n || b.len() < n {
        return 0.0;
    }
    let b_grams: std::collections::HashSet<&[T]> = b.windows(n).collect();
    let total = a.len() - n + 1;
    let hits = a.windows(n).filter(|w| b_grams.contains(w)).count();
    hits as f64 / total as f64
}

/// Word-level overlap of two texts; the contamination check uses n = 8 with
/// threshold 0.5.
pub fn text_ngram_overlap(a: &str, b: &str, n: usize) -> f64 {
    let aw: Vec<&str> = a.split_whitespace().collect();
    let bw: Vec<&str> = b.split_whitespace().collect();
    ngram_overlap(&aw, &bw, n)
}

pub const CONTAMINATION_NGRAM: usize = 8;
pub const CONTAMINATION_THRESHOLD: f64 = 0.5;

/// True when the overlap exceeds the contamination threshold.
pub fn is_contaminated(a: &str, b: &str) -> bool {
    text_ngram_overlap(a, b, CONTAMINATION_NGRAM) > CONTAMINATION_THRESHOLD
}

// ---------------------------------------------------------------------------
// JSONL shards and manifest
// ---------------------------------------------------------------------------

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut f = std::fs::File::create(path)
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    for item in items {
        let line = serde_json::to_string(item).expect("record serializes");
        writeln!(f, "{line}").map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

pub fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<(), PipelineError> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    let line = serde_json::to_string(item).expect("record serializes");
    writeln!(f, "{line}")
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let f = std::fs::File::open(path)
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    let reader = std::io::BufReader::new(f);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line =
            line.map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Shard inventory for a collection run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub shards: Vec<ShardEntry>,
    /// Total records per class label, keyed "0"/"1"/"2".
    pub label_counts: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub path: String,
    pub roll_in_policy: String,
    pub records: u64,
}

impl Manifest {
    /// Atomic write: serialize to a temp file, then rename over the target.
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&tmp, body)
            .map_err(|source| PipelineError::Io { path: tmp.clone(), source })?;
        std::fs::rename(&tmp, path)
            .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let body = std::fs::read_to_string(path)
            .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&body).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn count_label(&mut self, label: ClassLabel) {
        *self.label_counts.entry((label as u8).to_string()).or_insert(0) += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{misleading_majority_env, one_step_env, SyntheticGenerator};
    use std::sync::Arc;

    fn problem(solution: &str, answer: &str, qtype: Option<&str>, text: &str) -> ProblemRecord {
        let mut metadata = BTreeMap::new();
        metadata.insert("solution".to_string(), solution.to_string());
        if let Some(q) = qtype {
            metadata.insert("question_type".to_string(), q.to_string());
        }
        ProblemRecord {
            id: "p0".into(),
            prompt: Sequence::Text(text.to_string()),
            ground_truth: answer.to_string(),
            metadata,
        }
    }

    #[test]
    fn pre_filter_rules_fire_in_order() {
        // Rule 1: two boxed answers.
        let v = pre_filter(&problem("\\boxed{1} \\boxed{2}", "1", None, "q"));
        assert_eq!(v, FilterVerdict::drop(FilterRule::BoxedCount));
        // Zero boxed
        let v = pre_filter(&problem("no box", "1", None, "q"));
        assert_eq!(v, FilterVerdict::drop(FilterRule::BoxedCount));
        // Rule 2: unverifiable markers.
        for bad in ["2 or 3", "a and b", "x=2", "1,2", "a;b", "\\cup", "x<3", "\u{2248}5", "4\\quad"] {
            let v = pre_filter(&problem("\\boxed{1}", bad, None, "q"));
            assert_eq!(v, FilterVerdict::drop(FilterRule::UnverifiableAnswer), "answer {bad:?}");
        }
        // Word-boundary: "factor" must not trip on "or", "operand" not on "and".
        assert!(pre_filter(&problem("\\boxed{1}", "factor", None, "q")).keep);
        assert!(pre_filter(&problem("\\boxed{1}", "operand", None, "q")).keep);
        // Rule 3: MCQ.
        let v = pre_filter(&problem("\\boxed{1}", "1", Some("MCQ"), "q"));
        assert_eq!(v, FilterVerdict::drop(FilterRule::MultipleChoice));
        // Rule 4: multi-part.
        let v = pre_filter(&problem("\\boxed{1}", "1", None, "(a) first (b) second"));
        assert_eq!(v, FilterVerdict::drop(FilterRule::MultiPart));
        assert!(pre_filter(&problem("\\boxed{1}", "1", None, "only (a) appears")).keep);
        // Rule 5: links.
        let v = pre_filter(&problem("\\boxed{1}", "1", None, "see https://x.test"));
        assert_eq!(v, FilterVerdict::drop(FilterRule::ContainsLink));
        // Clean record passes.
        assert!(pre_filter(&problem("thus \\boxed{116}", "116", None, "find x")).keep);
        // Rule order: a record violating 1 and 3 reports rule 1.
        let v = pre_filter(&problem("", "1", Some("MCQ"), "q"));
        assert_eq!(v.rule_fired, Some(FilterRule::BoxedCount));
    }

    #[test]
    fn cut_probabilities_match_direct_formula() {
        let p = cut_index_probabilities(3, CutWeighting::Sqrt);
        let z = 1.0 + 2f64.sqrt() + 3f64.sqrt();
        assert!((p[0] - 1.0 / z).abs() < 1e-12);
        assert!((p[1] - 2f64.sqrt() / z).abs() < 1e-12);
        assert!((p[2] - 3f64.sqrt() / z).abs() < 1e-12);
        assert!((p[0] - 0.2412).abs() < 1e-4);
        assert!((p[1] - 0.3411).abs() < 1e-4);
        assert!((p[2] - 0.4177).abs() < 1e-4);
    }

    #[test]
    fn cut_index_degenerate_and_errors() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..32 {
            assert_eq!(sample_cut_index(1, CutWeighting::Sqrt, &mut rng).unwrap(), 1);
        }
        assert!(sample_cut_index(0, CutWeighting::Sqrt, &mut rng).is_err());
    }

    #[test]
    fn inverse_weighting_prefers_early_cuts() {
        let p = cut_index_probabilities(16, CutWeighting::InverseSqrt);
        assert!(p[0] > p[15]);
        let q = cut_index_probabilities(16, CutWeighting::Sqrt);
        assert!(q[0] < q[15]);
    }

    #[test]
    fn collect_produces_exact_record_counts_with_consistent_labels() {
        let env = Arc::new(misleading_majority_env(3, 0.4));
        let gen = SyntheticGenerator::new(env.clone());
        let alt = SyntheticGenerator::named(env.clone(), "synthetic-alt");
        let corpus: Vec<ProblemRecord> =
            (0..5).map(|i| env.make_problem(&format!("p{i}"), 0, "A")).collect();
        let config = CollectConfig {
            gen_config: env.standard_config(2),
            n_rollins: 4,
            cuts_per_rollin: 2,
            cut_weighting: CutWeighting::Sqrt,
            seed: 11,
        };
        let mut records = Vec::new();
        let policies: Vec<&dyn Generator> = vec![&gen, &alt];
        collect_traces(&corpus, &policies, &gen, &config, &mut |r| records.push(r)).unwrap();
        assert_eq!(records.len(), 5 * 4 * 2);
        // Round-robin policy assignment.
        let alt_count = records.iter().filter(|r| r.roll_in_policy == "synthetic-alt").count();
        assert_eq!(alt_count, records.len() / 2);
        // Labels must match recomputing from the stored tokens.
        for r in &records {
            let full = r.roll_in.token_prefix(r.cut_index).concat(&r.roll_out);
            let seq = corpus[0].prompt.concat(&full);
            let finished = full
                .last_token()
                .map(|t| env.is_terminal(t.id()))
                .unwrap_or(false);
            let resp = Response {
                problem_id: r.problem_id.clone(),
                tokens: full.clone(),
                finished,
                answer: gen.extract_answer(&seq),
                label: None,
            };
            assert_eq!(assign_label(&resp, config.gen_config.max_len, "A"), r.label);
            assert!(r.cut_index >= 1 && r.cut_index <= r.roll_in.token_len());
        }
        // Determinism: same config, same records apart from timestamps.
        let mut again = Vec::new();
        collect_traces(&corpus, &policies, &gen, &config, &mut |r| again.push(r)).unwrap();
        for (a, b) in records.iter().zip(&again) {
            assert_eq!((&a.roll_in, &a.roll_out, a.cut_index, a.label), (
                &b.roll_in,
                &b.roll_out,
                b.cut_index,
                b.label
            ));
        }
    }

    #[test]
    fn post_filter_rule() {
        let rec = |label: ClassLabel| TraceRecord {
            problem_id: "p".into(),
            roll_in_policy: "s".into(),
            cut_index: 1,
            roll_in: Sequence::Tokens(vec![crate::types::Token(1)]),
            roll_out: Sequence::Tokens(vec![crate::types::Token(2)]),
            label,
            seed: 0,
            created_at: "t".into(),
        };
        let mut all_bad: Vec<TraceRecord> =
            (0..56).map(|i| rec(if i % 2 == 0 { ClassLabel::Incorrect } else { ClassLabel::Incomplete })).collect();
        assert_eq!(post_filter(&all_bad), FilterVerdict::drop(FilterRule::AllRewardZero));
        all_bad[7] = rec(ClassLabel::Correct);
        assert!(post_filter(&all_bad).keep);
        let all_incomplete: Vec<TraceRecord> = (0..8).map(|_| rec(ClassLabel::Incomplete)).collect();
        assert!(!post_filter(&all_incomplete).keep);
    }

    #[test]
    fn ngram_overlap_cases() {
        let a: Vec<u32> = (0..10).collect();
        assert_eq!(ngram_overlap(&a, &a, 3), 1.0);
        let b: Vec<u32> = (100..110).collect();
        assert_eq!(ngram_overlap(&a, &b, 3), 0.0);
        // a = first half of b, n = 2: hand-enumerated on a 10-token example,
        // all 4 bigrams of a appear in b.
        let b: Vec<u32> = (0..10).collect();
        let a: Vec<u32> = (0..5).collect();
        assert_eq!(ngram_overlap(&a, &b, 2), 1.0);
        // Shorter than n.
        assert_eq!(ngram_overlap(&a[..1], &b, 2), 0.0);
        assert!(is_contaminated("one two three four five six seven eight nine", "one two three four five six seven eight nine ten"));
        assert!(!is_contaminated("totally different words here now", "one two three four five six seven eight nine"));
    }

    #[test]
    fn trace_record_jsonl_round_trips_byte_identically() {
        let env = Arc::new(one_step_env(0.7));
        let gen = SyntheticGenerator::new(env.clone());
        let corpus = vec![env.make_problem("p0", 0, "A")];
        let config = CollectConfig {
            gen_config: env.standard_config(1),
            n_rollins: 3,
            cuts_per_rollin: 2,
            cut_weighting: CutWeighting::Sqrt,
            seed: 5,
        };
        let mut records = Vec::new();
        let policies: Vec<&dyn Generator> = vec![&gen];
        collect_traces(&corpus, &policies, &gen, &config, &mut |r| records.push(r)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shard.jsonl");
        write_jsonl(&path, &records).unwrap();
        let bytes_before = std::fs::read(&path).unwrap();
        let back: Vec<TraceRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, records);
        write_jsonl(&path, &back).unwrap();
        let bytes_after = std::fs::read(&path).unwrap();
        assert_eq!(bytes_before, bytes_after);
    }

    #[test]
    fn empty_rollout_records_are_skipped_as_training_items() {
        // One-step env: roll-ins finish in one token, so cut = len keeps the
        // terminal and the roll-out is empty.
        let env = Arc::new(one_step_env(1.0));
        let gen = SyntheticGenerator::new(env.clone());
        let corpus = vec![env.make_problem("p0", 0, "A")];
        let config = CollectConfig {
            gen_config: env.standard_config(1),
            n_rollins: 1,
            cuts_per_rollin: 1,
            cut_weighting: CutWeighting::Sqrt,
            seed: 0,
        };
        let mut records = Vec::new();
        let policies: Vec<&dyn Generator> = vec![&gen];
        collect_traces(&corpus, &policies, &gen, &config, &mut |r| records.push(r)).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].roll_out.is_empty());
        assert_eq!(records[0].label, ClassLabel::Correct);
        assert!(records[0].to_item(&corpus[0].prompt).is_none());
    }

    #[test]
    fn manifest_save_is_atomic_rename() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut m = Manifest { config_hash: "abc".into(), seed: 1, ..Default::default() };
        m.count_label(ClassLabel::Correct);
        m.count_label(ClassLabel::Correct);
        m.count_label(ClassLabel::Incomplete);
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.label_counts.get("1"), Some(&2));
        assert!(!path.with_extension("json.tmp").exists());
    }
}
