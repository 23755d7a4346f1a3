//! Synthetic Markov-chain environment with an exact dynamic-programming
//! value oracle.
//!
//! One token per state transition: a sequence of tokens is a path of states,
//! the last token is the current state, and the horizon bounds total
//! sequence length. This keeps block size the only granularity knob and the
//! oracle exact, which is what the search and training claims are tested
//! against.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::canonicalize_answer;
use crate::generator::{BlockResult, FinishReason, Generator, GeneratorConfig, GeneratorError};
use crate::scorer::{Scorer, ScorerError};
use crate::types::{ProblemRecord, Sequence, Token};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("transition matrix must be {expected}x{expected}, got row {row} of length {len}")]
    BadShape { expected: usize, row: usize, len: usize },
    #[error("transition row {row} sums to {sum}, expected 1 +/- 1e-12")]
    NotStochastic { row: usize, sum: f64 },
    #[error("terminal state {0} is not absorbing")]
    NotAbsorbing(usize),
    #[error("state {0} out of range")]
    UnknownState(usize),
    #[error("steps_left {steps} exceeds horizon {horizon}")]
    InvalidState { steps: usize, horizon: usize },
    #[error("horizon must be positive")]
    InvalidHorizon,
    #[error("negative transition probability in row {0}")]
    NegativeProbability(usize),
}

/// Dynamics shared by a family of problems: a row-stochastic transition
/// matrix, absorbing terminal states labeled with answers, and a horizon
/// that defines the max sequence length (one token per step).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEnv {
    pub num_states: usize,
    pub transition: Vec<Vec<f64>>,
    pub terminals: BTreeMap<usize, String>,
    pub horizon: usize,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl SyntheticEnv {
    pub fn new(
        transition: Vec<Vec<f64>>,
        terminals: BTreeMap<usize, String>,
        horizon: usize,
    ) -> Result<Self, EnvError> {
        let env = SyntheticEnv { num_states: transition.len(), transition, terminals, horizon };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.horizon == 0 {
            return Err(EnvError::InvalidHorizon);
        }
        let n = self.num_states;
        if self.transition.len() != n {
            return Err(EnvError::BadShape { expected: n, row: n, len: self.transition.len() });
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                return Err(EnvError::BadShape { expected: n, row: i, len: row.len() });
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(EnvError::NegativeProbability(i));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(EnvError::NotStochastic { row: i, sum });
            }
        }
        for (&t, _) in &self.terminals {
            if t >= n {
                return Err(EnvError::UnknownState(t));
            }
            if (self.transition[t][t] - 1.0).abs() > ROW_SUM_TOL {
                return Err(EnvError::NotAbsorbing(t));
            }
        }
        Ok(())
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminals.contains_key(&state)
    }

    pub fn terminal_answer(&self, state: usize) -> Option<&str> {
        self.terminals.get(&state).map(String::as_str)
    }

    /// Decoding config the environment expects: raw chain distribution and
    /// max_len equal to the horizon.
    pub fn standard_config(&self, block_size: usize) -> GeneratorConfig {
        GeneratorConfig {
            temperature: 1.0,
            top_p: 1.0,
            max_len: self.horizon,
            block_size,
            stop_markers: Vec::new(),
        }
    }

    pub fn make_problem(&self, id: &str, start_state: usize, correct: &str) -> ProblemRecord {
        ProblemRecord {
            id: id.to_string(),
            prompt: Sequence::Tokens(vec![Token(start_state as u32)]),
            ground_truth: correct.to_string(),
            metadata: BTreeMap::new(),
        }
    }

    /// Transition row after applying temperature and top-p truncation.
    fn effective_row(&self, state: usize, config: &GeneratorConfig) -> Vec<f64> {
        let raw = &self.transition[state];
        let mut row: Vec<f64>;
        if config.temperature <= 0.0 {
            // Greedy limit: all mass on the argmax (lowest index on ties).
            let mut best = 0;
            for (i, &p) in raw.iter().enumerate() {
                if p > raw[best] {
                    best = i;
                }
            }
            row = vec![0.0; raw.len()];
            row[best] = 1.0;
            return row;
        }
        if (config.temperature - 1.0).abs() < 1e-12 {
            row = raw.clone();
        } else {
            let inv = 1.0 / config.temperature;
            row = raw.iter().map(|&p| if p > 0.0 { p.powf(inv) } else { 0.0 }).collect();
            let z: f64 = row.iter().sum();
            for p in &mut row {
                *p /= z;
            }
        }
        if config.top_p < 1.0 {
            // Nucleus: keep the smallest high-probability set with mass >= top_p.
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            let mut kept = vec![false; row.len()];
            let mut cum = 0.0;
            for &i in &order {
                kept[i] = true;
                cum += row[i];
                if cum >= config.top_p {
                    break;
                }
            }
            let mut z = 0.0;
            for (i, p) in row.iter_mut().enumerate() {
                if !kept[i] {
                    *p = 0.0;
                }
                z += *p;
            }
            for p in &mut row {
                *p /= z;
            }
        }
        row
    }

    fn sample_next(&self, state: usize, config: &GeneratorConfig, rng: &mut ChaCha12Rng) -> usize {
        let row = self.effective_row(state, config);
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (i, &p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                return i;
            }
        }
        // Rounding slack: fall back to the last positive-probability state.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(state)
    }
}

/// A generator view over an environment. Cheap to clone; immutable.
#[derive(Clone)]
pub struct SyntheticGenerator {
    env: Arc<SyntheticEnv>,
    name: String,
    /// Fixed temperature for this policy, ignoring the per-call config.
    /// Used to derive diverse roll-in policies from one environment.
    temperature_override: Option<f64>,
}

impl SyntheticGenerator {
    pub fn new(env: Arc<SyntheticEnv>) -> Self {
        SyntheticGenerator { env, name: "synthetic".to_string(), temperature_override: None }
    }

    pub fn named(env: Arc<SyntheticEnv>, name: impl Into<String>) -> Self {
        SyntheticGenerator { env, name: name.into(), temperature_override: None }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature_override = Some(temperature);
        self
    }

    pub fn env(&self) -> &SyntheticEnv {
        &self.env
    }
}

impl Generator for SyntheticGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn sample_block(
        &self,
        prefix: &Sequence,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<BlockResult, GeneratorError> {
        let tempered;
        let config = match self.temperature_override {
            Some(t) => {
                tempered = GeneratorConfig { temperature: t, ..config.clone() };
                &tempered
            }
            None => config,
        };
        let tokens = prefix
            .as_tokens()
            .ok_or_else(|| GeneratorError::InvalidState("synthetic prefix must be tokens".into()))?;
        let mut state = tokens
            .last()
            .ok_or_else(|| GeneratorError::InvalidState("empty prefix".into()))?
            .id();
        if state >= self.env.num_states {
            return Err(GeneratorError::InvalidState(format!("state {state} out of range")));
        }
        if tokens.len() >= config.max_len {
            return Err(GeneratorError::InvalidState(format!(
                "prefix length {} already at max_len {}",
                tokens.len(),
                config.max_len
            )));
        }
        if self.env.is_terminal(state) {
            return Ok(BlockResult {
                tokens: Sequence::Tokens(Vec::new()),
                finished: true,
                finish_reason: Some(FinishReason::Terminal),
                token_len: 0,
                token_len_estimated: false,
            });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let mut finish = None;
        while out.len() < config.block_size {
            state = self.env.sample_next(state, config, &mut rng);
            out.push(Token(state as u32));
            if self.env.is_terminal(state) {
                finish = Some(FinishReason::Terminal);
                break;
            }
            if tokens.len() + out.len() >= config.max_len {
                finish = Some(FinishReason::LengthCap);
                break;
            }
        }
        let token_len = out.len();
        Ok(BlockResult {
            tokens: Sequence::Tokens(out),
            finished: finish.is_some(),
            finish_reason: finish,
            token_len,
            token_len_estimated: false,
        })
    }

    fn extract_answer(&self, sequence: &Sequence) -> Option<String> {
        let last = sequence.last_token()?;
        self.env.terminal_answer(last.id()).map(str::to_string)
    }
}

/// Exact success probabilities V(state, steps_left) for one target answer,
/// computed by backward dynamic programming over the effective transition
/// matrix:
///
///   V(terminal, t) = 1 if its answer matches, else 0, for all t;
///   V(s, 0)        = 0 for non-terminal s;
///   V(s, t)        = sum_s' T(s'|s) V(s', t-1).
#[derive(Clone, Debug)]
pub struct ValueTable {
    /// values[t][s] = V(s, steps_left = t)
    values: Vec<Vec<f64>>,
    horizon: usize,
}

impl ValueTable {
    pub fn new(
        env: &SyntheticEnv,
        correct: &str,
        config: &GeneratorConfig,
    ) -> Result<Self, EnvError> {
        let correct_key = canonicalize_answer(correct).ok();
        let n = env.num_states;
        let terminal_value: Vec<Option<f64>> = (0..n)
            .map(|s| {
                env.terminal_answer(s).map(|a| {
                    let matches = match (&correct_key, canonicalize_answer(a).ok()) {
                        (Some(c), Some(k)) => *c == k,
                        _ => false,
                    };
                    if matches {
                        1.0
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|s| env.effective_row(s, config)).collect();
        let mut values = Vec::with_capacity(env.horizon + 1);
        let base: Vec<f64> = terminal_value.iter().map(|tv| tv.unwrap_or(0.0)).collect();
        values.push(base);
        for t in 1..=env.horizon {
            let prev = &values[t - 1];
            let mut cur = vec![0.0; n];
            for s in 0..n {
                cur[s] = match terminal_value[s] {
                    Some(v) => v,
                    None => rows[s].iter().zip(prev).map(|(&p, &v)| p * v).sum(),
                };
            }
            values.push(cur);
        }
        Ok(ValueTable { values, horizon: env.horizon })
    }

    pub fn value(&self, state: usize, steps_left: usize) -> Result<f64, EnvError> {
        if steps_left > self.horizon {
            return Err(EnvError::InvalidState { steps: steps_left, horizon: self.horizon });
        }
        self.values
            .get(steps_left)
            .and_then(|row| row.get(state))
            .copied()
            .ok_or(EnvError::UnknownState(state))
    }
}

/// Exact probability that a roll-out from `(state, steps_left)` under the
/// environment dynamics finishes at a terminal whose answer equals
/// `correct`.
pub fn oracle_value(
    env: &SyntheticEnv,
    state: usize,
    steps_left: usize,
    correct: &str,
) -> Result<f64, EnvError> {
    let table = ValueTable::new(env, correct, &env.standard_config(1))?;
    table.value(state, steps_left)
}

/// Scorer backed by the exact value table. Finished responses score exactly
/// 0 or 1; partial responses score their true continuation success
/// probability.
pub struct DpOracleScorer {
    table: ValueTable,
    max_len: usize,
    name: String,
}

impl DpOracleScorer {
    pub fn new(env: &SyntheticEnv, correct: &str, config: &GeneratorConfig) -> Result<Self, EnvError> {
        Ok(DpOracleScorer {
            table: ValueTable::new(env, correct, config)?,
            max_len: config.max_len,
            name: "dp-oracle".to_string(),
        })
    }

    pub fn for_problem(
        env: &SyntheticEnv,
        problem: &ProblemRecord,
        config: &GeneratorConfig,
    ) -> Result<Self, EnvError> {
        Self::new(env, &problem.ground_truth, config)
    }
}

impl Scorer for DpOracleScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ScorerError> {
        let state = response
            .last_token()
            .or_else(|| prompt.last_token())
            .ok_or_else(|| ScorerError::InvalidInput("empty sequence".into()))?;
        let len = prompt.token_len() + response.token_len();
        if len > self.max_len {
            return Err(ScorerError::InvalidInput(format!(
                "sequence length {len} exceeds max_len {}",
                self.max_len
            )));
        }
        let steps_left = self.max_len - len;
        self.table
            .value(state.id(), steps_left)
            .map_err(|e| ScorerError::InvalidInput(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Environment builders
// ---------------------------------------------------------------------------

/// A depth-D two-track chain: a low-probability "good" track reaching the
/// correct terminal and a high-probability "bad" track reaching a wrong
/// terminal. `p_correct[i]` is the probability of staying on the good track
/// at level i. All paths take exactly `depth` transitions, so no rollout is
/// ever incomplete.
///
/// With `prod(p_correct) < 0.5` the modal answer is wrong, which separates
/// value guidance from plain voting.
pub fn ladder_env(depth: usize, p_correct: &[f64], correct: &str, wrong: &str) -> SyntheticEnv {
    assert!(depth >= 1 && p_correct.len() == depth);
    assert!(p_correct.iter().all(|&p| (0.0..=1.0).contains(&p)));
    // State layout: good level i = i for i in 0..depth; terminal-correct = depth;
    // bad level i = depth + i for i in 1..depth; terminal-wrong = 2 * depth.
    let n = 2 * depth + 1;
    let ta = depth;
    let tb = 2 * depth;
    let bad = |i: usize| depth + i;
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..depth {
        let next_good = if i + 1 == depth { ta } else { i + 1 };
        let next_bad = if i + 1 == depth { tb } else { bad(i + 1) };
        t[i][next_good] = p_correct[i];
        t[i][next_bad] += 1.0 - p_correct[i];
    }
    for i in 1..depth {
        let next = if i + 1 == depth { tb } else { bad(i + 1) };
        t[bad(i)][next] = 1.0;
    }
    t[ta][ta] = 1.0;
    t[tb][tb] = 1.0;
    let mut terminals = BTreeMap::new();
    terminals.insert(ta, correct.to_string());
    terminals.insert(tb, wrong.to_string());
    SyntheticEnv::new(t, terminals, depth + 1).expect("ladder construction is stochastic")
}

/// The misleading-majority family used by the search comparisons: constant
/// per-level survival probability, modal answer wrong.
pub fn misleading_majority_env(depth: usize, p: f64) -> SyntheticEnv {
    ladder_env(depth, &vec![p; depth], "A", "B")
}

/// One-step branching env: start state 0 reaches terminal "A" w.p. `p` and
/// terminal "B" otherwise.
pub fn one_step_env(p: f64) -> SyntheticEnv {
    ladder_env(1, &[p], "A", "B")
}

/// A seeded layered chain where every path has the same length: interior
/// layer widths are given, transitions go layer to layer with random
/// seeded weights, and the last interior layer feeds `num_terminals`
/// absorbing answer states. Fixed episode length means roll-out length
/// carries no label information given a prefix, so the suffix-averaged
/// training loss recovers the exact success probability.
pub fn layered_env(widths: &[usize], num_terminals: usize, seed: u64) -> SyntheticEnv {
    assert!(widths.first() == Some(&1), "layer 0 is the single start state");
    assert!(num_terminals >= 2);
    let interior: usize = widths.iter().sum();
    let n = interior + num_terminals;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut layer_start = Vec::with_capacity(widths.len() + 1);
    let mut acc = 0;
    for &w in widths {
        layer_start.push(acc);
        acc += w;
    }
    layer_start.push(acc); // terminal layer
    let mut t = vec![vec![0.0; n]; n];
    for (layer, &w) in widths.iter().enumerate() {
        let next_start = layer_start[layer + 1];
        let next_width =
            if layer + 1 == widths.len() { num_terminals } else { widths[layer + 1] };
        for s in layer_start[layer]..layer_start[layer] + w {
            let mut weights: Vec<f64> =
                (0..next_width).map(|_| 0.15 + rng.gen::<f64>()).collect();
            let sum: f64 = weights.iter().sum();
            for v in &mut weights {
                *v /= sum;
            }
            // Exact stochasticity for the 1e-12 row check.
            let correction = 1.0 - weights.iter().sum::<f64>();
            weights[next_width - 1] += correction;
            for (j, &p) in weights.iter().enumerate() {
                t[s][next_start + j] = p;
            }
        }
    }
    let mut terminals = BTreeMap::new();
    for k in 0..num_terminals {
        let s = interior + k;
        t[s][s] = 1.0;
        terminals.insert(s, format!("ans{k}"));
    }
    SyntheticEnv::new(t, terminals, widths.len() + 1).expect("layered rows are stochastic")
}

/// A seeded random chain with wandering mass, used for value-model training
/// checks: `num_terminal` absorbing answer states, the rest mix toward both
/// terminals and other interior states, so labels of all three classes occur
/// within the horizon.
pub fn random_chain_env(
    num_states: usize,
    num_terminals: usize,
    horizon: usize,
    seed: u64,
) -> SyntheticEnv {
    assert!(num_terminals >= 2 && num_states > num_terminals);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let first_terminal = num_states - num_terminals;
    let mut t = vec![vec![0.0; num_states]; num_states];
    let mut terminals = BTreeMap::new();
    for (k, s) in (first_terminal..num_states).enumerate() {
        t[s][s] = 1.0;
        terminals.insert(s, format!("ans{k}"));
    }
    for s in 0..first_terminal {
        // A few interior successors plus some terminal mass.
        let interior_links = 3;
        let mut weights = vec![0.0; num_states];
        for _ in 0..interior_links {
            let target = rng.gen_range(0..first_terminal);
            weights[target] += 0.3 + rng.gen::<f64>();
        }
        let terminal_mass: f64 = 0.05 + 0.30 * rng.gen::<f64>();
        let favored = first_terminal + rng.gen_range(0..num_terminals);
        weights[favored] += 1.0;
        let other = first_terminal + rng.gen_range(0..num_terminals);
        weights[other] += 0.4;
        let interior_sum: f64 = weights[..first_terminal].iter().sum();
        let term_sum: f64 = weights[first_terminal..].iter().sum();
        for w in &mut weights[..first_terminal] {
            *w *= (1.0 - terminal_mass) / interior_sum;
        }
        for w in &mut weights[first_terminal..] {
            *w *= terminal_mass / term_sum;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        // Exact row normalization for the 1e-12 stochasticity check.
        let sum: f64 = weights.iter().sum();
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap();
        weights[last_positive] += 1.0 - sum;
        t[s] = weights;
    }
    SyntheticEnv::new(t, terminals, horizon).expect("random chain rows are stochastic")
}
