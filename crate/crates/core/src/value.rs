//! The K=3 value classifier and its training loop.
//!
//! The classifier maps a (prompt, partial response) pair to a probability
//! vector over {incorrect, correct, incomplete}; its `correct` component is
//! the value estimate. Training minimizes cross-entropy averaged over every
//! roll-out prefix: each suffix of a roll-out is itself a roll-out from the
//! same policy, so every prefix position is an extra datapoint with the same
//! label.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scorer::{Scorer, ScorerError};
use crate::types::{ClassLabel, Sequence};

pub const NUM_CLASSES: usize = ClassLabel::COUNT;

#[derive(Debug, Error)]
pub enum ValueError {
    #[error("model input must be a token sequence")]
    TextInput,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty batch")]
    EmptyBatch,
    #[error("roll-out must be non-empty")]
    EmptyRollOut,
    #[error("validation split {split} leaves no training data (dataset size {size})")]
    BadSplit { split: usize, size: usize },
    #[error("training diverged at learning rate {lr}: epoch loss {loss} > 10x initial {initial}")]
    Divergence { lr: f64, loss: f64, initial: f64 },
}

/// Deterministic featurization of a (prompt, partial response) pair.
///
/// `StateStep` is a one-hot over (current state, step bucket); with bucket
/// width 1 the optimal classifier is exactly realizable, which makes oracle
/// convergence a sharp test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    StateStep { num_states: usize, horizon: usize, bucket: usize },
}

impl FeatureMap {
    pub fn state_step(num_states: usize, horizon: usize) -> Self {
        FeatureMap::StateStep { num_states, horizon, bucket: 1 }
    }

    pub fn num_features(&self) -> usize {
        match self {
            FeatureMap::StateStep { num_states, horizon, bucket } => {
                num_states * (horizon / bucket + 1)
            }
        }
    }

    /// Feature index for a token-backend sequence position.
    pub fn feature_index(&self, state: usize, seq_len: usize) -> usize {
        match self {
            FeatureMap::StateStep { num_states, horizon, bucket } => {
                debug_assert!(state < *num_states);
                let b = seq_len.min(*horizon) / bucket;
                state * (horizon / bucket + 1) + b
            }
        }
    }

    /// Sparse features of (prompt, partial). Errors on text input: the
    /// linear model only serves token backends.
    pub fn featurize(
        &self,
        prompt: &Sequence,
        partial: &Sequence,
    ) -> Result<Vec<(usize, f64)>, ValueError> {
        let state = partial
            .last_token()
            .or_else(|| prompt.last_token())
            .ok_or(ValueError::TextInput)?;
        if prompt.as_tokens().is_none() || partial.as_tokens().is_none() {
            return Err(ValueError::TextInput);
        }
        let len = prompt.token_len() + partial.token_len();
        Ok(vec![(self.feature_index(state.id(), len), 1.0)])
    }
}

/// Linear softmax classifier over the feature map: per-class logit is a
/// weighted feature sum plus bias, output is the softmax simplex vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueClassifier {
    pub feature_map: FeatureMap,
    /// Row-major (num_features x NUM_CLASSES).
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ValueClassifier {
    pub fn zeros(feature_map: FeatureMap) -> Self {
        let n = feature_map.num_features();
        ValueClassifier { feature_map, weights: vec![0.0; n * NUM_CLASSES], bias: vec![0.0; NUM_CLASSES] }
    }

    fn logits_sparse(&self, features: &[(usize, f64)]) -> [f64; NUM_CLASSES] {
        let mut logits = [self.bias[0], self.bias[1], self.bias[2]];
        for &(idx, v) in features {
            let row = &self.weights[idx * NUM_CLASSES..(idx + 1) * NUM_CLASSES];
            for k in 0..NUM_CLASSES {
                logits[k] += v * row[k];
            }
        }
        logits
    }

    /// Probability vector over the three classes. Components are positive
    /// and sum to 1 up to rounding for every input and parameter value.
    pub fn predict(
        &self,
        prompt: &Sequence,
        partial: &Sequence,
    ) -> Result<[f64; NUM_CLASSES], ValueError> {
        let features = self.feature_map.featurize(prompt, partial)?;
        Ok(softmax(self.logits_sparse(&features)))
    }

    /// The value estimate: probability of the `Correct` class.
    pub fn value(&self, prompt: &Sequence, partial: &Sequence) -> Result<f64, ValueError> {
        Ok(self.predict(prompt, partial)?[ClassLabel::Correct.index()])
    }
}

fn softmax(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let (lp, _) = log_softmax(logits);
    [lp[0].exp(), lp[1].exp(), lp[2].exp()]
}

/// Log-sum-exp formulation; never evaluates log(0).
fn log_softmax(logits: [f64; NUM_CLASSES]) -> ([f64; NUM_CLASSES], f64) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    ([logits[0] - lse, logits[1] - lse, logits[2] - lse], lse)
}

/// One training item: (prompt, roll-in, roll-out, label). The roll-out must
/// be non-empty; every suffix position of it contributes one loss term.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceItem {
    pub prompt: Sequence,
    pub roll_in: Sequence,
    pub roll_out: Sequence,
    pub label: ClassLabel,
}

impl TraceItem {
    pub fn new(
        prompt: Sequence,
        roll_in: Sequence,
        roll_out: Sequence,
        label: ClassLabel,
    ) -> Result<Self, ValueError> {
        if roll_out.is_empty() {
            return Err(ValueError::EmptyRollOut);
        }
        Ok(TraceItem { prompt, roll_in, roll_out, label })
    }
}

/// Gradient with the same shape as the classifier parameters.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    fn zeros_like(model: &ValueClassifier) -> Self {
        Gradient { weights: vec![0.0; model.weights.len()], bias: vec![0.0; NUM_CLASSES] }
    }
}

/// Suffix-averaged cross-entropy loss over a batch:
///
///   L = (1/|B|) sum_i (1/|z_i|) sum_{h in 0..|z_i|} -ln p(x_i, y_i, z_i^{:h})[k_i]
///
/// Returns the loss and its analytic gradient with respect to the
/// classifier parameters.
pub fn suffix_ce_loss(
    model: &ValueClassifier,
    batch: &[TraceItem],
) -> Result<(f64, Gradient), ValueError> {
    if batch.is_empty() {
        return Err(ValueError::EmptyBatch);
    }
    let mut grad = Gradient::zeros_like(model);
    let mut total = 0.0;
    for item in batch {
        let z = item.roll_in.concat(&item.roll_out);
        let z_tokens = item.roll_out.token_len();
        debug_assert!(z_tokens >= 1);
        let roll_in_len = item.roll_in.token_len();
        let prompt_len = item.prompt.token_len();
        let full = item.prompt.concat(&z);
        let full_tokens = full.as_tokens().ok_or(ValueError::TextInput)?;
        let kappa = item.label.index();
        let item_scale = 1.0 / (batch.len() as f64 * z_tokens as f64);
        let mut item_loss = 0.0;
        for h in 0..z_tokens {
            let pos = prompt_len + roll_in_len + h; // sequence length at this prefix
            let state = full_tokens[pos - 1].id();
            let features = vec![(model.feature_map.feature_index(state, pos), 1.0)];
            let logits = model.logits_sparse(&features);
            let (logp, _) = log_softmax(logits);
            item_loss += -logp[kappa];
            let p = [logp[0].exp(), logp[1].exp(), logp[2].exp()];
            for k in 0..NUM_CLASSES {
                let g = (p[k] - if k == kappa { 1.0 } else { 0.0 }) * item_scale;
                grad.bias[k] += g;
                for &(idx, v) in &features {
                    grad.weights[idx * NUM_CLASSES + k] += v * g;
                }
            }
        }
        total += item_loss / z_tokens as f64;
    }
    Ok((total / batch.len() as f64, grad))
}

/// Learning-rate schedule over the whole run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear warmup over `warmup` fraction of steps, cosine decay to zero after.
    Cosine { warmup: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    AdamW { beta1: f64, beta2: f64, weight_decay: f64, eps: f64 },
}

/// Training configuration. Defaults record the reference recipe (AdamW
/// beta1 0.9 / beta2 0.95, weight decay 0.1, grad-norm clip 5, cosine
/// schedule with 10% warmup, batch 1024, 5 epochs, 500 validation items);
/// desk-scale runs usually override the data-dependent fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub val_split: usize,
    pub optimizer: OptimizerKind,
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            schedule: LrSchedule::Cosine { warmup: 0.1 },
            batch_size: 1024,
            epochs: 5,
            seed: 0,
            val_split: 500,
            optimizer: OptimizerKind::AdamW { beta1: 0.9, beta2: 0.95, weight_decay: 0.1, eps: 1e-8 },
            grad_clip: Some(5.0),
        }
    }
}

impl TrainConfig {
    /// Plain deterministic mini-batch gradient descent, no decay: the
    /// configuration used by the desk-scale convergence checks.
    pub fn plain_sgd(lr: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            lr,
            schedule: LrSchedule::Constant,
            batch_size,
            epochs,
            seed,
            val_split: 0,
            optimizer: OptimizerKind::Sgd,
            grad_clip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Serializable training checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub feature_map: FeatureMap,
    pub theta: Vec<f64>,
    pub bias: Vec<f64>,
    pub k: usize,
    pub config: TrainConfig,
    pub epoch: usize,
    pub val_loss: Option<f64>,
}

impl Checkpoint {
    pub fn model(&self) -> ValueClassifier {
        ValueClassifier {
            feature_map: self.feature_map.clone(),
            weights: self.theta.clone(),
            bias: self.bias.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    /// Best-validation-loss checkpoint (final epoch when no validation split).
    pub model: ValueClassifier,
    pub curve: Vec<EpochPoint>,
    pub checkpoints: Vec<Checkpoint>,
    pub best_epoch: usize,
    pub initial_loss: f64,
}

pub(crate) struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// One optimizer step over flat parameters. Shared by the classifier and
/// Bradley-Terry trainers so determinism lives in one place.
pub(crate) fn apply_step(
    params: &mut [f64],
    grad: &mut [f64],
    lr: f64,
    opt: &OptimizerKind,
    clip: Option<f64>,
    adam: &mut Option<AdamState>,
) {
    if let Some(max_norm) = clip {
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > max_norm {
            let scale = max_norm / norm;
            for g in grad.iter_mut() {
                *g *= scale;
            }
        }
    }
    match opt {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grad.iter()) {
                *p -= lr * g;
            }
        }
        OptimizerKind::AdamW { beta1, beta2, weight_decay, eps } => {
            let state = adam.get_or_insert_with(|| AdamState {
                m: vec![0.0; params.len()],
                v: vec![0.0; params.len()],
                t: 0,
            });
            state.t += 1;
            let t = state.t as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for i in 0..params.len() {
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                let mhat = state.m[i] / bc1;
                let vhat = state.v[i] / bc2;
                params[i] -= lr * (mhat / (vhat.sqrt() + eps) + weight_decay * params[i]);
            }
        }
    }
}

pub(crate) fn lr_at(config: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    match config.schedule {
        LrSchedule::Constant => config.lr,
        LrSchedule::Cosine { warmup } => {
            let total = total_steps.max(1) as f64;
            let warm_steps = (warmup * total).floor();
            let s = step as f64;
            if s < warm_steps {
                config.lr * (s + 1.0) / warm_steps.max(1.0)
            } else {
                let progress = (s - warm_steps) / (total - warm_steps).max(1.0);
                config.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

/// Deterministic mini-batch training of the value classifier.
///
/// Shuffles with the config seed, holds out `val_split` items, snapshots a
/// checkpoint per epoch, and selects the best validation loss. Errors with
/// `Divergence` when an epoch's mean train loss exceeds 10x the initial
/// loss.
pub fn train(
    model: ValueClassifier,
    dataset: &[TraceItem],
    config: &TrainConfig,
) -> Result<TrainOutput, ValueError> {
    if dataset.is_empty() {
        return Err(ValueError::EmptyDataset);
    }
    if config.val_split >= dataset.len() {
        return Err(ValueError::BadSplit { split: config.val_split, size: dataset.len() });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_idx) = order.split_at(config.val_split);
    let val: Vec<TraceItem> = val_idx.iter().map(|&i| dataset[i].clone()).collect();
    let mut train_items: Vec<TraceItem> = train_idx.iter().map(|&i| dataset[i].clone()).collect();

    let mut model = model;
    let (initial_loss, _) = suffix_ce_loss(&model, &train_items)?;
    let batches_per_epoch = train_items.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let mut adam: Option<AdamState> = None;
    let mut step = 0usize;
    let mut curve = Vec::new();
    let mut checkpoints = Vec::new();
    let mut best: (usize, f64) = (0, f64::INFINITY);

    for epoch in 0..config.epochs {
        train_items.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in train_items.chunks(config.batch_size) {
            let (loss, grad) = suffix_ce_loss(&model, chunk)?;
            epoch_loss += loss * chunk.len() as f64;
            let lr = lr_at(config, step, total_steps);
            step += 1;
            let mut flat_grad: Vec<f64> = grad.weights;
            flat_grad.extend_from_slice(&grad.bias);
            let mut flat_params: Vec<f64> = model.weights.clone();
            flat_params.extend_from_slice(&model.bias);
            apply_step(&mut flat_params, &mut flat_grad, lr, &config.optimizer, config.grad_clip, &mut adam);
            let split = model.weights.len();
            model.weights.copy_from_slice(&flat_params[..split]);
            model.bias.copy_from_slice(&flat_params[split..]);
        }
        let train_loss = epoch_loss / train_items.len() as f64;
        if train_loss > 10.0 * initial_loss {
            return Err(ValueError::Divergence { lr: config.lr, loss: train_loss, initial: initial_loss });
        }
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(suffix_ce_loss(&model, &val)?.0)
        };
        curve.push(EpochPoint { epoch, train_loss, val_loss });
        checkpoints.push(Checkpoint {
            feature_map: model.feature_map.clone(),
            theta: model.weights.clone(),
            bias: model.bias.clone(),
            k: NUM_CLASSES,
            config: config.clone(),
            epoch,
            val_loss,
        });
        let selectable = val_loss.unwrap_or(train_loss);
        if selectable < best.1 {
            best = (epoch, selectable);
        }
    }
    let best_ckpt = &checkpoints[best.0];
    Ok(TrainOutput {
        model: best_ckpt.model(),
        curve,
        checkpoints,
        best_epoch: best.0,
        initial_loss,
    })
}

/// Scorer view of a trained classifier: the value is the `Correct`
/// probability, which already lives in [0, 1].
pub struct ClassifierScorer {
    pub model: ValueClassifier,
    name: String,
}

impl ClassifierScorer {
    pub fn new(model: ValueClassifier) -> Self {
        ClassifierScorer { model, name: "value-classifier".to_string() }
    }
}

impl Scorer for ClassifierScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ScorerError> {
        self.model.value(prompt, response).map_err(|e| ScorerError::InvalidInput(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Token;

    fn toks(ids: &[u32]) -> Sequence {
        Sequence::Tokens(ids.iter().map(|&i| Token(i)).collect())
    }

    fn item(prompt: &[u32], roll_in: &[u32], roll_out: &[u32], label: ClassLabel) -> TraceItem {
        TraceItem::new(toks(prompt), toks(roll_in), toks(roll_out), label).unwrap()
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let m = ValueClassifier::zeros(FeatureMap::state_step(4, 8));
        let p = m.predict(&toks(&[0]), &toks(&[1, 2])).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn predictions_stay_on_the_simplex() {
        let fm = FeatureMap::state_step(4, 8);
        let n = fm.num_features();
        let mut m = ValueClassifier::zeros(fm);
        for (i, w) in m.weights.iter_mut().enumerate() {
            *w = ((i * 37 % 19) as f64 - 9.0) * 3.7;
        }
        m.bias = vec![5.0, -100.0, 42.0];
        assert_eq!(m.weights.len(), n * NUM_CLASSES);
        for s in 0..4u32 {
            let p = m.predict(&toks(&[0]), &toks(&[s])).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn loss_at_zero_parameters_is_ln_three() {
        let m = ValueClassifier::zeros(FeatureMap::state_step(6, 12));
        for batch_shape in [&[1usize, 1][..], &[3], &[2, 5, 7], &[4, 4, 4, 4]] {
            let batch: Vec<TraceItem> = batch_shape
                .iter()
                .enumerate()
                .map(|(i, &zlen)| {
                    item(
                        &[0],
                        &[1, 2],
                        &(0..zlen as u32).map(|k| k % 6).collect::<Vec<_>>(),
                        ClassLabel::from_index((i % 3) as u8).unwrap(),
                    )
                })
                .collect();
            let (loss, _) = suffix_ce_loss(&m, &batch).unwrap();
            assert!(
                (loss - 3.0f64.ln()).abs() <= 1e-15,
                "expected ln 3, got {loss} for shape {batch_shape:?}"
            );
        }
    }

    #[test]
    fn single_suffix_term_matches_direct_formula() {
        // One item, |z| = 1: loss is -ln p[kappa] at the single prefix point.
        let fm = FeatureMap::state_step(3, 4);
        let mut m = ValueClassifier::zeros(fm);
        m.bias = vec![0.2f64.ln(), 0.5f64.ln(), 0.3f64.ln()];
        let batch = vec![item(&[0], &[1], &[2], ClassLabel::Correct)];
        let (loss, _) = suffix_ce_loss(&m, &batch).unwrap();
        assert!((loss - (-0.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn loss_is_permutation_invariant() {
        let fm = FeatureMap::state_step(5, 10);
        let mut m = ValueClassifier::zeros(fm);
        for (i, w) in m.weights.iter_mut().enumerate() {
            *w = ((i % 7) as f64 - 3.0) * 0.31;
        }
        let batch = vec![
            item(&[0], &[1, 2], &[3, 4, 2], ClassLabel::Correct),
            item(&[0], &[2], &[1], ClassLabel::Incorrect),
            item(&[0], &[4, 4], &[0, 1, 2, 3], ClassLabel::Incomplete),
        ];
        let (a, _) = suffix_ce_loss(&m, &batch).unwrap();
        let mut rev = batch.clone();
        rev.reverse();
        let (b, _) = suffix_ce_loss(&m, &rev).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let env_states = 5;
        let fm = FeatureMap::state_step(env_states, 8);
        let dataset: Vec<TraceItem> = (0..200)
            .map(|i| {
                item(
                    &[0],
                    &[(i % 4 + 1) as u32],
                    &[(i % 3) as u32, ((i + 1) % 5) as u32],
                    ClassLabel::from_index((i % 3) as u8).unwrap(),
                )
            })
            .collect();
        let cfg = TrainConfig { val_split: 20, ..TrainConfig::plain_sgd(0.5, 32, 4, 9) };
        let a = train(ValueClassifier::zeros(fm.clone()), &dataset, &cfg).unwrap();
        let b = train(ValueClassifier::zeros(fm), &dataset, &cfg).unwrap();
        assert_eq!(a.model.weights, b.model.weights);
        assert_eq!(a.model.bias, b.model.bias);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn degenerate_all_correct_labels_push_value_to_one() {
        let fm = FeatureMap::state_step(3, 6);
        let dataset: Vec<TraceItem> =
            (0..300).map(|i| item(&[0], &[1], &[(i % 3) as u32, 2], ClassLabel::Correct)).collect();
        let cfg = TrainConfig::plain_sgd(2.0, 32, 40, 1);
        let out = train(ValueClassifier::zeros(fm), &dataset, &cfg).unwrap();
        // Every visited prefix should predict "correct" with high confidence.
        let v = out.model.value(&toks(&[0]), &toks(&[1, 2])).unwrap();
        assert!(v > 0.95, "value {v}");
    }

    #[test]
    fn divergence_is_reported_with_the_learning_rate() {
        let fm = FeatureMap::state_step(3, 6);
        let dataset: Vec<TraceItem> = (0..64)
            .map(|i| {
                item(&[0], &[1], &[(i % 3) as u32], ClassLabel::from_index((i % 2) as u8).unwrap())
            })
            .collect();
        let cfg = TrainConfig::plain_sgd(1e6, 8, 3, 0);
        match train(ValueClassifier::zeros(fm), &dataset, &cfg) {
            Err(ValueError::Divergence { lr, .. }) => assert_eq!(lr, 1e6),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn checkpoint_json_round_trip() {
        let fm = FeatureMap::state_step(2, 4);
        let m = ValueClassifier::zeros(fm.clone());
        let ckpt = Checkpoint {
            feature_map: fm,
            theta: m.weights.clone(),
            bias: m.bias.clone(),
            k: NUM_CLASSES,
            config: TrainConfig::default(),
            epoch: 3,
            val_loss: Some(0.5),
        };
        let back = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.model().weights, m.weights);
    }
}
