//! Bradley-Terry alternative to the classifier: a scalar-head model trained
//! on (chosen, rejected) response pairs.
//!
//! Raw scores are unbounded; weighted majority voting needs them mapped
//! through the logistic function first (`bt_score_for_wmv`). Best-of-n is
//! unaffected by that monotone map.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::scorer::{Scorer, ScorerError};
use crate::types::{ClassLabel, Sequence};
use crate::value::{apply_step, lr_at, AdamState, FeatureMap, TrainConfig, ValueError};

/// One preference pair: `chosen` has reward 1, `rejected` has reward 0.
/// Labels are verified at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BtPair {
    pub prompt: Sequence,
    pub chosen: Sequence,
    pub rejected: Sequence,
}

/// Linear scalar-head model over the shared feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtModel {
    pub feature_map: FeatureMap,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BtModel {
    pub fn zeros(feature_map: FeatureMap) -> Self {
        let n = feature_map.num_features();
        BtModel { feature_map, weights: vec![0.0; n], bias: 0.0 }
    }

    /// Raw (unbounded) score of a full response.
    pub fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ValueError> {
        let features = self.feature_map.featurize(prompt, response)?;
        let mut s = self.bias;
        for &(idx, v) in &features {
            s += v * self.weights[idx];
        }
        Ok(s)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Map a raw Bradley-Terry score into (0, 1) for use as a weighted-majority
/// weight. Monotone, so best-of-n selections are unchanged.
pub fn bt_score_for_wmv(raw_bt: f64) -> f64 {
    sigmoid(raw_bt)
}

/// softplus(x) = ln(1 + e^x), stable in both tails.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Clone, Debug)]
pub struct BtGradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Mean over pairs of -ln sigmoid(f(chosen) - f(rejected)), with analytic
/// gradient. The stable softplus form never evaluates log(0).
pub fn bt_loss(model: &BtModel, batch: &[BtPair]) -> Result<(f64, BtGradient), ValueError> {
    if batch.is_empty() {
        return Err(ValueError::EmptyBatch);
    }
    let mut grad = BtGradient { weights: vec![0.0; model.weights.len()], bias: 0.0 };
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for pair in batch {
        let fc = model.feature_map.featurize(&pair.prompt, &pair.chosen)?;
        let fr = model.feature_map.featurize(&pair.prompt, &pair.rejected)?;
        let sc: f64 = model.bias + fc.iter().map(|&(i, v)| v * model.weights[i]).sum::<f64>();
        let sr: f64 = model.bias + fr.iter().map(|&(i, v)| v * model.weights[i]).sum::<f64>();
        let d = sc - sr;
        total += softplus(-d);
        // d/dd of softplus(-d) = -sigmoid(-d)
        let gd = -sigmoid(-d) * scale;
        for &(i, v) in &fc {
            grad.weights[i] += gd * v;
        }
        for &(i, v) in &fr {
            grad.weights[i] -= gd * v;
        }
        // Bias cancels in the difference; kept for shape completeness.
    }
    Ok((total * scale, grad))
}

/// Build up to `max_pairs` (chosen, rejected) pairs for one problem from its
/// labeled responses: all cross pairs are enumerated in deterministic order,
/// shuffled with the seed, and truncated. Problems lacking either class
/// yield zero pairs.
pub fn build_bt_pairs(
    groups: &[(Sequence, Vec<(Sequence, ClassLabel)>)],
    max_pairs_per_problem: usize,
    seed: u64,
) -> Vec<BtPair> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (prompt, responses) in groups {
        let chosen: Vec<&Sequence> = responses
            .iter()
            .filter(|(_, l)| *l == ClassLabel::Correct)
            .map(|(s, _)| s)
            .collect();
        let rejected: Vec<&Sequence> = responses
            .iter()
            .filter(|(_, l)| *l != ClassLabel::Correct)
            .map(|(s, _)| s)
            .collect();
        let mut cross: Vec<(usize, usize)> = (0..chosen.len())
            .flat_map(|c| (0..rejected.len()).map(move |r| (c, r)))
            .collect();
        cross.shuffle(&mut rng);
        for &(c, r) in cross.iter().take(max_pairs_per_problem) {
            out.push(BtPair {
                prompt: prompt.clone(),
                chosen: chosen[c].clone(),
                rejected: rejected[r].clone(),
            });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct BtTrainOutput {
    pub model: BtModel,
    pub curve: Vec<(usize, f64)>,
}

/// Deterministic mini-batch training of the Bradley-Terry model. Same
/// optimizer/schedule machinery as the classifier trainer.
pub fn train_bt(
    model: BtModel,
    pairs: &[BtPair],
    config: &TrainConfig,
) -> Result<BtTrainOutput, ValueError> {
    if pairs.is_empty() {
        return Err(ValueError::EmptyDataset);
    }
    let mut model = model;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut items: Vec<BtPair> = pairs.to_vec();
    let (initial_loss, _) = bt_loss(&model, &items)?;
    let batches_per_epoch = items.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let mut adam: Option<AdamState> = None;
    let mut step = 0usize;
    let mut curve = Vec::new();
    for epoch in 0..config.epochs {
        items.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in items.chunks(config.batch_size) {
            let (loss, grad) = bt_loss(&model, chunk)?;
            epoch_loss += loss * chunk.len() as f64;
            let lr = lr_at(config, step, total_steps);
            step += 1;
            let mut flat_params = model.weights.clone();
            flat_params.push(model.bias);
            let mut flat_grad = grad.weights;
            flat_grad.push(grad.bias);
            apply_step(&mut flat_params, &mut flat_grad, lr, &config.optimizer, config.grad_clip, &mut adam);
            model.bias = flat_params.pop().unwrap();
            model.weights = flat_params;
        }
        let mean = epoch_loss / items.len() as f64;
        if mean > 10.0 * initial_loss {
            return Err(ValueError::Divergence { lr: config.lr, loss: mean, initial: initial_loss });
        }
        curve.push((epoch, mean));
    }
    Ok(BtTrainOutput { model, curve })
}

/// Scorer view of a trained Bradley-Terry model with sigmoid-mapped output,
/// suitable as a weighted-majority weight.
pub struct BtScorer {
    pub model: BtModel,
    name: String,
}

impl BtScorer {
    pub fn new(model: BtModel) -> Self {
        BtScorer { model, name: "bt-sigmoid".to_string() }
    }
}

impl Scorer for BtScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ScorerError> {
        self.model
            .score(prompt, response)
            .map(bt_score_for_wmv)
            .map_err(|e| ScorerError::InvalidInput(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Token;
    use crate::vote::best_of_n;
    use crate::types::{Response, ScoredResponse};

    fn toks(ids: &[u32]) -> Sequence {
        Sequence::Tokens(ids.iter().map(|&i| Token(i)).collect())
    }

    #[test]
    fn equal_scores_give_ln_two_loss() {
        let m = BtModel::zeros(FeatureMap::state_step(4, 4));
        let batch = vec![BtPair { prompt: toks(&[0]), chosen: toks(&[1]), rejected: toks(&[1]) }];
        let (loss, _) = bt_loss(&m, &batch).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn large_margin_drives_loss_to_zero() {
        let fm = FeatureMap::state_step(3, 2);
        let mut m = BtModel::zeros(fm);
        // chosen ends in state 1, rejected in state 2
        let c_idx = m.feature_map.feature_index(1, 2);
        let r_idx = m.feature_map.feature_index(2, 2);
        m.weights[c_idx] = 500.0;
        m.weights[r_idx] = -500.0;
        let batch = vec![BtPair { prompt: toks(&[0]), chosen: toks(&[1]), rejected: toks(&[2]) }];
        let (loss, _) = bt_loss(&m, &batch).unwrap();
        assert!(loss >= 0.0 && loss < 1e-12, "loss {loss}");
    }

    #[test]
    fn sigmoid_map_endpoints() {
        assert_eq!(bt_score_for_wmv(0.0), 0.5);
        assert!(bt_score_for_wmv(-1e9) < 1e-12);
        assert!(bt_score_for_wmv(1e9) > 1.0 - 1e-12);
        assert!(bt_score_for_wmv(f64::NEG_INFINITY) == 0.0);
        assert!(bt_score_for_wmv(f64::INFINITY) == 1.0);
    }

    #[test]
    fn bon_selection_unchanged_by_sigmoid_map() {
        let raws = [-3.0, 1.5, 0.2, 1.49];
        let mk = |scores: &[f64]| -> Vec<ScoredResponse> {
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    ScoredResponse::new(
                        Response::new(format!("p{i}"), toks(&[0]), true).with_answer(Some("x".into())),
                        s,
                    )
                })
                .collect()
        };
        let raw_pick = best_of_n(&mk(&raws)).unwrap();
        let mapped: Vec<f64> = raws.iter().map(|&r| bt_score_for_wmv(r)).collect();
        let mapped_pick = best_of_n(&mk(&mapped)).unwrap();
        assert_eq!(raw_pick, mapped_pick);
    }

    // Responses end in state 1 when correct and state 2 otherwise, so the
    // (last state, length) features separate the classes.
    fn group(
        n_correct: usize,
        n_wrong: usize,
    ) -> (Sequence, Vec<(Sequence, ClassLabel)>) {
        let mut responses = Vec::new();
        for i in 0..n_correct {
            responses.push((toks(&[i as u32 % 3, 1]), ClassLabel::Correct));
        }
        for i in 0..n_wrong {
            let label = if i % 2 == 0 { ClassLabel::Incorrect } else { ClassLabel::Incomplete };
            responses.push((toks(&[i as u32 % 3, 2]), label));
        }
        (toks(&[0]), responses)
    }

    #[test]
    fn pair_cap_semantics() {
        // 3 correct x 5 rejected = 15 possible pairs, capped at 4.
        let groups = vec![group(3, 5)];
        let pairs = build_bt_pairs(&groups, 4, 7);
        assert_eq!(pairs.len(), 4);
        // Scarce class: a single cross pair.
        let pairs = build_bt_pairs(&vec![group(1, 1)], 4, 7);
        assert_eq!(pairs.len(), 1);
        // No correct responses: zero pairs.
        let pairs = build_bt_pairs(&vec![group(0, 8)], 4, 7);
        assert!(pairs.is_empty());
        // Deterministic given the seed.
        assert_eq!(build_bt_pairs(&vec![group(3, 5)], 4, 9), build_bt_pairs(&vec![group(3, 5)], 4, 9));
    }

    #[test]
    fn abundant_classes_yield_cap_pairs_per_problem() {
        // 56 responses per problem with both classes well represented.
        let groups: Vec<_> = (0..50).map(|_| group(20, 36)).collect();
        let pairs = build_bt_pairs(&groups, 4, 3);
        assert_eq!(pairs.len(), 50 * 4);
    }

    #[test]
    fn bt_training_separates_good_from_bad_states() {
        let fm = FeatureMap::state_step(3, 3);
        let groups: Vec<_> = (0..40).map(|_| group(2, 2)).collect();
        let pairs = build_bt_pairs(&groups, 4, 0);
        let cfg = TrainConfig::plain_sgd(1.0, 16, 30, 0);
        let out = train_bt(BtModel::zeros(fm), &pairs, &cfg).unwrap();
        let good = out.model.score(&toks(&[0]), &toks(&[0, 1])).unwrap();
        let bad = out.model.score(&toks(&[0]), &toks(&[0, 2])).unwrap();
        assert!(good > bad, "good {good} <= bad {bad}");
    }
}
