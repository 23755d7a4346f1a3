//! Inference FLOPs accounting, bootstrap statistics, Pass@N, and
//! efficiency-curve data.
//!
//! FLOPs follow the non-embedding approximation: a transformer with
//! n_layer layers, d-dimensional residual stream, and d_ff feed-forward
//! width has N = 2 * n_layer * d * (2d + d_ff) parameters, and one forward
//! pass over a context of n_ctx tokens costs C(n_ctx) = 2N + 2 * n_layer *
//! n_ctx * d. In the regime d > n_ctx / 12 the context term is dropped and
//! each generated token costs 2N.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::Totals;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no data")]
    NoData,
    #[error("config error: {0}")]
    Config(String),
}

/// Transformer shape for FLOPs estimates. Either the layer geometry or the
/// parameter count directly; `activated_params` covers the MoE case.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub n_layer: Option<u64>,
    pub d_model: Option<u64>,
    pub d_ff: Option<u64>,
    pub n_params: Option<f64>,
    pub activated_params: Option<f64>,
}

impl ModelShape {
    pub fn from_params(n_params: f64) -> Self {
        ModelShape { n_params: Some(n_params), ..Default::default() }
    }

    pub fn from_activated(activated: f64) -> Self {
        ModelShape { activated_params: Some(activated), ..Default::default() }
    }

    pub fn from_layers(n_layer: u64, d_model: u64, d_ff: u64) -> Self {
        ModelShape { n_layer: Some(n_layer), d_model: Some(d_model), d_ff: Some(d_ff), ..Default::default() }
    }

    /// Effective non-embedding parameter count: activated params when given
    /// (MoE), else the direct count, else 2 * n_layer * d * (2d + d_ff).
    pub fn params(&self) -> Result<f64, MetricsError> {
        if let Some(a) = self.activated_params {
            return Ok(a);
        }
        if let Some(n) = self.n_params {
            return Ok(n);
        }
        match (self.n_layer, self.d_model, self.d_ff) {
            (Some(l), Some(d), Some(ff)) => Ok(2.0 * l as f64 * d as f64 * (2.0 * d as f64 + ff as f64)),
            _ => Err(MetricsError::Config(
                "model shape needs n_params, activated_params, or (n_layer, d_model, d_ff)".into(),
            )),
        }
    }
}

/// FLOPs of a single forward pass at context length `n_ctx`: the exact
/// formula 2N + 2 * n_layer * n_ctx * d, or just 2N in approximate mode
/// (context term dropped).
pub fn forward_flops(
    shape: &ModelShape,
    n_ctx: u64,
    approximate: bool,
) -> Result<f64, MetricsError> {
    let n = shape.params()?;
    if approximate {
        return Ok(2.0 * n);
    }
    match (shape.n_layer, shape.d_model) {
        (Some(l), Some(d)) => Ok(2.0 * n + 2.0 * l as f64 * n_ctx as f64 * d as f64),
        _ => Err(MetricsError::Config(
            "exact mode needs n_layer and d_model".into(),
        )),
    }
}

/// FLOPs to generate `n_tokens` tokens: 2N per token in approximate mode,
/// or the sum of per-position forward passes (position t sees a context of
/// t tokens) in exact mode.
pub fn generation_flops(
    shape: &ModelShape,
    n_tokens: u64,
    approximate: bool,
) -> Result<f64, MetricsError> {
    let n = shape.params()?;
    if approximate {
        return Ok(2.0 * n * n_tokens as f64);
    }
    match (shape.n_layer, shape.d_model) {
        (Some(l), Some(d)) => {
            let t = n_tokens as f64;
            Ok(2.0 * n * t + 2.0 * l as f64 * d as f64 * (t * (t - 1.0) / 2.0))
        }
        _ => Err(MetricsError::Config("exact mode needs n_layer and d_model".into())),
    }
}

/// FLOPs of one run: generator cost per sampled token plus one scorer
/// forward pass per value call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub generator_flops: f64,
    pub scorer_flops: f64,
    /// scorer_flops / generator_flops (0 when nothing was generated).
    pub overhead_fraction: f64,
    pub per_generation: f64,
    pub budget: usize,
}

impl FlopsReport {
    pub fn total(&self) -> f64 {
        self.generator_flops + self.scorer_flops
    }
}

/// Account a transcript's totals: generator FLOPs = 2 * N_gen * tokens,
/// scorer FLOPs = 2 * N_scorer * value calls. Additive over transcript
/// concatenation.
pub fn run_flops(
    totals: &Totals,
    gen_shape: &ModelShape,
    scorer_shape: &ModelShape,
    budget: usize,
) -> Result<FlopsReport, MetricsError> {
    let generator_flops = 2.0 * gen_shape.params()? * totals.tokens_generated as f64;
    let scorer_flops = 2.0 * scorer_shape.params()? * totals.value_calls as f64;
    let overhead_fraction =
        if generator_flops > 0.0 { scorer_flops / generator_flops } else { 0.0 };
    let per_generation = if budget > 0 {
        (generator_flops + scorer_flops) / budget as f64
    } else {
        0.0
    };
    Ok(FlopsReport { generator_flops, scorer_flops, overhead_fraction, per_generation, budget })
}

/// The reference accounting table: full-length generations for the four
/// generator sizes, scorer cost at one call per block, and the budget-256
/// total with its overhead fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFlopsTable {
    pub generation_1_5b: f64,
    pub generation_7b: f64,
    pub generation_14b: f64,
    pub generation_37b_activated: f64,
    pub scorer_1_5b_per_generation: f64,
    pub scorer_7b_per_generation: f64,
    pub total_budget_256: f64,
    pub overhead_fraction_1_5b: f64,
}

/// Compute the reference table: 16384-token generations, 4096-token blocks
/// (4 value calls per generation), budget 256.
pub fn reference_flops_table() -> ReferenceFlopsTable {
    let ctx: u64 = 16384;
    let calls_per_gen: f64 = (ctx / 4096) as f64;
    let gen = |params: f64| {
        generation_flops(&ModelShape::from_params(params), ctx, true).expect("params given")
    };
    let scorer = |params: f64| 2.0 * params * calls_per_gen;
    let g15 = gen(1.5e9);
    let s15 = scorer(1.5e9);
    ReferenceFlopsTable {
        generation_1_5b: g15,
        generation_7b: gen(7e9),
        generation_14b: gen(14e9),
        generation_37b_activated: generation_flops(
            &ModelShape::from_activated(37e9),
            ctx,
            true,
        )
        .expect("params given"),
        scorer_1_5b_per_generation: s15,
        scorer_7b_per_generation: scorer(7e9),
        total_budget_256: (g15 + s15) * 256.0,
        overhead_fraction_1_5b: s15 / g15,
    }
}

// ---------------------------------------------------------------------------
// Bootstrap statistics
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_and_std(xs: &[f64]) -> MeanStd {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Bootstrap mean/std of per-problem accuracy: resample problems with
/// replacement `reps` times, recompute the mean of per-problem means, and
/// report the replicate mean and standard deviation. Deterministic given
/// the seed.
pub fn bootstrap_stat(
    outcomes: &[Vec<f64>],
    reps: usize,
    seed: u64,
) -> Result<MeanStd, MetricsError> {
    if outcomes.is_empty() || outcomes.iter().any(|o| o.is_empty()) {
        return Err(MetricsError::NoData);
    }
    assert!(reps >= 1);
    let per_problem: Vec<f64> =
        outcomes.iter().map(|o| o.iter().sum::<f64>() / o.len() as f64).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = per_problem.len();
    let stats: Vec<f64> = (0..reps)
        .map(|_| {
            let mut total = 0.0;
            for _ in 0..n {
                total += per_problem[rng.gen_range(0..n)];
            }
            total / n as f64
        })
        .collect();
    Ok(mean_and_std(&stats))
}

/// Bootstrap Pass@N: resample problems with replacement and, per sampled
/// problem, draw an N-subset of its samples without replacement; a problem
/// counts as solved when any drawn sample is correct.
pub fn pass_at_n(
    outcomes: &[Vec<bool>],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<MeanStd, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::NoData);
    }
    if let Some(bad) = outcomes.iter().find(|o| o.len() < n) {
        return Err(MetricsError::Config(format!(
            "pass@{n} needs at least {n} samples per problem, got {}",
            bad.len()
        )));
    }
    assert!(reps >= 1 && n >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let problems = outcomes.len();
    let stats: Vec<f64> = (0..reps)
        .map(|_| {
            let mut solved = 0usize;
            for _ in 0..problems {
                let p = &outcomes[rng.gen_range(0..problems)];
                // Partial Fisher-Yates over indices for an N-subset.
                let mut idx: Vec<usize> = (0..p.len()).collect();
                let mut hit = false;
                for i in 0..n {
                    let j = rng.gen_range(i..idx.len());
                    idx.swap(i, j);
                    if p[idx[i]] {
                        hit = true;
                        break;
                    }
                }
                if hit {
                    solved += 1;
                }
            }
            solved as f64 / problems as f64
        })
        .collect();
    Ok(mean_and_std(&stats))
}

/// Variance-free combinatorial Pass@N estimator:
/// mean over problems of 1 - C(s - c, N) / C(s, N).
pub fn pass_at_n_unbiased(outcomes: &[Vec<bool>], n: usize) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::NoData);
    }
    let mut total = 0.0;
    for p in outcomes {
        let s = p.len();
        if s < n {
            return Err(MetricsError::Config(format!(
                "pass@{n} needs at least {n} samples per problem, got {s}"
            )));
        }
        let c = p.iter().filter(|&&b| b).count();
        // prod_{j=0..n-1} (s - c - j) / (s - j), stable multiplicative form.
        let mut miss_all = 1.0;
        for j in 0..n {
            let num = (s - c) as f64 - j as f64;
            if num <= 0.0 {
                miss_all = 0.0;
                break;
            }
            miss_all *= num / (s - j) as f64;
        }
        total += 1.0 - miss_all;
    }
    Ok(total / outcomes.len() as f64)
}

// ---------------------------------------------------------------------------
// Efficiency curves
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub flops: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub method: String,
    pub accuracy: f64,
    pub baseline_flops: f64,
    /// Cheapest FLOPs at which the reference method reaches this accuracy.
    pub reference_flops: Option<f64>,
    /// reference_flops / baseline_flops; < 1 when the reference is cheaper.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    /// All points sorted by FLOPs.
    pub points: Vec<CurvePoint>,
    /// For each non-reference point, the FLOPs ratio of the reference
    /// method at the same accuracy level.
    pub ratios: Vec<RatioPoint>,
}

/// Order points by FLOPs and, for each accuracy level achieved by a
/// baseline method, compute the FLOPs ratio versus `reference_method`.
pub fn efficiency_curve(points: &[CurvePoint], reference_method: &str) -> EfficiencyCurve {
    let mut sorted: Vec<CurvePoint> = points.to_vec();
    sorted.sort_by(|a, b| a.flops.partial_cmp(&b.flops).unwrap());
    let reference: Vec<&CurvePoint> =
        sorted.iter().filter(|p| p.method == reference_method).collect();
    let mut ratios = Vec::new();
    for p in sorted.iter().filter(|p| p.method != reference_method) {
        let reference_flops = reference
            .iter()
            .filter(|r| r.accuracy >= p.accuracy)
            .map(|r| r.flops)
            .fold(f64::INFINITY, f64::min);
        let reference_flops =
            if reference_flops.is_finite() { Some(reference_flops) } else { None };
        ratios.push(RatioPoint {
            method: p.method.clone(),
            accuracy: p.accuracy,
            baseline_flops: p.flops,
            reference_flops,
            ratio: reference_flops.map(|rf| rf / p.flops),
        });
    }
    EfficiencyCurve { points: sorted, ratios }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(x: f64, target: f64, tol: f64) -> bool {
        (x / target - 1.0).abs() <= tol
    }

    #[test]
    fn reference_table_values() {
        let t = reference_flops_table();
        assert!(rel_close(t.generation_1_5b, 49.1e12, 5e-3));
        assert!(rel_close(t.generation_7b, 229e12, 5e-3));
        assert!(rel_close(t.generation_14b, 459e12, 5e-3));
        assert!(rel_close(t.generation_37b_activated, 1212e12, 5e-3));
        assert_eq!(t.scorer_1_5b_per_generation, 12e9);
        assert_eq!(t.scorer_7b_per_generation, 56e9);
        assert!(rel_close(t.total_budget_256, 12.6e15, 5e-3));
        assert!(rel_close(t.overhead_fraction_1_5b, 0.024e-2, 0.02));
    }

    #[test]
    fn forward_flops_modes() {
        // Approximate mode equals the exact mode's 2N term exactly.
        let shape = ModelShape {
            n_layer: Some(28),
            d_model: Some(1536),
            d_ff: Some(8960),
            ..Default::default()
        };
        let n = shape.params().unwrap();
        assert_eq!(forward_flops(&shape, 0, false).unwrap(), 2.0 * n);
        assert_eq!(forward_flops(&shape, 4096, true).unwrap(), 2.0 * n);
        assert!(forward_flops(&shape, 4096, false).unwrap() > 2.0 * n);
        // Exact mode without layer geometry is a config error.
        assert!(matches!(
            forward_flops(&ModelShape::from_params(1e9), 10, false),
            Err(MetricsError::Config(_))
        ));
    }

    #[test]
    fn run_flops_accounting_and_additivity() {
        let gen = ModelShape::from_params(1.5e9);
        let scorer = ModelShape::from_params(1.5e9);
        let a = Totals { blocks_sampled: 4, tokens_generated: 16384, value_calls: 4 };
        let b = Totals { blocks_sampled: 2, tokens_generated: 1000, value_calls: 2 };
        let ra = run_flops(&a, &gen, &scorer, 1).unwrap();
        assert_eq!(ra.generator_flops, 2.0 * 1.5e9 * 16384.0);
        assert_eq!(ra.scorer_flops, 12e9);
        assert!(rel_close(ra.overhead_fraction, 0.024e-2, 0.02));
        let rb = run_flops(&b, &gen, &scorer, 1).unwrap();
        let merged = Totals {
            blocks_sampled: 6,
            tokens_generated: 17384,
            value_calls: 6,
        };
        let rm = run_flops(&merged, &gen, &scorer, 2).unwrap();
        assert_eq!(rm.generator_flops, ra.generator_flops + rb.generator_flops);
        assert_eq!(rm.scorer_flops, ra.scorer_flops + rb.scorer_flops);
        // Empty transcript: all zeros.
        let zero = run_flops(&Totals::default(), &gen, &scorer, 0).unwrap();
        assert_eq!(zero.total(), 0.0);
        assert_eq!(zero.overhead_fraction, 0.0);
    }

    #[test]
    fn layer_geometry_parameter_count() {
        // N = 2 * n_layer * d * (2d + d_ff)
        let shape = ModelShape::from_layers(28, 1536, 8960);
        let n = shape.params().unwrap();
        assert_eq!(n, 2.0 * 28.0 * 1536.0 * (2.0 * 1536.0 + 8960.0));
    }

    #[test]
    fn bootstrap_degenerate_all_ones() {
        let outcomes: Vec<Vec<f64>> = (0..30).map(|_| vec![1.0]).collect();
        let s = bootstrap_stat(&outcomes, 100, 0).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(bootstrap_stat(&[], 100, 0), Err(MetricsError::NoData));
    }

    #[test]
    fn pass_at_one_reduces_to_accuracy() {
        let outcomes: Vec<Vec<bool>> =
            (0..40).map(|i| vec![i % 4 == 0, i % 4 == 0, i % 4 == 0]).collect();
        // Identical samples per problem make the subset draw irrelevant.
        let s = pass_at_n(&outcomes, 1, 500, 3).unwrap();
        assert!((s.mean - 0.25).abs() < 0.03);
        let exact = pass_at_n_unbiased(&outcomes, 1).unwrap();
        assert!((exact - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fully_correct_problem_is_always_solved() {
        let outcomes = vec![vec![true; 8], vec![false; 8]];
        for n in [1, 2, 8] {
            assert_eq!(pass_at_n_unbiased(&outcomes, n).unwrap(), 0.5);
        }
        assert!(matches!(pass_at_n(&outcomes, 9, 10, 0), Err(MetricsError::Config(_))));
    }

    #[test]
    fn pass_at_n_is_monotone_in_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let outcomes: Vec<Vec<bool>> =
            (0..50).map(|_| (0..16).map(|_| rng.gen::<f64>() < 0.3).collect()).collect();
        let mut prev = 0.0;
        for n in 1..=16 {
            let v = pass_at_n_unbiased(&outcomes, n).unwrap();
            assert!(v >= prev - 1e-12, "pass@{n} = {v} < pass@{} = {prev}", n - 1);
            prev = v;
        }
    }

    #[test]
    fn efficiency_ratio_is_reference_over_baseline() {
        let points = vec![
            CurvePoint { method: "mv".into(), flops: 100.0, accuracy: 0.5 },
            CurvePoint { method: "vgs".into(), flops: 50.0, accuracy: 0.5 },
            CurvePoint { method: "vgs".into(), flops: 80.0, accuracy: 0.7 },
        ];
        let curve = efficiency_curve(&points, "vgs");
        assert_eq!(curve.ratios.len(), 1);
        assert_eq!(curve.ratios[0].ratio, Some(0.5));
        // Single point: curve of length 1, no ratios.
        let single = efficiency_curve(
            &[CurvePoint { method: "vgs".into(), flops: 1.0, accuracy: 0.1 }],
            "vgs",
        );
        assert_eq!(single.points.len(), 1);
        assert!(single.ratios.is_empty());
    }
}
