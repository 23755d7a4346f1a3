//! The scorer contract: map a (prompt, partial response) pair to a value.
//!
//! Search queries a scorer at every block boundary and once per final
//! response. Scores used as weighted-majority-vote weights must lie in
//! [0, 1].

use thiserror::Error;

use crate::generator::derive_seed;
use crate::types::{Sequence, Token};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid scorer input: {0}")]
    InvalidInput(String),
    #[error("transport error (status {status:?}, retryable: {retryable}): {message}")]
    Transport { status: Option<u16>, retryable: bool, message: String },
    #[error("scoring request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
}

pub trait Scorer: Sync {
    fn name(&self) -> &str;

    /// Value of the partial response `response` under the scorer's policy,
    /// conditioned on `prompt`.
    fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ScorerError>;
}

/// Wraps a scorer with seeded Gaussian noise, clamped to [0, 1].
///
/// The noise is a deterministic function of (seed, query), so searches stay
/// reproducible. Used by ablation sweeps that need an imperfect value
/// signal.
pub struct PerturbedScorer<S> {
    inner: S,
    sigma: f64,
    seed: u64,
    name: String,
}

impl<S: Scorer> PerturbedScorer<S> {
    pub fn new(inner: S, sigma: f64, seed: u64) -> Self {
        let name = format!("{}+noise", inner.name());
        PerturbedScorer { inner, sigma, seed, name }
    }

    fn query_hash(&self, prompt: &Sequence, response: &Sequence) -> u64 {
        let mut parts: Vec<u64> = vec![self.seed];
        for seq in [prompt, response] {
            match seq {
                Sequence::Tokens(toks) => {
                    parts.push(toks.len() as u64);
                    parts.extend(toks.iter().map(|t: &Token| u64::from(t.0)));
                }
                Sequence::Text(text) => {
                    parts.push(text.len() as u64);
                    parts.extend(text.as_bytes().iter().map(|&b| u64::from(b)));
                }
            }
        }
        derive_seed(&parts)
    }
}

impl<S: Scorer> Scorer for PerturbedScorer<S> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ScorerError> {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let base = self.inner.score(prompt, response)?;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(self.query_hash(prompt, response));
        // Box-Muller keeps the dependency surface small.
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        let gauss = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        Ok((base + self.sigma * gauss).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);
    impl Scorer for Constant {
        fn name(&self) -> &str {
            "const"
        }
        fn score(&self, _: &Sequence, _: &Sequence) -> Result<f64, ScorerError> {
            Ok(self.0)
        }
    }

    #[test]
    fn perturbed_scores_are_deterministic_per_query_and_clamped() {
        let s = PerturbedScorer::new(Constant(0.5), 0.3, 7);
        let p = Sequence::Tokens(vec![Token(0)]);
        let r1 = Sequence::Tokens(vec![Token(1)]);
        let r2 = Sequence::Tokens(vec![Token(2)]);
        let a = s.score(&p, &r1).unwrap();
        assert_eq!(a, s.score(&p, &r1).unwrap());
        assert_ne!(a, s.score(&p, &r2).unwrap());
        for i in 0..200u32 {
            let r = Sequence::Tokens(vec![Token(i)]);
            let v = s.score(&p, &r).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
