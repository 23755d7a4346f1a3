//! The generator contract: sample one block of tokens given a prefix.
//!
//! Implementations must be deterministic in the provided seed where the
//! backend permits (the synthetic chain is bit-reproducible; HTTP endpoints
//! are best-effort). Seeds for every sampling site are derived from the run
//! seed and the site coordinates, so concurrent execution cannot change
//! results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Sequence;

/// Decoding parameters. Defaults follow the reference decoding setup:
/// temperature 0.6, top-p 0.95, 16384-token generation cap, 4096-token
/// blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_len: usize,
    pub block_size: usize,
    #[serde(default)]
    pub stop_markers: Vec<String>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            temperature: 0.6,
            top_p: 0.95,
            max_len: 16384,
            block_size: 4096,
            stop_markers: Vec::new(),
        }
    }
}

impl GeneratorConfig {
    /// Validate field ranges; returns one message per violated field.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.temperature < 0.0 {
            errs.push(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            errs.push(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.max_len == 0 {
            errs.push("max_len must be positive".into());
        }
        if self.block_size == 0 {
            errs.push("block_size must be positive".into());
        }
        if self.block_size > self.max_len {
            errs.push(format!(
                "block_size ({}) must not exceed max_len ({})",
                self.block_size, self.max_len
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Why a block ended the response. Absent (`None` on the `BlockResult`)
/// when the block filled without finishing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    /// Reached a terminal of the environment or the endpoint's stop flag.
    Terminal,
    /// Hit the max generation length; the response is incomplete.
    LengthCap,
    /// Matched a configured stop marker.
    StopMarker,
}

/// One sampled block extending a prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub tokens: Sequence,
    pub finished: bool,
    pub finish_reason: Option<FinishReason>,
    /// Tokens in this block. Equals `tokens.token_len()` for token backends;
    /// endpoint-reported for HTTP when available.
    pub token_len: usize,
    /// True when `token_len` is a chars/4 estimate rather than a reported count.
    #[serde(default)]
    pub token_len_estimated: bool,
}

impl BlockResult {
    /// A response that ends with this block reached a terminal (as opposed
    /// to being cut off by the length cap, which labels as incomplete).
    pub fn reached_terminal(&self) -> bool {
        matches!(self.finish_reason, Some(FinishReason::Terminal) | Some(FinishReason::StopMarker))
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator state: {0}")]
    InvalidState(String),
    #[error("transport error (status {status:?}, retryable: {retryable}): {message}")]
    Transport { status: Option<u16>, retryable: bool, message: String },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
}

/// A sequence generator. Implementations are immutable after construction
/// and safe to share across concurrent search rounds.
pub trait Generator: Sync {
    /// Identifier used in trace records and transcripts.
    fn name(&self) -> &str;

    /// Sample up to `config.block_size` tokens extending `prefix`. Stops
    /// early at a terminal, a stop marker, or `config.max_len` total tokens.
    fn sample_block(
        &self,
        prefix: &Sequence,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<BlockResult, GeneratorError>;

    /// Extract the canonical raw answer of a finished sequence, if any.
    fn extract_answer(&self, sequence: &Sequence) -> Option<String>;
}

/// Stable seed derivation for sampling sites. Folds the parts through a
/// SplitMix64-style mix; identical parts always yield identical seeds on
/// every platform.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        state ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(state << 6);
        state = splitmix64(state);
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Salts separating the seed streams of unrelated sampling roles.
pub mod seed_role {
    pub const ROLL_IN: u64 = 1;
    pub const CUT: u64 = 2;
    pub const ROLL_OUT: u64 = 3;
    pub const SEARCH_BLOCK: u64 = 4;
    pub const SELECTION: u64 = 5;
    pub const TIE_BREAK: u64 = 6;
}
