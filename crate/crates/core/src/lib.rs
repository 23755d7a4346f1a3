//! Budget-constrained, value-guided search for sequence generators.
//!
//! The crate provides, end to end:
//!
//! - response-level aggregation (best-of-n, majority vote, weighted
//!   majority vote) over canonical answer equivalence ([`vote`], [`answer`]);
//! - a synthetic Markov-chain environment with an exact DP value oracle,
//!   plus an OpenAI-compatible HTTP backend ([`synthetic`], [`http`]);
//! - the 3-class value model with suffix-averaged cross-entropy training
//!   and a Bradley-Terry alternative ([`value`], [`bt`]);
//! - the roll-in/roll-out data pipeline with corpus filtering and JSONL
//!   persistence ([`pipeline`]);
//! - block-wise search: beam search, BFS, DVTS, and random/hybrid controls
//!   ([`search`]);
//! - FLOPs accounting, bootstrap statistics, Pass@N, and efficiency curves
//!   ([`metrics`]).

pub mod answer;
pub mod bt;
pub mod generator;
pub mod http;
pub mod metrics;
pub mod pipeline;
pub mod scorer;
pub mod search;
pub mod synthetic;
pub mod types;
pub mod value;
pub mod vote;

pub use answer::{assign_label, canonicalize_answer, extract_boxed, EquivalenceKey};
pub use generator::{derive_seed, BlockResult, FinishReason, Generator, GeneratorConfig};
pub use scorer::Scorer;
pub use types::{ClassLabel, ProblemRecord, Response, ScoredResponse, Sequence, Token};
