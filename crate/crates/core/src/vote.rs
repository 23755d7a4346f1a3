//! Response-level aggregation: best-of-n and (weighted) majority voting.
//!
//! Majority votes partition responses by answer equivalence. Unfinished or
//! answerless responses cannot vote for an answer, so each forms its own
//! singleton partition carrying its weight. Partition ties are broken by a
//! seeded uniform draw; best-of-n ties break to the lowest index.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::answer::{canonicalize_answer, EquivalenceKey};
use crate::types::{Response, ScoredResponse};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VoteError {
    #[error("no candidate responses to aggregate")]
    NoCandidates,
}

/// One equivalence class of the vote. `key` is None for singleton partitions
/// of answerless responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub key: Option<EquivalenceKey>,
    pub members: Vec<usize>,
    pub weight: f64,
}

fn answer_key(response: &Response) -> Option<EquivalenceKey> {
    if !response.finished {
        return None;
    }
    response.answer.as_deref().and_then(|a| canonicalize_answer(a).ok())
}

/// Group responses by answer equivalence, in order of first appearance.
/// Partition weights sum to the total input weight (conservation).
pub fn partition_responses(scored: &[ScoredResponse]) -> Vec<Partition> {
    let mut partitions: Vec<Partition> = Vec::new();
    for (idx, sr) in scored.iter().enumerate() {
        match answer_key(&sr.response) {
            Some(key) => {
                if let Some(p) =
                    partitions.iter_mut().find(|p| p.key.as_ref() == Some(&key))
                {
                    p.members.push(idx);
                    p.weight += sr.score;
                } else {
                    partitions.push(Partition {
                        key: Some(key),
                        members: vec![idx],
                        weight: sr.score,
                    });
                }
            }
            None => partitions.push(Partition { key: None, members: vec![idx], weight: sr.score }),
        }
    }
    partitions
}

/// Index of the response with the maximal score; ties break to the lowest
/// index. Invariant under any strictly increasing transform of all scores.
pub fn best_of_n(scored: &[ScoredResponse]) -> Result<usize, VoteError> {
    if scored.is_empty() {
        return Err(VoteError::NoCandidates);
    }
    let mut best = 0;
    for (i, sr) in scored.iter().enumerate().skip(1) {
        if sr.score > scored[best].score {
            best = i;
        }
    }
    Ok(best)
}

fn vote(scored: &[ScoredResponse], tie_seed: u64) -> Result<usize, VoteError> {
    if scored.is_empty() {
        return Err(VoteError::NoCandidates);
    }
    debug_assert!(
        scored.iter().all(|s| (0.0..=1.0).contains(&s.score)),
        "majority-vote weights must lie in [0, 1]"
    );
    let partitions = partition_responses(scored);
    let max_weight = partitions.iter().map(|p| p.weight).fold(f64::NEG_INFINITY, f64::max);
    // Ties are exact f64 equality: unit-weight counts are exact, and real
    // score sums that collide bitwise are genuinely indistinguishable.
    let tied: Vec<usize> =
        (0..partitions.len()).filter(|&i| partitions[i].weight == max_weight).collect();
    let winner = if tied.len() == 1 {
        tied[0]
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(tie_seed);
        tied[rng.gen_range(0..tied.len())]
    };
    // Highest-score member of the winning partition, lowest index on ties.
    let members = &partitions[winner].members;
    let mut best = members[0];
    for &m in &members[1..] {
        if scored[m].score > scored[best].score {
            best = m;
        }
    }
    Ok(best)
}

/// Weighted majority vote: sums weights per answer partition and returns the
/// index of the highest-score member of the heaviest partition.
pub fn weighted_majority_vote(
    scored: &[ScoredResponse],
    tie_seed: u64,
) -> Result<usize, VoteError> {
    vote(scored, tie_seed)
}

/// Majority vote: weighted majority vote with all weights equal to 1.
pub fn majority_vote(responses: &[Response], tie_seed: u64) -> Result<usize, VoteError> {
    let scored: Vec<ScoredResponse> =
        responses.iter().map(|r| ScoredResponse::new(r.clone(), 1.0)).collect();
    vote(&scored, tie_seed)
}
