//! Domain types shared by every module: tokens, sequences, problems,
//! responses, and class labels.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A vocabulary index. For the synthetic backend a token id *is* a state id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

impl Token {
    pub fn id(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A generated sequence: token ids for local backends, raw text for HTTP
/// backends. Token counts for text are whatever the endpoint reported (or a
/// chars/4 estimate), tracked by the caller.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sequence {
    Tokens(Vec<Token>),
    Text(String),
}

impl Sequence {
    pub fn empty_like(&self) -> Sequence {
        match self {
            Sequence::Tokens(_) => Sequence::Tokens(Vec::new()),
            Sequence::Text(_) => Sequence::Text(String::new()),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Sequence::Tokens(t) => t.is_empty(),
            Sequence::Text(t) => t.is_empty(),
        }
    }

    /// Token count for token sequences; for text this is a chars/4 estimate
    /// (HTTP callers should prefer endpoint-reported usage counts).
    pub fn token_len(&self) -> usize {
        match self {
            Sequence::Tokens(t) => t.len(),
            Sequence::Text(t) => estimate_text_tokens(t),
        }
    }

    pub fn last_token(&self) -> Option<Token> {
        match self {
            Sequence::Tokens(t) => t.last().copied(),
            Sequence::Text(_) => None,
        }
    }

    pub fn as_tokens(&self) -> Option<&[Token]> {
        match self {
            Sequence::Tokens(t) => Some(t),
            Sequence::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Sequence::Text(t) => Some(t),
            Sequence::Tokens(_) => None,
        }
    }

    /// Concatenation. Both sides must be the same variant; mixing token and
    /// text sequences is a backend wiring bug.
    pub fn concat(&self, other: &Sequence) -> Sequence {
        match (self, other) {
            (Sequence::Tokens(a), Sequence::Tokens(b)) => {
                let mut out = a.clone();
                out.extend_from_slice(b);
                Sequence::Tokens(out)
            }
            (Sequence::Text(a), Sequence::Text(b)) => {
                let mut out = a.clone();
                out.push_str(b);
                Sequence::Text(out)
            }
            _ => panic!("cannot concatenate token and text sequences"),
        }
    }

    pub fn extend(&mut self, other: &Sequence) {
        match (self, other) {
            (Sequence::Tokens(a), Sequence::Tokens(b)) => a.extend_from_slice(b),
            (Sequence::Text(a), Sequence::Text(b)) => a.push_str(b),
            _ => panic!("cannot concatenate token and text sequences"),
        }
    }

    /// First `n` tokens (token sequences only).
    pub fn token_prefix(&self, n: usize) -> Sequence {
        match self {
            Sequence::Tokens(t) => Sequence::Tokens(t[..n.min(t.len())].to_vec()),
            Sequence::Text(_) => panic!("token_prefix on a text sequence"),
        }
    }
}

/// The chars/4 heuristic used when an endpoint does not report token usage.
pub fn estimate_text_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

impl From<Vec<u32>> for Sequence {
    fn from(ids: Vec<u32>) -> Self {
        Sequence::Tokens(ids.into_iter().map(Token).collect())
    }
}

/// One problem of a corpus: the prompt, the canonical ground-truth answer,
/// and free-form provenance metadata (`solution`, `question_type`, `source`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    pub prompt: Sequence,
    pub ground_truth: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ProblemRecord {
    pub fn solution(&self) -> Option<&str> {
        self.metadata.get("solution").map(String::as_str)
    }

    pub fn question_type(&self) -> Option<&str> {
        self.metadata.get("question_type").map(String::as_str)
    }
}

/// Outcome class of a full response. Label `Correct` is the only class with
/// reward 1; `Incorrect` and `Incomplete` both carry reward 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Incorrect = 0,
    Correct = 1,
    Incomplete = 2,
}

impl ClassLabel {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn reward(self) -> f64 {
        if self == ClassLabel::Correct {
            1.0
        } else {
            0.0
        }
    }

    pub fn from_index(idx: u8) -> Option<ClassLabel> {
        match idx {
            0 => Some(ClassLabel::Incorrect),
            1 => Some(ClassLabel::Correct),
            2 => Some(ClassLabel::Incomplete),
            _ => None,
        }
    }
}

// On the wire labels are plain integers 0/1/2.
impl Serialize for ClassLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(deserializer)?;
        ClassLabel::from_index(v)
            .ok_or_else(|| serde::de::Error::custom(format!("class label out of range: {v}")))
    }
}

/// A complete or truncated generation for one problem.
///
/// `finished == false` means the generation hit the length cap without
/// reaching a terminal; such responses never carry an answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub problem_id: String,
    pub tokens: Sequence,
    pub finished: bool,
    pub answer: Option<String>,
    pub label: Option<ClassLabel>,
}

impl Response {
    pub fn new(problem_id: impl Into<String>, tokens: Sequence, finished: bool) -> Self {
        Response { problem_id: problem_id.into(), tokens, finished, answer: None, label: None }
    }

    pub fn with_answer(mut self, answer: Option<String>) -> Self {
        debug_assert!(answer.is_none() || self.finished, "answer set on unfinished response");
        self.answer = answer;
        self
    }
}

/// A response paired with a scalar score. Scores that reach weighted majority
/// voting must already live in [0, 1] (see `bt_score_for_wmv`); best-of-n
/// tolerates any monotone rescaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub response: Response,
    pub score: f64,
}

impl ScoredResponse {
    pub fn new(response: Response, score: f64) -> Self {
        ScoredResponse { response, score }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_serializes_untagged() {
        let toks = Sequence::Tokens(vec![Token(1), Token(2)]);
        assert_eq!(serde_json::to_string(&toks).unwrap(), "[1,2]");
        let text = Sequence::Text("hello".into());
        assert_eq!(serde_json::to_string(&text).unwrap(), "\"hello\"");
        let back: Sequence = serde_json::from_str("[3,4]").unwrap();
        assert_eq!(back, Sequence::Tokens(vec![Token(3), Token(4)]));
    }

    #[test]
    fn class_label_wire_format_is_integer() {
        assert_eq!(serde_json::to_string(&ClassLabel::Incomplete).unwrap(), "2");
        let l: ClassLabel = serde_json::from_str("1").unwrap();
        assert_eq!(l, ClassLabel::Correct);
        assert!(serde_json::from_str::<ClassLabel>("3").is_err());
    }

    #[test]
    fn reward_follows_label_convention() {
        assert_eq!(ClassLabel::Correct.reward(), 1.0);
        assert_eq!(ClassLabel::Incorrect.reward(), 0.0);
        assert_eq!(ClassLabel::Incomplete.reward(), 0.0);
    }

    #[test]
    fn text_token_estimate_rounds_up() {
        assert_eq!(estimate_text_tokens(""), 0);
        assert_eq!(estimate_text_tokens("abc"), 1);
        assert_eq!(estimate_text_tokens("abcd"), 1);
        assert_eq!(estimate_text_tokens("abcde"), 2);
    }
}
