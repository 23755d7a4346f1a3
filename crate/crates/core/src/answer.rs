//! Answer canonicalization, `\boxed{}` extraction, and response labeling.
//!
//! The canonicalizer handles integers, rationals `p/q`, and finite decimals
//! exactly; everything else falls back to a whitespace/case-normalized
//! string. That covers integer-answer competition style and the synthetic
//! environment; symbolic equivalence is out of scope.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ClassLabel, Response};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnswerError {
    #[error("empty answer string")]
    EmptyAnswer,
    #[error("unbalanced braces in \\boxed{{}} expression at byte {0}")]
    MalformedBox(usize),
}

/// Canonical representation of an answer under the equivalence relation.
///
/// Serialized form: `int:<decimal>`, `rat:<p>/<q>` (reduced, q > 0), or
/// `str:<normalized>`. Two answers are equivalent iff their keys are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EquivalenceKey(String);

impl EquivalenceKey {
    pub fn serialized(&self) -> &str {
        &self.0
    }

    /// The canonical content without the type prefix. Re-canonicalizing this
    /// string yields the same key (idempotence).
    pub fn display(&self) -> &str {
        self.0.splitn(2, ':').nth(1).unwrap_or(&self.0)
    }
}

impl fmt::Display for EquivalenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

fn reduced_key(mut num: i128, mut den: i128) -> EquivalenceKey {
    debug_assert!(den != 0);
    if den < 0 {
        num = -num;
        den = -den;
    }
    let g = gcd(num, den).max(1);
    num /= g;
    den /= g;
    if den == 1 {
        EquivalenceKey(format!("int:{num}"))
    } else {
        EquivalenceKey(format!("rat:{num}/{den}"))
    }
}

fn parse_integer(s: &str) -> Option<i128> {
    let s = s.strip_prefix('+').unwrap_or(s);
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let v: i128 = digits.parse().ok()?;
    Some(if neg { -v } else { v })
}

/// Finite decimal `d.ddd` as an exact rational, or None.
fn parse_decimal(s: &str) -> Option<(i128, i128)> {
    let (int_part, frac_part) = s.split_once('.')?;
    let sign = if int_part.starts_with('-') { -1i128 } else { 1i128 };
    let int_digits = int_part.trim_start_matches(['+', '-']);
    if !int_digits.bytes().all(|b| b.is_ascii_digit())
        || frac_part.is_empty()
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    if frac_part.len() > 30 {
        return None; // denominator would overflow i128; fall back to string
    }
    let int_val: i128 = if int_digits.is_empty() { 0 } else { int_digits.parse().ok()? };
    let frac_val: i128 = frac_part.parse().ok()?;
    let den = 10i128.checked_pow(frac_part.len() as u32)?;
    let num = int_val.checked_mul(den)?.checked_add(frac_val)?;
    Some((sign * num, den))
}

fn parse_rational(s: &str) -> Option<(i128, i128)> {
    let (num_s, den_s) = s.split_once('/')?;
    let num = parse_integer(num_s.trim())?;
    let den = parse_integer(den_s.trim())?;
    if den == 0 {
        return None;
    }
    Some((num, den))
}

fn normalize_string(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Canonicalize a raw answer string into its equivalence key.
///
/// Deterministic: trims whitespace, reduces integers/rationals/finite
/// decimals to exact lowest-terms form, and falls back to a
/// whitespace-collapsed lowercase string otherwise.
pub fn canonicalize_answer(raw: &str) -> Result<EquivalenceKey, AnswerError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(AnswerError::EmptyAnswer);
    }
    if let Some(v) = parse_integer(trimmed) {
        return Ok(EquivalenceKey(format!("int:{v}")));
    }
    if let Some((n, d)) = parse_rational(trimmed) {
        return Ok(reduced_key(n, d));
    }
    if let Some((n, d)) = parse_decimal(trimmed) {
        return Ok(reduced_key(n, d));
    }
    Ok(EquivalenceKey(format!("str:{}", normalize_string(trimmed))))
}

/// Contents of every `\boxed{...}` occurrence, in order of appearance, with
/// balanced-brace matching (nested braces stay inside the extracted string).
pub fn extract_boxed(text: &str) -> Result<Vec<String>, AnswerError> {
    const MARKER: &str = "\\boxed{";
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut pos = 0;
    while let Some(found) = text[pos..].find(MARKER) {
        let open = pos + found + MARKER.len() - 1; // index of '{'
        let mut depth = 1usize;
        let mut i = open + 1;
        while i < bytes.len() && depth > 0 {
            match bytes[i] {
                b'{' => depth += 1,
                b'}' => depth -= 1,
                _ => {}
            }
            i += 1;
        }
        if depth != 0 {
            return Err(AnswerError::MalformedBox(open));
        }
        out.push(text[open + 1..i - 1].to_string());
        pos = i;
    }
    Ok(out)
}

/// The labeling function: `Incomplete` for generations that hit the length
/// cap without finishing, `Correct` for finished responses whose answer is
/// equivalent to the ground truth, `Incorrect` otherwise. Reward is 1 iff
/// the label is `Correct`.
pub fn assign_label(response: &Response, max_len: usize, truth: &str) -> ClassLabel {
    debug_assert!(response.tokens.token_len() <= max_len);
    if !response.finished {
        return ClassLabel::Incomplete;
    }
    let truth_key = match canonicalize_answer(truth) {
        Ok(k) => k,
        Err(_) => return ClassLabel::Incorrect,
    };
    match response.answer.as_deref().map(canonicalize_answer) {
        Some(Ok(key)) if key == truth_key => ClassLabel::Correct,
        _ => ClassLabel::Incorrect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Sequence;

    fn key(s: &str) -> EquivalenceKey {
        canonicalize_answer(s).unwrap()
    }

    #[test]
    fn integer_identity() {
        assert_eq!(key("42").serialized(), "int:42");
        assert_eq!(key(" 042 ").serialized(), "int:42");
        assert_eq!(key("-7"), key("-7"));
        assert_eq!(key("+3").serialized(), "int:3");
    }

    #[test]
    fn rational_and_decimal_share_keys() {
        // Oracle: reduce both forms by exact arithmetic to (1, 2).
        assert_eq!(key("1/2"), key("0.5"));
        assert_eq!(key("1/2").serialized(), "rat:1/2");
        assert_eq!(key("2/4"), key("1/2"));
        assert_eq!(key("-1/2"), key("1/-2"));
        assert_eq!(key("-1/2").serialized(), "rat:-1/2");
        assert_eq!(key("4/2").serialized(), "int:2");
        assert_eq!(key("0.50"), key("1/2"));
        assert_eq!(key("-0.25").serialized(), "rat:-1/4");
        assert_eq!(key("3.0").serialized(), "int:3");
    }

    #[test]
    fn string_fallback_normalizes_whitespace_and_case() {
        assert_eq!(key("  Two  Words "), key("two words"));
        assert_eq!(key("x^2").serialized(), "str:x^2");
        assert_eq!(key("1/0").serialized(), "str:1/0");
    }

    #[test]
    fn empty_answer_is_an_error() {
        assert_eq!(canonicalize_answer("   "), Err(AnswerError::EmptyAnswer));
    }

    #[test]
    fn canonicalize_is_idempotent_on_display_form() {
        for raw in ["42", " 042 ", "2/4", "0.5", "  Mixed Case  ", "x + y"] {
            let k = key(raw);
            assert_eq!(canonicalize_answer(k.display()).unwrap(), k, "raw = {raw:?}");
        }
    }

    #[test]
    fn extract_boxed_single_and_multiple() {
        assert_eq!(extract_boxed("thus \\boxed{116}.").unwrap(), vec!["116"]);
        assert_eq!(extract_boxed("\\boxed{a} and \\boxed{b}").unwrap(), vec!["a", "b"]);
        assert_eq!(extract_boxed("no box here").unwrap(), Vec::<String>::new());
    }

    #[test]
    fn extract_boxed_balances_nested_braces() {
        // Hand-checked nesting: the outer box closes after the inner pair.
        assert_eq!(extract_boxed("\\boxed{\\frac{1}{2}}").unwrap(), vec!["\\frac{1}{2}"]);
        assert_eq!(extract_boxed("\\boxed{{a}{b}} tail").unwrap(), vec!["{a}{b}"]);
    }

    #[test]
    fn extract_boxed_rejects_unbalanced() {
        assert!(matches!(extract_boxed("\\boxed{\\frac{1}{2}"), Err(AnswerError::MalformedBox(_))));
    }

    fn resp(finished: bool, answer: Option<&str>) -> Response {
        Response {
            problem_id: "p".into(),
            tokens: Sequence::Tokens(vec![]),
            finished,
            answer: answer.map(str::to_string),
            label: None,
        }
    }

    #[test]
    fn label_definition() {
        assert_eq!(assign_label(&resp(true, Some("42")), 16384, "42"), ClassLabel::Correct);
        assert_eq!(assign_label(&resp(true, Some("7")), 16384, "42"), ClassLabel::Incorrect);
        assert_eq!(assign_label(&resp(false, None), 16384, "42"), ClassLabel::Incomplete);
        // Missing or unparseable answers are incorrect, never an error.
        assert_eq!(assign_label(&resp(true, None), 16384, "42"), ClassLabel::Incorrect);
        assert_eq!(assign_label(&resp(true, Some("")), 16384, "42"), ClassLabel::Incorrect);
    }

    #[test]
    fn label_uses_answer_equivalence() {
        assert_eq!(assign_label(&resp(true, Some("0.5")), 100, "1/2"), ClassLabel::Correct);
        assert_eq!(assign_label(&resp(true, Some(" 042")), 100, "42"), ClassLabel::Correct);
    }
}
