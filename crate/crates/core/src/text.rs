//! Small string helpers shared by the pipelines.

use std::collections::HashSet;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::gateway::value_text;
use crate::retrieval::tokenize;

/// Lowercased alphanumeric tokens joined by single spaces; the exact-match
/// key used to short-circuit semantic comparisons.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Jaccard overlap of the token sets of `a` and `b`; 1.0 when both are empty.
pub fn token_overlap(a: &str, b: &str) -> f64 {
    let a: HashSet<String> = tokenize(a).into_iter().collect();
    let b: HashSet<String> = tokenize(b).into_iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

/// Keeps the first `max` whitespace-separated tokens.
pub fn truncate_tokens(text: &str, max: usize) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() <= max {
        text.trim().to_string()
    } else {
        tokens[..max].join(" ")
    }
}

pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Reads a yes/no verdict from a judge's JSON field.
pub fn yes_no(value: &Value) -> Result<bool> {
    if let Value::Bool(b) = value {
        return Ok(*b);
    }
    let text = value_text(value).trim().trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    match text.as_str() {
        "yes" | "true" | "y" => Ok(true),
        "no" | "false" | "n" => Ok(false),
        _ => Err(Error::InvalidJudgment(format!("expected yes/no, got {value}"))),
    }
}

/// Reads an integer score from a judge's JSON field; accepts numbers and
/// strings such as "4" or "4/5".
pub fn integer_score(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        other => {
            let text = value_text(other);
            let digits: String = text.trim().chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.parse().ok()
        }
    }
}
