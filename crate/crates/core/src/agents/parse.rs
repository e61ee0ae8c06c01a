//! Parsers for model output in the `[THINK]` / `[ACTION]` grammar.
//!
//! Headers match case-insensitively and may be wrapped in markdown bold or
//! followed by a colon; code fences are ignored. Code answers are taken from
//! `<ANSWER>...</ANSWER>` anywhere in the action section.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::engine::{Action, ActionParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactOutput {
    pub think: String,
    pub action: Action,
}

impl ReactOutput {
    pub fn render(&self) -> String {
        format!("[THINK]\n{}\n[ACTION]\n{}", self.think, self.action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReactParseError {
    #[error("no [ACTION] section")]
    MissingAction,
    #[error("[ACTION] section is empty")]
    EmptyAction,
    #[error("malformed <ANSWER> block")]
    MalformedAnswer,
    #[error(transparent)]
    BadAction(#[from] ActionParseError),
}

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[*_#\s]*\[\s*(think|action|analysis)\s*\][*_]*\s*:?").expect("valid header regex")
});
static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*```[A-Za-z0-9_-]*\s*$").expect("valid fence regex"));
static ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<answer>(.*?)</answer>").expect("valid answer regex"));
static ANSWER_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)</?answer>").expect("valid answer tag regex"));

/// Sections in order of appearance: `(lowercased header, body)`.
fn sections(text: &str) -> Vec<(String, String)> {
    let cleaned = FENCE.replace_all(text, "");
    let heads: Vec<_> = HEADER.captures_iter(&cleaned).collect();
    let mut out = Vec::with_capacity(heads.len());
    for (i, cap) in heads.iter().enumerate() {
        let whole = cap.get(0).expect("group 0 always matches");
        let end = heads
            .get(i + 1)
            .map(|c| c.get(0).expect("group 0 always matches").start())
            .unwrap_or(cleaned.len());
        out.push((cap[1].to_lowercase(), cleaned[whole.end()..end].to_string()));
    }
    out
}

/// Pulls an action out of the body of an action section (or a bare reply).
fn action_from(body: &str) -> Result<Action, ReactParseError> {
    if let Some(cap) = ANSWER.captures(body) {
        let code = cap[1].trim();
        if code.is_empty() {
            return Err(ReactParseError::MalformedAnswer);
        }
        return Ok(Action::Answer {
            code: code.to_string(),
        });
    }
    if ANSWER_OPEN.is_match(body) {
        return Err(ReactParseError::MalformedAnswer);
    }
    let line = body
        .lines()
        .map(clean_line)
        .find(|l| !l.is_empty())
        .ok_or(ReactParseError::EmptyAction)?;
    Ok(line.parse()?)
}

fn clean_line(line: &str) -> &str {
    let mut s = line.trim();
    s = s.trim_start_matches(['-', '>', '*']).trim();
    s.trim_matches(|c| matches!(c, '*' | '`' | '"' | '\'' | '_'))
        .trim()
        .trim_end_matches('.')
        .trim()
}

pub fn parse_react(text: &str) -> Result<ReactOutput, ReactParseError> {
    let sections = sections(text);
    let think = sections
        .iter()
        .rfind(|(h, _)| h == "think")
        .map(|(_, b)| b.trim().to_string())
        .unwrap_or_default();
    // Models sometimes echo an empty template header before answering; take
    // the last action section that has content.
    let action_body = sections
        .iter()
        .filter(|(h, b)| h == "action" && !b.trim().is_empty())
        .next_back()
        .map(|(_, b)| b.as_str());
    let action = match action_body {
        Some(body) => action_from(body)?,
        None if sections.iter().any(|(h, _)| h == "action") => {
            return Err(ReactParseError::EmptyAction)
        }
        None if ANSWER.is_match(text) => action_from(text)?,
        None => return Err(ReactParseError::MissingAction),
    };
    Ok(ReactOutput { think, action })
}

/// Parses a reply that should hold only an action (the retry prompt). A bare
/// action line without a header is accepted.
pub fn parse_action_only(text: &str) -> Result<Action, ReactParseError> {
    let sections = sections(text);
    match sections
        .iter()
        .filter(|(h, b)| h == "action" && !b.trim().is_empty())
        .next_back()
    {
        Some((_, body)) => action_from(body),
        None if sections.is_empty() => action_from(&FENCE.replace_all(text, "")),
        None => Err(ReactParseError::EmptyAction),
    }
}

/// Text after an `[ANALYSIS]` header, or the whole reply minus any empty headers.
pub fn analysis_body(text: &str) -> String {
    let sections = sections(text);
    match sections.iter().rfind(|(h, b)| h == "analysis" && !b.trim().is_empty()) {
        Some((_, body)) => body.trim().to_string(),
        None => {
            let cleaned = FENCE.replace_all(text, "");
            HEADER.replace_all(&cleaned, " ").trim().to_string()
        }
    }
}
