//! Structured agent memory: the four-section text format, its parser, and
//! reconciliation against the action log.
//!
//! ```text
//! [SPATIAL MEMORY] {"north": {"objects": ["desk", "bookshelf"]}}
//! [INSPECTED OBJECTS] [{"desk": {"state": "locked", "characteristics": "", "additional info": ""}}]
//! [UNINSPECTED OBJECTS] ["bookshelf"]
//! [ADDITIONAL MEMORY] ["desk lock takes four digits"]
//! ```
//!
//! The parser also takes the looser shapes models produce: numbered
//! `[1. a, 2. b]` lists, bare comma lists, prose around the JSON.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallMemory {
    pub objects: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectNotes {
    #[serde(default)]
    pub state: String,
    #[serde(default)]
    pub characteristics: String,
    #[serde(default, rename = "additional info")]
    pub additional_info: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    /// Direction name to the objects seen on that wall.
    pub spatial: BTreeMap<String, WallMemory>,
    pub inspected: BTreeMap<String, ObjectNotes>,
    pub uninspected: Vec<String>,
    pub additional: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryParseError {
    #[error("no memory section header found")]
    MalformedMemory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMemory {
    pub memory: AgentMemory,
    /// Missing or unreadable sections.
    pub warnings: Vec<String>,
}

const SPATIAL: &str = "spatial memory";
const INSPECTED: &str = "inspected objects";
const UNINSPECTED: &str = "uninspected objects";
const ADDITIONAL: &str = "additional memory";

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[*_#]*\[\s*(spatial memory|inspected objects|uninspected objects|additional memory)\s*\][*_]*\s*:?")
        .expect("valid memory header regex")
});
static NUMBERED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|,)\s*\d+\.\s+").expect("valid numbering regex"));

fn norm(name: &str) -> String {
    name.trim()
        .trim_matches(|c| matches!(c, '"' | '\'' | '`'))
        .trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl AgentMemory {
    pub fn is_empty(&self) -> bool {
        self.spatial.is_empty()
            && self.inspected.is_empty()
            && self.uninspected.is_empty()
            && self.additional.is_empty()
    }

    /// Renders the four sections; `exploration` false drops the inspected and
    /// uninspected sections (exploration-memory ablation).
    pub fn render(&self, exploration: bool) -> String {
        let spatial = serde_json::to_string(&self.spatial).expect("memory serializes");
        let inspected: Vec<BTreeMap<&str, &ObjectNotes>> = self
            .inspected
            .iter()
            .map(|(k, v)| BTreeMap::from([(k.as_str(), v)]))
            .collect();
        let mut out = format!("[SPATIAL MEMORY] {spatial}\n");
        if exploration {
            out.push_str(&format!(
                "[INSPECTED OBJECTS] {}\n[UNINSPECTED OBJECTS] {}\n",
                serde_json::to_string(&inspected).expect("memory serializes"),
                serde_json::to_string(&self.uninspected).expect("memory serializes"),
            ));
        }
        out.push_str(&format!(
            "[ADDITIONAL MEMORY] {}",
            serde_json::to_string(&self.additional).expect("memory serializes")
        ));
        out
    }

    pub fn serialize(&self) -> String {
        self.render(true)
    }

    fn knows(&self, object: &str) -> bool {
        self.inspected.contains_key(object) || self.uninspected.iter().any(|o| o == object)
    }
}

/// First JSON value in `body`, ignoring text before and after it.
fn first_json(body: &str) -> Option<Value> {
    let start = body.find(['{', '['])?;
    serde_json::Deserializer::from_str(&body[start..])
        .into_iter::<Value>()
        .next()
        .and_then(Result::ok)
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn parse_spatial(body: &str) -> Option<BTreeMap<String, WallMemory>> {
    let Value::Object(map) = first_json(body)? else {
        return None;
    };
    let mut out = BTreeMap::new();
    for (direction, v) in map {
        let list = match &v {
            Value::Object(o) => o.get("objects").cloned().unwrap_or(Value::Array(Vec::new())),
            other => other.clone(),
        };
        let objects = match list {
            Value::Array(items) => items.iter().map(|i| norm(&value_text(i))).filter(|s| !s.is_empty()).collect(),
            Value::String(s) => split_plain(&s),
            _ => Vec::new(),
        };
        out.insert(norm(&direction), WallMemory { objects });
    }
    Some(out)
}

fn notes_from(v: &Value) -> ObjectNotes {
    match v {
        Value::Object(o) => {
            let field = |names: &[&str]| {
                names
                    .iter()
                    .find_map(|n| o.get(*n))
                    .map(value_text)
                    .unwrap_or_default()
            };
            ObjectNotes {
                state: field(&["state"]),
                characteristics: field(&["characteristics"]),
                additional_info: field(&["additional info", "additional_info"]),
            }
        }
        other => ObjectNotes {
            characteristics: value_text(other),
            ..ObjectNotes::default()
        },
    }
}

fn parse_inspected(body: &str) -> Option<BTreeMap<String, ObjectNotes>> {
    let mut out = BTreeMap::new();
    let mut add_map = |map: &serde_json::Map<String, Value>| {
        for (k, v) in map {
            let id = norm(k);
            if !id.is_empty() {
                out.insert(id, notes_from(v));
            }
        }
    };
    match first_json(body)? {
        Value::Object(map) => add_map(&map),
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::Object(map) => add_map(&map),
                    Value::String(s) if !norm(&s).is_empty() => add_map(&serde_json::Map::from_iter([(
                        s,
                        Value::Object(Default::default()),
                    )])),
                    _ => {}
                }
            }
        }
        _ => return None,
    }
    Some(out)
}

fn split_plain(s: &str) -> Vec<String> {
    s.split([',', '\n'])
        .map(|p| norm(p.trim_start_matches(['-', '*']).trim()))
        .filter(|p| !p.is_empty())
        .collect()
}

fn bracket_inner(body: &str) -> &str {
    let t = body.trim();
    let t = t.strip_prefix('[').unwrap_or(t);
    match t.rfind(']') {
        Some(end) => &t[..end],
        None => t,
    }
}

fn parse_name_list(body: &str) -> Vec<String> {
    match first_json(body) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| norm(&value_text(i)))
            .filter(|s| !s.is_empty())
            .collect(),
        _ => split_plain(bracket_inner(body)),
    }
}

fn parse_additional(body: &str) -> Vec<String> {
    if let Some(Value::Array(items)) = first_json(body) {
        return items
            .iter()
            .map(value_text)
            .filter(|s| !s.is_empty())
            .collect();
    }
    let inner = bracket_inner(body).trim();
    let parts: Vec<String> = if NUMBERED.is_match(inner) {
        NUMBERED.split(inner).map(|p| p.trim().to_string()).collect()
    } else {
        inner
            .lines()
            .map(|l| l.trim().trim_start_matches(['-', '*']).trim().to_string())
            .collect()
    };
    parts.into_iter().filter(|p| !p.is_empty()).collect()
}

/// Parses model output into memory. Sections that are missing or unreadable
/// are left empty and reported in `warnings`; only text without any section
/// header is an error.
pub fn parse_memory(text: &str) -> Result<ParsedMemory, MemoryParseError> {
    let heads: Vec<_> = HEADER.captures_iter(text).collect();
    if heads.is_empty() {
        return Err(MemoryParseError::MalformedMemory);
    }
    let mut bodies: BTreeMap<String, &str> = BTreeMap::new();
    for (i, cap) in heads.iter().enumerate() {
        let whole = cap.get(0).expect("group 0 always matches");
        let end = heads
            .get(i + 1)
            .map(|c| c.get(0).expect("group 0 always matches").start())
            .unwrap_or(text.len());
        // Later repeats of a section win, as with a model that restates itself.
        bodies.insert(cap[1].to_lowercase(), &text[whole.end()..end]);
    }

    let mut memory = AgentMemory::default();
    let mut warnings = Vec::new();
    match bodies.get(SPATIAL) {
        None => warnings.push("missing [SPATIAL MEMORY]".to_string()),
        Some(body) => match parse_spatial(body) {
            Some(s) => memory.spatial = s,
            None => warnings.push("unreadable [SPATIAL MEMORY]".to_string()),
        },
    }
    match bodies.get(INSPECTED) {
        None => warnings.push("missing [INSPECTED OBJECTS]".to_string()),
        Some(body) if body.trim().is_empty() => {}
        Some(body) => match parse_inspected(body) {
            Some(i) => memory.inspected = i,
            None => warnings.push("unreadable [INSPECTED OBJECTS]".to_string()),
        },
    }
    match bodies.get(UNINSPECTED) {
        None => warnings.push("missing [UNINSPECTED OBJECTS]".to_string()),
        Some(body) => memory.uninspected = parse_name_list(body),
    }
    match bodies.get(ADDITIONAL) {
        None => warnings.push("missing [ADDITIONAL MEMORY]".to_string()),
        Some(body) => memory.additional = parse_additional(body),
    }
    Ok(ParsedMemory { memory, warnings })
}

/// Enforces the memory invariants after a model update:
/// objects inspected according to the log (or earlier memory) stay inspected,
/// inspected and uninspected are disjoint, and every object on a wall is in
/// exactly one of the two.
pub fn reconcile(prev: Option<&AgentMemory>, mut next: AgentMemory, inspected_in_log: &[String]) -> AgentMemory {
    if let Some(prev) = prev {
        for (id, notes) in &prev.inspected {
            next.inspected.entry(id.clone()).or_insert_with(|| notes.clone());
        }
    }
    for id in inspected_in_log {
        next.inspected.entry(norm(id)).or_default();
    }
    let mut uninspected: Vec<String> = Vec::new();
    for id in next.uninspected.drain(..) {
        if !next.inspected.contains_key(&id) && !uninspected.contains(&id) {
            uninspected.push(id);
        }
    }
    next.uninspected = uninspected;
    let on_walls: Vec<String> = next
        .spatial
        .values()
        .flat_map(|w| w.objects.iter().cloned())
        .collect();
    for object in on_walls {
        if !next.knows(&object) {
            next.uninspected.push(object);
        }
    }
    next
}
