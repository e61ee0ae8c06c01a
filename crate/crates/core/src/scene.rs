//! Scene identity.
//!
//! A scene is what the player can see: the view kind, the object in focus and
//! the facts visible from that view. Two game states that look the same share
//! a `SceneKey` even if they differ elsewhere in the room.
//!
//! Text form: `kind:focus` followed by `|name=value` facts, e.g.
//! `receptacle:desk|desk=open|desk lock=solved|knife=present`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Wall,
    Receptacle,
    Item,
}

impl ViewKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Wall => "wall",
            ViewKind::Receptacle => "receptacle",
            ViewKind::Item => "item",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SceneKey {
    pub kind: ViewKind,
    pub focus: String,
    pub facts: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SceneKeyError {
    #[error("scene key is empty")]
    Empty,
    #[error("missing `kind:focus` prefix in `{0}`")]
    MissingFocus(String),
    #[error("unknown view kind `{0}`")]
    UnknownKind(String),
    #[error("fact `{0}` is not `name=value`")]
    BadFact(String),
}

impl fmt::Display for SceneKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.focus)?;
        for (k, v) in &self.facts {
            write!(f, "|{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for SceneKey {
    type Err = SceneKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Err(SceneKeyError::Empty);
        }
        let mut parts = s.split('|');
        let head = parts.next().unwrap_or_default();
        let (kind, focus) = head
            .split_once(':')
            .ok_or_else(|| SceneKeyError::MissingFocus(head.to_string()))?;
        let kind = match kind {
            "wall" => ViewKind::Wall,
            "receptacle" => ViewKind::Receptacle,
            "item" => ViewKind::Item,
            other => return Err(SceneKeyError::UnknownKind(other.to_string())),
        };
        if focus.is_empty() {
            return Err(SceneKeyError::MissingFocus(head.to_string()));
        }
        let facts = parts
            .map(|p| {
                p.split_once('=')
                    .filter(|(k, _)| !k.is_empty())
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| SceneKeyError::BadFact(p.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(SceneKey {
            kind,
            focus: focus.to_string(),
            facts,
        })
    }
}

impl Serialize for SceneKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SceneKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
