//! Declarative room format.
//!
//! A room is a single JSON document with explicit string ids. Loading does
//! structural checks only (schema, id cross-references, lock/state sanity);
//! semantic certification (oracle replay, reachability, caption coverage)
//! lives in [`crate::validate`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Action;
use crate::scene::SceneKey;

/// Current room format version. Files with a different version are rejected.
pub const ROOM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::East => "east",
            Direction::South => "south",
            Direction::West => "west",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "north" => Ok(Direction::North),
            "east" => Ok(Direction::East),
            "south" => Ok(Direction::South),
            "west" => Ok(Direction::West),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub format_version: u32,
    pub room_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    pub walls: BTreeMap<Direction, Vec<String>>,
    pub receptacles: Vec<Receptacle>,
    pub items: Vec<Item>,
    #[serde(default)]
    pub locks: Vec<Lock>,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
    #[serde(default)]
    pub oracle: Vec<String>,
    #[serde(default)]
    pub scene_captions: BTreeMap<String, SceneCaption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Receptacle {
    pub id: String,
    pub wall: Direction,
    pub states: Vec<String>,
    pub initial_state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock: Option<String>,
    /// Items visible inside the receptacle, keyed by receptacle state.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub contains: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<InteractionRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemPlacement {
    Hidden,
    InReceptacle(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: String,
    pub location: ItemPlacement,
    pub caption: String,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub collectible: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    /// Interactions available while viewing this item close up.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<InteractionRule>,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

/// A free-form interaction such as "cut bread with knife".
///
/// The rule is offered while the player views the object that owns it, holds
/// every item in `requires_items`, and every condition in `when` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRule {
    pub verb: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires_items: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when: Vec<Condition>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRef {
    pub receptacle: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    StateIs(StateRef),
    StateIsNot(StateRef),
    LockSolved(String),
    LockUnsolved(String),
    HasItem(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealRef {
    pub item: String,
    pub receptacle: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// May target a receptacle on any wall, not only the one in view.
    SetState(StateRef),
    Reveal(RevealRef),
    Grant(String),
    Consume(String),
    SolveLock(String),
    Escape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockKind {
    NumericCode,
    LetterCode,
    KeyItem,
    Mechanism,
}

impl LockKind {
    pub fn is_code(self) -> bool {
        matches!(self, LockKind::NumericCode | LockKind::LetterCode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lock {
    pub id: String,
    pub kind: LockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_item: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clue_scenes: Vec<String>,
    pub attached_to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointCondition {
    StateIs(StateRef),
    LockSolved(String),
    ItemAcquired(String),
    Escaped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub id: String,
    pub condition: CheckpointCondition,
    pub hint: String,
}

/// Caption for one scene. Accepts either a bare string or `{text, image}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CaptionRepr", into = "CaptionRepr")]
pub struct SceneCaption {
    pub text: String,
    pub image: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CaptionRepr {
    Text(String),
    Full {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image: Option<String>,
    },
}

impl From<CaptionRepr> for SceneCaption {
    fn from(r: CaptionRepr) -> Self {
        match r {
            CaptionRepr::Text(text) => SceneCaption { text, image: None },
            CaptionRepr::Full { text, image } => SceneCaption { text, image },
        }
    }
}

impl From<SceneCaption> for CaptionRepr {
    fn from(c: SceneCaption) -> Self {
        match c.image {
            None => CaptionRepr::Text(c.text),
            Some(image) => CaptionRepr::Full {
                text: c.text,
                image: Some(image),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum RoomError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("dangling references: {}", missing.join(", "))]
    Dangling { missing: Vec<String> },
    #[error("invalid room: {}", problems.join("; "))]
    Invalid { problems: Vec<String> },
}

/// Reads and structurally checks a room file.
pub fn load_room(path: impl AsRef<Path>) -> Result<RoomSpec, RoomError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RoomError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RoomSpec::from_json(&text)
}

impl RoomSpec {
    pub fn from_json(text: &str) -> Result<RoomSpec, RoomError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let spec: RoomSpec = serde_path_to_error::deserialize(&mut de).map_err(|err| {
            let field = err.path().to_string();
            let inner = err.into_inner();
            RoomError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        de.end().map_err(|e| RoomError::Parse {
            line: e.line(),
            column: e.column(),
            field: ".".into(),
            message: e.to_string(),
        })?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("room spec serializes")
    }

    pub fn receptacle(&self, id: &str) -> Option<&Receptacle> {
        self.receptacles.iter().find(|r| r.id == id)
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn lock(&self, id: &str) -> Option<&Lock> {
        self.locks.iter().find(|l| l.id == id)
    }

    pub fn checkpoint(&self, id: &str) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.id == id)
    }

    /// The code lock attached to `receptacle`, if any.
    pub fn code_lock_on(&self, receptacle: &str) -> Option<&Lock> {
        self.locks
            .iter()
            .find(|l| l.attached_to == receptacle && l.kind.is_code())
    }

    pub fn wall(&self, direction: Direction) -> &[String] {
        self.walls.get(&direction).map(Vec::as_slice).unwrap_or(&[])
    }

    fn check(&self) -> Result<(), RoomError> {
        let mut problems = Vec::new();
        let mut missing = BTreeSet::new();

        if self.format_version != ROOM_FORMAT_VERSION {
            problems.push(format!(
                "unsupported format_version {} (expected {ROOM_FORMAT_VERSION})",
                self.format_version
            ));
        }
        check_id("room_id", &self.room_id, &mut problems);

        let mut seen = BTreeSet::new();
        for id in self
            .receptacles
            .iter()
            .map(|r| &r.id)
            .chain(self.items.iter().map(|i| &i.id))
        {
            check_id("object id", id, &mut problems);
            if !seen.insert(id.as_str()) {
                problems.push(format!("duplicate object id `{id}`"));
            }
        }
        let mut lock_ids = BTreeSet::new();
        for lock in &self.locks {
            check_id("lock id", &lock.id, &mut problems);
            if !lock_ids.insert(lock.id.as_str()) {
                problems.push(format!("duplicate lock id `{}`", lock.id));
            }
        }
        let mut cp_ids = BTreeSet::new();
        for cp in &self.checkpoints {
            if cp.id.trim().is_empty() {
                problems.push("empty checkpoint id".into());
            }
            if !cp_ids.insert(cp.id.as_str()) {
                problems.push(format!("duplicate checkpoint id `{}`", cp.id));
            }
        }

        // Walls.
        for dir in Direction::ALL {
            if !self.walls.contains_key(&dir) {
                problems.push(format!("missing wall `{dir}`"));
            }
        }
        let mut placed = BTreeMap::new();
        for (dir, ids) in &self.walls {
            for id in ids {
                match self.receptacle(id) {
                    None => {
                        missing.insert(id.clone());
                    }
                    Some(r) => {
                        if r.wall != *dir {
                            problems.push(format!(
                                "receptacle `{id}` listed on {dir} wall but declares wall {}",
                                r.wall
                            ));
                        }
                        if placed.insert(id.as_str(), *dir).is_some() {
                            problems.push(format!("receptacle `{id}` listed on more than one wall"));
                        }
                    }
                }
            }
        }

        let item_exists = |id: &str| self.item(id).is_some();
        let lock_exists = |id: &str| self.lock(id).is_some();
        let state_ok = |r: &str, s: &str| {
            self.receptacle(r)
                .map(|rec| rec.states.iter().any(|x| x == s))
        };

        let mut check_state_ref = |sr: &StateRef, problems: &mut Vec<String>, missing: &mut BTreeSet<String>| {
            match state_ok(&sr.receptacle, &sr.state) {
                None => {
                    missing.insert(sr.receptacle.clone());
                }
                Some(false) => problems.push(format!(
                    "receptacle `{}` has no state `{}`",
                    sr.receptacle, sr.state
                )),
                Some(true) => {}
            }
        };

        for r in &self.receptacles {
            if !placed.contains_key(r.id.as_str()) {
                problems.push(format!("receptacle `{}` is not placed on any wall", r.id));
            }
            if r.states.is_empty() {
                problems.push(format!("receptacle `{}` has no states", r.id));
            }
            let states: BTreeSet<_> = r.states.iter().collect();
            if states.len() != r.states.len() {
                problems.push(format!("receptacle `{}` repeats a state name", r.id));
            }
            for s in &r.states {
                check_id("state name", s, &mut problems);
            }
            if !states.contains(&r.initial_state) {
                problems.push(format!(
                    "receptacle `{}` initial state `{}` is not one of its states",
                    r.id, r.initial_state
                ));
            }
            for (state, items) in &r.contains {
                if !states.contains(state) {
                    problems.push(format!("receptacle `{}` lists items for unknown state `{state}`", r.id));
                }
                for item in items {
                    if !item_exists(item) {
                        missing.insert(item.clone());
                    }
                }
            }
            if let Some(lock) = &r.lock {
                match self.lock(lock) {
                    None => {
                        missing.insert(lock.clone());
                    }
                    Some(l) if l.attached_to != r.id => problems.push(format!(
                        "receptacle `{}` names lock `{lock}` which is attached to `{}`",
                        r.id, l.attached_to
                    )),
                    Some(_) => {}
                }
            }
            if self.locks.iter().filter(|l| l.attached_to == r.id && l.kind.is_code()).count() > 1 {
                problems.push(format!("receptacle `{}` carries more than one code lock", r.id));
            }
            for rule in &r.interactions {
                self.check_rule(rule, &mut problems, &mut missing, &mut check_state_ref);
            }
        }

        for item in &self.items {
            if let ItemPlacement::InReceptacle(rid) = &item.location {
                match self.receptacle(rid) {
                    None => {
                        missing.insert(rid.clone());
                    }
                    Some(r) => {
                        if !r.contains.values().any(|v| v.contains(&item.id)) {
                            problems.push(format!(
                                "item `{}` starts in `{rid}` but `{rid}` never shows it in any state",
                                item.id
                            ));
                        }
                    }
                }
            }
            for rule in &item.interactions {
                self.check_rule(rule, &mut problems, &mut missing, &mut check_state_ref);
            }
        }

        for lock in &self.locks {
            let Some(rec) = self.receptacle(&lock.attached_to) else {
                missing.insert(lock.attached_to.clone());
                continue;
            };
            if rec.lock.as_deref() != Some(lock.id.as_str()) {
                problems.push(format!(
                    "lock `{}` is attached to `{}` but that receptacle does not reference it",
                    lock.id, lock.attached_to
                ));
            }
            match lock.kind {
                LockKind::NumericCode | LockKind::LetterCode => match &lock.answer {
                    Some(a) if !a.trim().is_empty() => {}
                    _ => problems.push(format!("code lock `{}` has an empty answer", lock.id)),
                },
                LockKind::KeyItem => match &lock.key_item {
                    Some(k) if item_exists(k) => {}
                    Some(k) => {
                        missing.insert(k.clone());
                    }
                    None => problems.push(format!("key lock `{}` names no key item", lock.id)),
                },
                LockKind::Mechanism => {}
            }
            for clue in &lock.clue_scenes {
                match clue.parse::<SceneKey>() {
                    Err(e) => problems.push(format!("lock `{}` clue scene `{clue}`: {e}", lock.id)),
                    Ok(key) => {
                        if key.focus == lock.attached_to {
                            problems.push(format!(
                                "lock `{}` has a clue in its own scene `{clue}`",
                                lock.id
                            ));
                        }
                    }
                }
            }
            // Some transition must depend on this lock being solved: either a
            // rule conditioned on it, or a rule that solves it and changes state
            // in the same step (key and mechanism locks).
            let solved = Condition::LockSolved(lock.id.clone());
            let solves = Effect::SolveLock(lock.id.clone());
            let gated = self
                .receptacles
                .iter()
                .flat_map(|r| r.interactions.iter())
                .chain(self.items.iter().flat_map(|i| i.interactions.iter()))
                .any(|rule| {
                    rule.when.contains(&solved)
                        || (rule.effects.contains(&solves)
                            && rule.effects.iter().any(|e| matches!(e, Effect::SetState(_))))
                });
            if !gated {
                problems.push(format!("no interaction is gated on lock `{}` being solved", lock.id));
            }
        }

        for cp in &self.checkpoints {
            match &cp.condition {
                CheckpointCondition::StateIs(sr) => check_state_ref(sr, &mut problems, &mut missing),
                CheckpointCondition::LockSolved(l) if !lock_exists(l) => {
                    missing.insert(l.clone());
                }
                CheckpointCondition::ItemAcquired(i) if !item_exists(i) => {
                    missing.insert(i.clone());
                }
                _ => {}
            }
        }

        for (i, step) in self.oracle.iter().enumerate() {
            if let Err(e) = step.parse::<Action>() {
                problems.push(format!("oracle step {i}: {e}"));
            }
        }

        for key in self.scene_captions.keys() {
            if let Err(e) = key.parse::<SceneKey>() {
                problems.push(format!("caption key `{key}`: {e}"));
            }
        }

        if !missing.is_empty() {
            return Err(RoomError::Dangling {
                missing: missing.into_iter().collect(),
            });
        }
        if !problems.is_empty() {
            return Err(RoomError::Invalid { problems });
        }
        Ok(())
    }

    fn check_rule(
        &self,
        rule: &InteractionRule,
        problems: &mut Vec<String>,
        missing: &mut BTreeSet<String>,
        check_state_ref: &mut impl FnMut(&StateRef, &mut Vec<String>, &mut BTreeSet<String>),
    ) {
        if rule.verb.trim().is_empty() {
            problems.push("interaction with empty verb".into());
        }
        if rule.verb != crate::engine::normalize_phrase(&rule.verb) {
            problems.push(format!("interaction verb `{}` is not lowercase/normalized", rule.verb));
        }
        if matches!(
            rule.verb.parse::<Action>(),
            Ok(Action::TurnTo(_) | Action::Inspect(_) | Action::Back | Action::Answer { .. })
        ) || rule.verb.starts_with("pick up ")
        {
            problems.push(format!("interaction verb `{}` collides with a built-in action", rule.verb));
        }
        for item in &rule.requires_items {
            if self.item(item).is_none() {
                missing.insert(item.clone());
            }
        }
        for cond in &rule.when {
            match cond {
                Condition::StateIs(sr) | Condition::StateIsNot(sr) => check_state_ref(sr, problems, missing),
                Condition::LockSolved(l) | Condition::LockUnsolved(l) => {
                    if self.lock(l).is_none() {
                        missing.insert(l.clone());
                    }
                }
                Condition::HasItem(i) => {
                    if self.item(i).is_none() {
                        missing.insert(i.clone());
                    }
                }
            }
        }
        if rule.effects.is_empty() {
            problems.push(format!("interaction `{}` has no effects", rule.verb));
        }
        for effect in &rule.effects {
            match effect {
                Effect::SetState(sr) => check_state_ref(sr, problems, missing),
                Effect::Reveal(rv) => {
                    if self.item(&rv.item).is_none() {
                        missing.insert(rv.item.clone());
                    }
                    match self.receptacle(&rv.receptacle) {
                        None => {
                            missing.insert(rv.receptacle.clone());
                        }
                        Some(r) => {
                            if !r.contains.values().any(|v| v.contains(&rv.item)) {
                                problems.push(format!(
                                    "`{}` reveals `{}` into `{}` which never shows it",
                                    rule.verb, rv.item, rv.receptacle
                                ));
                            }
                        }
                    }
                }
                Effect::Grant(i) | Effect::Consume(i) => {
                    if self.item(i).is_none() {
                        missing.insert(i.clone());
                    }
                }
                Effect::SolveLock(l) => {
                    if self.lock(l).is_none() {
                        missing.insert(l.clone());
                    }
                }
                Effect::Escape => {}
            }
        }
    }
}

/// Ids are lowercase words; they appear verbatim in action strings and scene keys.
fn check_id(what: &str, id: &str, problems: &mut Vec<String>) {
    let ok = !id.is_empty()
        && id == id.trim()
        && !id.contains("  ")
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == ' ' || c == '_' || c == '-' || c == '\'');
    if !ok {
        problems.push(format!("{what} `{id}` must be lowercase letters, digits, single spaces, `_`, `-` or `'`"));
    }
}
