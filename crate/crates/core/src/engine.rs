//! Deterministic game state machine.
//!
//! Everything here is a pure function of `(spec, state)`: computing the
//! available actions, applying one action, and rendering the caption
//! observation for the current scene.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::room::{
    CheckpointCondition, Condition, Direction, Effect, InteractionRule, ItemPlacement, Lock,
    RoomSpec,
};
use crate::scene::{SceneKey, ViewKind};

/// Text shown in action lists where a code answer can be typed.
pub const ANSWER_SLOT: &str = "<ANSWER>your answer</ANSWER>";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum View {
    Wall { direction: Direction },
    Receptacle { id: String },
    Item { id: String, parent: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemLocation {
    Hidden,
    InReceptacle(String),
    Inventory,
    Consumed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub view: View,
    pub receptacle_states: BTreeMap<String, String>,
    pub item_locations: BTreeMap<String, ItemLocation>,
    pub solved_locks: BTreeSet<String>,
    /// Checkpoint ids in the order they were achieved.
    pub achieved_checkpoints: Vec<String>,
    pub step_count: u32,
    pub escaped: bool,
}

impl GameState {
    /// Held item ids, in room declaration order.
    pub fn inventory<'a>(&'a self, spec: &'a RoomSpec) -> impl Iterator<Item = &'a str> + 'a {
        spec.items
            .iter()
            .filter(|i| self.item_locations.get(&i.id) == Some(&ItemLocation::Inventory))
            .map(|i| i.id.as_str())
    }

    pub fn holds(&self, item: &str) -> bool {
        self.item_locations.get(item) == Some(&ItemLocation::Inventory)
    }

    pub fn is_achieved(&self, checkpoint: &str) -> bool {
        self.achieved_checkpoints.iter().any(|c| c == checkpoint)
    }

    fn state_of(&self, receptacle: &str) -> &str {
        self.receptacle_states
            .get(receptacle)
            .map(String::as_str)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    TurnTo(Direction),
    Inspect(String),
    Back,
    Interact(String),
    /// Code entry for the lock on the receptacle in view.
    Answer { code: String },
}

impl Action {
    pub fn is_answer_slot(&self) -> bool {
        matches!(self, Action::Answer { code } if code.is_empty())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::TurnTo(d) => write!(f, "turn_to_{d}"),
            Action::Inspect(id) => write!(f, "inspect {id}"),
            Action::Back => f.write_str("back"),
            Action::Interact(p) => f.write_str(p),
            Action::Answer { code } if code.is_empty() => f.write_str(ANSWER_SLOT),
            Action::Answer { code } => write!(f, "<ANSWER>{code}</ANSWER>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionParseError {
    #[error("empty action")]
    Empty,
    #[error("unknown direction in `{0}`")]
    BadDirection(String),
    #[error("`{0}` is missing its target")]
    MissingTarget(String),
    #[error("malformed answer `{0}`")]
    MalformedAnswer(String),
}

/// Lowercases and collapses whitespace; strips one trailing period.
pub fn normalize_phrase(s: &str) -> String {
    let lowered = s.trim().trim_end_matches('.').to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl FromStr for Action {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Err(ActionParseError::Empty);
        }
        let lower = trimmed.to_lowercase();
        if lower.contains("<answer>") || lower.contains("</answer>") {
            let inner = lower
                .strip_prefix("<answer>")
                .and_then(|rest| rest.strip_suffix("</answer>"))
                .ok_or_else(|| ActionParseError::MalformedAnswer(trimmed.to_string()))?;
            // Keep the original casing of the code.
            let start = "<answer>".len();
            let code = trimmed[start..start + inner.len()].trim();
            if code.is_empty() || code.contains('<') {
                return Err(ActionParseError::MalformedAnswer(trimmed.to_string()));
            }
            return Ok(Action::Answer {
                code: code.to_string(),
            });
        }
        let norm = normalize_phrase(trimmed);
        if norm.is_empty() {
            return Err(ActionParseError::Empty);
        }
        if let Some(dir) = norm
            .strip_prefix("turn_to_")
            .or_else(|| norm.strip_prefix("turn to "))
        {
            return dir
                .parse()
                .map(Action::TurnTo)
                .map_err(|_| ActionParseError::BadDirection(norm.clone()));
        }
        if norm == "back" {
            return Ok(Action::Back);
        }
        if norm == "inspect" {
            return Err(ActionParseError::MissingTarget(norm));
        }
        if let Some(target) = norm.strip_prefix("inspect ") {
            return Ok(Action::Inspect(target.to_string()));
        }
        if norm == "pick up" {
            return Err(ActionParseError::MissingTarget(norm));
        }
        Ok(Action::Interact(norm))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    WrongAnswer { lock: String, code: String },
    LockOpened { lock: String },
    ItemAcquired { item: String },
    ItemRevealed { item: String },
    ItemConsumed { item: String },
    StateChanged { receptacle: String, from: String, to: String },
    Escaped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub scene_key: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    /// Wall the player is facing (the parent wall for close-up views).
    pub direction: Direction,
    pub available_actions: Vec<String>,
    pub inventory: Vec<String>,
    pub inventory_captions: Vec<String>,
    /// True when an unsolved code lock is in view.
    pub puzzle_mode: bool,
    pub escaped: bool,
}

impl Observation {
    /// Caption plus a compact inventory line, as fed to caption-mode agents.
    pub fn description(&self) -> String {
        if self.inventory.is_empty() {
            self.caption.clone()
        } else {
            format!("{} (Inventory: {})", self.caption, self.inventory.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub state: GameState,
    pub observation: Observation,
    pub events: Vec<Event>,
    pub newly_achieved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("action `{action}` is not available here")]
    UnavailableAction {
        action: String,
        available: Vec<String>,
    },
    #[error("no caption for reachable scene `{scene}`")]
    MissingCaption { scene: String },
}

/// Start of every episode: facing north, nothing held, nothing solved.
pub fn initial_state(spec: &RoomSpec) -> GameState {
    GameState {
        view: View::Wall {
            direction: Direction::North,
        },
        receptacle_states: spec
            .receptacles
            .iter()
            .map(|r| (r.id.clone(), r.initial_state.clone()))
            .collect(),
        item_locations: spec
            .items
            .iter()
            .map(|i| {
                let loc = match &i.location {
                    ItemPlacement::Hidden => ItemLocation::Hidden,
                    ItemPlacement::InReceptacle(r) => ItemLocation::InReceptacle(r.clone()),
                };
                (i.id.clone(), loc)
            })
            .collect(),
        solved_locks: BTreeSet::new(),
        achieved_checkpoints: Vec::new(),
        step_count: 0,
        escaped: false,
    }
}

enum Move<'a> {
    Turn(Direction),
    Back,
    Inspect,
    Pickup(&'a str),
    Rule(&'a InteractionRule),
    Answer(&'a Lock),
}

/// Wall the current view belongs to.
pub fn facing(spec: &RoomSpec, state: &GameState) -> Direction {
    match &state.view {
        View::Wall { direction } => *direction,
        View::Receptacle { id } | View::Item { parent: id, .. } => spec
            .receptacle(id)
            .map(|r| r.wall)
            .unwrap_or(Direction::North),
    }
}

/// Items currently visible inside `receptacle`, in the receptacle's listing order.
pub fn visible_items<'a>(spec: &'a RoomSpec, state: &GameState, receptacle: &str) -> Vec<&'a str> {
    let Some(r) = spec.receptacle(receptacle) else {
        return Vec::new();
    };
    let listed = r.contains.get(state.state_of(receptacle));
    listed
        .into_iter()
        .flatten()
        .filter(|item| {
            state.item_locations.get(*item) == Some(&ItemLocation::InReceptacle(receptacle.to_string()))
        })
        .map(String::as_str)
        .collect()
}

/// The unsolved code lock in view, if any.
pub fn faced_code_lock<'a>(spec: &'a RoomSpec, state: &GameState) -> Option<&'a Lock> {
    match &state.view {
        View::Receptacle { id } => spec
            .code_lock_on(id)
            .filter(|l| !state.solved_locks.contains(&l.id)),
        _ => None,
    }
}

fn condition_holds(state: &GameState, cond: &Condition) -> bool {
    match cond {
        Condition::StateIs(sr) => state.state_of(&sr.receptacle) == sr.state,
        Condition::StateIsNot(sr) => state.state_of(&sr.receptacle) != sr.state,
        Condition::LockSolved(l) => state.solved_locks.contains(l),
        Condition::LockUnsolved(l) => !state.solved_locks.contains(l),
        Condition::HasItem(i) => state.holds(i),
    }
}

fn rule_enabled(state: &GameState, rule: &InteractionRule) -> bool {
    rule.requires_items.iter().all(|i| state.holds(i))
        && rule.when.iter().all(|c| condition_holds(state, c))
}

pub fn checkpoint_holds(state: &GameState, cond: &CheckpointCondition) -> bool {
    match cond {
        CheckpointCondition::StateIs(sr) => state.state_of(&sr.receptacle) == sr.state,
        CheckpointCondition::LockSolved(l) => state.solved_locks.contains(l),
        CheckpointCondition::ItemAcquired(i) => matches!(
            state.item_locations.get(i),
            Some(ItemLocation::Inventory | ItemLocation::Consumed)
        ),
        CheckpointCondition::Escaped => state.escaped,
    }
}

fn moves<'a>(spec: &'a RoomSpec, state: &GameState) -> Vec<(Action, Move<'a>)> {
    let mut out = Vec::new();
    if state.escaped {
        return out;
    }
    let current_wall = match &state.view {
        View::Wall { direction } => Some(*direction),
        _ => None,
    };
    for d in Direction::ALL {
        if Some(d) != current_wall {
            out.push((Action::TurnTo(d), Move::Turn(d)));
        }
    }
    if current_wall.is_none() {
        out.push((Action::Back, Move::Back));
    }
    match &state.view {
        View::Wall { direction } => {
            for r in spec.wall(*direction) {
                out.push((Action::Inspect(r.clone()), Move::Inspect));
            }
        }
        View::Receptacle { id } => {
            let visible = visible_items(spec, state, id);
            for item in &visible {
                out.push((Action::Inspect(item.to_string()), Move::Inspect));
            }
            for item in &visible {
                if spec.item(item).is_some_and(|i| i.collectible) {
                    out.push((Action::Interact(format!("pick up {item}")), Move::Pickup(item)));
                }
            }
            if let Some(r) = spec.receptacle(id) {
                for rule in r.interactions.iter().filter(|rule| rule_enabled(state, rule)) {
                    out.push((Action::Interact(rule.verb.clone()), Move::Rule(rule)));
                }
            }
            if let Some(lock) = faced_code_lock(spec, state) {
                out.push((Action::Answer { code: String::new() }, Move::Answer(lock)));
            }
        }
        View::Item { id, .. } => {
            if let Some(item) = spec.item(id) {
                for rule in item.interactions.iter().filter(|rule| rule_enabled(state, rule)) {
                    out.push((Action::Interact(rule.verb.clone()), Move::Rule(rule)));
                }
            }
        }
    }
    out
}

/// Legal actions in deterministic order: turns, back, inspects, interactions,
/// then the answer slot (an `Answer` with an empty code) when a code lock is in view.
pub fn available_actions(spec: &RoomSpec, state: &GameState) -> Vec<Action> {
    moves(spec, state).into_iter().map(|(a, _)| a).collect()
}

/// Applies one action. Effects may change receptacles on any wall.
pub fn apply_action(
    spec: &RoomSpec,
    state: &GameState,
    action: &Action,
) -> Result<(GameState, Vec<Event>, Vec<String>), EngineError> {
    let all = moves(spec, state);
    let chosen = all.iter().find(|(a, _)| match (a, action) {
        (Action::Answer { .. }, Action::Answer { code }) => !code.trim().is_empty(),
        (a, b) => a == b,
    });
    let Some((_, mv)) = chosen else {
        return Err(EngineError::UnavailableAction {
            action: action.to_string(),
            available: all.iter().map(|(a, _)| a.to_string()).collect(),
        });
    };

    let mut next = state.clone();
    let mut events = Vec::new();
    match mv {
        Move::Turn(d) => next.view = View::Wall { direction: *d },
        Move::Back => {
            next.view = match &state.view {
                View::Item { parent, .. } => View::Receptacle { id: parent.clone() },
                _ => View::Wall {
                    direction: facing(spec, state),
                },
            }
        }
        Move::Inspect => {
            let Action::Inspect(target) = action else {
                unreachable!("inspect move always pairs with an inspect action")
            };
            next.view = match &state.view {
                View::Wall { .. } => View::Receptacle { id: target.clone() },
                View::Receptacle { id } => View::Item {
                    id: target.clone(),
                    parent: id.clone(),
                },
                View::Item { .. } => unreachable!("nothing to inspect from an item view"),
            };
        }
        Move::Pickup(item) => {
            next.item_locations
                .insert(item.to_string(), ItemLocation::Inventory);
            events.push(Event::ItemAcquired {
                item: item.to_string(),
            });
        }
        Move::Rule(rule) => {
            for effect in &rule.effects {
                apply_effect(&mut next, effect, &mut events);
            }
        }
        Move::Answer(lock) => {
            let Action::Answer { code } = action else {
                unreachable!("answer move always pairs with an answer action")
            };
            let expected = lock.answer.as_deref().unwrap_or_default();
            if code.trim().eq_ignore_ascii_case(expected.trim()) {
                next.solved_locks.insert(lock.id.clone());
                events.push(Event::LockOpened {
                    lock: lock.id.clone(),
                });
            } else {
                events.push(Event::WrongAnswer {
                    lock: lock.id.clone(),
                    code: code.trim().to_string(),
                });
            }
        }
    }
    next.step_count += 1;

    let mut newly = Vec::new();
    for cp in &spec.checkpoints {
        if !next.is_achieved(&cp.id) && checkpoint_holds(&next, &cp.condition) {
            next.achieved_checkpoints.push(cp.id.clone());
            newly.push(cp.id.clone());
        }
    }
    Ok((next, events, newly))
}

fn apply_effect(state: &mut GameState, effect: &Effect, events: &mut Vec<Event>) {
    match effect {
        Effect::SetState(sr) => {
            let slot = state
                .receptacle_states
                .entry(sr.receptacle.clone())
                .or_default();
            if *slot != sr.state {
                events.push(Event::StateChanged {
                    receptacle: sr.receptacle.clone(),
                    from: std::mem::replace(slot, sr.state.clone()),
                    to: sr.state.clone(),
                });
            }
        }
        Effect::Reveal(rv) => {
            if state.item_locations.get(&rv.item) == Some(&ItemLocation::Hidden) {
                state
                    .item_locations
                    .insert(rv.item.clone(), ItemLocation::InReceptacle(rv.receptacle.clone()));
                events.push(Event::ItemRevealed {
                    item: rv.item.clone(),
                });
            }
        }
        Effect::Grant(item) => {
            if !state.holds(item) {
                state.item_locations.insert(item.clone(), ItemLocation::Inventory);
                events.push(Event::ItemAcquired { item: item.clone() });
            }
        }
        Effect::Consume(item) => {
            if state.item_locations.get(item) != Some(&ItemLocation::Consumed) {
                state.item_locations.insert(item.clone(), ItemLocation::Consumed);
                events.push(Event::ItemConsumed { item: item.clone() });
            }
        }
        Effect::SolveLock(lock) => {
            if state.solved_locks.insert(lock.clone()) {
                events.push(Event::LockOpened { lock: lock.clone() });
            }
        }
        Effect::Escape => {
            if !state.escaped {
                state.escaped = true;
                events.push(Event::Escaped);
            }
        }
    }
}

/// Full step: apply, then render the resulting observation.
pub fn step(spec: &RoomSpec, state: &GameState, action: &Action) -> Result<StepResult, EngineError> {
    let (next, events, newly_achieved) = apply_action(spec, state, action)?;
    let observation = render_observation(spec, &next)?;
    Ok(StepResult {
        state: next,
        observation,
        events,
        newly_achieved,
    })
}

/// Identity of the current scene: only facts visible from the current view enter the key.
pub fn scene_key(spec: &RoomSpec, state: &GameState) -> SceneKey {
    match &state.view {
        View::Wall { direction } => SceneKey {
            kind: ViewKind::Wall,
            focus: direction.to_string(),
            facts: spec
                .wall(*direction)
                .iter()
                .map(|r| (r.clone(), state.state_of(r).to_string()))
                .collect(),
        },
        View::Receptacle { id } => {
            let mut facts = vec![(id.clone(), state.state_of(id).to_string())];
            if let Some(lock) = spec.receptacle(id).and_then(|r| r.lock.as_ref()) {
                let status = if state.solved_locks.contains(lock) {
                    "solved"
                } else {
                    "unsolved"
                };
                facts.push((lock.clone(), status.to_string()));
            }
            for item in visible_items(spec, state, id) {
                facts.push((item.to_string(), "present".to_string()));
            }
            SceneKey {
                kind: ViewKind::Receptacle,
                focus: id.clone(),
                facts,
            }
        }
        View::Item { id, .. } => SceneKey {
            kind: ViewKind::Item,
            focus: id.clone(),
            facts: Vec::new(),
        },
    }
}

pub fn render_observation(spec: &RoomSpec, state: &GameState) -> Result<Observation, EngineError> {
    let key = scene_key(spec, state).to_string();
    let caption = spec
        .scene_captions
        .get(&key)
        .ok_or_else(|| EngineError::MissingCaption { scene: key.clone() })?;
    let inventory: Vec<String> = state.inventory(spec).map(str::to_string).collect();
    let inventory_captions = inventory
        .iter()
        .filter_map(|id| spec.item(id).map(|i| i.caption.clone()))
        .collect();
    Ok(Observation {
        scene_key: key,
        caption: caption.text.clone(),
        image_ref: caption.image.clone(),
        direction: facing(spec, state),
        available_actions: available_actions(spec, state)
            .iter()
            .map(Action::to_string)
            .collect(),
        inventory,
        inventory_captions,
        puzzle_mode: faced_code_lock(spec, state).is_some(),
        escaped: state.escaped,
    })
}

/// An object visible in the current scene together with its ground-truth state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibleObject {
    pub id: String,
    pub aliases: Vec<String>,
    pub state: Option<String>,
    /// Every state the object can be in (empty for items).
    pub states: Vec<String>,
}

/// Receptacles and items present in the current view.
pub fn visible_objects(spec: &RoomSpec, state: &GameState) -> Vec<VisibleObject> {
    let receptacle = |id: &str| {
        spec.receptacle(id).map(|r| VisibleObject {
            id: r.id.clone(),
            aliases: r.aliases.clone(),
            state: Some(state.state_of(id).to_string()),
            states: r.states.clone(),
        })
    };
    let item = |id: &str| {
        spec.item(id).map(|i| VisibleObject {
            id: i.id.clone(),
            aliases: i.aliases.clone(),
            state: None,
            states: Vec::new(),
        })
    };
    match &state.view {
        View::Wall { direction } => spec
            .wall(*direction)
            .iter()
            .filter_map(|r| receptacle(r))
            .collect(),
        View::Receptacle { id } => receptacle(id)
            .into_iter()
            .chain(visible_items(spec, state, id).into_iter().filter_map(item))
            .collect(),
        View::Item { id, .. } => item(id).into_iter().collect(),
    }
}
