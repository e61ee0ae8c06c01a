//! Room certification: oracle replay and exhaustive reachability search.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{
    apply_action, available_actions, checkpoint_holds, faced_code_lock, initial_state, scene_key,
    Action, GameState,
};
use crate::room::RoomSpec;

/// Search stops (and the report is flagged) past this many distinct states.
pub const STATE_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFailure {
    /// Zero-based position in the oracle list.
    pub index: usize,
    pub action: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub success: bool,
    pub steps: u32,
    /// `(checkpoint id, step at which it was achieved)` in achievement order.
    pub achievements: Vec<(String, u32)>,
    pub failure: Option<ReplayFailure>,
    /// Scene in view before each applied oracle action.
    pub visited_scenes: Vec<String>,
}

impl ReplayResult {
    /// Escaped and achieved every declared checkpoint exactly once.
    pub fn certifies(&self, spec: &RoomSpec) -> bool {
        let ids: BTreeSet<_> = self.achievements.iter().map(|(id, _)| id.as_str()).collect();
        self.success
            && self.failure.is_none()
            && self.achievements.len() == spec.checkpoints.len()
            && ids.len() == spec.checkpoints.len()
    }
}

pub fn replay_oracle(spec: &RoomSpec) -> ReplayResult {
    let mut state = initial_state(spec);
    let mut achievements = Vec::new();
    let mut visited = Vec::new();
    let mut failure = None;
    for (index, text) in spec.oracle.iter().enumerate() {
        if state.escaped {
            failure = Some(ReplayFailure {
                index,
                action: text.clone(),
                reason: "room already escaped".into(),
            });
            break;
        }
        let action = match text.parse::<Action>() {
            Ok(a) => a,
            Err(e) => {
                failure = Some(ReplayFailure {
                    index,
                    action: text.clone(),
                    reason: e.to_string(),
                });
                break;
            }
        };
        let scene = scene_key(spec, &state).to_string();
        match apply_action(spec, &state, &action) {
            Ok((next, _events, newly)) => {
                visited.push(scene);
                achievements.extend(newly.into_iter().map(|id| (id, next.step_count)));
                state = next;
            }
            Err(e) => {
                failure = Some(ReplayFailure {
                    index,
                    action: text.clone(),
                    reason: e.to_string(),
                });
                break;
            }
        }
    }
    if failure.is_none() && !state.escaped {
        failure = Some(ReplayFailure {
            index: spec.oracle.len(),
            action: String::new(),
            reason: "oracle ended without escaping".into(),
        });
    }
    ReplayResult {
        success: state.escaped && failure.is_none(),
        steps: state.step_count,
        achievements,
        failure,
        visited_scenes: visited,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub room_id: String,
    pub oracle_ok: bool,
    pub oracle_length: usize,
    pub oracle_failure: Option<ReplayFailure>,
    pub checkpoint_count: usize,
    pub reachable_states: usize,
    pub reachable_scene_count: usize,
    pub unreachable_checkpoints: Vec<String>,
    pub missing_captions: Vec<String>,
    pub unreachable_clue_scenes: Vec<String>,
    pub non_monotone_checkpoints: Vec<String>,
    pub truncated: bool,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Every state reachable from the start (wrong code answers are skipped since
/// they only advance the step counter).
pub struct Reachability {
    pub states: usize,
    pub scenes: BTreeSet<String>,
    pub achievable: BTreeSet<String>,
    pub non_monotone: BTreeSet<String>,
    pub truncated: bool,
}

pub fn explore(spec: &RoomSpec) -> Reachability {
    let mut start = initial_state(spec);
    start.step_count = 0;
    let mut seen: HashSet<GameState> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut scenes = BTreeSet::new();
    let mut achievable = BTreeSet::new();
    let mut non_monotone = BTreeSet::new();
    let mut truncated = false;
    seen.insert(start.clone());
    queue.push_back(start);

    while let Some(state) = queue.pop_front() {
        scenes.insert(scene_key(spec, &state).to_string());
        achievable.extend(state.achieved_checkpoints.iter().cloned());
        for action in available_actions(spec, &state) {
            let action = if action.is_answer_slot() {
                let lock = faced_code_lock(spec, &state).expect("slot implies a faced lock");
                Action::Answer {
                    code: lock.answer.clone().unwrap_or_default(),
                }
            } else {
                action
            };
            let Ok((mut next, _, _)) = apply_action(spec, &state, &action) else {
                continue;
            };
            next.step_count = 0;
            for cp in &spec.checkpoints {
                if checkpoint_holds(&state, &cp.condition) && !checkpoint_holds(&next, &cp.condition) {
                    non_monotone.insert(cp.id.clone());
                }
            }
            if seen.len() >= STATE_LIMIT {
                truncated = true;
                continue;
            }
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Reachability {
        states: seen.len(),
        scenes,
        achievable,
        non_monotone,
        truncated,
    }
}

/// Certifies a loaded room. Problems are collected, never thrown.
pub fn validate_room(spec: &RoomSpec) -> ValidationReport {
    let replay = replay_oracle(spec);
    let reach = explore(spec);
    let mut problems = Vec::new();

    let oracle_ok = replay.certifies(spec);
    if let Some(f) = &replay.failure {
        problems.push(format!(
            "oracle fails at index {} (`{}`): {}",
            f.index, f.action, f.reason
        ));
    } else if !oracle_ok {
        problems.push("oracle escapes without achieving every checkpoint".into());
    }
    if spec.checkpoints.is_empty() {
        problems.push("room declares zero checkpoints (goal completion undefined)".into());
    }
    let unreachable_checkpoints: Vec<String> = spec
        .checkpoints
        .iter()
        .filter(|c| !reach.achievable.contains(&c.id))
        .map(|c| c.id.clone())
        .collect();
    if !unreachable_checkpoints.is_empty() {
        problems.push(format!("unreachable checkpoints: {}", unreachable_checkpoints.join(", ")));
    }
    let missing_captions: Vec<String> = reach
        .scenes
        .iter()
        .filter(|s| !spec.scene_captions.contains_key(*s))
        .cloned()
        .collect();
    if !missing_captions.is_empty() {
        problems.push(format!("{} reachable scenes lack captions", missing_captions.len()));
    }
    let unreachable_clue_scenes: Vec<String> = spec
        .locks
        .iter()
        .flat_map(|l| l.clue_scenes.iter())
        .filter(|s| !reach.scenes.contains(*s))
        .cloned()
        .collect();
    if !unreachable_clue_scenes.is_empty() {
        problems.push(format!("unreachable clue scenes: {}", unreachable_clue_scenes.join(", ")));
    }
    let non_monotone_checkpoints: Vec<String> = reach.non_monotone.iter().cloned().collect();
    if !non_monotone_checkpoints.is_empty() {
        problems.push(format!(
            "checkpoint conditions can become false again: {}",
            non_monotone_checkpoints.join(", ")
        ));
    }
    if reach.truncated {
        problems.push(format!("state space exceeds {STATE_LIMIT} states; search truncated"));
    }

    ValidationReport {
        room_id: spec.room_id.clone(),
        oracle_ok,
        oracle_length: spec.oracle.len(),
        oracle_failure: replay.failure,
        checkpoint_count: spec.checkpoints.len(),
        reachable_states: reach.states,
        reachable_scene_count: reach.scenes.len(),
        unreachable_checkpoints,
        missing_captions,
        unreachable_clue_scenes,
        non_monotone_checkpoints,
        truncated: reach.truncated,
        problems,
    }
}
