//! Episode and aggregate metrics, plus the trajectory analyses: action
//! repetition, caption accuracy and essential-scene coverage.
//!
//! Ratios are kept in `[0, 1]`; rendering to percentages happens only in
//! [`MetricsReport::render_table`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, Event, VisibleObject};
use crate::room::RoomSpec;
use crate::session::{ExperimentMode, TerminationReason, Trajectory};
use crate::validate::replay_oracle;

/// Default window for the GC curve and scene coverage.
pub const DEFAULT_WINDOW: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("room `{0}` declares no checkpoints; goal completion is undefined")]
    NoCheckpoints(String),
    #[error("no episodes to aggregate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub room_id: String,
    pub trial: u32,
    pub mode: ExperimentMode,
    pub success: bool,
    pub gc: f64,
    pub spl: f64,
    pub steps: u32,
    /// Only meaningful with hints; `None` in `exp_base`.
    pub hcr: Option<f64>,
    pub reason: Option<TerminationReason>,
    pub duration_ms: u64,
    pub answer_attempts: u32,
    pub wrong_answers: u32,
}

/// `success × min(1, oracle / agent)`.
pub fn spl(success: bool, oracle_len: u32, agent_len: u32) -> f64 {
    if !success || agent_len == 0 {
        return 0.0;
    }
    (oracle_len as f64 / agent_len as f64).min(1.0)
}

pub fn episode_metrics(trajectory: &Trajectory, spec: &RoomSpec) -> Result<EpisodeMetrics, MetricsError> {
    let total = spec.checkpoints.len();
    if total == 0 {
        return Err(MetricsError::NoCheckpoints(spec.room_id.clone()));
    }
    let declared: BTreeSet<&str> = spec.checkpoints.iter().map(|c| c.id.as_str()).collect();
    let achievements = trajectory.achievements();
    let mut achieved = BTreeSet::new();
    let mut assisted = BTreeSet::new();
    for a in &achievements {
        if declared.contains(a.checkpoint.as_str()) {
            achieved.insert(a.checkpoint.clone());
            if a.hint_assisted {
                assisted.insert(a.checkpoint.clone());
            }
        }
    }
    let success = trajectory.escaped();
    let steps = trajectory.steps.len() as u32;
    let mode = trajectory.header.mode;
    let hcr = match mode {
        ExperimentMode::ExpBase => None,
        ExperimentMode::ExpHint if achieved.is_empty() => Some(0.0),
        ExperimentMode::ExpHint => Some(assisted.len() as f64 / achieved.len() as f64),
    };
    let answer_attempts = trajectory
        .steps
        .iter()
        .filter(|s| matches!(s.action.parse::<Action>(), Ok(Action::Answer { .. })))
        .count() as u32;
    let wrong_answers = trajectory
        .steps
        .iter()
        .flat_map(|s| s.events.iter())
        .filter(|e| matches!(e, Event::WrongAnswer { .. }))
        .count() as u32;
    Ok(EpisodeMetrics {
        room_id: trajectory.header.room_id.clone(),
        trial: trajectory.header.trial,
        mode,
        success,
        gc: achieved.len() as f64 / total as f64,
        spl: spl(success, spec.oracle.len() as u32, steps),
        steps,
        hcr,
        reason: trajectory.end.as_ref().map(|e| e.reason),
        duration_ms: trajectory.duration_ms(),
        answer_attempts,
        wrong_answers,
    })
}

/// Means over a group of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub sr: f64,
    pub gc: f64,
    pub spl: f64,
    pub steps: f64,
    pub hcr: Option<f64>,
    pub answer_attempts: f64,
    pub wrong_answers: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn summarize(episodes: &[&EpisodeMetrics]) -> Summary {
    let hcrs: Vec<f64> = episodes.iter().filter_map(|e| e.hcr).collect();
    Summary {
        episodes: episodes.len(),
        sr: mean(episodes.iter().map(|e| if e.success { 1.0 } else { 0.0 })),
        gc: mean(episodes.iter().map(|e| e.gc)),
        spl: mean(episodes.iter().map(|e| e.spl)),
        steps: mean(episodes.iter().map(|e| e.steps as f64)),
        hcr: (!hcrs.is_empty()).then(|| mean(hcrs)),
        answer_attempts: mean(episodes.iter().map(|e| e.answer_attempts as f64)),
        wrong_answers: mean(episodes.iter().map(|e| e.wrong_answers as f64)),
    }
}

/// Mean of per-room summaries (each room weighs the same).
fn mean_of_rooms(rooms: &BTreeMap<String, Summary>) -> Summary {
    let list: Vec<&Summary> = rooms.values().collect();
    let hcrs: Vec<f64> = list.iter().filter_map(|s| s.hcr).collect();
    Summary {
        episodes: list.iter().map(|s| s.episodes).sum(),
        sr: mean(list.iter().map(|s| s.sr)),
        gc: mean(list.iter().map(|s| s.gc)),
        spl: mean(list.iter().map(|s| s.spl)),
        steps: mean(list.iter().map(|s| s.steps)),
        hcr: (!hcrs.is_empty()).then(|| mean(hcrs)),
        answer_attempts: mean(list.iter().map(|s| s.answer_attempts)),
        wrong_answers: mean(list.iter().map(|s| s.wrong_answers)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u32,
    pub gc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rooms: BTreeMap<String, Summary>,
    pub overall: Summary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gc_curve: Vec<CurvePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<RepetitionHistogram>,
}

/// Per-room means over trials, then the mean over rooms.
pub fn aggregate(episodes: &[EpisodeMetrics]) -> Result<MetricsReport, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut by_room: BTreeMap<String, Vec<&EpisodeMetrics>> = BTreeMap::new();
    for e in episodes {
        by_room.entry(e.room_id.clone()).or_default().push(e);
    }
    let rooms: BTreeMap<String, Summary> = by_room
        .into_iter()
        .map(|(room, list)| (room, summarize(&list)))
        .collect();
    let overall = mean_of_rooms(&rooms);
    Ok(MetricsReport {
        rooms,
        overall,
        gc_curve: Vec::new(),
        repetition: None,
    })
}

/// Checkpoint fraction after each of the first `window` steps.
pub fn gc_prefix(trajectory: &Trajectory, total: usize, window: u32) -> Vec<f64> {
    let mut by_step: HashMap<u32, usize> = HashMap::new();
    for a in trajectory.achievements() {
        *by_step.entry(a.step).or_default() += 1;
    }
    let mut count = 0;
    (1..=window)
        .map(|step| {
            count += by_step.get(&step).copied().unwrap_or_default();
            if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            }
        })
        .collect()
}

/// Mean GC at each step, averaged over trials within a room and then over
/// rooms. Episodes that ended early hold their final value.
pub fn gc_curve(runs: &[(&Trajectory, usize)], window: u32) -> Vec<CurvePoint> {
    let mut by_room: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for (t, total) in runs {
        by_room
            .entry(t.header.room_id.as_str())
            .or_default()
            .push(gc_prefix(t, *total, window));
    }
    (0..window as usize)
        .map(|i| CurvePoint {
            step: i as u32 + 1,
            gc: mean(by_room.values().map(|curves| mean(curves.iter().map(|c| c[i])))),
        })
        .collect()
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,mean_gc\n");
    for p in curve {
        let _ = writeln!(out, "{},{:.6}", p.step, p.gc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepetitionKey {
    /// Same action from the same scene.
    #[default]
    SceneAction,
    ActionOnly,
}

pub const REPETITION_LABELS: [&str; 9] = ["2", "3", "4", "5", "6", "7", "8", "9", "10+"];

/// Share of all actions that belong to a pair repeated `n` times, for
/// `n` in 2..=9 and 10 or more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionHistogram {
    pub key: RepetitionKey,
    pub ratios: [f64; 9],
}

impl RepetitionHistogram {
    pub fn bucket(&self, label: &str) -> Option<f64> {
        REPETITION_LABELS
            .iter()
            .position(|l| *l == label)
            .map(|i| self.ratios[i])
    }

    pub fn total(&self) -> f64 {
        self.ratios.iter().sum()
    }
}

pub fn repetition_histogram(trajectory: &Trajectory, key: RepetitionKey) -> RepetitionHistogram {
    let mut counts: HashMap<(&str, &str), u32> = HashMap::new();
    for s in &trajectory.steps {
        let scene = match key {
            RepetitionKey::SceneAction => s.scene_key.as_str(),
            RepetitionKey::ActionOnly => "",
        };
        *counts.entry((scene, s.action.as_str())).or_default() += 1;
    }
    let total = trajectory.steps.len();
    let mut ratios = [0.0; 9];
    if total > 0 {
        for &c in counts.values().filter(|c| **c >= 2) {
            let idx = (c.min(10) - 2) as usize;
            ratios[idx] += c as f64 / total as f64;
        }
    }
    RepetitionHistogram { key, ratios }
}

/// Mean histogram: per-room means over trajectories, then over rooms.
pub fn mean_repetition(trajectories: &[&Trajectory], key: RepetitionKey) -> RepetitionHistogram {
    let mut by_room: BTreeMap<&str, Vec<RepetitionHistogram>> = BTreeMap::new();
    for t in trajectories {
        by_room
            .entry(t.header.room_id.as_str())
            .or_default()
            .push(repetition_histogram(t, key));
    }
    let mut ratios = [0.0; 9];
    for (i, r) in ratios.iter_mut().enumerate() {
        *r = mean(by_room.values().map(|hs| mean(hs.iter().map(|h| h.ratios[i]))));
    }
    RepetitionHistogram { key, ratios }
}

fn contains_word(haystack: &str, phrase: &str) -> bool {
    let phrase = phrase.trim();
    if phrase.is_empty() {
        return false;
    }
    let words: Vec<String> = phrase.split_whitespace().map(regex::escape).collect();
    let pattern = format!(r"(?i)\b{}\b", words.join(r"\s+"));
    Regex::new(&pattern).is_ok_and(|re| re.is_match(haystack))
}

/// True iff every visible object is named (by id or alias) and no object is
/// described in a state other than its own. A caption that names a wrong
/// state word is still accepted if it also names the true one.
pub fn caption_accuracy(caption: &str, ground_truth: &[VisibleObject]) -> bool {
    ground_truth.iter().all(|obj| {
        let named = contains_word(caption, &obj.id) || obj.aliases.iter().any(|a| contains_word(caption, a));
        let contradicted = match &obj.state {
            Some(state) if !contains_word(caption, state) => obj
                .states
                .iter()
                .filter(|s| *s != state)
                .any(|s| contains_word(caption, s)),
            _ => false,
        };
        named && !contradicted
    })
}

/// Scenes the oracle acts from: the views an agent must see to escape.
pub fn essential_scenes(spec: &RoomSpec) -> BTreeSet<String> {
    replay_oracle(spec).visited_scenes.into_iter().collect()
}

/// Fraction of `essential` scenes acted from within the first `window` steps.
pub fn essential_scene_coverage(trajectory: &Trajectory, essential: &BTreeSet<String>, window: u32) -> f64 {
    if essential.is_empty() {
        return 0.0;
    }
    let seen: BTreeSet<&str> = trajectory
        .steps
        .iter()
        .take(window as usize)
        .map(|s| s.scene_key.as_str())
        .collect();
    let covered = essential.iter().filter(|s| seen.contains(s.as_str())).count();
    covered as f64 / essential.len() as f64
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

impl MetricsReport {
    /// Text table with one row per room and an overall row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "room", "n", "SR", "GC", "SPL", "Steps", "HCR"
        );
        let row = |out: &mut String, name: &str, s: &Summary| {
            let _ = writeln!(
                out,
                "{:<12} {:>4} {:>7} {:>7} {:>7} {:>7.1} {:>7}",
                name,
                s.episodes,
                pct(s.sr),
                pct(s.gc),
                pct(s.spl),
                s.steps,
                s.hcr.map(pct).unwrap_or_else(|| "-".into()),
            );
        };
        for (room, s) in &self.rooms {
            row(&mut out, room, s);
        }
        row(&mut out, "overall", &self.overall);
        out
    }
}
