//! Episodes: the agent/engine loop, the hint protocol, termination, and
//! trajectory logs.
//!
//! An [`Episode`] owns the game state of one play-through. The batch runner
//! ([`Episode::run`]) and the HTTP service both drive it through
//! [`Episode::apply`], so human and agent sessions share one code path and one
//! log format.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, DecisionContext, Outcome};
use crate::engine::{
    apply_action, initial_state, render_observation, Action, ActionParseError, EngineError, Event,
    GameState, Observation,
};
use crate::room::RoomSpec;

pub const LOG_SCHEMA: &str = "escape-trajectory/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    ExpBase,
    ExpHint,
}

impl fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentMode::ExpBase => "exp_base",
            ExperimentMode::ExpHint => "exp_hint",
        })
    }
}

impl FromStr for ExperimentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp_base" | "base" => Ok(ExperimentMode::ExpBase),
            "exp_hint" | "hint" => Ok(ExperimentMode::ExpHint),
            other => Err(format!("unknown mode `{other}` (expected exp_base or exp_hint)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub hint_stall_threshold: u32,
    pub no_progress_limit: u32,
    pub step_cap: u32,
    pub trials_per_room: u32,
    pub random_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: ExperimentMode::ExpBase,
            hint_stall_threshold: 30,
            no_progress_limit: 100,
            step_cap: 300,
            trials_per_room: 3,
            random_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid experiment config: {0}")]
pub struct ConfigError(pub String);

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.hint_stall_threshold == 0 || self.trials_per_room == 0 {
            return Err(ConfigError("thresholds and trial count must be positive".into()));
        }
        if self.hint_stall_threshold >= self.no_progress_limit {
            return Err(ConfigError(format!(
                "hint_stall_threshold ({}) must be below no_progress_limit ({})",
                self.hint_stall_threshold, self.no_progress_limit
            )));
        }
        if self.no_progress_limit > self.step_cap {
            return Err(ConfigError(format!(
                "no_progress_limit ({}) must not exceed step_cap ({})",
                self.no_progress_limit, self.step_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Escaped,
    NoProgress,
    StepCap,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::Escaped => "escaped",
            TerminationReason::NoProgress => "no_progress",
            TerminationReason::StepCap => "step_cap",
        })
    }
}

/// `stall` counts steps since the set of achieved checkpoints last changed.
/// Escaping wins over the step cap, which wins over the no-progress limit.
pub fn check_termination(
    steps: u32,
    stall: u32,
    escaped: bool,
    config: &ExperimentConfig,
) -> Option<TerminationReason> {
    if escaped {
        Some(TerminationReason::Escaped)
    } else if steps >= config.step_cap {
        Some(TerminationReason::StepCap)
    } else if stall >= config.no_progress_limit {
        Some(TerminationReason::NoProgress)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintMessage {
    pub checkpoint: String,
    pub text: String,
}

/// Hint for the next decision.
///
/// `active` is the checkpoint targeted by the hint currently shown, if any; it
/// stays targeted until achieved even if some other checkpoint resets the
/// stall counter. Otherwise a hint for the earliest unachieved checkpoint
/// appears once `stall` reaches the threshold. Never fires in `exp_base`.
pub fn hint_controller(
    spec: &RoomSpec,
    state: &GameState,
    stall: u32,
    active: Option<&str>,
    config: &ExperimentConfig,
) -> Option<HintMessage> {
    if config.mode != ExperimentMode::ExpHint || state.escaped {
        return None;
    }
    let message = |id: &str| {
        spec.checkpoint(id).map(|c| HintMessage {
            checkpoint: c.id.clone(),
            text: c.hint.clone(),
        })
    };
    if let Some(id) = active.filter(|id| !state.is_achieved(id)) {
        return message(id);
    }
    if stall < config.hint_stall_threshold {
        return None;
    }
    spec.checkpoints
        .iter()
        .find(|c| !state.is_achieved(&c.id))
        .and_then(|c| message(&c.id))
}

/// Millisecond time source, injectable so logs can be made byte-identical.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or_default()
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub schema: String,
    pub room_id: String,
    pub agent: String,
    pub mode: ExperimentMode,
    pub seed: u64,
    pub trial: u32,
    pub oracle_length: u32,
    pub checkpoint_total: u32,
    pub started_ms: u64,
}

/// One applied step. `scene_key`/`caption` describe the scene the action was
/// taken from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub scene_key: String,
    pub caption: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub think: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint_active: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Event>,
    /// Checkpoints achieved by this step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<String>,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Achievement {
    pub checkpoint: String,
    pub step: u32,
    pub hint_assisted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub reason: TerminationReason,
    pub steps: u32,
    pub escaped: bool,
    pub achievements: Vec<Achievement>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(TrajectoryHeader),
    Step(StepRecord),
    End(EpisodeEnd),
}

impl LogLine {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log lines always serialize")
    }
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Structure { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepRecord>,
    /// Absent for sessions that were abandoned before terminating.
    pub end: Option<EpisodeEnd>,
}

impl Trajectory {
    pub fn to_jsonl(&self) -> String {
        let mut out = LogLine::Header(self.header.clone()).to_line();
        out.push('\n');
        for step in &self.steps {
            out.push_str(&LogLine::Step(step.clone()).to_line());
            out.push('\n');
        }
        if let Some(end) = &self.end {
            out.push_str(&LogLine::End(end.clone()).to_line());
            out.push('\n');
        }
        out
    }

    /// Parses a log, checking the header comes first and steps are contiguous.
    pub fn from_jsonl(text: &str) -> Result<Trajectory, TrajectoryError> {
        Self::read(text.as_bytes())
    }

    pub fn read(reader: impl BufRead) -> Result<Trajectory, TrajectoryError> {
        let mut header = None;
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut end = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(&line).map_err(|e| TrajectoryError::Parse {
                line: n,
                message: e.to_string(),
            })?;
            let structure = |message: String| TrajectoryError::Structure { line: n, message };
            if end.is_some() {
                return Err(structure("record after end record".into()));
            }
            match parsed {
                LogLine::Header(h) => {
                    if header.is_some() {
                        return Err(structure("duplicate header".into()));
                    }
                    if h.schema != LOG_SCHEMA {
                        return Err(structure(format!("unsupported schema `{}`", h.schema)));
                    }
                    header = Some(h);
                }
                LogLine::Step(s) => {
                    if header.is_none() {
                        return Err(structure("step before header".into()));
                    }
                    let expected = steps.len() as u32 + 1;
                    if s.step != expected {
                        return Err(structure(format!("expected step {expected}, found {}", s.step)));
                    }
                    steps.push(s);
                }
                LogLine::End(e) => {
                    if header.is_none() {
                        return Err(structure("end before header".into()));
                    }
                    end = Some(e);
                }
            }
        }
        let header = header.ok_or(TrajectoryError::Structure {
            line: 0,
            message: "missing header".into(),
        })?;
        Ok(Trajectory { header, steps, end })
    }

    /// Checkpoint achievements recomputed from the step records.
    pub fn achievements(&self) -> Vec<Achievement> {
        self.steps
            .iter()
            .flat_map(|s| {
                s.checkpoints.iter().map(move |c| Achievement {
                    checkpoint: c.clone(),
                    step: s.step,
                    hint_assisted: s.hint_active.as_deref() == Some(c.as_str()),
                })
            })
            .collect()
    }

    pub fn escaped(&self) -> bool {
        self.end.as_ref().is_some_and(|e| e.escaped)
    }

    pub fn duration_ms(&self) -> u64 {
        match &self.end {
            Some(e) => e.duration_ms,
            None => self.steps.iter().map(|s| s.duration_ms).sum(),
        }
    }
}

/// Identifies an episode in its log header.
#[derive(Debug, Clone, Default)]
pub struct EpisodeMeta {
    pub agent: String,
    pub seed: u64,
    pub trial: u32,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("episode already finished")]
    Finished,
    #[error("cannot parse action `{input}`: {source}")]
    Parse {
        input: String,
        source: ActionParseError,
        available: Vec<String>,
    },
    #[error("action `{action}` is not available here")]
    Unavailable {
        action: String,
        available: Vec<String>,
    },
    #[error(transparent)]
    Engine(EngineError),
    #[error("writing trajectory log: {0}")]
    Io(#[from] io::Error),
}

impl StepError {
    /// Actions the caller could have chosen instead, when the step was rejected.
    pub fn available(&self) -> Option<&[String]> {
        match self {
            StepError::Parse { available, .. } | StepError::Unavailable { available, .. } => {
                Some(available)
            }
            _ => None,
        }
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct AppliedStep {
    pub step: u32,
    pub events: Vec<Event>,
    pub newly_achieved: Vec<String>,
    pub observation: Observation,
    pub terminated: Option<TerminationReason>,
}

pub struct Episode {
    spec: Arc<RoomSpec>,
    config: ExperimentConfig,
    limits: bool,
    state: GameState,
    stall: u32,
    hint: Option<HintMessage>,
    header: TrajectoryHeader,
    records: Vec<StepRecord>,
    end: Option<EpisodeEnd>,
    clock: Arc<dyn Clock>,
    started_ms: u64,
    last_ms: u64,
    sink: Option<Box<dyn Write + Send>>,
    written: usize,
    closed: bool,
}

impl fmt::Debug for Episode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Episode")
            .field("room", &self.spec.room_id)
            .field("steps", &self.records.len())
            .field("end", &self.end)
            .finish_non_exhaustive()
    }
}

impl Episode {
    pub fn new(spec: Arc<RoomSpec>, config: ExperimentConfig, meta: EpisodeMeta, clock: Arc<dyn Clock>) -> Self {
        let now = clock.now_ms();
        let header = TrajectoryHeader {
            schema: LOG_SCHEMA.to_string(),
            room_id: spec.room_id.clone(),
            agent: meta.agent,
            mode: config.mode,
            seed: meta.seed,
            trial: meta.trial,
            oracle_length: spec.oracle.len() as u32,
            checkpoint_total: spec.checkpoints.len() as u32,
            started_ms: now,
        };
        let state = initial_state(&spec);
        Episode {
            spec,
            config,
            limits: true,
            state,
            stall: 0,
            hint: None,
            header,
            records: Vec::new(),
            end: None,
            clock,
            started_ms: now,
            last_ms: now,
            sink: None,
            written: 0,
            closed: false,
        }
    }

    /// Streams log lines to `sink` as the episode progresses. The header is
    /// written immediately.
    pub fn with_sink(mut self, mut sink: Box<dyn Write + Send>) -> io::Result<Self> {
        writeln!(sink, "{}", LogLine::Header(self.header.clone()).to_line())?;
        sink.flush()?;
        self.sink = Some(sink);
        Ok(self)
    }

    /// Disables the step cap and no-progress limit (human play).
    pub fn without_limits(mut self) -> Self {
        self.limits = false;
        self
    }

    pub fn spec(&self) -> &Arc<RoomSpec> {
        &self.spec
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn header(&self) -> &TrajectoryHeader {
        &self.header
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn step_count(&self) -> u32 {
        self.records.len() as u32
    }

    pub fn stall(&self) -> u32 {
        self.stall
    }

    pub fn hint(&self) -> Option<&HintMessage> {
        self.hint.as_ref()
    }

    pub fn end(&self) -> Option<&EpisodeEnd> {
        self.end.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.end.is_some()
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.clock.now_ms().saturating_sub(self.started_ms)
    }

    pub fn observation(&self) -> Result<Observation, EngineError> {
        render_observation(&self.spec, &self.state)
    }

    /// Whether `text` would be accepted as the next action.
    pub fn accepts(&self, text: &str) -> bool {
        !self.is_finished()
            && text
                .parse::<Action>()
                .is_ok_and(|a| apply_action(&self.spec, &self.state, &a).is_ok())
    }

    fn available(&self) -> Vec<String> {
        crate::engine::available_actions(&self.spec, &self.state)
            .iter()
            .map(Action::to_string)
            .collect()
    }

    /// Applies one action. Rejected actions leave the episode untouched and do
    /// not count as steps.
    pub fn apply(
        &mut self,
        text: &str,
        think: Option<String>,
        notes: Vec<String>,
    ) -> Result<AppliedStep, StepError> {
        if self.is_finished() {
            return Err(StepError::Finished);
        }
        let action: Action = text.parse().map_err(|source| StepError::Parse {
            input: text.to_string(),
            source,
            available: self.available(),
        })?;
        let before = self.observation().map_err(StepError::Engine)?;
        let (next, events, newly) = match apply_action(&self.spec, &self.state, &action) {
            Ok(r) => r,
            Err(EngineError::UnavailableAction { action, available }) => {
                return Err(StepError::Unavailable { action, available })
            }
            Err(e) => return Err(StepError::Engine(e)),
        };
        let after = render_observation(&self.spec, &next).map_err(StepError::Engine)?;
        self.flush_pending()?;

        let now = self.clock.now_ms();
        let record = StepRecord {
            step: next.step_count,
            scene_key: before.scene_key,
            caption: before.caption,
            action: action.to_string(),
            think,
            analysis: None,
            hint_active: self.hint.as_ref().map(|h| h.checkpoint.clone()),
            events: events.clone(),
            checkpoints: newly.clone(),
            duration_ms: now.saturating_sub(self.last_ms),
            notes,
        };
        self.last_ms = now;
        self.records.push(record);
        self.state = next;
        self.stall = if newly.is_empty() { self.stall + 1 } else { 0 };

        let terminated = if self.limits {
            check_termination(self.step_count(), self.stall, self.state.escaped, &self.config)
        } else if self.state.escaped {
            Some(TerminationReason::Escaped)
        } else {
            None
        };
        self.hint = match terminated {
            Some(_) => None,
            None => hint_controller(
                &self.spec,
                &self.state,
                self.stall,
                self.hint.as_ref().map(|h| h.checkpoint.as_str()),
                &self.config,
            ),
        };
        if let Some(reason) = terminated {
            let trajectory_so_far = Trajectory {
                header: self.header.clone(),
                steps: self.records.clone(),
                end: None,
            };
            self.end = Some(EpisodeEnd {
                reason,
                steps: self.step_count(),
                escaped: self.state.escaped,
                achievements: trajectory_so_far.achievements(),
                duration_ms: now.saturating_sub(self.started_ms),
            });
        }
        Ok(AppliedStep {
            step: self.step_count(),
            events,
            newly_achieved: newly,
            observation: after,
            terminated,
        })
    }

    /// Attaches the feedback analysis to the latest step, if not yet written.
    pub fn annotate(&mut self, analysis: Option<String>) {
        if self.records.len() > self.written {
            if let Some(last) = self.records.last_mut() {
                last.analysis = analysis;
            }
        }
    }

    pub fn add_note(&mut self, note: String) {
        if self.records.len() > self.written {
            if let Some(last) = self.records.last_mut() {
                last.notes.push(note);
            }
        }
    }

    /// Writes every step record not yet in the log.
    pub fn flush_pending(&mut self) -> io::Result<()> {
        if let Some(sink) = self.sink.as_mut() {
            for record in &self.records[self.written..] {
                writeln!(sink, "{}", LogLine::Step(record.clone()).to_line())?;
            }
            sink.flush()?;
        }
        self.written = self.records.len();
        Ok(())
    }

    /// Flushes pending steps and, if the episode terminated, the end record.
    pub fn close(&mut self) -> io::Result<()> {
        self.flush_pending()?;
        if self.closed {
            return Ok(());
        }
        if let (Some(end), Some(sink)) = (&self.end, self.sink.as_mut()) {
            writeln!(sink, "{}", LogLine::End(end.clone()).to_line())?;
            sink.flush()?;
            self.closed = true;
        }
        Ok(())
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            header: self.header.clone(),
            steps: self.records.clone(),
            end: self.end.clone(),
        }
    }

    pub fn into_trajectory(mut self) -> Result<Trajectory, io::Error> {
        self.close()?;
        Ok(self.trajectory())
    }

    /// Plays the episode to termination with `agent`.
    ///
    /// Unparseable or unavailable choices get one retry, then the first
    /// available action (always a turn) is substituted. Agent errors never
    /// abort the episode; they are noted on the step record.
    pub fn run(mut self, agent: &mut dyn Agent) -> Result<Trajectory, SessionError> {
        while !self.is_finished() {
            let obs = self.observation()?;
            let fallback = obs
                .available_actions
                .first()
                .cloned()
                .expect("non-terminal states always offer actions");
            let hint = self.hint.as_ref().map(|h| h.text.clone());
            let step = self.step_count() + 1;
            let ctx = DecisionContext {
                observation: &obs,
                hint: hint.as_deref(),
                step,
            };
            let mut notes = Vec::new();
            let (chosen, mut think) = match agent.decide(&ctx) {
                Ok(d) => (Some(d.action), d.think),
                Err(e) => {
                    notes.push(format!("agent failure: {e}; substituted `{fallback}`"));
                    (None, None)
                }
            };
            let action = match chosen {
                None => fallback,
                Some(a) if self.accepts(&a) => a,
                Some(rejected) => {
                    notes.push(format!("rejected `{rejected}`"));
                    match agent.retry(&ctx, &rejected) {
                        Ok(d) if self.accepts(&d.action) => {
                            if d.think.is_some() {
                                think = d.think;
                            }
                            d.action
                        }
                        Ok(d) => {
                            notes.push(format!("retry rejected `{}`; substituted `{fallback}`", d.action));
                            fallback
                        }
                        Err(e) => {
                            notes.push(format!("retry failed: {e}; substituted `{fallback}`"));
                            fallback
                        }
                    }
                }
            };
            let applied = self.apply(&action, think, notes).map_err(|e| match e {
                StepError::Io(io) => SessionError::Io(io),
                StepError::Engine(engine) => SessionError::Engine(engine),
                other => SessionError::Internal(other.to_string()),
            })?;
            let outcome = Outcome {
                before: &obs,
                action: &action,
                after: &applied.observation,
                events: &applied.events,
                step: applied.step,
            };
            match agent.observe(&outcome) {
                Ok(analysis) => self.annotate(analysis),
                Err(e) => self.add_note(format!("feedback failure: {e}")),
            }
        }
        Ok(self.into_trajectory()?)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("writing trajectory log: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Internal(String),
}

/// Runs one episode with a frozen clock and no log sink. Equal inputs give
/// equal trajectories.
pub fn run_episode(
    spec: &Arc<RoomSpec>,
    agent: &mut dyn Agent,
    config: &ExperimentConfig,
) -> Result<Trajectory, SessionError> {
    let meta = EpisodeMeta {
        agent: agent.name(),
        seed: config.random_seed,
        trial: 0,
    };
    Episode::new(spec.clone(), config.clone(), meta, Arc::new(ManualClock::new(0))).run(agent)
}
