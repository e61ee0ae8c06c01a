//! The modular agent: structured memory, per-step feedback analysis, and a
//! think-then-act decision step that carries its previous thought forward.

use std::str::FromStr;

use super::base::observation_line;
use super::chat::{ChatError, ChatModel, ChatRequest};
use super::memory::{parse_memory, reconcile, AgentMemory};
use super::parse::{analysis_body, parse_action_only, parse_react, ReactOutput};
use super::prompts::{self, action_list, hint_text, initial_prompt, puzzle_text};
use super::{Agent, AgentError, Decision, DecisionContext, Outcome};
use crate::engine::Action;

/// Fallback analysis when the feedback model returns nothing usable.
pub const NO_CHANGE: &str = "no observable change";
/// Hard cap on analysis length, in words.
pub const ANALYSIS_WORD_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ModularConfig {
    pub model: String,
    pub temperature: Option<f32>,
    /// Off: the decision prompt lists every unique observation instead.
    pub memory: bool,
    /// Off: memory keeps spatial and action sections but drops the
    /// inspected/uninspected lists.
    pub exploration_memory: bool,
    pub feedback: bool,
    /// Off: feedback runs only after salient actions.
    pub feedback_every_step: bool,
    /// Memory is built after this many steps and refreshed at the same interval.
    pub memory_interval: u32,
    /// Logs handed to each memory refresh.
    pub memory_window: usize,
    /// Actions shown under "Recent actions".
    pub recent_actions: usize,
}

impl Default for ModularConfig {
    fn default() -> Self {
        ModularConfig {
            model: "default".into(),
            temperature: Some(0.0),
            memory: true,
            exploration_memory: true,
            feedback: true,
            feedback_every_step: true,
            memory_interval: 10,
            memory_window: 10,
            recent_actions: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub scene: String,
    pub action: String,
    pub analysis: String,
    pub salient: bool,
}

/// Interactions, code answers, and anything that changed the room are salient;
/// turning, inspecting and backing out are not.
pub fn is_salient(action: &str, had_events: bool) -> bool {
    had_events
        || matches!(
            Action::from_str(action),
            Ok(Action::Interact(_) | Action::Answer { .. })
        )
}

pub fn truncate_words(text: &str, limit: usize) -> String {
    text.split_whitespace().take(limit).collect::<Vec<_>>().join(" ")
}

pub struct ModularAgent<M> {
    chat: M,
    config: ModularConfig,
    memory: Option<AgentMemory>,
    logs: Vec<LogEntry>,
    previous: Option<ReactOutput>,
    unique_observations: Vec<String>,
    warnings: Vec<String>,
}

impl<M: ChatModel> ModularAgent<M> {
    pub fn new(chat: M, config: ModularConfig) -> Self {
        ModularAgent {
            chat,
            config,
            memory: None,
            logs: Vec::new(),
            previous: None,
            unique_observations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn memory(&self) -> Option<&AgentMemory> {
        self.memory.as_ref()
    }

    pub fn logs(&self) -> &[LogEntry] {
        &self.logs
    }

    /// Memory parse problems seen so far.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn ask(&self, prompt: String) -> Result<String, ChatError> {
        let request = ChatRequest::single(&self.config.model, prompt, self.config.temperature);
        Ok(self.chat.complete(&request)?.text)
    }

    fn memory_text(&self) -> String {
        if self.config.memory {
            self.memory
                .as_ref()
                .map(|m| m.render(self.config.exploration_memory))
                .unwrap_or_default()
        } else {
            self.unique_observations
                .iter()
                .enumerate()
                .map(|(i, o)| format!("{}. {o}", i + 1))
                .collect::<Vec<_>>()
                .join("\n")
        }
    }

    pub fn decision_prompt(&self, ctx: &DecisionContext<'_>) -> String {
        let obs = ctx.observation;
        let direction = obs.direction.to_string();
        let desc = obs.description();
        let available = action_list(&obs.available_actions);
        if self.logs.is_empty() {
            return prompts::REACT_INITIAL.fill(&[
                ("initial_prompt", &initial_prompt()),
                ("direction", &direction),
                ("current_scene_desc", &desc),
                ("available_actions", &available),
            ]);
        }
        let salient = if self.config.memory {
            self.logs
                .iter()
                .filter(|l| l.salient)
                .map(|l| format!("[{}]-{}", l.action, l.analysis))
                .collect::<Vec<_>>()
                .join("\n")
        } else {
            String::new()
        };
        let start = self.logs.len().saturating_sub(self.config.recent_actions);
        let recent: Vec<String> = self.logs[start..].iter().map(|l| l.action.clone()).collect();
        let previous = self.previous.as_ref().map(ReactOutput::render).unwrap_or_default();
        prompts::REACT.fill(&[
            ("initial_prompt", &initial_prompt()),
            ("memory", &self.memory_text()),
            ("salient_action_history", &salient),
            ("action_history", &action_list(&recent)),
            ("direction", &direction),
            ("current_scene_desc", &desc),
            ("previous_react", &previous),
            ("available_actions", &available),
            ("puzzle_text", &puzzle_text(obs.puzzle_mode)),
            ("hint_guideline_text", &hint_text(ctx.hint)),
        ])
    }

    pub fn retry_prompt(&self, ctx: &DecisionContext<'_>, rejected: &str) -> String {
        prompts::RETRY.fill(&[
            ("initial_prompt", &initial_prompt()),
            ("memory", &self.memory_text()),
            ("before_action", rejected),
            ("available_actions", &action_list(&ctx.observation.available_actions)),
            ("hint_guideline_text", &hint_text(ctx.hint)),
        ])
    }

    pub fn feedback_prompt(before: &str, action: &str, after: &str) -> String {
        prompts::FEEDBACK.fill(&[
            ("initial_prompt", &initial_prompt()),
            ("previous_scene_desc", before),
            ("previous_action", action),
            ("current_scene_desc", after),
        ])
    }

    fn memory_logs(&self) -> String {
        let start = self.logs.len().saturating_sub(self.config.memory_window);
        let entries: Vec<String> = self.logs[start..]
            .iter()
            .map(|l| {
                prompts::MEMORY_LOG_ENTRY.fill(&[
                    ("scene", &l.scene),
                    ("action", &l.action),
                    ("analysis", &l.analysis),
                ])
            })
            .collect();
        format!("\n{}\n", entries.join("\n"))
    }

    pub fn memory_prompt(&self) -> String {
        let logs = self.memory_logs();
        match &self.memory {
            None => prompts::MEMORY_CONSTRUCT.fill(&[
                ("initial_prompt", &initial_prompt()),
                ("last_10_history", &logs),
            ]),
            Some(m) => prompts::MEMORY_UPDATE.fill(&[
                ("initial_prompt", &initial_prompt()),
                ("spatial_memory", &m.serialize()),
                ("last_10_history", &logs),
            ]),
        }
    }

    fn refresh_memory(&mut self) -> Result<(), ChatError> {
        let prompt = self.memory_prompt();
        for _ in 0..2 {
            let text = self.ask(prompt.clone())?;
            match parse_memory(&text) {
                Ok(parsed) => {
                    self.warnings.extend(parsed.warnings);
                    let inspected: Vec<String> = self
                        .logs
                        .iter()
                        .filter_map(|l| match Action::from_str(&l.action) {
                            Ok(Action::Inspect(id)) => Some(id),
                            _ => None,
                        })
                        .collect();
                    self.memory = Some(reconcile(self.memory.as_ref(), parsed.memory, &inspected));
                    return Ok(());
                }
                Err(e) => self.warnings.push(e.to_string()),
            }
        }
        // Two malformed replies: keep whatever memory we had.
        Ok(())
    }

    fn analyze(&self, before: &str, action: &str, after: &str) -> Result<String, ChatError> {
        match self.ask(Self::feedback_prompt(before, action, after)) {
            Ok(text) => {
                let analysis = truncate_words(&analysis_body(&text), ANALYSIS_WORD_LIMIT);
                Ok(if analysis.is_empty() {
                    NO_CHANGE.to_string()
                } else {
                    analysis
                })
            }
            Err(ChatError::EmptyCompletion) => Ok(NO_CHANGE.to_string()),
            Err(e) => Err(e),
        }
    }
}

impl<M: ChatModel> Agent for ModularAgent<M> {
    fn name(&self) -> String {
        let mut name = format!("modular({})", self.config.model);
        if !self.config.memory {
            name.push_str("[no-memory]");
        } else if !self.config.exploration_memory {
            name.push_str("[no-exploration-memory]");
        }
        if !self.config.feedback {
            name.push_str("[no-feedback]");
        }
        name
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, AgentError> {
        let prompt = self.decision_prompt(ctx);
        for _ in 0..2 {
            let text = self.ask(prompt.clone())?;
            if let Ok(out) = parse_react(&text) {
                let decision = Decision {
                    action: out.action.to_string(),
                    think: Some(out.think.clone()),
                };
                self.previous = Some(out);
                return Ok(decision);
            }
        }
        let fallback = ctx
            .observation
            .available_actions
            .first()
            .cloned()
            .ok_or_else(|| AgentError::Malformed("no available actions".into()))?;
        self.previous = fallback.parse().ok().map(|action| ReactOutput {
            think: "(fallback)".into(),
            action,
        });
        Ok(Decision {
            action: fallback,
            think: Some("(fallback)".into()),
        })
    }

    fn retry(&mut self, ctx: &DecisionContext<'_>, rejected: &str) -> Result<Decision, AgentError> {
        let text = self.ask(self.retry_prompt(ctx, rejected))?;
        let action = parse_action_only(&text).map_err(|e| AgentError::Malformed(e.to_string()))?;
        if let Some(prev) = self.previous.as_mut() {
            prev.action = action.clone();
        }
        Ok(Decision::act(action.to_string()))
    }

    fn observe(&mut self, outcome: &Outcome<'_>) -> Result<Option<String>, AgentError> {
        let before = observation_line(outcome.before);
        let after = observation_line(outcome.after);
        for seen in [&before, &after] {
            if !self.unique_observations.contains(seen) {
                self.unique_observations.push(seen.clone());
            }
        }
        let salient = is_salient(outcome.action, !outcome.events.is_empty());
        let wants_feedback = self.config.feedback && (self.config.feedback_every_step || salient);
        let analysis = if wants_feedback {
            Some(self.analyze(
                &outcome.before.description(),
                outcome.action,
                &outcome.after.description(),
            ))
        } else {
            None
        };
        let (analysis, failure) = match analysis {
            None => (None, None),
            Some(Ok(a)) => (Some(a), None),
            Some(Err(e)) => (Some(NO_CHANGE.to_string()), Some(e)),
        };
        self.logs.push(LogEntry {
            scene: outcome.before.description(),
            action: outcome.action.to_string(),
            analysis: analysis.clone().unwrap_or_default(),
            salient,
        });
        if self.config.memory
            && self.config.memory_interval > 0
            && outcome.step % self.config.memory_interval == 0
        {
            self.refresh_memory()?;
        }
        match failure {
            Some(e) => Err(e.into()),
            None => Ok(analysis),
        }
    }
}
