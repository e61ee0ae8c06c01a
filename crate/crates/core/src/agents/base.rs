//! Plain chat-model agent: recent history in, one action out.

use super::chat::{ChatModel, ChatRequest};
use super::parse::{parse_action_only, parse_react};
use super::prompts::{self, action_list, hint_text, initial_prompt, puzzle_text};
use super::{Agent, AgentError, Decision, DecisionContext, Outcome};
use crate::engine::Observation;

/// Observation/action pairs embedded in the prompt.
pub const HISTORY_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryPair {
    pub observation: String,
    pub action: String,
}

pub fn observation_line(obs: &Observation) -> String {
    format!("{} side of room - {}", obs.direction, obs.description())
}

/// The prompt for one decision. An empty history gives the initial-step
/// prompt; otherwise the last [`HISTORY_WINDOW`] pairs are embedded, oldest
/// first.
pub fn build_prompt(history: &[HistoryPair], obs: &Observation, hint: Option<&str>) -> String {
    let available = action_list(&obs.available_actions);
    let desc = obs.description();
    let direction = obs.direction.to_string();
    if history.is_empty() {
        return prompts::REACT_INITIAL.fill(&[
            ("initial_prompt", &initial_prompt()),
            ("direction", &direction),
            ("current_scene_desc", &desc),
            ("available_actions", &available),
        ]);
    }
    let start = history.len().saturating_sub(HISTORY_WINDOW);
    let lines: Vec<String> = history[start..]
        .iter()
        .map(|p| format!("Observation: {}\nAction: {}", p.observation, p.action))
        .collect();
    prompts::BASE.fill(&[
        ("initial_prompt", &initial_prompt()),
        ("history", &format!("\n{}\n", lines.join("\n"))),
        ("direction", &direction),
        ("current_scene_desc", &desc),
        ("available_actions", &available),
        ("puzzle_text", &puzzle_text(obs.puzzle_mode)),
        ("hint_guideline_text", &hint_text(hint)),
    ])
}

pub struct BaseAgent<M> {
    chat: M,
    model: String,
    temperature: Option<f32>,
    history: Vec<HistoryPair>,
}

impl<M: ChatModel> BaseAgent<M> {
    pub fn new(chat: M, model: impl Into<String>, temperature: Option<f32>) -> Self {
        BaseAgent {
            chat,
            model: model.into(),
            temperature,
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[HistoryPair] {
        &self.history
    }

    fn ask(&self, prompt: String) -> Result<String, AgentError> {
        let request = ChatRequest::single(&self.model, prompt, self.temperature);
        Ok(self.chat.complete(&request)?.text)
    }
}

impl<M: ChatModel> Agent for BaseAgent<M> {
    fn name(&self) -> String {
        format!("base({})", self.model)
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, AgentError> {
        let prompt = build_prompt(&self.history, ctx.observation, ctx.hint);
        for _ in 0..2 {
            let text = self.ask(prompt.clone())?;
            if let Ok(out) = parse_react(&text) {
                return Ok(Decision {
                    action: out.action.to_string(),
                    think: Some(out.think),
                });
            }
        }
        let fallback = ctx
            .observation
            .available_actions
            .first()
            .cloned()
            .ok_or_else(|| AgentError::Malformed("no available actions".into()))?;
        Ok(Decision {
            action: fallback,
            think: Some("(fallback)".into()),
        })
    }

    fn retry(&mut self, ctx: &DecisionContext<'_>, rejected: &str) -> Result<Decision, AgentError> {
        let recent: Vec<String> = self
            .history
            .iter()
            .rev()
            .take(HISTORY_WINDOW)
            .rev()
            .map(|p| format!("Observation: {}\nAction: {}", p.observation, p.action))
            .collect();
        let prompt = prompts::RETRY.fill(&[
            ("initial_prompt", &initial_prompt()),
            ("memory", &recent.join("\n")),
            ("before_action", rejected),
            ("available_actions", &action_list(&ctx.observation.available_actions)),
            ("hint_guideline_text", &hint_text(ctx.hint)),
        ]);
        let text = self.ask(prompt)?;
        let action = parse_action_only(&text).map_err(|e| AgentError::Malformed(e.to_string()))?;
        Ok(Decision::act(action.to_string()))
    }

    fn observe(&mut self, outcome: &Outcome<'_>) -> Result<Option<String>, AgentError> {
        self.history.push(HistoryPair {
            observation: observation_line(outcome.before),
            action: outcome.action.to_string(),
        });
        Ok(None)
    }
}
