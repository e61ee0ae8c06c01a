//! Decision makers and the text protocol they speak.
//!
//! The session drives an [`Agent`] one turn at a time: `decide` picks an action
//! for the current observation, `retry` is called once if that action was not
//! available, and `observe` sees the outcome (and may return a feedback
//! analysis that is logged with the step).

pub mod base;
pub mod captioner;
pub mod chat;
pub mod memory;
pub mod mock;
pub mod modular;
pub mod parse;
pub mod prompts;
pub mod random;
pub mod scripted;

use thiserror::Error;

use crate::engine::{Event, Observation};

pub use base::BaseAgent;
pub use chat::{ChatError, ChatModel, ChatRequest, ChatResponse, HttpChatClient};
pub use memory::AgentMemory;
pub use modular::{ModularAgent, ModularConfig};
pub use random::RandomAgent;
pub use scripted::OracleAgent;

/// What an agent sees when asked to act.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub observation: &'a Observation,
    /// Guideline text while a hint is active.
    pub hint: Option<&'a str>,
    /// 1-based index of the step about to be taken.
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub action: String,
    pub think: Option<String>,
}

impl Decision {
    pub fn act(action: impl Into<String>) -> Self {
        Decision {
            action: action.into(),
            think: None,
        }
    }
}

/// An applied step as reported back to the agent.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<'a> {
    pub before: &'a Observation,
    pub action: &'a str,
    pub after: &'a Observation,
    pub events: &'a [Event],
    pub step: u32,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("malformed model output: {0}")]
    Malformed(String),
}

pub trait Agent {
    /// Short label written to trajectory headers.
    fn name(&self) -> String;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, AgentError>;

    /// Called once when the decided action was unparseable or unavailable.
    /// The default gives up, which makes the session fall back.
    fn retry(&mut self, ctx: &DecisionContext<'_>, rejected: &str) -> Result<Decision, AgentError> {
        let _ = (ctx, rejected);
        Err(AgentError::Malformed("no retry strategy".into()))
    }

    /// Returns the feedback analysis for the step, if the agent produces one.
    fn observe(&mut self, outcome: &Outcome<'_>) -> Result<Option<String>, AgentError> {
        let _ = outcome;
        Ok(None)
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, AgentError> {
        (**self).decide(ctx)
    }
    fn retry(&mut self, ctx: &DecisionContext<'_>, rejected: &str) -> Result<Decision, AgentError> {
        (**self).retry(ctx, rejected)
    }
    fn observe(&mut self, outcome: &Outcome<'_>) -> Result<Option<String>, AgentError> {
        (**self).observe(outcome)
    }
}
