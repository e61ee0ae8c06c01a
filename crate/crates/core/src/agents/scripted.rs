//! Replays a fixed action list, normally the room's oracle.

use super::{Agent, AgentError, Decision, DecisionContext};
use crate::room::RoomSpec;

#[derive(Debug, Clone)]
pub struct OracleAgent {
    plan: Vec<String>,
    cursor: usize,
}

impl OracleAgent {
    pub fn new(plan: Vec<String>) -> Self {
        OracleAgent { plan, cursor: 0 }
    }

    pub fn for_room(spec: &RoomSpec) -> Self {
        Self::new(spec.oracle.clone())
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> String {
        "scripted".into()
    }

    /// Past the end of the plan the first available action is taken.
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, AgentError> {
        let action = match self.plan.get(self.cursor) {
            Some(a) => a.clone(),
            None => ctx
                .observation
                .available_actions
                .first()
                .cloned()
                .ok_or_else(|| AgentError::Malformed("no available actions".into()))?,
        };
        self.cursor += 1;
        Ok(Decision::act(action))
    }
}
