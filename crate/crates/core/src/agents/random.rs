//! Uniform random baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Agent, AgentError, Decision, DecisionContext};
use crate::engine::ANSWER_SLOT;

/// Picks uniformly among the available actions. Choosing the answer slot
/// enters a random four-digit code.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// Index into `n` options.
    pub fn pick(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        format!("random(seed={})", self.seed)
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, AgentError> {
        let actions = &ctx.observation.available_actions;
        if actions.is_empty() {
            return Err(AgentError::Malformed("no available actions".into()));
        }
        let chosen = &actions[self.pick(actions.len())];
        if chosen == ANSWER_SLOT {
            let code: u32 = self.rng.random_range(0..10_000);
            return Ok(Decision::act(format!("<ANSWER>{code:04}</ANSWER>")));
        }
        Ok(Decision::act(chosen.clone()))
    }
}
