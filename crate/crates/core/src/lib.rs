//! Escape-room game graph engine and agent evaluation harness.
//!
//! Rooms are declarative JSON documents ([`room`]). The [`engine`] is a pure
//! state machine over them; [`session`] runs episodes with the hint and
//! termination protocol; [`agents`] holds the decision makers and their
//! prompt/response grammars; [`metrics`] scores trajectories.

pub mod agents;
pub mod engine;
pub mod metrics;
pub mod room;
pub mod scene;
pub mod session;
pub mod validate;

pub use engine::{Action, Event, GameState, Observation};
pub use room::{load_room, Direction, RoomError, RoomSpec};
pub use scene::SceneKey;
pub use session::{
    run_episode, Episode, EpisodeMeta, ExperimentConfig, ExperimentMode, TerminationReason, Trajectory,
};
pub use validate::{replay_oracle, validate_room, ReplayResult, ValidationReport};
