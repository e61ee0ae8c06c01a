//! Command-line plumbing: room validation, experiment runs, and the HTTP
//! play service. The binary in `main.rs` is a thin clap layer over these.

pub mod manifest;
pub mod run;
pub mod scenes;
pub mod serve;
pub mod validate;

pub use manifest::{AgentKind, AgentSpec, RunManifest};
pub use run::{run_manifest, RunOptions, RunSummary};
pub use validate::{validate_paths, FileReport};
