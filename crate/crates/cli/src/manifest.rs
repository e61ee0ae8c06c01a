//! Run manifests: which rooms, which agent, where results go.
//!
//! ```json
//! {
//!   "config": {"mode": "exp_base", "trials_per_room": 3},
//!   "rooms": ["../rooms"],
//!   "agent": {"kind": "modular", "endpoint": "http://localhost:8000/v1", "model": "qwen2.5-7b"},
//!   "out": "runs/modular-base",
//!   "seed": 0
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. A room entry may
//! name a directory, meaning every `*.json` file in it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use escape_core::agents::ModularConfig;
use escape_core::session::ExperimentConfig;
use escape_core::{load_room, validate_room, RoomSpec};
use serde::{Deserialize, Serialize};

/// Endpoint value that selects the built-in scripted chat model.
pub const SCRIPTED_ENDPOINT: &str = "scripted";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Uniform choice among available actions.
    Random,
    /// History-window chat agent.
    Base,
    /// Memory, feedback and think-then-act modules.
    Modular,
    /// Replays each room's oracle.
    Scripted,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Random => "random",
            AgentKind::Base => "base",
            AgentKind::Modular => "modular",
            AgentKind::Scripted => "scripted",
        })
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <AgentKind as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub no_memory: bool,
    pub no_exploration_memory: bool,
    pub no_feedback: bool,
    /// Run feedback only after salient actions.
    pub feedback_salient_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub kind: AgentKind,
    /// Chat-completion base URL, or `scripted`. Required for base/modular.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: Option<f32>,
    #[serde(default)]
    pub ablation: Ablation,
}

fn default_model() -> String {
    "default".into()
}

fn default_temperature() -> Option<f32> {
    Some(0.0)
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        AgentSpec {
            kind,
            endpoint: None,
            model: default_model(),
            temperature: default_temperature(),
            ablation: Ablation::default(),
        }
    }

    /// Report label: the kind, plus the model for chat agents.
    pub fn label(&self) -> String {
        match self.kind {
            AgentKind::Base | AgentKind::Modular => format!("{}({})", self.kind, self.model),
            _ => self.kind.to_string(),
        }
    }

    pub fn modular_config(&self) -> ModularConfig {
        ModularConfig {
            model: self.model.clone(),
            temperature: self.temperature,
            memory: !self.ablation.no_memory,
            exploration_memory: !self.ablation.no_exploration_memory,
            feedback: !self.ablation.no_feedback,
            feedback_every_step: !self.ablation.feedback_salient_only,
            ..ModularConfig::default()
        }
    }

    fn check(&self) -> Result<()> {
        if matches!(self.kind, AgentKind::Base | AgentKind::Modular) && self.endpoint.is_none() {
            bail!("agent `{}` needs an endpoint (a chat-completion URL or `{SCRIPTED_ENDPOINT}`)", self.kind);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub config: ExperimentConfig,
    pub rooms: Vec<PathBuf>,
    pub agent: AgentSpec,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut manifest: RunManifest = serde_path_to_error::deserialize(de)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.rooms = manifest.rooms.iter().map(|r| base.join(r)).collect();
        manifest.out = base.join(&manifest.out);
        Ok(manifest)
    }

    /// Checks the config and agent, then loads and validates every room.
    /// Fails before anything runs if any room is missing or invalid.
    pub fn resolve_rooms(&self) -> Result<Vec<RoomSpec>> {
        self.config.validate()?;
        self.agent.check()?;
        let files = expand_room_paths(&self.rooms)?;
        if files.is_empty() {
            bail!("manifest lists no rooms");
        }
        let mut rooms: Vec<RoomSpec> = Vec::with_capacity(files.len());
        for file in files {
            let spec = load_room(&file).with_context(|| format!("loading room {}", file.display()))?;
            let report = validate_room(&spec);
            if !report.is_valid() {
                bail!("room {} is invalid: {}", file.display(), report.problems.join("; "));
            }
            if rooms.iter().any(|r| r.room_id == spec.room_id) {
                bail!("room id `{}` appears twice (second time in {})", spec.room_id, file.display());
            }
            rooms.push(spec);
        }
        Ok(rooms)
    }
}

/// Files for each entry; directories expand to their `*.json` files, sorted.
pub fn expand_room_paths(entries: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in entries {
        if entry.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(entry)
                .with_context(|| format!("listing {}", entry.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            out.extend(found);
        } else if entry.is_file() {
            out.push(entry.clone());
        } else {
            bail!("room file {} does not exist", entry.display());
        }
    }
    Ok(out)
}
