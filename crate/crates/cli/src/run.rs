//! `escape run`: play every (room, trial) pair of a manifest and score it.
//!
//! Output layout under `out`:
//!
//! ```text
//! manifest.json            resolved manifest
//! <room_id>/trial<k>.jsonl one trajectory log per episode
//! calls.jsonl              chat call log (HTTP endpoints only)
//! report.json              per-episode metrics and aggregates
//! report.txt               the same as a table
//! gc_curve.csv             mean goal completion per step
//! ```
//!
//! Finished trajectories are kept between invocations, so an interrupted run
//! resumes where it stopped. Logs are written to `trial<k>.jsonl.part` and
//! renamed once the episode ends.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use escape_core::agents::mock::ScriptedChatModel;
use escape_core::agents::{Agent, BaseAgent, ChatModel, HttpChatClient, ModularAgent, OracleAgent, RandomAgent};
use escape_core::metrics::{
    aggregate, curve_csv, episode_metrics, essential_scene_coverage, essential_scenes, gc_curve, mean_repetition,
    EpisodeMetrics, MetricsReport, RepetitionKey, DEFAULT_WINDOW, REPETITION_LABELS,
};
use escape_core::session::{Clock, ManualClock, SystemClock};
use escape_core::{Episode, EpisodeMeta, RoomSpec, Trajectory};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::manifest::{AgentKind, RunManifest, SCRIPTED_ENDPOINT};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stamp every log with time 0 so reruns are byte-identical. Always on for
    /// the random and scripted agents.
    pub frozen_clock: bool,
}

/// Step notes that record a failed model call.
const FAILURE_NOTES: [&str; 3] = ["agent failure", "retry failed", "feedback failure"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    #[serde(flatten)]
    pub metrics: EpisodeMetrics,
    pub agent: String,
    /// Steps on which a model call failed and a fallback was used.
    pub chat_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub agent: String,
    pub mode: escape_core::ExperimentMode,
    pub seed: u64,
    pub trials_per_room: u32,
    pub report: MetricsReport,
    /// Mean share of oracle scenes seen within the first 100 steps, per room.
    pub scene_coverage: BTreeMap<String, f64>,
    pub episodes: Vec<EpisodeRow>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ran: usize,
    pub resumed: usize,
    pub report: RunReport,
}

pub fn trial_path(out: &Path, room_id: &str, trial: u32) -> PathBuf {
    out.join(room_id).join(format!("trial{trial}.jsonl"))
}

fn part_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".part");
    PathBuf::from(s)
}

struct AgentFactory {
    kind: AgentKind,
    spec: crate::manifest::AgentSpec,
    http: Option<Arc<dyn ChatModel>>,
}

impl AgentFactory {
    fn new(manifest: &RunManifest) -> Result<Self> {
        let spec = manifest.agent.clone();
        let http: Option<Arc<dyn ChatModel>> = match spec.endpoint.as_deref() {
            Some(url) if url != SCRIPTED_ENDPOINT && matches!(spec.kind, AgentKind::Base | AgentKind::Modular) => {
                let client = HttpChatClient::new(url)
                    .with_context(|| format!("setting up chat client for {url}"))?
                    .call_log(&manifest.out.join("calls.jsonl"))
                    .context("opening chat call log")?;
                Some(Arc::new(client))
            }
            _ => None,
        };
        Ok(AgentFactory {
            kind: spec.kind,
            spec,
            http,
        })
    }

    fn chat(&self, room: &RoomSpec) -> Arc<dyn ChatModel> {
        match &self.http {
            Some(c) => c.clone(),
            None => Arc::new(ScriptedChatModel::from_room(room)),
        }
    }

    fn build(&self, room: &RoomSpec, seed: u64) -> Box<dyn Agent> {
        match self.kind {
            AgentKind::Random => Box::new(RandomAgent::new(seed)),
            AgentKind::Scripted => Box::new(OracleAgent::for_room(room)),
            AgentKind::Base => Box::new(BaseAgent::new(self.chat(room), self.spec.model.clone(), self.spec.temperature)),
            AgentKind::Modular => Box::new(ModularAgent::new(self.chat(room), self.spec.modular_config())),
        }
    }
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Trajectory::from_jsonl(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Runs whatever episodes are missing from `manifest.out`, then scores all of
/// them. Every room is loaded and validated before the first episode starts.
pub fn run_manifest(manifest: &RunManifest, options: &RunOptions) -> Result<RunSummary> {
    let rooms = manifest.resolve_rooms()?;
    let mut config = manifest.config.clone();
    config.random_seed = manifest.seed;
    fs::create_dir_all(&manifest.out).with_context(|| format!("creating {}", manifest.out.display()))?;
    fs::write(
        manifest.out.join("manifest.json"),
        serde_json::to_string_pretty(manifest).expect("manifest serializes"),
    )?;

    let factory = AgentFactory::new(manifest)?;
    let frozen = options.frozen_clock || matches!(manifest.agent.kind, AgentKind::Random | AgentKind::Scripted);
    let clock: Arc<dyn Clock> = if frozen {
        Arc::new(ManualClock::new(0))
    } else {
        Arc::new(SystemClock)
    };

    let (mut ran, mut resumed) = (0, 0);
    let rooms: Vec<Arc<RoomSpec>> = rooms.into_iter().map(Arc::new).collect();
    for room in &rooms {
        fs::create_dir_all(manifest.out.join(&room.room_id))?;
        for trial in 0..config.trials_per_room {
            let seed = manifest.seed.wrapping_add(trial as u64);
            let mut agent = factory.build(room, seed);
            let name = agent.name();
            let path = trial_path(&manifest.out, &room.room_id, trial);
            if path.exists() {
                let done = read_trajectory(&path)?;
                let h = &done.header;
                if h.agent != name || h.mode != config.mode || h.seed != seed {
                    bail!(
                        "{} holds a {} run of `{}` (seed {}); this manifest runs {} with `{}` (seed {}). Use another output directory.",
                        path.display(),
                        h.mode,
                        h.agent,
                        h.seed,
                        config.mode,
                        name,
                        seed
                    );
                }
                if done.end.is_some() {
                    resumed += 1;
                    continue;
                }
            }
            let part = part_path(&path);
            let sink = BufWriter::new(File::create(&part).with_context(|| format!("creating {}", part.display()))?);
            let meta = EpisodeMeta { agent: name, seed, trial };
            let episode = Episode::new(room.clone(), config.clone(), meta, clock.clone()).with_sink(Box::new(sink))?;
            let trajectory = episode
                .run(agent.as_mut())
                .with_context(|| format!("running {} trial {trial}", room.room_id))?;
            fs::rename(&part, &path)?;
            let failures = chat_failures(&trajectory);
            if failures > 0 {
                warn!(room = %room.room_id, trial, failures, "model calls failed during episode");
            }
            let end = trajectory.end.as_ref().expect("run ends episodes");
            info!(room = %room.room_id, trial, steps = end.steps, reason = %end.reason, "episode finished");
            ran += 1;
        }
    }

    let report = score(&rooms, &manifest.out, &config, manifest)?;
    write_outputs(&manifest.out, &report)?;
    Ok(RunSummary { ran, resumed, report })
}

fn chat_failures(trajectory: &Trajectory) -> usize {
    trajectory
        .steps
        .iter()
        .filter(|s| s.notes.iter().any(|n| FAILURE_NOTES.iter().any(|f| n.starts_with(f))))
        .count()
}

fn score(
    rooms: &[Arc<RoomSpec>],
    out: &Path,
    config: &escape_core::ExperimentConfig,
    manifest: &RunManifest,
) -> Result<RunReport> {
    let mut rows = Vec::new();
    let mut trajectories: Vec<(Trajectory, usize)> = Vec::new();
    let mut scene_coverage = BTreeMap::new();
    for room in rooms {
        let essential = essential_scenes(room);
        let mut coverage = Vec::new();
        for trial in 0..config.trials_per_room {
            let trajectory = read_trajectory(&trial_path(out, &room.room_id, trial))?;
            let metrics = episode_metrics(&trajectory, room)?;
            coverage.push(essential_scene_coverage(&trajectory, &essential, DEFAULT_WINDOW));
            rows.push(EpisodeRow {
                metrics,
                agent: trajectory.header.agent.clone(),
                chat_failures: chat_failures(&trajectory),
            });
            trajectories.push((trajectory, room.checkpoints.len()));
        }
        scene_coverage.insert(room.room_id.clone(), coverage.iter().sum::<f64>() / coverage.len() as f64);
    }
    let episodes: Vec<EpisodeMetrics> = rows.iter().map(|r| r.metrics.clone()).collect();
    let mut report = aggregate(&episodes)?;
    let runs: Vec<(&Trajectory, usize)> = trajectories.iter().map(|(t, n)| (t, *n)).collect();
    report.gc_curve = gc_curve(&runs, DEFAULT_WINDOW);
    let all: Vec<&Trajectory> = trajectories.iter().map(|(t, _)| t).collect();
    report.repetition = Some(mean_repetition(&all, RepetitionKey::SceneAction));
    Ok(RunReport {
        agent: manifest.agent.label(),
        mode: config.mode,
        seed: manifest.seed,
        trials_per_room: config.trials_per_room,
        report,
        scene_coverage,
        episodes: rows,
    })
}

pub fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "agent {}  mode {}  seed {}  trials/room {}\n",
        report.agent, report.mode, report.seed, report.trials_per_room
    );
    out.push_str(&report.report.render_table());
    let overall = &report.report.overall;
    let _ = writeln!(
        out,
        "\nanswers per episode: {:.1} attempted, {:.1} wrong",
        overall.answer_attempts, overall.wrong_answers
    );
    if let Some(rep) = &report.report.repetition {
        let cells: Vec<String> = REPETITION_LABELS
            .iter()
            .zip(rep.ratios.iter())
            .map(|(label, r)| format!("{label}:{:.1}%", r * 100.0))
            .collect();
        let _ = writeln!(out, "repeated scene/action pairs: {}", cells.join(" "));
    }
    let coverage: Vec<String> = report
        .scene_coverage
        .iter()
        .map(|(room, c)| format!("{room} {:.1}%", c * 100.0))
        .collect();
    let _ = writeln!(out, "oracle scenes seen in first {DEFAULT_WINDOW} steps: {}", coverage.join(", "));
    let failures: usize = report.episodes.iter().map(|e| e.chat_failures).sum();
    if failures > 0 {
        let hit = report.episodes.iter().filter(|e| e.chat_failures > 0).count();
        let _ = writeln!(out, "model call failures: {failures} steps in {hit} episodes");
    }
    out
}

fn write_outputs(out: &Path, report: &RunReport) -> Result<()> {
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    )?;
    fs::write(out.join("report.txt"), render_text(report))?;
    fs::write(out.join("gc_curve.csv"), curve_csv(&report.report.gc_curve))?;
    Ok(())
}
