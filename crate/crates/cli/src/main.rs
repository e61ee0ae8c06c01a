use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use escape_cli::manifest::{expand_room_paths, AgentKind, AgentSpec, RunManifest};
use escape_cli::run::{render_text, run_manifest, RunOptions};
use escape_cli::serve::{serve, AppState};
use escape_cli::{scenes, validate};
use escape_core::{load_room, validate_room, ExperimentConfig, ExperimentMode};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "escape", version, about = "Escape-room engine, agent runner and play server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify room files: schema, oracle replay, reachability, captions.
    Validate {
        #[arg(required = true)]
        rooms: Vec<PathBuf>,
        /// Also list the valid files.
        #[arg(short, long)]
        verbose: bool,
    },
    /// Run agents over rooms and write trajectories and a metrics report.
    Run(RunArgs),
    /// List a room's reachable scenes and their captions.
    Scenes {
        room: PathBuf,
        /// Only scenes without a caption.
        #[arg(long)]
        missing: bool,
    },
    /// Serve the session API for interactive play.
    Serve {
        /// Room files or directories.
        #[arg(long, required = true, value_delimiter = ',')]
        rooms: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Where session logs go.
        #[arg(long, default_value = "sessions")]
        logs: PathBuf,
        #[arg(long, default_value = "exp_base")]
        mode: ExperimentMode,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run manifest; flags below override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ExperimentMode>,
    /// Room files or directories.
    #[arg(long, value_delimiter = ',')]
    rooms: Vec<PathBuf>,
    #[arg(long)]
    agent: Option<AgentKind>,
    /// Chat-completion base URL, or `scripted` for the built-in stand-in.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_memory: bool,
    #[arg(long)]
    no_exploration_memory: bool,
    #[arg(long)]
    no_feedback: bool,
    #[arg(long)]
    feedback_salient_only: bool,
    /// Stamp logs with time 0 so reruns are byte-identical.
    #[arg(long)]
    frozen_clock: bool,
}

impl RunArgs {
    fn manifest(self) -> Result<(RunManifest, RunOptions)> {
        let mut manifest = match &self.manifest {
            Some(path) => RunManifest::load(path)?,
            None => {
                let Some(kind) = self.agent else { bail!("either --manifest or --agent is required") };
                let Some(out) = self.out.clone() else { bail!("--out is required without a manifest") };
                RunManifest {
                    config: ExperimentConfig::default(),
                    rooms: Vec::new(),
                    agent: AgentSpec::new(kind),
                    out,
                    seed: 0,
                }
            }
        };
        if let Some(mode) = self.mode {
            manifest.config.mode = mode;
        }
        if !self.rooms.is_empty() {
            manifest.rooms = self.rooms;
        }
        if let Some(kind) = self.agent {
            manifest.agent.kind = kind;
        }
        if let Some(endpoint) = self.endpoint {
            manifest.agent.endpoint = Some(endpoint);
        }
        if let Some(model) = self.model {
            manifest.agent.model = model;
        }
        if let Some(seed) = self.seed {
            manifest.seed = seed;
        }
        if let Some(trials) = self.trials {
            manifest.config.trials_per_room = trials;
        }
        if let Some(out) = self.out {
            manifest.out = out;
        }
        let ablation = &mut manifest.agent.ablation;
        ablation.no_memory |= self.no_memory;
        ablation.no_exploration_memory |= self.no_exploration_memory;
        ablation.no_feedback |= self.no_feedback;
        ablation.feedback_salient_only |= self.feedback_salient_only;
        Ok((
            manifest,
            RunOptions {
                frozen_clock: self.frozen_clock,
            },
        ))
    }
}

fn main() -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Validate { rooms, verbose } => {
            let reports = validate::validate_paths(&rooms);
            let ok = validate::render(&reports, verbose, &mut std::io::stdout())?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Run(args) => {
            let (manifest, options) = args.manifest()?;
            let summary = run_manifest(&manifest, &options)?;
            print!("{}", render_text(&summary.report));
            println!(
                "\n{} episodes run, {} reused; results in {}",
                summary.ran,
                summary.resumed,
                manifest.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenes { room, missing } => {
            let spec = load_room(&room)?;
            let lines = scenes::scene_lines(&spec);
            let absent = scenes::render(&lines, missing, &mut std::io::stdout())?;
            eprintln!("{} scenes, {absent} without captions", lines.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { rooms, addr, logs, mode } => {
            let mut specs = Vec::new();
            for file in expand_room_paths(&rooms)? {
                let spec = load_room(&file).with_context(|| format!("loading {}", file.display()))?;
                let report = validate_room(&spec);
                if !report.is_valid() {
                    bail!("room {} is invalid: {}", file.display(), report.problems.join("; "));
                }
                specs.push(spec);
            }
            std::fs::create_dir_all(&logs).with_context(|| format!("creating {}", logs.display()))?;
            let config = ExperimentConfig {
                mode,
                ..ExperimentConfig::default()
            };
            let state = Arc::new(AppState::new(specs, config, logs));
            tokio::runtime::Runtime::new()?.block_on(serve(addr, state))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
