use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use escape_cli::manifest::{AgentKind, AgentSpec, RunManifest};
use escape_cli::run::{run_manifest, trial_path, RunOptions, RunReport};
use escape_core::{ExperimentConfig, Trajectory};
use serde_json::Value;

fn rooms_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../rooms")
}

fn escape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escape"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn broken_oracle_room(dir: &Path) -> PathBuf {
    let mut room: Value =
        serde_json::from_str(&std::fs::read_to_string(rooms_dir().join("room01.json")).unwrap()).unwrap();
    room["room_id"] = "broken".into();
    room["oracle"][1] = "inspect trapdoor".into();
    let path = dir.join("broken.json");
    std::fs::write(&path, serde_json::to_string_pretty(&room).unwrap()).unwrap();
    path
}

#[test]
fn validate_accepts_the_sample_rooms() {
    let dir = rooms_dir();
    let files: Vec<String> = ["room01", "room02", "room03"]
        .iter()
        .map(|r| dir.join(format!("{r}.json")).display().to_string())
        .collect();
    let args: Vec<&str> = std::iter::once("validate").chain(files.iter().map(String::as_str)).collect();
    let out = escape(&args);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("3 of 3 room files valid"));
}

#[test]
fn validate_lists_only_the_invalid_files() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = broken_oracle_room(tmp.path());
    let garbage = tmp.path().join("garbage.json");
    std::fs::write(&garbage, "{\"room_id\": ").unwrap();
    let good = rooms_dir().join("room02.json");
    let out = escape(&[
        "validate",
        good.to_str().unwrap(),
        broken.to_str().unwrap(),
        garbage.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(!text.contains("room02.json"), "{text}");
    assert!(text.contains("FAIL") && text.contains("broken.json"), "{text}");
    assert!(text.contains("oracle fails at index 1"), "{text}");
    assert!(text.contains("garbage.json"), "{text}");
    assert!(text.contains("1 of 3 room files valid"), "{text}");
}

#[test]
fn scenes_lists_every_reachable_scene() {
    let room = rooms_dir().join("room03.json");
    let out = escape(&["scenes", room.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 33);
    assert!(!text.contains("<missing>"));
    let out = escape(&["scenes", "--missing", room.to_str().unwrap()]);
    assert!(stdout(&out).is_empty());
}

fn manifest(kind: AgentKind, out: &Path, trials: u32) -> RunManifest {
    RunManifest {
        config: ExperimentConfig {
            trials_per_room: trials,
            ..ExperimentConfig::default()
        },
        rooms: vec![rooms_dir()],
        agent: AgentSpec::new(kind),
        out: out.to_path_buf(),
        seed: 7,
    }
}

#[test]
fn missing_room_fails_before_any_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = manifest(AgentKind::Random, tmp.path(), 1);
    m.rooms = vec![rooms_dir().join("room01.json"), rooms_dir().join("room09.json")];
    let err = run_manifest(&m, &RunOptions::default()).unwrap_err();
    assert!(format!("{err:#}").contains("room09.json"), "{err:#}");
    assert!(!trial_path(tmp.path(), "room01", 0).exists());
}

#[test]
fn invalid_room_fails_before_any_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = broken_oracle_room(tmp.path());
    let out = tmp.path().join("out");
    let mut m = manifest(AgentKind::Random, &out, 1);
    m.rooms = vec![rooms_dir().join("room01.json"), broken];
    assert!(run_manifest(&m, &RunOptions::default()).is_err());
    assert!(!trial_path(&out, "room01", 0).exists());
}

#[test]
fn model_agents_need_an_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let err = run_manifest(&manifest(AgentKind::Modular, tmp.path(), 1), &RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("endpoint"), "{err}");
}

fn files(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut list = Vec::new();
    for room in ["room01", "room02", "room03"] {
        for trial in 0..2 {
            let p = trial_path(out, room, trial);
            list.push((p.display().to_string(), std::fs::read(&p).unwrap()));
        }
    }
    for name in ["report.json", "report.txt", "gc_curve.csv"] {
        list.push((name.into(), std::fs::read(out.join(name)).unwrap()));
    }
    list
}

#[test]
fn random_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_manifest(&manifest(AgentKind::Random, a.path(), 2), &RunOptions::default()).unwrap();
    let second = run_manifest(&manifest(AgentKind::Random, b.path(), 2), &RunOptions::default()).unwrap();
    assert_eq!(first.ran, 6);
    assert_eq!(first.report, second.report);
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().map(|(_, bytes)| bytes).collect::<Vec<_>>();
    assert_eq!(strip(files(a.path())), strip(files(b.path())));

    let traj0 = Trajectory::from_jsonl(&std::fs::read_to_string(trial_path(a.path(), "room01", 0)).unwrap()).unwrap();
    let traj1 = Trajectory::from_jsonl(&std::fs::read_to_string(trial_path(a.path(), "room01", 1)).unwrap()).unwrap();
    assert_eq!((traj0.header.seed, traj1.header.seed), (7, 8));
    assert_ne!(traj0.steps, traj1.steps, "trials use different seeds");
}

#[test]
fn interrupted_runs_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(AgentKind::Random, tmp.path(), 2);
    let full = run_manifest(&m, &RunOptions::default()).unwrap();
    let before = files(tmp.path());

    // Lose one finished trial and leave a half-written one behind.
    std::fs::remove_file(trial_path(tmp.path(), "room02", 1)).unwrap();
    let partial = trial_path(tmp.path(), "room03", 0).with_extension("jsonl.part");
    std::fs::write(&partial, "{\"garbage\": true}\n").unwrap();
    let again = run_manifest(&m, &RunOptions::default()).unwrap();
    assert_eq!((again.ran, again.resumed), (1, 5));
    assert_eq!(again.report, full.report);
    assert_eq!(files(tmp.path()), before);
}

#[test]
fn out_dir_from_another_agent_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    run_manifest(&manifest(AgentKind::Scripted, tmp.path(), 1), &RunOptions::default()).unwrap();
    let err = run_manifest(&manifest(AgentKind::Random, tmp.path(), 1), &RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("another output directory"), "{err}");
}

#[test]
fn scripted_agent_solves_every_room() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_manifest(&manifest(AgentKind::Scripted, tmp.path(), 1), &RunOptions::default()).unwrap();
    let overall = &summary.report.report.overall;
    assert_eq!((overall.sr, overall.gc, overall.spl), (1.0, 1.0, 1.0));
    let csv = std::fs::read_to_string(tmp.path().join("gc_curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,mean_gc"));
    assert_eq!(csv.lines().count(), 101);
    let report: RunReport =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.episodes.len(), 3);
    assert!(report.scene_coverage.values().all(|c| *c == 1.0));
}

#[test]
fn manifest_file_drives_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = serde_json::json!({
        "config": {"mode": "exp_hint", "trials_per_room": 1},
        "rooms": [rooms_dir().join("room01.json")],
        "agent": {"kind": "modular", "endpoint": "scripted", "model": "stand-in"},
        "out": "results",
        "seed": 3
    });
    let path = tmp.path().join("run.json");
    std::fs::write(&path, manifest.to_string()).unwrap();
    let out = escape(&["run", "--manifest", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("modular(stand-in)") && text.contains("exp_hint"), "{text}");
    assert!(text.contains("room01") && text.contains("100.0"), "{text}");
    assert!(tmp.path().join("results/room01/trial0.jsonl").exists());

    let out = escape(&["run", "--manifest", path.to_str().unwrap(), "--no-memory", "--out", tmp.path().join("ablate").to_str().unwrap()]);
    assert!(out.status.success());
    let report: RunReport =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("ablate/report.json")).unwrap()).unwrap();
    assert_eq!(report.report.overall.sr, 0.0);
}

#[test]
fn unknown_manifest_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.json");
    std::fs::write(&path, r#"{"rooms": [], "agent": {"kind": "random"}, "out": "o", "trails": 3}"#).unwrap();
    let out = escape(&["run", "--manifest", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

/// A chat endpoint that refuses every call.
fn refusing_endpoint() -> String {
    use axum::http::StatusCode;
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = axum::Router::new().route(
                "/v1/chat/completions",
                axum::routing::post(|| async { (StatusCode::UNAUTHORIZED, "bad key") }),
            );
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{addr}/v1")
}

#[test]
fn endpoint_failures_are_recorded_and_the_run_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = manifest(AgentKind::Base, tmp.path(), 1);
    m.rooms = vec![rooms_dir().join("room01.json"), rooms_dir().join("room02.json")];
    m.agent.endpoint = Some(refusing_endpoint());
    let summary = run_manifest(&m, &RunOptions::default()).unwrap();
    assert_eq!(summary.ran, 2);
    for row in &summary.report.episodes {
        assert_eq!(row.chat_failures as u32, row.metrics.steps, "every step fell back");
        assert!(!row.metrics.success);
    }
    let text = std::fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(text.contains("model call failures: 200 steps in 2 episodes"), "{text}");
    let calls = std::fs::read_to_string(tmp.path().join("calls.jsonl")).unwrap();
    assert_eq!(calls.lines().count(), 200);
    assert!(calls.lines().all(|l| l.contains("\"error\"")));
}
