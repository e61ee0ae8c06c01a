//! Acceptance run: each primary criterion as one check, one output line each.
//!
//! Built with `harness = false`, so `cargo test` prints the lines even when
//! everything passes, and the binary exits non-zero if any check fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{captioned, rooms_dir, sample, LEVER_ROOM, SAMPLE_ROOMS, SWITCH_ROOM};
use escape_cli::manifest::{AgentKind, AgentSpec, RunManifest, SCRIPTED_ENDPOINT};
use escape_cli::run::{run_manifest, trial_path, RunOptions, RunSummary};
use escape_cli::validate::validate_paths;
use escape_core::agents::base::{build_prompt, HistoryPair, HISTORY_WINDOW};
use escape_core::agents::memory::{parse_memory, AgentMemory, MemoryParseError, ObjectNotes, WallMemory};
use escape_core::agents::parse::{parse_react, ReactParseError};
use escape_core::engine::{initial_state, render_observation, step, VisibleObject};
use escape_core::metrics::{
    caption_accuracy, episode_metrics, essential_scene_coverage, essential_scenes, repetition_histogram,
    RepetitionKey,
};
use escape_core::session::{
    check_termination, EpisodeEnd, ExperimentConfig, ExperimentMode, ManualClock, StepRecord, TerminationReason,
    Trajectory, TrajectoryHeader, LOG_SCHEMA,
};
use escape_core::{Action, Episode, EpisodeMeta, RoomSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err(e: impl std::fmt::Display) -> String {
    format!("{e:#}")
}

fn run(kind: AgentKind, out: &Path, rooms: Vec<PathBuf>, trials: u32, edit: impl FnOnce(&mut RunManifest)) -> Result<RunSummary, String> {
    let mut manifest = RunManifest {
        config: ExperimentConfig { trials_per_room: trials, ..ExperimentConfig::default() },
        rooms,
        agent: AgentSpec::new(kind),
        out: out.to_path_buf(),
        seed: 0,
    };
    edit(&mut manifest);
    run_manifest(&manifest, &RunOptions { frozen_clock: true }).map_err(err)
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(err)
}

fn sample_paths() -> Vec<PathBuf> {
    SAMPLE_ROOMS.iter().map(|r| rooms_dir().join(format!("{r}.json"))).collect()
}

fn oracle_solvability() -> Outcome {
    let started = Instant::now();
    for name in SAMPLE_ROOMS {
        let spec = sample(name);
        let code_locks = spec.locks.iter().filter(|l| l.kind.is_code()).count();
        ensure!((5..=6).contains(&spec.receptacles.len()), "{name}: {} receptacles", spec.receptacles.len());
        ensure!((4..=6).contains(&spec.items.len()), "{name}: {} items", spec.items.len());
        ensure!((1..=2).contains(&code_locks), "{name}: {code_locks} code locks");
        ensure!(spec.checkpoints.len() == 8, "{name}: {} checkpoints", spec.checkpoints.len());
    }
    let reports = validate_paths(&sample_paths());
    for r in &reports {
        ensure!(r.is_valid(), "{} fails validation: {:?}", r.path.display(), r.outcome);
    }
    let dir = tempdir()?;
    let summary = run(AgentKind::Scripted, dir.path(), sample_paths(), 1, |_| {})?;
    for row in &summary.report.episodes {
        let m = &row.metrics;
        let oracle = sample(&m.room_id).oracle.len() as u32;
        ensure!(m.success && m.gc == 1.0 && m.spl == 1.0, "{}: success {} gc {} spl {}", m.room_id, m.success, m.gc, m.spl);
        ensure!(m.steps == oracle, "{}: {} steps, oracle {oracle}", m.room_id, m.steps);
    }
    let o = &summary.report.report.overall;
    ensure!((o.sr, o.gc, o.spl) == (1.0, 1.0, 1.0), "overall {o:?}");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{} rooms, SR/GC/SPL 100/100/1.0", reports.len()))
}

fn random_floor() -> Outcome {
    let started = Instant::now();
    let dir = tempdir()?;
    let summary = run(AgentKind::Random, dir.path(), sample_paths(), 10, |_| {})?;
    let o = &summary.report.report.overall;
    ensure!(summary.report.episodes.len() == 10 * SAMPLE_ROOMS.len(), "{} episodes", summary.report.episodes.len());
    let seeds: BTreeSet<u64> = (0..10).collect();
    let used: BTreeSet<u64> = (0..10u32)
        .map(|t| {
            let text = std::fs::read_to_string(trial_path(dir.path(), "room01", t)).unwrap_or_default();
            Trajectory::from_jsonl(&text).map(|t| t.header.seed).unwrap_or(u64::MAX)
        })
        .collect();
    ensure!(used == seeds, "seeds used {used:?}");
    ensure!(o.sr == 0.0, "random SR {}", o.sr);
    ensure!(o.gc < 0.10, "random GC {}", o.gc);
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("SR {:.1}%, GC {:.1}%", o.sr * 100.0, o.gc * 100.0))
}

fn switch_episode(mode: ExperimentMode) -> Episode {
    let config = ExperimentConfig { mode, ..ExperimentConfig::default() };
    Episode::new(Arc::new(captioned(SWITCH_ROOM)), config, EpisodeMeta::default(), Arc::new(ManualClock::new(0)))
}

fn turn(ep: &mut Episode) -> Result<Option<TerminationReason>, String> {
    let target = if ep.step_count() % 2 == 0 { "turn_to_east" } else { "turn_to_north" };
    ep.apply(target, None, Vec::new()).map(|s| s.terminated).map_err(err)
}

fn protocol_exactness() -> Outcome {
    // Hint at stall 30, not before.
    let mut ep = switch_episode(ExperimentMode::ExpHint);
    for _ in 0..29 {
        turn(&mut ep)?;
        ensure!(ep.hint().is_none(), "hint at stall {}", ep.stall());
    }
    turn(&mut ep)?;
    ensure!(ep.hint().is_some_and(|h| h.checkpoint == "first"), "no hint at stall 30");

    // Base mode: no hint, and no-progress at exactly 100.
    let mut ep = switch_episode(ExperimentMode::ExpBase);
    for n in 1..=100u32 {
        let ended = turn(&mut ep)?;
        ensure!(ep.hint().is_none(), "hint in exp_base at step {n}");
        ensure!((ended == Some(TerminationReason::NoProgress)) == (n == 100), "termination {ended:?} at step {n}");
    }

    // Progress every 90 steps keeps the episode alive until the cap.
    let mut ep = switch_episode(ExperimentMode::ExpHint);
    let flips = [(90, "flip first switch"), (180, "flip second switch"), (270, "flip third switch")];
    let (mut last, mut flipped) = (None, 0);
    while !ep.is_finished() {
        let next = ep.step_count() + 1;
        let at_panel = ep.observation().map_err(err)?.scene_key.starts_with("receptacle:panel");
        let due = flips.get(flipped).filter(|f| next >= f.0);
        let action = match (at_panel, due) {
            (true, Some((_, flip))) => {
                flipped += 1;
                *flip
            }
            (true, None) => "back",
            (false, _) => "inspect panel",
        };
        last = ep.apply(action, None, Vec::new()).map_err(err)?.terminated;
    }
    ensure!(ep.step_count() == 300 && last == Some(TerminationReason::StepCap), "ended {last:?} at {}", ep.step_count());
    let config = ExperimentConfig::default();
    ensure!(check_termination(300, 100, true, &config) == Some(TerminationReason::Escaped), "escape must win");
    ensure!(check_termination(300, 100, false, &config) == Some(TerminationReason::StepCap), "cap must win over stall");
    ensure!(check_termination(299, 99, false, &config).is_none(), "early termination");
    Ok("hint@30, no-progress@100, cap@300".into())
}

fn synthetic(spec: &RoomSpec, mode: ExperimentMode, len: u32, marks: &[(u32, &str, Option<&str>)], escaped: bool) -> Trajectory {
    let steps = (1..=len)
        .map(|n| {
            let here: Vec<_> = marks.iter().filter(|m| m.0 == n).collect();
            record(n, "wall:north", if n % 2 == 0 { "turn_to_north" } else { "turn_to_south" }, here.iter().find_map(|m| m.2), here.iter().map(|m| m.1).collect())
        })
        .collect();
    let mut t = Trajectory { header: header(spec, mode), steps, end: None };
    let reason = if escaped { TerminationReason::Escaped } else { TerminationReason::NoProgress };
    t.end = Some(EpisodeEnd { reason, steps: len, escaped, achievements: t.achievements(), duration_ms: 0 });
    t
}

fn header(spec: &RoomSpec, mode: ExperimentMode) -> TrajectoryHeader {
    TrajectoryHeader {
        schema: LOG_SCHEMA.into(),
        room_id: spec.room_id.clone(),
        agent: "synthetic".into(),
        mode,
        seed: 0,
        trial: 0,
        oracle_length: spec.oracle.len() as u32,
        checkpoint_total: spec.checkpoints.len() as u32,
        started_ms: 0,
    }
}

fn record(n: u32, scene: &str, action: &str, hint: Option<&str>, checkpoints: Vec<&str>) -> StepRecord {
    StepRecord {
        step: n,
        scene_key: scene.into(),
        caption: String::new(),
        action: action.into(),
        think: None,
        analysis: None,
        hint_active: hint.map(str::to_string),
        events: Vec::new(),
        checkpoints: checkpoints.into_iter().map(str::to_string).collect(),
        duration_ms: 0,
        notes: Vec::new(),
    }
}

fn metric_formulas() -> Outcome {
    use ExperimentMode::{ExpBase, ExpHint};
    // Switch room: 4 checkpoints, 7-step oracle. (len, marks, escaped, gc, spl, hcr)
    let spec = captioned(SWITCH_ROOM);
    let all = |at: [u32; 4]| vec![(at[0], "first", None), (at[1], "second", None), (at[2], "third", None), (at[3], "out", None)];
    type Case = (ExperimentMode, u32, Vec<(u32, &'static str, Option<&'static str>)>, bool, f64, f64, Option<f64>);
    let cases: Vec<Case> = vec![
        (ExpBase, 7, all([2, 3, 4, 7]), true, 1.0, 1.0, None),
        (ExpBase, 14, all([2, 5, 9, 14]), true, 1.0, 0.5, None),
        (ExpBase, 4, all([1, 2, 3, 4]), true, 1.0, 1.0, None),
        (ExpBase, 21, all([5, 10, 15, 21]), true, 1.0, 1.0 / 3.0, None),
        (ExpBase, 110, vec![(5, "first", None), (10, "second", None)], false, 0.5, 0.0, None),
        (ExpBase, 100, vec![], false, 0.0, 0.0, None),
        (ExpHint, 28, vec![(3, "first", None), (20, "second", Some("second")), (25, "third", None), (28, "out", None)], true, 1.0, 0.25, Some(0.25)),
        (ExpHint, 100, vec![], false, 0.0, 0.0, Some(0.0)),
        (ExpHint, 150, vec![(40, "first", Some("second")), (50, "second", Some("second"))], false, 0.5, 0.0, Some(0.5)),
        (ExpHint, 200, vec![(40, "first", Some("first")), (80, "second", Some("second")), (120, "third", Some("third"))], false, 0.75, 0.0, Some(1.0)),
    ];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    for (i, (mode, len, marks, escaped, gc, spl, hcr)) in cases.iter().enumerate() {
        let m = episode_metrics(&synthetic(&spec, *mode, *len, marks, *escaped), &spec).map_err(err)?;
        ensure!(m.success == *escaped && m.steps == *len, "case {i}: success {} steps {}", m.success, m.steps);
        ensure!(close(m.gc, *gc), "case {i}: gc {} want {gc}", m.gc);
        ensure!(close(m.spl, *spl), "case {i}: spl {} want {spl}", m.spl);
        let hcr_ok = match (m.hcr, hcr) {
            (None, None) => true,
            (Some(a), Some(b)) => close(a, *b),
            _ => false,
        };
        ensure!(hcr_ok, "case {i}: hcr {:?} want {hcr:?}", m.hcr);
    }
    Ok(format!("{} constructed trajectories", cases.len()))
}

fn non_local_effects() -> Outcome {
    let spec = captioned(LEVER_ROOM);
    let s0 = initial_state(&spec);
    let s1 = step(&spec, &s0, &"inspect lever".parse().map_err(err)?).map_err(err)?;
    let s2 = step(&spec, &s1.state, &"pull lever".parse().map_err(err)?).map_err(err)?;
    ensure!(s2.observation.scene_key == s1.observation.scene_key, "view changed: {}", s2.observation.scene_key);
    ensure!(s2.observation.caption == s1.observation.caption, "caption changed");
    ensure!(s1.state.receptacle_states["gate"] == "shut", "gate moved early");
    ensure!(s2.state.receptacle_states["gate"] == "raised", "gate did not move");
    let before = render_observation(&spec, &step(&spec, &s0, &"turn_to_south".parse().map_err(err)?).map_err(err)?.state).map_err(err)?;
    let s3 = step(&spec, &s2.state, &"back".parse().map_err(err)?).map_err(err)?;
    let s4 = step(&spec, &s3.state, &"turn_to_south".parse().map_err(err)?).map_err(err)?;
    ensure!(s4.observation.scene_key != before.scene_key, "south wall looks the same after the remote change");
    Ok("remote gate raised, local view unchanged".into())
}

fn memory_sample(i: usize) -> AgentMemory {
    let mut m = AgentMemory::default();
    for (k, wall) in ["north", "east", "south", "west"].iter().enumerate().take(i % 4 + 1) {
        m.spatial.insert(wall.to_string(), WallMemory { objects: (0..k).map(|j| format!("thing {j}")).collect() });
    }
    if i % 2 == 0 {
        m.inspected.insert("desk".into(), ObjectNotes { state: "locked".into(), characteristics: "oak, four dials".into(), additional_info: format!("tried {i}") });
    }
    m.uninspected = (0..i).map(|j| format!("crate {j}")).collect();
    m.additional = (0..i).map(|j| format!("clue {j}: \"code\" is [{j}{j}]")).collect();
    m
}

fn parser_suite() -> Outcome {
    use ReactParseError::*;
    let react = |think: &str, action: &str| Ok::<_, ReactParseError>((think.to_string(), action.parse::<Action>().expect("fixture action")));
    let answer = |code: &str| Ok::<_, ReactParseError>((String::new(), Action::Answer { code: code.into() }));
    let fixtures: Vec<(&str, Result<(String, Action), ReactParseError>)> = vec![
        ("[THINK] check the desk [ACTION] inspect desk", react("check the desk", "inspect desk")),
        ("[THINK]\nmaybe a drawer\n[ACTION]\nopen drawer", react("maybe a drawer", "open drawer")),
        ("[think]\nlower\n[action]\nturn_to_west", react("lower", "turn_to_west")),
        ("**[THINK]**: bold\n**[ACTION]**: back", react("bold", "back")),
        ("```\n[THINK]\nfenced\n[ACTION]\npick up knife\n```", react("fenced", "pick up knife")),
        ("Sure.\n[THINK] preamble\n[ACTION] inspect painting", react("preamble", "inspect painting")),
        ("[THINK] x\n[ACTION]\n- inspect bread", react("x", "inspect bread")),
        ("[THINK] x\n[ACTION]\n`inspect bread`", react("x", "inspect bread")),
        ("[THINK] x\n[ACTION] Turn to North", react("x", "turn_to_north")),
        ("[THINK] first\n[ACTION]\n[THINK] second\n[ACTION] back", react("second", "back")),
        ("[ACTION] turn_to_east", react("", "turn_to_east")),
        ("[THINK] only thinking", Err(MissingAction)),
        ("", Err(MissingAction)),
        ("[THINK] x\n[ACTION]\n  \n", Err(EmptyAction)),
        ("[THINK] x\n[ACTION] turn_to_up", Err(BadAction(escape_core::engine::ActionParseError::BadDirection("turn_to_up".into())))),
        ("<ANSWER>0000</ANSWER>", answer("0000")),
        ("The code is <ANSWER>2468</ANSWER>.", answer("2468")),
        ("<answer>Lion</answer>", answer("Lion")),
        ("<ANSWER> 3719 </ANSWER>", answer("3719")),
        ("[ACTION] <ANSWER>ROAST</ANSWER>", answer("ROAST")),
        ("[THINK] x\n[ACTION] <ANSWER></ANSWER>", Err(MalformedAnswer)),
        ("[THINK] x\n[ACTION] <ANSWER>1234", Err(MalformedAnswer)),
    ];
    for (text, want) in &fixtures {
        let got = parse_react(text).map(|o| (o.think, o.action));
        ensure!(&got == want, "{text:?}: got {got:?}, want {want:?}");
    }
    let memory_fixtures: Vec<(&str, Result<(usize, usize, usize, usize), MemoryParseError>)> = vec![
        ("[SPATIAL MEMORY] {\"north\": {\"objects\": [\"desk\"]}}\n[INSPECTED OBJECTS] []\n[UNINSPECTED OBJECTS] [\"desk\"]\n[ADDITIONAL MEMORY] []", Ok((1, 0, 1, 0))),
        ("**[SPATIAL MEMORY]**: {\"North\": [\"Desk\", \"Safe\"]}\n[inspected objects] {\"desk\": \"heavy\"}\n[Uninspected Objects] safe\n[ADDITIONAL MEMORY] [1. a, 2. b]", Ok((1, 1, 1, 2))),
        ("Here you go:\n[SPATIAL MEMORY] {}\n[INSPECTED OBJECTS] [{\"safe\": {\"state\": \"open\"}}]\n[UNINSPECTED OBJECTS] []\n[ADDITIONAL MEMORY] - one\n- two", Ok((0, 1, 0, 2))),
        ("[SPATIAL MEMORY] not json\n[ADDITIONAL MEMORY] [\"x\"]", Ok((0, 0, 0, 1))),
        ("[ADDITIONAL MEMORY] desk code is 3719.", Ok((0, 0, 0, 1))),
        ("[UNINSPECTED OBJECTS] a, b, c", Ok((0, 0, 3, 0))),
        ("I have no memory.", Err(MemoryParseError::MalformedMemory)),
        ("", Err(MemoryParseError::MalformedMemory)),
    ];
    for (text, want) in &memory_fixtures {
        let got = parse_memory(text).map(|p| (p.memory.spatial.len(), p.memory.inspected.len(), p.memory.uninspected.len(), p.memory.additional.len()));
        ensure!(&got == want, "{text:?}: got {got:?}, want {want:?}");
    }
    for i in 0..8 {
        let m = memory_sample(i);
        let back = parse_memory(&m.serialize()).map_err(err)?;
        ensure!(back.warnings.is_empty() && back.memory == m, "memory {i} does not round-trip: {:?}", back.warnings);
    }
    let obs = render_observation(&sample("room01"), &initial_state(&sample("room01"))).map_err(err)?;
    for len in 0..=45 {
        let history: Vec<HistoryPair> = (0..len).map(|i| HistoryPair { observation: format!("view {i}"), action: "back".into() }).collect();
        let shown = build_prompt(&history, &obs, None).matches("\nAction: ").count();
        ensure!(shown == len.min(HISTORY_WINDOW), "history {len}: prompt embeds {shown} pairs");
    }
    Ok(format!("{} fixtures, 8 round trips, history window {HISTORY_WINDOW}", fixtures.len() + memory_fixtures.len()))
}

fn mock_end_to_end() -> Outcome {
    let rooms = vec![rooms_dir().join("room01.json")];
    let scripted = |m: &mut RunManifest| m.agent.endpoint = Some(SCRIPTED_ENDPOINT.into());
    let (a, b, c) = (tempdir()?, tempdir()?, tempdir()?);
    let full = run(AgentKind::Modular, a.path(), rooms.clone(), 1, scripted)?;
    run(AgentKind::Modular, b.path(), rooms.clone(), 1, scripted)?;
    let ablated = run(AgentKind::Modular, c.path(), rooms, 1, |m| {
        scripted(m);
        m.agent.ablation.no_memory = true;
    })?;
    let log = |dir: &Path| std::fs::read(trial_path(dir, "room01", 0)).map_err(err);
    ensure!(log(a.path())? == log(b.path())?, "trajectory logs differ between runs");
    let f = &full.report.episodes[0].metrics;
    let g = &ablated.report.episodes[0].metrics;
    ensure!(f.success, "modular agent did not escape ({:?} after {} steps)", f.reason, f.steps);
    ensure!(!g.success || g.steps > f.steps, "ablation did as well: {} vs {} steps", g.steps, f.steps);
    Ok(format!("escaped in {} steps; without memory {:?} after {} steps", f.steps, g.reason.unwrap_or(TerminationReason::StepCap), g.steps))
}

fn brute_repetition(t: &Trajectory, key: RepetitionKey) -> [f64; 9] {
    let mut out = [0.0; 9];
    for a in &t.steps {
        let same = t.steps.iter().filter(|b| b.action == a.action && (key == RepetitionKey::ActionOnly || b.scene_key == a.scene_key)).count();
        if same >= 2 {
            out[same.min(10) - 2] += 1.0 / t.steps.len() as f64;
        }
    }
    out
}

fn words(s: &str) -> Vec<String> {
    s.to_lowercase().split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_string).collect()
}

fn brute_caption(caption: &str, truth: &[VisibleObject]) -> bool {
    let cap = words(caption);
    let has = |phrase: &str| {
        let p = words(phrase);
        !p.is_empty() && cap.windows(p.len()).any(|w| w == p.as_slice())
    };
    truth.iter().all(|o| {
        let named = has(&o.id) || o.aliases.iter().any(|a| has(a));
        named && o.state.as_ref().is_none_or(|s| has(s) || !o.states.iter().any(|t| t != s && has(t)))
    })
}

fn object(id: &str, aliases: &[&str], state: Option<&str>, states: &[&str]) -> VisibleObject {
    VisibleObject {
        id: id.into(),
        aliases: aliases.iter().map(|s| s.to_string()).collect(),
        state: state.map(str::to_string),
        states: states.iter().map(|s| s.to_string()).collect(),
    }
}

fn analysis_operations() -> Outcome {
    let spec = sample("room03");
    let universe: Vec<String> = escape_core::validate::explore(&spec).scenes.into_iter().collect();
    let essential = essential_scenes(&spec);
    let actions = ["back", "turn_to_east", "inspect desk", "open drawer", "<ANSWER>1234</ANSWER>"];
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.random_range(1..200);
        let steps = (1..=len)
            .map(|n| record(n, &universe[rng.random_range(0..universe.len().min(4 + seed as usize * 5))], actions[rng.random_range(0..actions.len())], None, vec![]))
            .collect();
        let t = Trajectory { header: header(&spec, ExperimentMode::ExpBase), steps, end: None };
        for key in [RepetitionKey::SceneAction, RepetitionKey::ActionOnly] {
            let got = repetition_histogram(&t, key).ratios;
            let want = brute_repetition(&t, key);
            ensure!(got.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-12), "repetition seed {seed} {key:?}: {got:?} vs {want:?}");
        }
        for window in [1u32, 10, 100, 300] {
            let got = essential_scene_coverage(&t, &essential, window);
            let seen: BTreeSet<&String> = t.steps.iter().take(window as usize).map(|s| &s.scene_key).collect();
            let want = essential.iter().filter(|s| seen.contains(s)).count() as f64 / essential.len() as f64;
            ensure!(got == want, "coverage seed {seed} window {window}: {got} vs {want}");
        }
    }
    let vocab = ["desk", "safe", "strongbox", "open", "closed", "locked", "old", "clock", "ticking", "broken", "a", "the", "is"];
    let pool = [
        object("desk", &[], Some("closed"), &["closed", "open"]),
        object("safe", &["strongbox"], Some("open"), &["locked", "open"]),
        object("clock", &["old clock"], Some("ticking"), &["broken", "ticking"]),
        object("key", &[], None, &[]),
    ];
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..100 {
            let n = rng.random_range(0..12);
            let caption = (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ");
            let truth: Vec<VisibleObject> = pool.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
            ensure!(caption_accuracy(&caption, &truth) == brute_caption(&caption, &truth), "caption {caption:?} with {truth:?}");
        }
    }
    Ok("repetition, coverage, captions: 5 synthetic sets each".into())
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("oracle solvability", oracle_solvability),
        ("random-baseline floor", random_floor),
        ("protocol exactness", protocol_exactness),
        ("metric formulas", metric_formulas),
        ("non-local effects", non_local_effects),
        ("parser suite", parser_suite),
        ("mock end-to-end", mock_end_to_end),
        ("analysis operations", analysis_operations),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {secs:>6.2}s  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {secs:>6.2}s  {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
