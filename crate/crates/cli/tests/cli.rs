use std::fs;
use std::path::Path;
use std::process::Command;

use contrast_cli::bench::bench_agents;
use contrast_cli::config::{Overrides, Resolved, RunConfig};
use contrast_cli::render::{render, Layout};
use contrast_cli::replay::{verify, verify_path, Verdict};
use contrast_cli::run::{jobs, run_all_pairs, run_baseline_job, MANIFEST};
use contrast_cli::trajfile::{Footer, Header, Num, TrajectoryFile};
use contrast_core::crowdnav::{CrowdParams, CrowdScenario, PolicyKind};
use contrast_core::divergence::RewardConfig;
use contrast_core::TerminalKind;

const BIN: &str = env!("CARGO_BIN_EXE_contrast");

fn config(text: &str, out: &Path) -> Resolved {
    RunConfig::parse(text)
        .unwrap()
        .resolve(&Overrides {
            output_dir: Some(out.to_path_buf()),
            ..Default::default()
        })
        .unwrap()
}

const SMALL: &str = r#"
seed = 4
scenarios = ["corner-NE", "corner-SE"]
agents = ["lo", "med", "hi"]
[search]
iterations = 2
simulations = 2
"#;

#[test]
fn all_pairs_manifest_has_one_summary_per_pair_and_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let m = run_all_pairs(&cfg).unwrap();
    assert_eq!(m.entries.len(), 6);
    let mut keys: Vec<_> = m.entries.iter().map(|e| (e.pair.clone(), e.scenario.clone())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 6);
    for e in &m.entries {
        assert!(dir.path().join(&e.summary).is_file());
        assert_eq!(e.queue.len(), e.queue_rewards.len());
        assert_eq!(e.total_reward, e.queue_rewards[0]);
        assert!(verify_path(&dir.path().join(&e.summary)).unwrap().passed());
    }

    let one = config(
        r#"
        scenarios = ["corner-SE"]
        agents = ["lo", "hi"]
        [search]
        iterations = 1
        simulations = 1
        "#,
        dir.path(),
    );
    assert_eq!(run_all_pairs(&one).unwrap().entries.len(), 1);
}

#[test]
fn rerun_gives_byte_identical_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all_pairs(&config(SMALL, a.path())).unwrap();
    run_all_pairs(&config(SMALL, b.path())).unwrap();
    let ma = fs::read(a.path().join(MANIFEST)).unwrap();
    let mb = fs::read(b.path().join(MANIFEST)).unwrap();
    assert_eq!(ma, mb);
    let sa = fs::read(a.path().join("corner-NE/hi__lo/summary.jsonl")).unwrap();
    let sb = fs::read(b.path().join("corner-NE/hi__lo/summary.jsonl")).unwrap();
    assert_eq!(sa, sb);
}

fn baseline_file(dir: &Path) -> TrajectoryFile {
    let cfg = config(SMALL, dir);
    let job = &jobs(&cfg).unwrap()[0];
    let entry = run_baseline_job(&cfg, job, None).unwrap();
    assert_eq!(entry.episodes.len(), 6);
    TrajectoryFile::read(&dir.join(&entry.summary)).unwrap()
}

#[test]
fn replay_passes_fresh_files_and_locates_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let file = baseline_file(dir.path());
    assert!(file.records.len() > 3);
    assert_eq!(verify(&file).unwrap(), Verdict::Pass { steps: file.records.len() });

    let reloaded = TrajectoryFile::parse(&file.to_text()).unwrap();
    assert_eq!(reloaded, file);

    let mut flipped = file.clone();
    flipped.records[2].env_action = (flipped.records[2].env_action + 1) % 5;
    match verify(&flipped).unwrap() {
        Verdict::Fail { step: Some(t), .. } => assert_eq!(t, 2),
        other => panic!("{other:?}"),
    }

    let mut nudged = file.clone();
    nudged.records[1].state_2[0] = Num(f64::from_bits(nudged.records[1].state_2[0].0.to_bits() + 1));
    assert!(matches!(verify(&nudged).unwrap(), Verdict::Fail { step: Some(1), .. }));

    let mut total = file.clone();
    total.footer.total_reward = Num(total.footer.total_reward.0 + 1e-9);
    assert!(matches!(verify(&total).unwrap(), Verdict::Fail { step: None, .. }));

    let mut truncated = file.clone();
    truncated.records.pop();
    assert!(!verify(&truncated).unwrap().passed());
}

#[test]
fn version_mismatch_and_corruption_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = baseline_file(dir.path()).to_text();
    let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
    assert!(TrajectoryFile::parse(&bumped).unwrap_err().contains("version"));
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{\"t\":1,\"env_action\":";
    assert!(TrajectoryFile::parse(&lines.join("\n")).is_err());
    let swapped = text.replacen("\"reward\":\"", "\"reward\":\"x", 1);
    assert!(TrajectoryFile::parse(&swapped).is_err());
}

fn frame_robots(svg: &str) -> Vec<(f64, f64)> {
    svg.lines()
        .filter(|l| l.contains("class=\"robot\""))
        .map(|l| {
            let attr = |name: &str| {
                let start = l.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                let end = start + l[start..].find('"').unwrap();
                l[start..end].parse::<f64>().unwrap()
            };
            (attr("data-x"), attr("data-y"))
        })
        .collect()
}

#[test]
fn render_writes_one_frame_per_step_plus_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
        seed = 2
        scenarios = ["corner-NE"]
        agents = ["lo", "hi"]
        [search]
        iterations = 3
        simulations = 3
        "#,
        dir.path(),
    );
    let m = run_all_pairs(&cfg).unwrap();
    let path = dir.path().join(&m.entries[0].summary);
    let before = fs::read(&path).unwrap();
    let file = TrajectoryFile::read(&path).unwrap();
    let out = dir.path().join("frames");
    let r = render(&path, &out, Layout::Overlay).unwrap();
    assert_eq!(fs::read(&path).unwrap(), before);
    assert_eq!(r.frames.len(), file.records.len() + 1);
    assert!(fs::read_to_string(&r.index).unwrap().contains(r.frames[0].file_name().unwrap().to_str().unwrap()));

    let last = fs::read_to_string(r.frames.last().unwrap()).unwrap();
    let robots = frame_robots(&last);
    assert_eq!(robots.len(), 2);
    assert_eq!(last.matches("class=\"human\"").count(), 20);
    let gap = ((robots[0].0 - robots[1].0).powi(2) + (robots[0].1 - robots[1].1).powi(2)).sqrt();
    assert!((gap - file.footer.final_state_divergence.0.sqrt()).abs() < 1e-12);
    assert!(file.footer.final_state_divergence.0 > 0.0);

    let side = render(&path, &dir.path().join("side"), Layout::SideBySide).unwrap();
    let first = fs::read_to_string(&side.frames[0]).unwrap();
    assert_eq!(frame_robots(&first).len(), 2);
    assert_eq!(first.matches("class=\"goal\"").count(), 2);
}

#[test]
fn zero_step_trajectory_renders_a_single_frame() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = CrowdScenario::builtin("corner-NE").unwrap();
    let header = Header::new(
        "none",
        0,
        [("lo", PolicyKind::Lo), ("hi", PolicyKind::Hi)],
        "search",
        &scenario,
        &CrowdParams::default(),
        &RewardConfig::default(),
    );
    // Rendering is a pure read, so a file without steps is enough here.
    let file = TrajectoryFile {
        header,
        records: vec![],
        footer: Footer {
            terminal: [TerminalKind::Running; 2],
            terminal_reward: Num(0.0),
            total_reward: Num(0.0),
            final_state_divergence: Num(0.0),
        },
    };
    let path = dir.path().join("zero.jsonl");
    file.write(&path).unwrap();
    let r = render(&path, &dir.path().join("frames"), Layout::Overlay).unwrap();
    assert_eq!(r.frames.len(), 1);
    let robots = frame_robots(&fs::read_to_string(&r.frames[0]).unwrap());
    assert_eq!(robots, vec![(1.0, 1.0), (1.0, 1.0)]);
}

#[test]
fn duplicated_agent_ties_and_report_is_reproducible() {
    let text = r#"
        scenarios = ["corner-NE", "corner-SE"]
        agents = ["med", { id = "med-copy", policy = "med" }]
        [bench]
        episodes = 8
    "#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = bench_agents(&config(text, a.path())).unwrap();
    bench_agents(&config(text, b.path())).unwrap();
    assert!((ra.overall[0].mean_score - ra.overall[1].mean_score).abs() <= 1e-12);
    assert_eq!(
        fs::read(a.path().join("bench_report.json")).unwrap(),
        fs::read(b.path().join("bench_report.json")).unwrap()
    );
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let bad = write_config(dir.path(), "scenarios = [\"corner-NE\"]\nagents = [\"lo\", \"nope\"]\n");
    let st = Command::new(BIN)
        .args(["pairs", "-c"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(!out.exists(), "nothing should run on a config error");

    let good = write_config(
        dir.path(),
        "scenarios = [\"corner-NE\", \"corner-SE\"]\nagents = [\"lo\", \"hi\"]\n[search]\niterations = 1\nsimulations = 1\n",
    );
    let st = Command::new(BIN)
        .args(["search", "--pair", "hi", "lo", "--scenario", "corner-SE", "-c"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let summary = out.join("corner-SE/hi__lo/summary.jsonl");
    assert!(summary.is_file());
    assert!(!out.join("corner-NE").exists());

    let st = Command::new(BIN).arg("replay").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stdout));

    let text = fs::read_to_string(&summary).unwrap();
    let tampered = text.replacen("\"env_action\":0", "\"env_action\":1", 1).replacen("\"env_action\":2", "\"env_action\":3", 1);
    assert_ne!(tampered, text);
    let bad_file = dir.path().join("tampered.jsonl");
    fs::write(&bad_file, tampered).unwrap();
    let st = Command::new(BIN).arg("replay").arg(&bad_file).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stdout).contains("FAIL at step"));

    let st = Command::new(BIN)
        .arg("render")
        .arg(&summary)
        .arg("--out")
        .arg(dir.path().join("frames"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(dir.path().join("frames/index.html").is_file());
}
