//! Whole-run checks on the shipped scenarios and the command line tool.

use std::path::PathBuf;
use std::process::Command;

use railsim::config::ScenarioConfig;
use railsim::metrics::{
    parse_movements, parse_waits, replay_section_usage, replay_section_wait, replay_wait_total, SECTIONS,
};
use railsim::network::LineId;
use railsim::run::simulate;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn replayed_logs_reproduce_online_metrics() {
    let mut cfg = ScenarioConfig::load(&scenario("desk")).unwrap();
    cfg.horizon_hours = 36;
    let out = simulate("replay", &cfg).unwrap();
    let (net, l) = (&out.world.network, &out.world.ledger);
    let moves = parse_movements(&l.movements_csv(net)).unwrap();
    let waits = parse_waits(&l.waits_csv(net)).unwrap();
    let usage = replay_section_usage(net, &moves, l.hours);
    let wait = replay_section_wait(net, &waits, l.hours);
    let totals = replay_wait_total(&waits, l.hours);
    for (h, total) in totals.iter().enumerate() {
        assert!(close(*total, l.wait_seconds(h)), "hour {h}: {total} vs {}", l.wait_seconds(h));
        for line in net.lines() {
            for s in 0..SECTIONS {
                let key = (h, line.code.clone(), s);
                let online = l.section_usage(h, line.id, s);
                assert!(close(usage[&key], online), "{key:?}: replay {} online {online}", usage[&key]);
                match (wait.get(&key), l.section_wait(h, line.id, s)) {
                    (Some(a), Some(b)) => assert!(close(*a, b), "{key:?}: {a} vs {b}"),
                    (None, None) => {}
                    (a, b) => panic!("{key:?}: replay {a:?} online {b:?}"),
                }
            }
        }
    }
}

#[test]
fn attendees_were_activated() {
    let out = simulate("event", &ScenarioConfig::load(&scenario("desk")).unwrap()).unwrap();
    let w = &out.world;
    assert!(!w.attendees[0].is_empty());
    for h in &w.attendees[0] {
        assert!(w.activations[0].is_active(h.0));
    }
    assert!(w.violations.is_empty(), "{:?}", w.violations);
    assert!(w.checkpoints >= out.config.horizon_hours);
}

#[test]
fn singapore_like_network_runs_with_rail_use() {
    let mut cfg = ScenarioConfig::load(&scenario("singapore-like")).unwrap();
    cfg.horizon_hours = 10;
    let out = simulate("sg", &cfg).unwrap();
    let w = &out.world;
    assert_eq!(w.network.stations().len(), 87);
    let codes: Vec<&str> = w.network.lines().iter().map(|l| l.code.as_str()).collect();
    for code in ["NS", "NE", "EW", "CC"] {
        assert!(codes.contains(&code), "{codes:?}");
    }
    assert!(w.violations.is_empty(), "{:?}", w.violations);
    let used: f64 = (0..w.ledger.hours)
        .flat_map(|h| (0..w.network.lines().len()).map(move |l| (h, LineId(l as u32))))
        .map(|(h, line)| (0..SECTIONS).map(|s| w.ledger.section_usage(h, line, s)).sum::<f64>())
        .sum();
    assert!(used > 0.0);
}

fn railsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_railsim"))
}

#[test]
fn cli_run_writes_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let status = railsim()
        .args(["run"])
        .arg(scenario("desk"))
        .args(["--until", "6", "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let run = dir.path().join("run");
    for f in
        ["usage.csv", "wait.csv", "travel.csv", "summary.csv", "trains.csv", "waits.csv", "event.log", "manifest.json"]
    {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["horizon_hours"], 6);
    assert_eq!(manifest["violations"], 0);
}

#[test]
fn cli_compare_writes_both_sides_and_delta() {
    let dir = tempfile::tempdir().unwrap();
    let status = railsim()
        .args(["compare", "--axis", "strategy", "--until", "4", "--out"])
        .arg(dir.path())
        .arg(scenario("desk"))
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(dir.path().join("none/usage.csv").is_file());
    assert!(dir.path().join("greedy/delta.csv").is_file());
}

#[test]
fn cli_rejects_missing_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("desk").join("scenario.toml")).unwrap();
    let unseeded: String = text.lines().filter(|l| !l.starts_with("seed")).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, unseeded).unwrap();
    let out = railsim().arg("run").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error\tconfig"));
}
