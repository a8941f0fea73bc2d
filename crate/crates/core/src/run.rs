//! Single and paired runs, and their output files.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig, StrategyKind};
use crate::engine::{DispatchRecord, EngineError, SimTime};
use crate::events::{parse_event_override, EventError};
use crate::metrics::{fmt_opt, SECTIONS};
use crate::network::LineId;
use crate::population::Category;
use crate::world::{BuildError, World};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Short tag for the error line printed by the command line tool.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Build(_) | RunError::Event(_) => "scenario",
            RunError::Engine(_) => "engine",
            RunError::Io { .. } => "io",
        }
    }
}

/// Command-line adjustments to a scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub until_hours: Option<u64>,
    pub strategy: Option<StrategyKind>,
    pub alt_routing: Option<bool>,
    pub pool: Option<u32>,
    /// `lat,lon,start,end` events replacing the scenario's events.
    pub events: Vec<String>,
}

pub fn apply_overrides(cfg: &ScenarioConfig, o: &Overrides) -> Result<ScenarioConfig, RunError> {
    let mut cfg = cfg.clone();
    if let Some(s) = o.seed {
        cfg.seed = Some(s);
    }
    if let Some(h) = o.until_hours {
        cfg.horizon_hours = h;
    }
    if let Some(k) = o.strategy {
        cfg.strategy.kind = k;
    }
    if let Some(a) = o.alt_routing {
        cfg.strategy.alt_routing = a;
    }
    if let Some(p) = o.pool {
        cfg.strategy.pool = p;
    }
    if !o.events.is_empty() {
        cfg.events.fixed = o.events.iter().map(|e| parse_event_override(e)).collect::<Result<_, _>>()?;
        cfg.events.generator = None;
    }
    cfg.require_seed()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareAxis {
    Event,
    Strategy,
    AltRouting,
}

impl CompareAxis {
    pub fn parse(s: &str) -> Option<CompareAxis> {
        match s {
            "event" => Some(CompareAxis::Event),
            "strategy" => Some(CompareAxis::Strategy),
            "alt-routing" => Some(CompareAxis::AltRouting),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CompareAxis::Event => "event",
            CompareAxis::Strategy => "strategy",
            CompareAxis::AltRouting => "alt-routing",
        }
    }

    /// Control and treatment configurations with their labels.
    pub fn pair(self, cfg: &ScenarioConfig) -> [(&'static str, ScenarioConfig); 2] {
        let mut a = cfg.clone();
        let mut b = cfg.clone();
        let labels = match self {
            CompareAxis::Event => {
                a.events.fixed.clear();
                a.events.generator = None;
                ["no-event", "event"]
            }
            CompareAxis::Strategy => {
                a.strategy.kind = StrategyKind::None;
                b.strategy.kind = StrategyKind::Greedy;
                ["none", "greedy"]
            }
            CompareAxis::AltRouting => {
                a.strategy.alt_routing = false;
                b.strategy.alt_routing = true;
                ["alt-off", "alt-on"]
            }
        };
        [(labels[0], a), (labels[1], b)]
    }
}

pub struct RunOutput {
    pub label: String,
    pub config: ScenarioConfig,
    pub world: World,
    pub log: Vec<DispatchRecord>,
}

pub fn simulate(label: &str, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let mut world = World::new(cfg)?;
    let log = world.run()?;
    Ok(RunOutput { label: label.to_string(), config: cfg.clone(), world, log })
}

/// Runs both sides of a comparison on separate threads.
pub fn simulate_pair(cfg: &ScenarioConfig, axis: CompareAxis) -> Result<[RunOutput; 2], RunError> {
    let [(la, a), (lb, b)] = axis.pair(cfg);
    let (ra, rb) = thread::scope(|s| {
        let ha = s.spawn(|| simulate(la, &a));
        let rb = simulate(lb, &b);
        (ha.join().expect("run thread panicked"), rb)
    });
    Ok([ra?, rb?])
}

/// Reach of one event: activated humans by category and attendees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSummary {
    pub name: String,
    pub start: String,
    pub end: String,
    pub activated: usize,
    pub attendees: usize,
    /// Activated humans per category, keyed by category label.
    pub activated_by_category: std::collections::BTreeMap<String, usize>,
}

pub fn event_summaries(world: &World) -> Vec<EventSummary> {
    world
        .feed
        .events
        .iter()
        .map(|e| {
            let state = &world.activations[e.id.0 as usize];
            let mut by_cat: std::collections::BTreeMap<String, usize> =
                Category::ALL.iter().map(|c| (c.label().to_string(), 0)).collect();
            for h in state.active_set() {
                *by_cat.get_mut(world.humans[h as usize].category.label()).expect("known category") += 1;
            }
            EventSummary {
                name: e.name.clone(),
                start: e.start.to_string(),
                end: e.end.to_string(),
                activated: state.active_count(),
                attendees: world.attendees[e.id.0 as usize].len(),
                activated_by_category: by_cat,
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub label: String,
    pub scenario: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub start: String,
    pub end: String,
    pub horizon_hours: u64,
    pub strategy: String,
    pub alt_routing: bool,
    pub pool: u32,
    pub events: Vec<EventSummary>,
    pub alt_route_fraction: f64,
    pub humans: usize,
    pub trains: usize,
    pub dispatched: usize,
    pub violations: usize,
    pub comparison: Option<String>,
    pub outputs: Vec<String>,
    /// The exact configuration the run used.
    pub config: ScenarioConfig,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

pub fn manifest(out: &RunOutput, comparison: Option<&str>, outputs: Vec<String>) -> RunManifest {
    let cfg = &out.config;
    RunManifest {
        label: out.label.clone(),
        scenario: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed.expect("seed checked before running"),
        start: SimTime::ZERO.to_string(),
        end: out.world.horizon().to_string(),
        horizon_hours: cfg.horizon_hours,
        strategy: match cfg.strategy.kind {
            StrategyKind::None => "none".into(),
            StrategyKind::Greedy => "greedy".into(),
        },
        alt_routing: cfg.strategy.alt_routing,
        pool: cfg.strategy.pool,
        events: event_summaries(&out.world),
        alt_route_fraction: out.world.ledger.alt_route_fraction(),
        humans: out.world.humans.len(),
        trains: out.world.trains.len(),
        dispatched: out.log.len(),
        violations: out.world.violations.len(),
        comparison: comparison.map(str::to_string),
        outputs,
        config: cfg.clone(),
    }
}

pub fn event_log(log: &[DispatchRecord]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(log.len() * 24);
    for r in log {
        r.write_line(&mut buf).expect("writing to memory");
    }
    buf
}

/// Writes reports, event log and manifest into `dir`.
pub fn write_run(out: &RunOutput, dir: &Path, comparison: Option<&str>, extra: &[&str]) -> Result<(), RunError> {
    let w = &out.world;
    w.ledger.emit_report(&w.network, dir).map_err(io_err(dir))?;
    let log_path = dir.join("event.log");
    fs::write(&log_path, event_log(&out.log)).map_err(io_err(&log_path))?;
    if !w.violations.is_empty() {
        let p = dir.join("violations.txt");
        fs::write(&p, w.violations.join("\n") + "\n").map_err(io_err(&p))?;
    }
    let mut outputs: Vec<String> =
        ["usage.csv", "wait.csv", "travel.csv", "summary.csv", "trains.csv", "waits.csv", "event.log"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    outputs.extend(extra.iter().map(|s| s.to_string()));
    let m = manifest(out, comparison, outputs);
    let p = dir.join("manifest.json");
    let mut f = fs::File::create(&p).map_err(io_err(&p))?;
    serde_json::to_writer_pretty(&mut f, &m).expect("manifest serializes");
    f.write_all(b"\n").map_err(io_err(&p))?;
    Ok(())
}

/// Treatment minus control for every (hour, line, section), plus the
/// system-wide series.
pub fn delta_csv(control: &RunOutput, treatment: &RunOutput) -> String {
    let (a, b) = (&control.world.ledger, &treatment.world.ledger);
    let mut out = String::from("hour,line,section,usage_delta,wait_delta_s\n");
    for h in 0..a.hours.min(b.hours) {
        for l in 0..a.sections.line_count() {
            let line = LineId(l as u32);
            for s in 0..SECTIONS {
                let du = b.section_usage(h, line, s) - a.section_usage(h, line, s);
                let dw = match (a.section_wait(h, line, s), b.section_wait(h, line, s)) {
                    (None, None) => None,
                    (x, y) => Some(y.unwrap_or(0.0) - x.unwrap_or(0.0)),
                };
                let _ = writeln!(out, "{h},{},r{s},{du:.4},{}", a.sections.line_code(line), fmt_opt(dw));
            }
        }
        let du = b.fleet_usage(h..h + 1) - a.fleet_usage(h..h + 1);
        let dw = b.avg_wait(h..h + 1) - a.avg_wait(h..h + 1);
        let _ = writeln!(out, "{h},all,all,{du:.4},{dw:.4}");
    }
    out
}

/// Runs the pair and writes `<out>/<label>/...` for both, with the delta
/// next to the treatment's reports.
pub fn compare_and_write(cfg: &ScenarioConfig, axis: CompareAxis, out: &Path) -> Result<[RunOutput; 2], RunError> {
    let runs = simulate_pair(cfg, axis)?;
    write_run(&runs[0], &out.join(&runs[0].label), Some(axis.label()), &[])?;
    write_run(&runs[1], &out.join(&runs[1].label), Some(axis.label()), &["delta.csv"])?;
    let p = out.join(&runs[1].label).join("delta.csv");
    fs::write(&p, delta_csv(&runs[0], &runs[1])).map_err(io_err(&p))?;
    Ok(runs)
}
