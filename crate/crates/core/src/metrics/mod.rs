//! Train usage, waiting time and travel time, bucketed by hour.

mod replay;

pub use replay::{parse_movements, parse_waits, replay_section_usage, replay_section_wait, replay_wait_total};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;

use crate::engine::{SimTime, SECONDS_PER_HOUR};
use crate::network::{LineId, StationId, TransitNetwork};
use crate::population::HumanId;
use crate::transit::TrainId;

pub const SECTIONS: usize = 5;

/// Splits `n` consecutive stations into `k` runs whose sizes differ by at
/// most one, earlier runs taking the extra stations.
pub fn partition(n: usize, k: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Section index of every (line, station) pair.
#[derive(Debug, Clone)]
pub struct SectionMap {
    line_codes: Vec<String>,
    by_line: Vec<BTreeMap<StationId, usize>>,
}

impl SectionMap {
    pub fn new(network: &TransitNetwork) -> Self {
        let mut by_line = Vec::new();
        for line in network.lines() {
            let mut m = BTreeMap::new();
            for (s, range) in partition(line.stations.len(), SECTIONS).into_iter().enumerate() {
                for ord in range {
                    m.insert(line.stations[ord], s);
                }
            }
            by_line.push(m);
        }
        SectionMap { line_codes: network.lines().iter().map(|l| l.code.clone()).collect(), by_line }
    }

    pub fn section(&self, line: LineId, station: StationId) -> Option<usize> {
        self.by_line[line.0 as usize].get(&station).copied()
    }

    pub fn line_count(&self) -> usize {
        self.line_codes.len()
    }

    pub fn line_code(&self, line: LineId) -> &str {
        &self.line_codes[line.0 as usize]
    }

    pub fn stations_in(&self, line: LineId, section: usize) -> Vec<StationId> {
        self.by_line[line.0 as usize].iter().filter(|(_, s)| **s == section).map(|(st, _)| *st).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Start,
    Arrive,
    Hold,
    Admit,
    Board,
    Depart,
    Depot,
    Capacity,
}

impl MoveKind {
    pub fn label(self) -> &'static str {
        match self {
            MoveKind::Start => "start",
            MoveKind::Arrive => "arrive",
            MoveKind::Hold => "hold",
            MoveKind::Admit => "admit",
            MoveKind::Board => "board",
            MoveKind::Depart => "depart",
            MoveKind::Depot => "depot",
            MoveKind::Capacity => "capacity",
        }
    }

    pub fn parse(s: &str) -> Option<MoveKind> {
        Some(match s {
            "start" => MoveKind::Start,
            "arrive" => MoveKind::Arrive,
            "hold" => MoveKind::Hold,
            "admit" => MoveKind::Admit,
            "board" => MoveKind::Board,
            "depart" => MoveKind::Depart,
            "depot" => MoveKind::Depot,
            "capacity" => MoveKind::Capacity,
            _ => return None,
        })
    }
}

/// Train state from `time` until the train's next record. While running,
/// `station` is the station the train left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementRecord {
    pub time: SimTime,
    pub train: TrainId,
    pub line: LineId,
    pub station: StationId,
    pub kind: MoveKind,
    pub onboard: u32,
    pub capacity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitRecord {
    pub human: HumanId,
    pub station: StationId,
    pub line: LineId,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripRecord {
    pub human: HumanId,
    pub start: SimTime,
    pub end: SimTime,
    pub road_s: u64,
    pub wait_s: u64,
    pub onboard_s: u64,
    pub rail: bool,
}

impl TripRecord {
    pub fn travel_s(&self) -> u64 {
        self.road_s + self.wait_s + self.onboard_s
    }
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    time: u64,
    onboard: u32,
    capacity: u32,
    section: usize,
    /// False while the train sits in a depot.
    in_service: bool,
}

/// Seconds of `[from, to)` falling in each hour.
fn split_hours(from: u64, to: u64, mut f: impl FnMut(usize, f64)) {
    let mut t = from;
    while t < to {
        let hour = t / SECONDS_PER_HOUR;
        let next = ((hour + 1) * SECONDS_PER_HOUR).min(to);
        f(hour as usize, (next - t) as f64);
        t = next;
    }
}

#[derive(Debug, Clone)]
pub struct MetricsLedger {
    pub hours: usize,
    pub humans: usize,
    pub sections: SectionMap,
    train_lines: Vec<LineId>,
    pub movements: Vec<MovementRecord>,
    pub waits: Vec<WaitRecord>,
    pub trips: Vec<TripRecord>,
    last: Vec<Option<Snapshot>>,
    /// Onboard-seconds per [hour][train][section].
    occ: Vec<f64>,
    /// Capacity-seconds per [hour][train].
    cap: Vec<f64>,
    wait_total: Vec<f64>,
    section_waits: BTreeMap<(usize, LineId, usize), BTreeMap<HumanId, f64>>,
    pub alt_adopters: usize,
}

impl MetricsLedger {
    pub fn new(network: &TransitNetwork, train_lines: Vec<LineId>, humans: usize, hours: usize) -> Self {
        let n = train_lines.len();
        MetricsLedger {
            hours,
            humans,
            sections: SectionMap::new(network),
            last: vec![None; n],
            occ: vec![0.0; hours * n * SECTIONS],
            cap: vec![0.0; hours * n],
            train_lines,
            movements: Vec::new(),
            waits: Vec::new(),
            trips: Vec::new(),
            wait_total: vec![0.0; hours],
            section_waits: BTreeMap::new(),
            alt_adopters: 0,
        }
    }

    fn horizon_s(&self) -> u64 {
        self.hours as u64 * SECONDS_PER_HOUR
    }

    fn integrate(&mut self, train: usize, until: u64) {
        let Some(s) = self.last[train] else { return };
        let until = until.min(self.horizon_s());
        if !s.in_service {
            if let Some(snap) = self.last[train].as_mut() {
                snap.time = snap.time.max(until);
            }
            return;
        }
        let n = self.train_lines.len();
        let (occ, cap) = (&mut self.occ, &mut self.cap);
        split_hours(s.time, until, |h, dt| {
            occ[(h * n + train) * SECTIONS + s.section] += s.onboard as f64 * dt;
            cap[h * n + train] += s.capacity as f64 * dt;
        });
        if let Some(snap) = self.last[train].as_mut() {
            snap.time = snap.time.max(until);
        }
    }

    pub fn record_movement(&mut self, rec: MovementRecord) {
        let i = rec.train.0 as usize;
        self.integrate(i, rec.time.secs());
        let section = self.sections.section(rec.line, rec.station).unwrap_or(0);
        let in_service = match rec.kind {
            MoveKind::Start | MoveKind::Depot => false,
            MoveKind::Capacity => self.last[i].is_some_and(|s| s.in_service),
            _ => true,
        };
        self.last[i] =
            Some(Snapshot { time: rec.time.secs(), onboard: rec.onboard, capacity: rec.capacity, section, in_service });
        self.movements.push(rec);
    }

    pub fn record_wait(&mut self, rec: WaitRecord) {
        let section = self.sections.section(rec.line, rec.station).unwrap_or(0);
        let end = rec.end.secs().min(self.horizon_s());
        let (totals, per_section) = (&mut self.wait_total, &mut self.section_waits);
        split_hours(rec.start.secs(), end, |h, dt| {
            totals[h] += dt;
            *per_section.entry((h, rec.line, section)).or_default().entry(rec.human).or_default() += dt;
        });
        // Zero-length waits still count the human as a waiter.
        if rec.start == rec.end && (rec.start.hour() as usize) < self.hours {
            per_section
                .entry((rec.start.hour() as usize, rec.line, section))
                .or_default()
                .entry(rec.human)
                .or_default();
        }
        self.waits.push(rec);
    }

    pub fn record_trip(&mut self, rec: TripRecord) {
        self.trips.push(rec);
    }

    /// Closes the integrals at the horizon.
    pub fn finish(&mut self) {
        for t in 0..self.train_lines.len() {
            self.integrate(t, self.horizon_s());
        }
    }

    fn hour_range(&self, hours: Range<usize>) -> Range<usize> {
        hours.start.min(self.hours)..hours.end.min(self.hours)
    }

    /// U_T of one train over `hours`.
    pub fn train_usage(&self, train: TrainId, hours: Range<usize>) -> f64 {
        let n = self.train_lines.len();
        let t = train.0 as usize;
        let (mut o, mut c) = (0.0, 0.0);
        for h in self.hour_range(hours) {
            o += (0..SECTIONS).map(|s| self.occ[(h * n + t) * SECTIONS + s]).sum::<f64>();
            c += self.cap[h * n + t];
        }
        if c > 0.0 {
            o / c
        } else {
            0.0
        }
    }

    /// Sum over the line's trains of the usage each accrues in the section.
    pub fn section_usage(&self, hour: usize, line: LineId, section: usize) -> f64 {
        let n = self.train_lines.len();
        (0..n)
            .filter(|t| self.train_lines[*t] == line)
            .map(|t| {
                let c = self.cap[hour * n + t];
                if c > 0.0 {
                    self.occ[(hour * n + t) * SECTIONS + section] / c
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Seat-time used over seat-time offered by the whole fleet.
    pub fn fleet_usage(&self, hours: Range<usize>) -> f64 {
        let n = self.train_lines.len();
        let r = self.hour_range(hours);
        let o: f64 = self.occ[r.start * n * SECTIONS..r.end * n * SECTIONS].iter().sum();
        let c: f64 = self.cap[r.start * n..r.end * n].iter().sum();
        if c > 0.0 {
            o / c
        } else {
            0.0
        }
    }

    /// Fleet usage over an arbitrary set of hours.
    pub fn fleet_usage_in(&self, hours: &[usize]) -> f64 {
        let n = self.train_lines.len();
        let (mut o, mut c) = (0.0, 0.0);
        for &h in hours.iter().filter(|h| **h < self.hours) {
            o += self.occ[h * n * SECTIONS..(h + 1) * n * SECTIONS].iter().sum::<f64>();
            c += self.cap[h * n..(h + 1) * n].iter().sum::<f64>();
        }
        if c > 0.0 {
            o / c
        } else {
            0.0
        }
    }

    /// W_T over an arbitrary set of hours.
    pub fn avg_wait_in(&self, hours: &[usize]) -> f64 {
        if self.humans == 0 {
            return 0.0;
        }
        hours.iter().filter(|h| **h < self.hours).map(|h| self.wait_total[*h]).sum::<f64>() / self.humans as f64
    }

    /// Mean in-hour wait of humans who waited at the section's stations.
    pub fn section_wait(&self, hour: usize, line: LineId, section: usize) -> Option<f64> {
        let m = self.section_waits.get(&(hour, line, section))?;
        Some(m.values().sum::<f64>() / m.len() as f64)
    }

    /// Waiting seconds in `hours` divided by the whole population.
    pub fn avg_wait(&self, hours: Range<usize>) -> f64 {
        if self.humans == 0 {
            return 0.0;
        }
        self.wait_total[self.hour_range(hours)].iter().sum::<f64>() / self.humans as f64
    }

    pub fn wait_seconds(&self, hour: usize) -> f64 {
        self.wait_total[hour]
    }

    /// Mean travel time of trips completed in `hours`; `None` if there are none.
    pub fn avg_travel(&self, hours: Range<usize>) -> Option<f64> {
        let r = self.hour_range(hours);
        let done: Vec<u64> =
            self.trips.iter().filter(|t| r.contains(&(t.end.hour() as usize))).map(TripRecord::travel_s).collect();
        (!done.is_empty()).then(|| done.iter().sum::<u64>() as f64 / done.len() as f64)
    }

    pub fn alt_route_fraction(&self) -> f64 {
        if self.humans == 0 {
            0.0
        } else {
            self.alt_adopters as f64 / self.humans as f64
        }
    }

    pub fn usage_csv(&self) -> String {
        let mut out = String::from("hour,line,section,usage\n");
        for h in 0..self.hours {
            for l in 0..self.sections.line_count() {
                let line = LineId(l as u32);
                for s in 0..SECTIONS {
                    let _ = writeln!(
                        out,
                        "{h},{},r{s},{:.4}",
                        self.sections.line_code(line),
                        self.section_usage(h, line, s)
                    );
                }
            }
        }
        out
    }

    pub fn wait_csv(&self) -> String {
        let mut out = String::from("hour,line,section,avg_wait_s\n");
        for h in 0..self.hours {
            for l in 0..self.sections.line_count() {
                let line = LineId(l as u32);
                for s in 0..SECTIONS {
                    let _ = writeln!(
                        out,
                        "{h},{},r{s},{}",
                        self.sections.line_code(line),
                        fmt_opt(self.section_wait(h, line, s))
                    );
                }
            }
        }
        out
    }

    pub fn travel_csv(&self) -> String {
        let mut out = String::from("hour,trips,avg_travel_s,avg_wait_s,fleet_usage\n");
        for h in 0..self.hours {
            let trips = self.trips.iter().filter(|t| t.end.hour() as usize == h).count();
            let _ = writeln!(
                out,
                "{h},{trips},{},{:.4},{:.4}",
                fmt_opt(self.avg_travel(h..h + 1)),
                self.avg_wait(h..h + 1),
                self.fleet_usage(h..h + 1)
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "avg_wait_s,avg_travel_s,alt_route_fraction\n{:.4},{},{:.4}\n",
            self.avg_wait(0..self.hours),
            fmt_opt(self.avg_travel(0..self.hours)),
            self.alt_route_fraction()
        )
    }

    pub fn movements_csv(&self, network: &TransitNetwork) -> String {
        let mut out = String::from("time,train,line,station,event,onboard,capacity\n");
        for m in &self.movements {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.time.secs(),
                m.train.0,
                network.line(m.line).code,
                network.station(m.station).code,
                m.kind.label(),
                m.onboard,
                m.capacity
            );
        }
        out
    }

    pub fn waits_csv(&self, network: &TransitNetwork) -> String {
        let mut out = String::from("human,station,line,start,end\n");
        for w in &self.waits {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                w.human.0,
                network.station(w.station).code,
                network.line(w.line).code,
                w.start.secs(),
                w.end.secs()
            );
        }
        out
    }

    /// Writes every report into `dir`.
    pub fn emit_report(&self, network: &TransitNetwork, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("usage.csv"), self.usage_csv())?;
        fs::write(dir.join("wait.csv"), self.wait_csv())?;
        fs::write(dir.join("travel.csv"), self.travel_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        fs::write(dir.join("trains.csv"), self.movements_csv(network))?;
        fs::write(dir.join("waits.csv"), self.waits_csv(network))?;
        Ok(())
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}
