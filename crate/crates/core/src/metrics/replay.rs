//! Recomputes metrics from the written movement and wait logs.

use std::collections::{BTreeMap, BTreeSet};

use crate::network::TransitNetwork;

use super::{partition, SECTIONS};

/// One row of `trains.csv`, with codes kept as text.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedMove {
    pub time: u64,
    pub train: u32,
    pub line: String,
    pub station: String,
    pub event: String,
    pub onboard: u32,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedWait {
    pub human: u32,
    pub station: String,
    pub line: String,
    pub start: u64,
    pub end: u64,
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, row: usize) -> Result<T, String> {
    cols.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| format!("row {row}: bad column {i}"))
}

pub fn parse_movements(csv: &str) -> Result<Vec<LoggedMove>, String> {
    csv.lines()
        .skip(1)
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let c: Vec<&str> = l.split(',').collect();
            Ok(LoggedMove {
                time: field(&c, 0, i)?,
                train: field(&c, 1, i)?,
                line: field(&c, 2, i)?,
                station: field(&c, 3, i)?,
                event: field(&c, 4, i)?,
                onboard: field(&c, 5, i)?,
                capacity: field(&c, 6, i)?,
            })
        })
        .collect()
}

pub fn parse_waits(csv: &str) -> Result<Vec<LoggedWait>, String> {
    csv.lines()
        .skip(1)
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let c: Vec<&str> = l.split(',').collect();
            Ok(LoggedWait {
                human: field(&c, 0, i)?,
                station: field(&c, 1, i)?,
                line: field(&c, 2, i)?,
                start: field(&c, 3, i)?,
                end: field(&c, 4, i)?,
            })
        })
        .collect()
}

fn section_lookup(network: &TransitNetwork) -> BTreeMap<(String, String), usize> {
    let mut m = BTreeMap::new();
    for line in network.lines() {
        for (s, r) in partition(line.stations.len(), SECTIONS).into_iter().enumerate() {
            for ord in r {
                m.insert((line.code.clone(), network.station(line.stations[ord]).code.clone()), s);
            }
        }
    }
    m
}

fn overlap(a0: u64, a1: u64, b0: u64, b1: u64) -> u64 {
    a1.min(b1).saturating_sub(a0.max(b0))
}

/// Section usage for `(hour, line code, section)` from the movement log.
/// Each row holds until the train's next row, the last until the horizon.
/// Time after a `start` or `depot` row is out of service until the next
/// movement; `capacity` rows keep the current state.
pub fn replay_section_usage(
    network: &TransitNetwork,
    moves: &[LoggedMove],
    hours: usize,
) -> BTreeMap<(usize, String, usize), f64> {
    let sections = section_lookup(network);
    let horizon = hours as u64 * 3600;
    let mut per_train: BTreeMap<u32, Vec<&LoggedMove>> = BTreeMap::new();
    for m in moves {
        per_train.entry(m.train).or_default().push(m);
    }
    let mut out = BTreeMap::new();
    for line in network.lines() {
        for h in 0..hours {
            for s in 0..SECTIONS {
                out.insert((h, line.code.clone(), s), 0.0);
            }
        }
    }
    for rows in per_train.values() {
        let line = rows[0].line.clone();
        for h in 0..hours {
            let (h0, h1) = (h as u64 * 3600, (h as u64 + 1) * 3600);
            let mut occ = [0.0f64; SECTIONS];
            let mut cap = 0.0;
            let mut in_service = false;
            for (i, r) in rows.iter().enumerate() {
                in_service = match r.event.as_str() {
                    "start" | "depot" => false,
                    "capacity" => in_service,
                    _ => true,
                };
                if !in_service {
                    continue;
                }
                let until = rows.get(i + 1).map_or(horizon, |n| n.time).min(horizon);
                let dt = overlap(r.time, until, h0, h1) as f64;
                let s = sections.get(&(r.line.clone(), r.station.clone())).copied().unwrap_or(0);
                occ[s] += r.onboard as f64 * dt;
                cap += r.capacity as f64 * dt;
            }
            if cap > 0.0 {
                for (s, o) in occ.iter().enumerate() {
                    *out.get_mut(&(h, line.clone(), s)).expect("line known") += o / cap;
                }
            }
        }
    }
    out
}

/// Mean per-human waiting seconds for `(hour, line code, section)`.
pub fn replay_section_wait(
    network: &TransitNetwork,
    waits: &[LoggedWait],
    hours: usize,
) -> BTreeMap<(usize, String, usize), f64> {
    let sections = section_lookup(network);
    let mut sums: BTreeMap<(usize, String, usize), (f64, BTreeSet<u32>)> = BTreeMap::new();
    for w in waits {
        let s = sections[&(w.line.clone(), w.station.clone())];
        for h in 0..hours {
            let (h0, h1) = (h as u64 * 3600, (h as u64 + 1) * 3600);
            let inside = overlap(w.start, w.end, h0, h1);
            let instant = w.start == w.end && (h0..h1).contains(&w.start);
            if inside > 0 || instant {
                let e = sums.entry((h, w.line.clone(), s)).or_default();
                e.0 += inside as f64;
                e.1.insert(w.human);
            }
        }
    }
    sums.into_iter().map(|(k, (sum, who))| (k, sum / who.len() as f64)).collect()
}

/// Total waiting seconds inside each hour.
pub fn replay_wait_total(waits: &[LoggedWait], hours: usize) -> Vec<f64> {
    (0..hours)
        .map(|h| {
            let (h0, h1) = (h as u64 * 3600, (h as u64 + 1) * 3600);
            waits.iter().map(|w| overlap(w.start, w.end, h0, h1) as f64).sum()
        })
        .collect()
}
