//! Static rail network: stations, lines and the directional routes trains run.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{LineConfig, ScenarioConfig, StationConfig};
use crate::geo::{haversine_m, BoundingBox, GeoPoint};

pub const DEFAULT_RUN_S: u64 = 120;
pub const DEFAULT_DWELL_S: u64 = 30;
pub const DEFAULT_PLATFORMS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StationId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// One direction of travel on a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteId {
    pub line: LineId,
    pub dir: Direction,
}

impl RouteId {
    pub fn new(line: LineId, dir: Direction) -> Self {
        RouteId { line, dir }
    }

    /// Dense index: `line * 2 + dir`.
    pub fn index(self) -> usize {
        self.line.0 as usize * 2 + matches!(self.dir, Direction::Backward) as usize
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("line {line} references unknown station {station}")]
    DanglingReference { line: String, station: String },
    #[error("invariant violated at {element}: {reason}")]
    InvariantViolation { element: String, reason: String },
    #[error("network has no stations")]
    EmptyNetwork,
}

fn violation(element: impl Into<String>, reason: impl Into<String>) -> NetworkError {
    NetworkError::InvariantViolation { element: element.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: StationId,
    pub code: String,
    pub name: String,
    pub location: GeoPoint,
    pub platforms: u32,
    /// Line memberships with the station's ordinal on each line.
    pub lines: Vec<(LineId, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitLine {
    pub id: LineId,
    pub code: String,
    pub stations: Vec<StationId>,
    pub circular: bool,
    pub run_s: u64,
    pub dwell_s: u64,
}

impl TransitLine {
    /// Seconds from departing one stop to departing the next.
    pub fn hop_s(&self) -> u64 {
        self.run_s + self.dwell_s
    }

    /// Stops visited by one train trip. Circular trips start and end at the
    /// first listed station.
    pub fn trip_sequence(&self, dir: Direction) -> Vec<StationId> {
        let mut seq = self.stations.clone();
        match (self.circular, dir) {
            (false, Direction::Forward) => {}
            (false, Direction::Backward) => seq.reverse(),
            (true, Direction::Forward) => seq.push(self.stations[0]),
            (true, Direction::Backward) => {
                seq[1..].reverse();
                seq.push(self.stations[0]);
            }
        }
        seq
    }

    pub fn hops(&self) -> usize {
        if self.circular {
            self.stations.len()
        } else {
            self.stations.len() - 1
        }
    }

    /// Time from departing the first stop to arriving at the last one,
    /// including the final dwell.
    pub fn trip_duration_s(&self) -> u64 {
        self.hops() as u64 * self.hop_s()
    }

    pub fn ordinal_of(&self, station: StationId) -> Option<usize> {
        self.stations.iter().position(|s| *s == station)
    }

    /// Forward ride time between two stations following the loop on
    /// circular lines, or the line order otherwise.
    pub fn traversal_time_s(&self, from: StationId, to: StationId, dir: Direction) -> Option<u64> {
        let a = self.ordinal_of(from)?;
        let b = self.ordinal_of(to)?;
        let n = self.stations.len();
        let hops = match (self.circular, dir) {
            (true, Direction::Forward) => (b + n - a) % n,
            (true, Direction::Backward) => (a + n - b) % n,
            (false, Direction::Forward) if b >= a => b - a,
            (false, Direction::Backward) if a >= b => a - b,
            _ => return None,
        };
        // A full loop back to the start.
        let hops = if self.circular && hops == 0 { n } else { hops };
        Some(hops as u64 * self.hop_s())
    }
}

#[derive(Debug, Clone)]
pub struct TransitNetwork {
    stations: Vec<Station>,
    lines: Vec<TransitLine>,
    by_code: HashMap<String, StationId>,
    line_by_code: HashMap<String, LineId>,
    sequences: Vec<Vec<StationId>>,
}

impl TransitNetwork {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, NetworkError> {
        Self::build(&cfg.stations, &cfg.lines)
    }

    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let cfg = ScenarioConfig::parse(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn build(station_cfgs: &[StationConfig], line_cfgs: &[LineConfig]) -> Result<Self, NetworkError> {
        if station_cfgs.is_empty() {
            return Err(NetworkError::EmptyNetwork);
        }
        let mut stations = Vec::with_capacity(station_cfgs.len());
        let mut by_code = HashMap::new();
        for (i, sc) in station_cfgs.iter().enumerate() {
            let id = StationId(i as u32);
            if by_code.insert(sc.id.clone(), id).is_some() {
                return Err(violation(format!("station {}", sc.id), "duplicate station id"));
            }
            let location = GeoPoint::new(sc.lat, sc.lon)
                .ok_or_else(|| violation(format!("station {}", sc.id), "latitude/longitude out of range"))?;
            let platforms = sc.platforms.unwrap_or(DEFAULT_PLATFORMS);
            if platforms == 0 {
                return Err(violation(format!("station {}", sc.id), "platform_count must be at least 1"));
            }
            stations.push(Station {
                id,
                code: sc.id.clone(),
                name: sc.name.clone().unwrap_or_else(|| sc.id.clone()),
                location,
                platforms,
                lines: Vec::new(),
            });
        }

        let mut lines = Vec::with_capacity(line_cfgs.len());
        let mut line_by_code = HashMap::new();
        for (i, lc) in line_cfgs.iter().enumerate() {
            let id = LineId(i as u32);
            let element = format!("line {}", lc.id);
            if line_by_code.insert(lc.id.clone(), id).is_some() {
                return Err(violation(element, "duplicate line id"));
            }
            if lc.stations.len() < 2 {
                return Err(violation(element, "a line needs at least 2 stations"));
            }
            let mut members = Vec::with_capacity(lc.stations.len());
            for code in &lc.stations {
                let sid = *by_code
                    .get(code)
                    .ok_or_else(|| NetworkError::DanglingReference { line: lc.id.clone(), station: code.clone() })?;
                if members.contains(&sid) {
                    return Err(violation(element, format!("station {code} listed twice")));
                }
                members.push(sid);
            }
            let run_s = lc.run_s.unwrap_or(DEFAULT_RUN_S);
            if run_s == 0 {
                return Err(violation(element, "run time must be positive"));
            }
            for (ordinal, sid) in members.iter().enumerate() {
                stations[sid.0 as usize].lines.push((id, ordinal));
            }
            lines.push(TransitLine {
                id,
                code: lc.id.clone(),
                stations: members,
                circular: lc.circular,
                run_s,
                dwell_s: lc.dwell_s.unwrap_or(DEFAULT_DWELL_S),
            });
        }

        let mut sequences = Vec::with_capacity(lines.len() * 2);
        for line in &lines {
            for dir in Direction::BOTH {
                sequences.push(line.trip_sequence(dir));
            }
        }
        Ok(TransitNetwork { stations, lines, by_code, line_by_code, sequences })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> &Station {
        &self.stations[id.0 as usize]
    }

    pub fn station_by_code(&self, code: &str) -> Option<StationId> {
        self.by_code.get(code).copied()
    }

    pub fn lines(&self) -> &[TransitLine] {
        &self.lines
    }

    pub fn line(&self, id: LineId) -> &TransitLine {
        &self.lines[id.0 as usize]
    }

    pub fn line_by_code(&self, code: &str) -> Option<LineId> {
        self.line_by_code.get(code).copied()
    }

    pub fn routes(&self) -> impl Iterator<Item = RouteId> + '_ {
        self.lines.iter().flat_map(|l| Direction::BOTH.map(|d| RouteId::new(l.id, d)))
    }

    pub fn route_count(&self) -> usize {
        self.lines.len() * 2
    }

    /// Stops of one trip along `route`, first to last.
    pub fn sequence(&self, route: RouteId) -> &[StationId] {
        &self.sequences[route.index()]
    }

    /// First position of `station` within the route's trip sequence.
    pub fn first_position(&self, route: RouteId, station: StationId) -> Option<usize> {
        self.sequence(route).iter().position(|s| *s == station)
    }

    /// Last position of `station` within the route's trip sequence.
    pub fn last_position(&self, route: RouteId, station: StationId) -> Option<usize> {
        self.sequence(route).iter().rposition(|s| *s == station)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::around(self.stations.iter().map(|s| &s.location)).expect("network is non-empty")
    }

    /// Closest station by great-circle distance; ties go to the lower id.
    pub fn nearest_station(&self, p: GeoPoint) -> Result<StationId, NetworkError> {
        let mut best: Option<(f64, StationId)> = None;
        for s in &self.stations {
            let d = haversine_m(p, s.location);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s.id));
            }
        }
        best.map(|(_, id)| id).ok_or(NetworkError::EmptyNetwork)
    }

    pub fn is_interchange(&self, id: StationId) -> bool {
        self.station(id).lines.len() > 1
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_station() -> &'static str {
        r#"
[[stations]]
id = "A"
lat = 1.30
lon = 103.80
[[stations]]
id = "B"
lat = 1.30
lon = 103.82
[[lines]]
id = "L"
stations = ["A", "B"]
"#
    }

    #[test]
    fn minimal_network_is_valid() {
        let net = TransitNetwork::parse(two_station()).unwrap();
        assert_eq!(net.stations().len(), 2);
        assert_eq!(net.lines().len(), 1);
        assert_eq!(net.station(StationId(0)).platforms, 2);
        let line = &net.lines()[0];
        assert_eq!(line.run_s, 120);
        assert_eq!(line.dwell_s, 30);
        assert_eq!(net.sequence(RouteId::new(LineId(0), Direction::Backward)), &[StationId(1), StationId(0)]);
    }

    #[test]
    fn dangling_reference_names_station() {
        let text = two_station().replace(r#"["A", "B"]"#, r#"["A", "Z"]"#);
        let err = TransitNetwork::parse(&text).unwrap_err();
        assert_eq!(err, NetworkError::DanglingReference { line: "L".into(), station: "Z".into() });
    }

    #[test]
    fn invariant_violations_name_element() {
        let one = two_station().replace(r#"["A", "B"]"#, r#"["A"]"#);
        assert!(
            matches!(TransitNetwork::parse(&one), Err(NetworkError::InvariantViolation { element, .. }) if element == "line L")
        );
        let zero_platforms = two_station().replacen("lon = 103.80", "lon = 103.80\nplatforms = 0", 1);
        assert!(
            matches!(TransitNetwork::parse(&zero_platforms), Err(NetworkError::InvariantViolation { element, .. }) if element == "station A")
        );
        let zero_run = two_station().replace(r#"stations = ["A", "B"]"#, "stations = [\"A\", \"B\"]\nrun_s = 0");
        assert!(matches!(TransitNetwork::parse(&zero_run), Err(NetworkError::InvariantViolation { .. })));
    }

    #[test]
    fn parse_error_surfaces() {
        assert!(matches!(TransitNetwork::parse("[[stations]\n"), Err(NetworkError::Parse(_))));
    }

    #[test]
    fn nearest_station_exact_and_tie() {
        let net = TransitNetwork::parse(two_station()).unwrap();
        assert_eq!(net.nearest_station(GeoPoint { lat: 1.30, lon: 103.82 }).unwrap(), StationId(1));
        // Exactly representable coordinates so the midpoint is a true tie.
        let wide = two_station().replace("lon = 103.80", "lon = 103.5").replace("lon = 103.82", "lon = 104.5");
        let net = TransitNetwork::parse(&wide).unwrap();
        assert_eq!(net.nearest_station(GeoPoint { lat: 1.30, lon: 104.0 }).unwrap(), StationId(0));
    }

    #[test]
    fn circular_sequences_close_the_loop() {
        let text = r#"
[[stations]]
id = "A"
lat = 1.30
lon = 103.80
[[stations]]
id = "B"
lat = 1.31
lon = 103.81
[[stations]]
id = "C"
lat = 1.30
lon = 103.82
[[lines]]
id = "CC"
stations = ["A", "B", "C"]
circular = true
"#;
        let net = TransitNetwork::parse(text).unwrap();
        let line = &net.lines()[0];
        let fwd = net.sequence(RouteId::new(line.id, Direction::Forward));
        let bwd = net.sequence(RouteId::new(line.id, Direction::Backward));
        assert_eq!(fwd, &[StationId(0), StationId(1), StationId(2), StationId(0)]);
        assert_eq!(bwd, &[StationId(0), StationId(2), StationId(1), StationId(0)]);
        for s in &line.stations {
            for dir in Direction::BOTH {
                assert_eq!(line.traversal_time_s(*s, *s, dir), Some(3 * 150));
            }
        }
        assert_eq!(line.trip_duration_s(), 450);
    }
}
