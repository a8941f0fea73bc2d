//! Timetables and the train inquiry interface.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{HeadwayBand, ScheduleConfig};
use crate::engine::{SimTime, SECONDS_PER_DAY, SECONDS_PER_HOUR};
use crate::network::{RouteId, StationId, TransitNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("bad clock value {0:?}")]
    BadClock(String),
    #[error("headway must be positive on line {0}")]
    BadHeadway(String),
    #[error("schedule references unknown line {0}")]
    UnknownLine(String),
    #[error("unknown station {0}")]
    UnknownStation(StationId),
}

/// A trip is one run of a train along a route, keyed by its terminal slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripKey {
    pub route: RouteId,
    /// Scheduled departure time from the first stop.
    pub slot: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub trip: TripKey,
    /// Delay-adjusted departure time from the queried station.
    pub time: SimTime,
    pub delay_s: i64,
}

/// Read-only schedule queries used by humans to plan trips.
pub trait TrainInquiry {
    /// Next departures from `station` on `route` at or after `t`, earliest first.
    fn next_departures(
        &self,
        route: RouteId,
        station: StationId,
        t: SimTime,
        limit: usize,
    ) -> Result<Vec<Departure>, ScheduleError>;

    /// Expected wait used for planning: half the scheduled headway while the
    /// route is in service, otherwise the gap to the next departure.
    fn expected_wait_s(&self, route: RouteId, station: StationId, t: SimTime) -> Option<u64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadwayProfile {
    pub first_departure_s: u64,
    pub last_departure_s: u64,
    pub default_headway_s: u64,
    /// `(from, to, headway)` in seconds of day.
    pub bands: Vec<(u64, u64, u64)>,
}

impl HeadwayProfile {
    pub fn headway_at(&self, time_of_day: u64) -> u64 {
        self.bands
            .iter()
            .find(|(from, to, _)| (*from..*to).contains(&time_of_day))
            .map(|b| b.2)
            .unwrap_or(self.default_headway_s)
    }

    pub fn min_headway(&self) -> u64 {
        self.bands.iter().map(|b| b.2).chain([self.default_headway_s]).min().unwrap_or(1)
    }

    /// Terminal departures within one day, seconds of day.
    pub fn departures(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut t = self.first_departure_s;
        while t <= self.last_departure_s {
            out.push(t);
            t += self.headway_at(t);
        }
        out
    }
}

fn parse_clock(text: &str) -> Result<u64, ScheduleError> {
    SimTime::parse_clock(text).map(|t| t.secs()).ok_or_else(|| ScheduleError::BadClock(text.to_string()))
}

fn minutes_to_s(m: f64, line: &str) -> Result<u64, ScheduleError> {
    if !(m.is_finite() && m > 0.0) {
        return Err(ScheduleError::BadHeadway(line.to_string()));
    }
    Ok((m * 60.0).round().max(1.0) as u64)
}

fn bands_to_s(bands: &[HeadwayBand], line: &str) -> Result<Vec<(u64, u64, u64)>, ScheduleError> {
    bands
        .iter()
        .map(|b| Ok((parse_clock(&b.from)?, parse_clock(&b.to)?, minutes_to_s(b.headway_minutes, line)?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainSchedule {
    profiles: Vec<HeadwayProfile>,
    /// Per route index: terminal departures as seconds of day.
    slots: Vec<Vec<u64>>,
    hop_s: Vec<u64>,
    dwell_s: Vec<u64>,
    sequences: Vec<Vec<StationId>>,
    pub turnaround_s: u64,
}

impl TrainSchedule {
    pub fn from_config(network: &TransitNetwork, cfg: &ScheduleConfig) -> Result<Self, ScheduleError> {
        for code in cfg.lines.keys() {
            if network.line_by_code(code).is_none() {
                return Err(ScheduleError::UnknownLine(code.clone()));
            }
        }
        let mut profiles = Vec::new();
        for line in network.lines() {
            let over = cfg.lines.get(&line.code);
            let first = over.and_then(|o| o.first_departure.as_deref()).unwrap_or(&cfg.first_departure);
            let last = over.and_then(|o| o.last_departure.as_deref()).unwrap_or(&cfg.last_departure);
            let default = over.and_then(|o| o.default_headway_minutes).unwrap_or(cfg.default_headway_minutes);
            let bands = over.and_then(|o| o.bands.as_deref()).unwrap_or(&cfg.bands);
            profiles.push(HeadwayProfile {
                first_departure_s: parse_clock(first)?,
                last_departure_s: parse_clock(last)?,
                default_headway_s: minutes_to_s(default, &line.code)?,
                bands: bands_to_s(bands, &line.code)?,
            });
        }
        Ok(Self::new(network, profiles, cfg.turnaround_s))
    }

    pub fn new(network: &TransitNetwork, profiles: Vec<HeadwayProfile>, turnaround_s: u64) -> Self {
        let mut slots = vec![Vec::new(); network.route_count()];
        let mut hop_s = vec![0; network.route_count()];
        let mut dwell_s = vec![0; network.route_count()];
        let mut sequences = vec![Vec::new(); network.route_count()];
        for route in network.routes() {
            let line = network.line(route.line);
            slots[route.index()] = profiles[route.line.0 as usize].departures();
            hop_s[route.index()] = line.hop_s();
            dwell_s[route.index()] = line.dwell_s;
            sequences[route.index()] = network.sequence(route).to_vec();
        }
        TrainSchedule { profiles, slots, hop_s, dwell_s, sequences, turnaround_s }
    }

    pub fn profile(&self, route: RouteId) -> &HeadwayProfile {
        &self.profiles[route.line.0 as usize]
    }

    pub fn headway_s(&self, route: RouteId, t: SimTime) -> u64 {
        self.profile(route).headway_at(t.time_of_day())
    }

    /// Terminal departure slots of `route` on `day`.
    pub fn slots(&self, route: RouteId, day: u64) -> impl Iterator<Item = SimTime> + '_ {
        self.slots[route.index()].iter().map(move |s| SimTime::on_day(day, *s))
    }

    /// Terminal departures whose slot falls in absolute hour `hour`.
    pub fn departures_in_hour(&self, route: RouteId, hour: u64) -> usize {
        let from = (hour * SECONDS_PER_HOUR) % SECONDS_PER_DAY;
        let to = from + SECONDS_PER_HOUR;
        self.slots[route.index()].iter().filter(|s| (from..to).contains(*s)).count()
    }

    /// Planned departure of a trip from position `pos` of its sequence.
    pub fn planned_departure(&self, trip: TripKey, pos: usize) -> SimTime {
        let r = trip.route.index();
        trip.slot.plus(self.dwell_s[r] + pos as u64 * self.hop_s[r])
    }

    /// Planned arrival at position `pos` (the first stop "arrives" at the slot).
    pub fn planned_arrival(&self, trip: TripKey, pos: usize) -> SimTime {
        let r = trip.route.index();
        trip.slot.plus(pos as u64 * self.hop_s[r])
    }

    /// Position a passenger boards at: first occurrence, never the last stop.
    pub fn boarding_position(&self, route: RouteId, station: StationId) -> Option<usize> {
        let seq = &self.sequences[route.index()];
        seq[..seq.len() - 1].iter().position(|s| *s == station)
    }

    pub fn sequence(&self, route: RouteId) -> &[StationId] {
        &self.sequences[route.index()]
    }

    /// Upper bound on how long before `t` a still-pending trip could have
    /// been slotted (used to bound inquiry scans).
    pub fn max_trip_span(&self, route: RouteId) -> u64 {
        let r = route.index();
        self.dwell_s[r] + self.sequences[r].len() as u64 * self.hop_s[r]
    }

    /// Planned departures from a station, with a per-trip delay lookup and
    /// a filter for trips already past the station.
    pub fn departures_with<D, P>(
        &self,
        route: RouteId,
        station: StationId,
        t: SimTime,
        limit: usize,
        delay_of: D,
        passed: P,
    ) -> Result<Vec<Departure>, ScheduleError>
    where
        D: Fn(TripKey) -> i64,
        P: Fn(TripKey, usize) -> bool,
    {
        let pos = self.boarding_position(route, station).ok_or(ScheduleError::UnknownStation(station))?;
        let offset = self.dwell_s[route.index()] + pos as u64 * self.hop_s[route.index()];
        let slots = &self.slots[route.index()];
        let mut out: Vec<Departure> = Vec::new();
        let day = t.day();
        // Allow up to two hours of delay before a trip is considered gone.
        let slack = 2 * SECONDS_PER_HOUR;
        for d in day.saturating_sub(1)..=day + 1 {
            let base = d * SECONDS_PER_DAY;
            let earliest = t.secs().saturating_sub(slack + offset);
            let start = slots.partition_point(|s| base + s < earliest);
            for s in &slots[start..] {
                let trip = TripKey { route, slot: SimTime(base + s) };
                if passed(trip, pos) {
                    continue;
                }
                let delay = delay_of(trip);
                let planned = (base + s + offset) as i64;
                let time = SimTime((planned + delay).max(0) as u64);
                if time >= t {
                    out.push(Departure { trip, time, delay_s: delay });
                }
                if planned as u64 > t.secs() + slack && out.len() >= limit {
                    break;
                }
            }
        }
        out.sort_by_key(|d| (d.time, d.trip.slot));
        out.truncate(limit);
        Ok(out)
    }

    fn planning_wait(&self, route: RouteId, t: SimTime, next: Option<SimTime>) -> Option<u64> {
        let next = next?;
        let gap = next.saturating_sub(t);
        let headway = self.headway_s(route, t);
        Some(if gap <= headway { headway / 2 } else { gap })
    }

    /// Expected wait given a departure lookup.
    pub fn expected_wait_with(&self, route: RouteId, t: SimTime, next: Option<SimTime>) -> Option<u64> {
        self.planning_wait(route, t, next)
    }
}

impl TrainInquiry for TrainSchedule {
    fn next_departures(
        &self,
        route: RouteId,
        station: StationId,
        t: SimTime,
        limit: usize,
    ) -> Result<Vec<Departure>, ScheduleError> {
        self.departures_with(route, station, t, limit, |_| 0, |_, _| false)
    }

    fn expected_wait_s(&self, route: RouteId, station: StationId, t: SimTime) -> Option<u64> {
        let next = self.next_departures(route, station, t, 1).ok()?.first().map(|d| d.time);
        self.planning_wait(route, t, next)
    }
}

/// Known delays per trip, reported by station masters.
#[derive(Debug, Clone, Default)]
pub struct DelayBoard {
    delays: BTreeMap<TripKey, i64>,
    /// Last position each trip has departed from.
    progress: BTreeMap<TripKey, usize>,
}

impl DelayBoard {
    pub fn report(&mut self, trip: TripKey, delay_s: i64) {
        self.delays.insert(trip, delay_s);
    }

    pub fn departed(&mut self, trip: TripKey, pos: usize) {
        self.progress.insert(trip, pos);
    }

    pub fn delay(&self, trip: TripKey) -> i64 {
        self.delays.get(&trip).copied().unwrap_or(0)
    }

    pub fn has_passed(&self, trip: TripKey, pos: usize) -> bool {
        self.progress.get(&trip).is_some_and(|p| *p >= pos)
    }

    pub fn finish(&mut self, trip: TripKey) {
        self.progress.insert(trip, usize::MAX);
        self.delays.remove(&trip);
    }
}

/// Schedule view that applies station-master delay reports.
pub struct LiveInquiry<'a> {
    pub schedule: &'a TrainSchedule,
    pub delays: &'a DelayBoard,
}

impl TrainInquiry for LiveInquiry<'_> {
    fn next_departures(
        &self,
        route: RouteId,
        station: StationId,
        t: SimTime,
        limit: usize,
    ) -> Result<Vec<Departure>, ScheduleError> {
        self.schedule.departures_with(
            route,
            station,
            t,
            limit,
            |trip| self.delays.delay(trip),
            |trip, pos| self.delays.has_passed(trip, pos),
        )
    }

    fn expected_wait_s(&self, route: RouteId, station: StationId, t: SimTime) -> Option<u64> {
        let next = self.next_departures(route, station, t, 1).ok()?.first().map(|d| d.time);
        self.schedule.expected_wait_with(route, t, next)
    }
}
