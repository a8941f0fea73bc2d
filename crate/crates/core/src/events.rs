//! Event broadcaster: scheduled social events, polling and cascade seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EventGeneratorConfig, EventsConfig, FixedEventConfig};
use crate::engine::{SimTime, SECONDS_PER_DAY};
use crate::geo::GeoPoint;
use crate::network::TransitNetwork;
use crate::population::Human;
use crate::rng::{self, RngStreams};

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("bad event config: {0}")]
    BadConfig(String),
}

fn bad(msg: impl Into<String>) -> EventError {
    EventError::BadConfig(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventId(pub u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialEvent {
    pub id: EventId,
    pub name: String,
    pub location: GeoPoint,
    pub start: SimTime,
    pub end: SimTime,
    /// Intended audience, a contiguous block of age groups.
    pub age_groups: Vec<u8>,
    pub broadcast_from: SimTime,
}

impl SocialEvent {
    pub fn is_valid(&self) -> bool {
        self.start < self.end && self.broadcast_from <= self.start && !self.age_groups.is_empty()
    }

    pub fn targets(&self, age_group: u8) -> bool {
        self.age_groups.contains(&age_group)
    }

    pub fn duration_s(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }
}

fn clock(text: &str) -> Result<SimTime, EventError> {
    SimTime::parse_clock(text).ok_or_else(|| bad(format!("bad time {text:?}")))
}

fn fixed_event(id: EventId, f: &FixedEventConfig, network: &TransitNetwork) -> Result<SocialEvent, EventError> {
    let location = match (&f.station, f.lat, f.lon) {
        (Some(code), None, None) => {
            let sid = network.station_by_code(code).ok_or_else(|| bad(format!("unknown station {code}")))?;
            network.station(sid).location
        }
        (None, Some(lat), Some(lon)) => {
            GeoPoint::new(lat, lon).ok_or_else(|| bad(format!("coordinates out of range: {lat},{lon}")))?
        }
        _ => return Err(bad("an event needs either `station` or both `lat` and `lon`")),
    };
    let start = clock(&f.start)?;
    let end = clock(&f.end)?;
    if start >= end {
        return Err(bad(format!("event starts at {start} but ends at {end}")));
    }
    let mut age_groups = f.age_groups.clone();
    age_groups.sort_unstable();
    age_groups.dedup();
    if age_groups.is_empty() || age_groups.iter().any(|g| !(1..=6).contains(g)) {
        return Err(bad("age_groups must be a non-empty subset of 1..=6"));
    }
    Ok(SocialEvent {
        id,
        name: f.name.clone().unwrap_or_else(|| format!("event-{}", id.0)),
        location,
        start,
        end,
        age_groups,
        broadcast_from: SimTime(start.secs().saturating_sub(f.lead_minutes * 60)),
    })
}

/// All 21 contiguous blocks of age groups, drawn uniformly.
fn age_block<R: Rng>(rng: &mut R) -> Vec<u8> {
    let blocks: Vec<(u8, u8)> = (1..=6u8).flat_map(|a| (a..=6).map(move |b| (a, b))).collect();
    let (a, b) = blocks[rng.random_range(0..blocks.len())];
    (a..=b).collect()
}

fn generated_events(
    g: &EventGeneratorConfig,
    first_id: u32,
    network: &TransitNetwork,
    streams: &RngStreams,
) -> Result<Vec<SocialEvent>, EventError> {
    if g.duration_min_minutes == 0 || g.duration_min_minutes > g.duration_max_minutes {
        return Err(bad("need 0 < duration_min_minutes <= duration_max_minutes"));
    }
    if g.lead_min_minutes > g.lead_max_minutes {
        return Err(bad("need lead_min_minutes <= lead_max_minutes"));
    }
    let earliest = clock(&g.earliest_start)?.secs();
    let latest = clock(&g.latest_start)?.secs();
    if earliest > latest {
        return Err(bad("earliest_start is after latest_start"));
    }
    let bounds = g.bounds.unwrap_or_else(|| network.bounding_box());
    let mut stream = streams.stream(rng::EVENTS);
    let rng = stream.rng();
    let mut out = Vec::with_capacity(g.count);
    for i in 0..g.count {
        let location = bounds.sample(rng);
        let start_min = rng.random_range(earliest / 60..=latest / 60);
        let start = SimTime(g.day * SECONDS_PER_DAY + start_min * 60);
        let duration = rng.random_range(g.duration_min_minutes..=g.duration_max_minutes) * 60;
        let lead = rng.random_range(g.lead_min_minutes..=g.lead_max_minutes) * 60;
        let id = EventId(first_id + i as u32);
        out.push(SocialEvent {
            id,
            name: format!("event-{}", id.0),
            location,
            start,
            end: start.plus(duration),
            age_groups: age_block(rng),
            broadcast_from: SimTime(start.secs().saturating_sub(lead)),
        });
    }
    Ok(out)
}

/// Fixed events first, then generated ones; ids are positions in the list.
pub fn generate_events(
    cfg: &EventsConfig,
    network: &TransitNetwork,
    streams: &RngStreams,
) -> Result<Vec<SocialEvent>, EventError> {
    if !(0.0..=1.0).contains(&cfg.poll_probability) {
        return Err(bad("poll_probability must lie in [0, 1]"));
    }
    if cfg.poll_interval_minutes == 0 {
        return Err(bad("poll_interval_minutes must be positive"));
    }
    let mut events = cfg
        .fixed
        .iter()
        .enumerate()
        .map(|(i, f)| fixed_event(EventId(i as u32), f, network))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(g) = &cfg.generator {
        let first = events.len() as u32;
        events.extend(generated_events(g, first, network, streams)?);
    }
    Ok(events)
}

/// Parses `lat,lon,HH:MM,HH:MM` as given on the command line.
pub fn parse_event_override(text: &str) -> Result<FixedEventConfig, EventError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [lat, lon, start, end] = parts[..] else {
        return Err(bad(format!("expected lat,lon,start,end but got {text:?}")));
    };
    let lat: f64 = lat.parse().map_err(|_| bad(format!("bad latitude {lat:?}")))?;
    let lon: f64 = lon.parse().map_err(|_| bad(format!("bad longitude {lon:?}")))?;
    clock(start)?;
    clock(end)?;
    Ok(FixedEventConfig {
        name: None,
        station: None,
        lat: Some(lat),
        lon: Some(lon),
        start: start.to_string(),
        end: end.to_string(),
        age_groups: (1..=6).collect(),
        lead_minutes: 180,
    })
}

#[derive(Debug, Clone)]
pub struct BroadcastFeed {
    pub events: Vec<SocialEvent>,
    pub poll_interval_s: u64,
    pub poll_probability: f64,
}

impl BroadcastFeed {
    pub fn new(events: Vec<SocialEvent>, cfg: &EventsConfig) -> Self {
        BroadcastFeed {
            events,
            poll_interval_s: cfg.poll_interval_minutes * 60,
            poll_probability: cfg.poll_probability,
        }
    }

    pub fn event(&self, id: EventId) -> &SocialEvent {
        &self.events[id.0 as usize]
    }

    /// Events being broadcast at `t`.
    pub fn live(&self, t: SimTime) -> impl Iterator<Item = &SocialEvent> {
        self.events.iter().filter(move |e| e.broadcast_from <= t && t < e.end)
    }

    pub fn tick_time(&self, tick: u64) -> SimTime {
        SimTime(tick * self.poll_interval_s)
    }
}

/// Which events each human has already seen.
#[derive(Debug, Clone, Default)]
pub struct PollState {
    seen: Vec<Vec<EventId>>,
}

impl PollState {
    pub fn new(humans: usize) -> Self {
        PollState { seen: vec![Vec::new(); humans] }
    }

    pub fn has_seen(&self, human: u32, event: EventId) -> bool {
        self.seen[human as usize].contains(&event)
    }
}

/// One poll by `human` at poll tick `tick`. With the feed's probability the
/// human reads the feed and gets every live event it has not seen yet.
pub fn poll(feed: &BroadcastFeed, state: &mut PollState, human: u32, tick: u64, streams: &RngStreams) -> Vec<EventId> {
    let t = feed.tick_time(tick);
    let unseen: Vec<EventId> = feed.live(t).map(|e| e.id).filter(|id| !state.has_seen(human, *id)).collect();
    if unseen.is_empty() {
        return unseen;
    }
    if streams.keyed_uniform(rng::POLLS, &[human as u64, tick]) >= feed.poll_probability {
        return Vec::new();
    }
    state.seen[human as usize].extend(&unseen);
    unseen
}

/// A human who saw `event` seeds it when the event targets their age group
/// and they can arrive by its start.
pub fn inject(event: &SocialEvent, human: &Human, earliest_arrival: SimTime) -> bool {
    event.targets(human.age_group.get()) && earliest_arrival <= event.start
}
