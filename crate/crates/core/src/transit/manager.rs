//! Ridership history and event-driven ridership estimates.

use std::collections::BTreeMap;

use crate::engine::{SimTime, SECONDS_PER_HOUR};
use crate::events::SocialEvent;
use crate::geo::GeoPoint;
use crate::network::{RouteId, StationId, TransitNetwork};
use crate::population::{Category, Human};

/// Token issues per (route, absolute hour, station).
#[derive(Debug, Clone, Default)]
pub struct RidershipHistory {
    counts: BTreeMap<(RouteId, u64, StationId), u32>,
}

impl RidershipHistory {
    pub fn record(&mut self, route: RouteId, station: StationId, t: SimTime) {
        *self.counts.entry((route, t.hour(), station)).or_default() += 1;
    }

    pub fn route_hour(&self, route: RouteId, hour: u64) -> u32 {
        self.counts.range((route, hour, StationId(0))..=(route, hour, StationId(u32::MAX))).map(|(_, c)| *c).sum()
    }

    /// Same hour of the previous day; zero on day 0.
    pub fn baseline(&self, route: RouteId, hour: u64) -> u32 {
        if hour < 24 {
            0
        } else {
            self.route_hour(route, hour - 24)
        }
    }
}

/// Where a human is assumed to set out from at time `t`.
pub fn source_location(h: &Human, t: SimTime) -> GeoPoint {
    let tod = t.time_of_day();
    let within = |from: u64, to: u64| (from..to).contains(&tod);
    match h.category {
        Category::WorkingProfessional if within(9 * SECONDS_PER_HOUR, 18 * SECONDS_PER_HOUR) => {
            h.office.unwrap_or(h.home)
        }
        Category::Student if within(7 * SECONDS_PER_HOUR + 1800, 14 * SECONDS_PER_HOUR) => h.school.unwrap_or(h.home),
        _ => h.home,
    }
}

/// Per route index, how many attendees have a source station before the
/// event's station along that route.
pub fn event_delta(network: &TransitNetwork, event: &SocialEvent, attendees: &[&Human]) -> Vec<u32> {
    let mut delta = vec![0; network.route_count()];
    let Ok(dest) = network.nearest_station(event.location) else {
        return delta;
    };
    for h in attendees {
        let Ok(src) = network.nearest_station(source_location(h, event.start)) else { continue };
        if src == dest {
            continue;
        }
        for route in network.routes() {
            if let (Some(a), Some(b)) = (network.first_position(route, src), network.last_position(route, dest)) {
                if a < b {
                    delta[route.index()] += 1;
                }
            }
        }
    }
    delta
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidershipEstimate {
    pub hour: u64,
    /// Indexed by route index.
    pub baseline: Vec<u32>,
    pub delta: Vec<u32>,
}

impl RidershipEstimate {
    pub fn total(&self, route: RouteId) -> u32 {
        self.baseline[route.index()] + self.delta[route.index()]
    }
}

/// Estimate for absolute hour `hour`: history baseline plus the deltas of
/// events starting in that hour.
pub fn estimate_ridership(
    network: &TransitNetwork,
    history: &RidershipHistory,
    hour: u64,
    events: &[(&SocialEvent, Vec<&Human>)],
) -> RidershipEstimate {
    let baseline = network.routes().map(|r| history.baseline(r, hour)).collect();
    let mut delta = vec![0; network.route_count()];
    for (ev, attendees) in events.iter().filter(|(e, _)| e.start.hour() == hour) {
        for (d, x) in delta.iter_mut().zip(event_delta(network, ev, attendees)) {
            *d += x;
        }
    }
    RidershipEstimate { hour, baseline, delta }
}
