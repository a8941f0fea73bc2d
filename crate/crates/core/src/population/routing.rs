//! Door-to-door route planning over road and rail, and the attendance rule.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::events::SocialEvent;
use crate::geo::{GeoPoint, RoadRouter};
use crate::network::{RouteId, StationId, TransitNetwork};
use crate::transit::{TrainInquiry, TripKey};

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no route: the network has no stations")]
    Unreachable,
}

#[derive(Debug, Error, PartialEq)]
pub enum AttendanceError {
    #[error("event already ended at decision time {0}")]
    EventEnded(SimTime),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadLeg {
    pub from: GeoPoint,
    pub to: GeoPoint,
    pub duration_s: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainLeg {
    pub route: RouteId,
    pub from: StationId,
    pub to: StationId,
    /// Planned wait at `from` before the train leaves.
    pub wait_s: u64,
    /// From departing `from` to arriving at `to`.
    pub ride_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    /// Road leg to the boarding station, or the whole trip when road-only.
    pub access: RoadLeg,
    pub boarding: Option<StationId>,
    pub alighting: Option<StationId>,
    pub legs: Vec<TrainLeg>,
    pub egress: RoadLeg,
    pub total_s: u64,
}

impl Route {
    pub fn road_only(origin: GeoPoint, destination: GeoPoint, road: &RoadRouter) -> Route {
        let duration_s = road.travel_time(origin, destination);
        Route {
            origin,
            destination,
            access: RoadLeg { from: origin, to: destination, duration_s },
            boarding: None,
            alighting: None,
            legs: Vec::new(),
            egress: RoadLeg { from: destination, to: destination, duration_s: 0 },
            total_s: duration_s,
        }
    }

    pub fn uses_rail(&self) -> bool {
        !self.legs.is_empty()
    }

    /// Sum of the leg components; equals `total_s` for every planned route.
    pub fn component_sum(&self) -> u64 {
        self.access.duration_s + self.legs.iter().map(|l| l.wait_s + l.ride_s).sum::<u64>() + self.egress.duration_s
    }
}

/// How the wait for the first train is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstWait {
    /// Planning estimate from the inquiry (half a headway in service).
    Expected,
    /// Actual next departures, skipping one trip (e.g. a full train).
    Actual { exclude: Option<TripKey> },
}

fn ride_s(network: &TransitNetwork, route: RouteId, from_pos: usize, to_pos: usize) -> u64 {
    let line = network.line(route.line);
    (to_pos - from_pos) as u64 * line.hop_s() - line.dwell_s
}

/// Fastest chain of train legs from `from` to `to`, starting at `t`.
///
/// Each leg costs its wait plus ride time; transfers wait again. Returns
/// the legs and the time spent from `t` to arrival at `to`.
pub fn rail_search(
    network: &TransitNetwork,
    inquiry: &dyn TrainInquiry,
    from: StationId,
    to: StationId,
    t: SimTime,
    first: FirstWait,
) -> Option<(Vec<TrainLeg>, u64)> {
    let n = network.stations().len();
    let mut best: Vec<Option<u64>> = vec![None; n];
    let mut via: Vec<Option<(usize, TrainLeg)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    best[from.0 as usize] = Some(t.secs());
    heap.push(Reverse((t.secs(), from.0)));

    while let Some(Reverse((now, s))) = heap.pop() {
        if best[s as usize] != Some(now) {
            continue;
        }
        let station = StationId(s);
        if station == to {
            break;
        }
        for (line, _) in &network.station(station).lines {
            for route in crate::network::Direction::BOTH.map(|d| RouteId::new(*line, d)) {
                let seq = network.sequence(route);
                let Some(pos) = seq[..seq.len() - 1].iter().position(|x| *x == station) else {
                    continue;
                };
                let wait = if station == from && now == t.secs() {
                    match first {
                        FirstWait::Expected => inquiry.expected_wait_s(route, station, SimTime(now)),
                        FirstWait::Actual { exclude } => inquiry
                            .next_departures(route, station, SimTime(now), 2)
                            .ok()
                            .and_then(|deps| deps.into_iter().find(|d| Some(d.trip) != exclude))
                            .map(|d| d.time.saturating_sub(SimTime(now))),
                    }
                } else {
                    inquiry.expected_wait_s(route, station, SimTime(now))
                };
                let Some(wait) = wait else { continue };
                for (p, next) in seq.iter().enumerate().skip(pos + 1) {
                    let ride = ride_s(network, route, pos, p);
                    let arrive = now + wait + ride;
                    let slot = &mut best[next.0 as usize];
                    if slot.is_none_or(|b| arrive < b) {
                        *slot = Some(arrive);
                        via[next.0 as usize] = Some((
                            s as usize,
                            TrainLeg { route, from: station, to: *next, wait_s: wait, ride_s: ride },
                        ));
                        heap.push(Reverse((arrive, next.0)));
                    }
                }
            }
        }
    }

    let arrival = best[to.0 as usize]?;
    let mut legs = Vec::new();
    let mut cur = to.0 as usize;
    while cur != from.0 as usize {
        let (prev, leg) = via[cur]?;
        legs.push(leg);
        cur = prev;
    }
    legs.reverse();
    Some((legs, arrival - t.secs()))
}

/// Minimum-time route leaving `origin` at `t`. Boarding and alighting use
/// the stations nearest to the endpoints; road-only wins when it is
/// strictly faster or when both endpoints share a nearest station.
pub fn plan_route(
    network: &TransitNetwork,
    road: &RoadRouter,
    inquiry: &dyn TrainInquiry,
    origin: GeoPoint,
    destination: GeoPoint,
    t: SimTime,
) -> Result<Route, RoutingError> {
    let board = network.nearest_station(origin).map_err(|_| RoutingError::Unreachable)?;
    let alight = network.nearest_station(destination).map_err(|_| RoutingError::Unreachable)?;
    let road_only = Route::road_only(origin, destination, road);
    if board == alight {
        return Ok(road_only);
    }
    let board_at = network.station(board).location;
    let alight_at = network.station(alight).location;
    let access = RoadLeg { from: origin, to: board_at, duration_s: road.travel_time(origin, board_at) };
    let egress = RoadLeg { from: alight_at, to: destination, duration_s: road.travel_time(alight_at, destination) };
    let rail = rail_search(network, inquiry, board, alight, t.plus(access.duration_s), FirstWait::Expected);
    Ok(match rail {
        Some((legs, rail_s)) if access.duration_s + rail_s + egress.duration_s < road_only.total_s => Route {
            origin,
            destination,
            access,
            boarding: Some(board),
            alighting: Some(alight),
            legs,
            egress,
            total_s: access.duration_s + rail_s + egress.duration_s,
        },
        _ => road_only,
    })
}

/// Replans for a human left behind at `station` by the full train `full`.
///
/// Candidates are every rail route from the station (the first wait uses
/// real departures other than `full`, so waiting for the next train on the
/// same route is one of them) and going on by road. The fastest wins; road
/// must be strictly faster.
pub fn choose_alternative_route(
    network: &TransitNetwork,
    road: &RoadRouter,
    inquiry: &dyn TrainInquiry,
    current: &Route,
    station: StationId,
    now: SimTime,
    full: TripKey,
) -> Route {
    let here = network.station(station).location;
    let destination = current.destination;
    let road_only = Route::road_only(here, destination, road);
    let alight = current.alighting.or_else(|| network.nearest_station(destination).ok()).unwrap_or(station);
    if alight == station {
        return road_only;
    }
    let alight_at = network.station(alight).location;
    let egress = RoadLeg { from: alight_at, to: destination, duration_s: road.travel_time(alight_at, destination) };
    match rail_search(network, inquiry, station, alight, now, FirstWait::Actual { exclude: Some(full) }) {
        Some((legs, rail_s)) if rail_s + egress.duration_s <= road_only.total_s => Route {
            origin: here,
            destination,
            access: RoadLeg { from: here, to: here, duration_s: 0 },
            boarding: Some(station),
            alighting: Some(alight),
            legs,
            egress,
            total_s: rail_s + egress.duration_s,
        },
        _ => road_only,
    }
}

/// On time means arriving no later than a tenth of the event's duration
/// after its start.
pub fn attends_with_arrival(arrival: SimTime, start: SimTime, end: SimTime) -> bool {
    let tau = end.saturating_sub(start) / 10;
    arrival <= start.plus(tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attendance {
    pub attend: bool,
    pub arrival: SimTime,
    pub route: Route,
}

/// Decides at `now` whether a human who can leave `from` at `ready_at`
/// (no earlier than `now`) reaches `event` on time.
pub fn decide_attendance(
    network: &TransitNetwork,
    road: &RoadRouter,
    inquiry: &dyn TrainInquiry,
    from: GeoPoint,
    now: SimTime,
    ready_at: SimTime,
    event: &SocialEvent,
) -> Result<Attendance, AttendanceError> {
    if now >= event.end {
        return Err(AttendanceError::EventEnded(now));
    }
    let leave = ready_at.max(now);
    let route = plan_route(network, road, inquiry, from, event.location, leave)
        .unwrap_or_else(|_| Route::road_only(from, event.location, road));
    let arrival = leave.plus(route.total_s);
    Ok(Attendance { attend: attends_with_arrival(arrival, event.start, event.end), arrival, route })
}
