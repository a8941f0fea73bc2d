//! Trains, station masters, the transport manager and schedules.

mod manager;
mod schedule;
mod station;

pub use manager::{estimate_ridership, event_delta, source_location, RidershipEstimate, RidershipHistory};
pub use schedule::{
    DelayBoard, Departure, HeadwayProfile, LiveInquiry, ScheduleError, TrainInquiry, TrainSchedule, TripKey,
};
pub use station::{Admission, StationError, StationMaster, Token, TokenRecord};

use serde::{Deserialize, Serialize};

use crate::network::{Direction, LineId, RouteId, StationId, TransitLine};
use crate::population::HumanId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainId(pub u32);

/// Seats for the initial fleet: the real-world seats-per-rider ratio
/// applied to simulated ridership, rounded up to whole compartments.
pub fn initial_capacity(sim_daily_ridership: f64, real_daily_ridership: f64, real_capacity: f64, seats: u32) -> u32 {
    let raw = sim_daily_ridership * real_capacity / real_daily_ridership;
    let compartments = ((raw / seats as f64) - 1e-9).ceil().max(1.0) as u32;
    compartments * seats
}

/// Trains needed to serve both directions of a line at its shortest
/// headway: one full cycle (run, final dwell, turnaround) per direction.
pub fn fleet_size(line: &TransitLine, min_headway_s: u64, turnaround_s: u64) -> usize {
    let cycle = line.trip_duration_s() + line.dwell_s + turnaround_s;
    (2 * cycle).div_ceil(min_headway_s.max(1)) as usize
}

/// Station whose depot serves departures of `route`.
pub fn origin_terminal(line: &TransitLine, dir: Direction) -> StationId {
    match (line.circular, dir) {
        (true, _) | (false, Direction::Forward) => line.stations[0],
        (false, Direction::Backward) => *line.stations.last().expect("line has stations"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainState {
    /// In the depot at a terminal, ready from the given time.
    Depot { station: StationId, ready_at: u64 },
    /// Waiting to enter a station platform.
    Held { pos: usize },
    /// At a platform.
    Dwelling { pos: usize },
    /// On the segment leaving position `pos`.
    Running { pos: usize },
}

#[derive(Debug, Clone)]
pub struct Train {
    pub id: TrainId,
    pub line: LineId,
    pub compartments: u32,
    pub seats_per_compartment: u32,
    pub state: TrainState,
    /// Trip currently being run.
    pub trip: Option<TripKey>,
    /// Route of the next trip when in the depot, else of the current trip.
    pub next_route: RouteId,
    pub onboard: Vec<HumanId>,
    pub pending_attach: u32,
    pub pending_detach: u32,
}

impl Train {
    pub fn new(id: TrainId, line: LineId, compartments: u32, seats: u32, depot: StationId, route: RouteId) -> Self {
        Train {
            id,
            line,
            compartments,
            seats_per_compartment: seats,
            state: TrainState::Depot { station: depot, ready_at: 0 },
            trip: None,
            next_route: route,
            onboard: Vec::new(),
            pending_attach: 0,
            pending_detach: 0,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.compartments * self.seats_per_compartment
    }

    /// Compartments once pending changes are applied.
    pub fn effective_compartments(&self) -> u32 {
        self.compartments + self.pending_attach - self.pending_detach
    }

    pub fn free_seats(&self) -> u32 {
        self.capacity().saturating_sub(self.onboard.len() as u32)
    }

    pub fn in_depot(&self) -> bool {
        matches!(self.state, TrainState::Depot { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_formula() {
        assert_eq!(initial_capacity(370_000.0, 2_300_000.0, 1920.0, 31), 310);
        assert_eq!(initial_capacity(2_300_000.0, 2_300_000.0, 1920.0, 31), 62 * 31);
        assert_eq!(initial_capacity(1.0, 2_300_000.0, 1920.0, 31), 31);
        assert_eq!(initial_capacity(2_300_000.0, 2_300_000.0, 310.0, 31), 310);
    }

    #[test]
    fn fleet_covers_a_round_trip() {
        let line = TransitLine {
            id: LineId(0),
            code: "L".into(),
            stations: (0..20).map(StationId).collect(),
            circular: false,
            run_s: 120,
            dwell_s: 30,
        };
        // 19 hops of 150 s, 30 s final dwell, 60 s turnaround: 2940 s per direction.
        assert_eq!(fleet_size(&line, 240, 60), 5880usize.div_ceil(240));
    }
}
