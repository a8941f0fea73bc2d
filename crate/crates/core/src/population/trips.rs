//! Category-specific daily trip plans.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Category, Human, HOME_ERRAND_RADIUS_M, RESTAURANT_RADIUS_M};
use crate::engine::SimTime;
use crate::geo::GeoPoint;
use crate::rng::{self, RngStreams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaceKind {
    Home,
    Office,
    School,
    Shop,
    Restaurant,
    Other,
    Event,
}

/// One outbound/return pair of trips. Optional pairs happen with
/// probability one half, and then both legs happen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripRule {
    pub category: Category,
    pub outbound: (PlaceKind, PlaceKind, &'static str, &'static str),
    pub inbound: (PlaceKind, PlaceKind, &'static str, &'static str),
    pub optional: bool,
}

use Category::*;
use PlaceKind::*;

pub const TRIP_RULES: &[TripRule] = &[
    TripRule {
        category: WorkingProfessional,
        outbound: (Home, Office, "07:30", "09:30"),
        inbound: (Office, Home, "17:30", "20:00"),
        optional: false,
    },
    TripRule {
        category: WorkingProfessional,
        outbound: (Office, Restaurant, "12:00", "13:00"),
        inbound: (Restaurant, Office, "12:30", "13:30"),
        optional: false,
    },
    TripRule {
        category: Student,
        outbound: (Home, School, "07:00", "08:00"),
        inbound: (School, Home, "13:30", "14:30"),
        optional: false,
    },
    TripRule {
        category: Student,
        outbound: (Home, Other, "18:30", "20:30"),
        inbound: (Other, Home, "18:30", "20:30"),
        optional: false,
    },
    TripRule {
        category: HomeMaker,
        outbound: (Home, Shop, "09:00", "11:00"),
        inbound: (Shop, Home, "09:30", "11:30"),
        optional: false,
    },
    TripRule {
        category: HomeMaker,
        outbound: (Home, Shop, "18:00", "20:00"),
        inbound: (Shop, Home, "18:30", "21:00"),
        optional: true,
    },
    TripRule {
        category: SeniorCitizen,
        outbound: (Home, Other, "07:00", "09:00"),
        inbound: (Other, Home, "08:30", "10:00"),
        optional: true,
    },
    TripRule {
        category: SeniorCitizen,
        outbound: (Home, Other, "17:00", "18:30"),
        inbound: (Other, Home, "17:30", "19:30"),
        optional: true,
    },
];

pub const OPTIONAL_TRIP_PROBABILITY: f64 = 0.5;

/// Mean trips per human per day under category weights `weights`.
pub fn expected_daily_trips(weights: [f64; 4]) -> f64 {
    let total: f64 = weights.iter().sum();
    TRIP_RULES
        .iter()
        .map(|r| {
            let p = if r.optional { OPTIONAL_TRIP_PROBABILITY } else { 1.0 };
            weights[r.category.index()] / total * 2.0 * p
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub human: super::HumanId,
    pub origin_kind: PlaceKind,
    pub destination_kind: PlaceKind,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub chosen_start: SimTime,
}

fn clock(text: &str) -> u64 {
    SimTime::parse_clock(text).expect("valid trip-rule clock").secs()
}

/// Trips for `human` on `day`, ordered by start time.
///
/// Each start is uniform within its window, conditioned on not preceding
/// the previous trip's start.
pub fn daily_trips(human: &Human, day: u64, streams: &RngStreams) -> Vec<Trip> {
    let mut rng = streams.keyed(rng::TRIPS, &[human.id.0 as u64, day]);
    let day_start = day * crate::engine::SECONDS_PER_DAY;
    let mut legs = Vec::new();
    for rule in TRIP_RULES.iter().filter(|r| r.category == human.category) {
        if rule.optional && rng.random::<f64>() >= OPTIONAL_TRIP_PROBABILITY {
            continue;
        }
        let (from, to, _, _) = rule.outbound;
        let away = match to {
            Other => human.home.random_within(&mut rng, HOME_ERRAND_RADIUS_M),
            Restaurant => {
                let office = human.office.unwrap_or(human.home);
                office.random_within(&mut rng, RESTAURANT_RADIUS_M)
            }
            kind => human.place(kind).unwrap_or(human.home),
        };
        let base = human.place(from).unwrap_or(human.home);
        legs.push((rule.outbound, base, away));
        legs.push((rule.inbound, away, base));
    }
    // Stable: an outbound leg stays ahead of a return sharing its window.
    legs.sort_by_key(|((_, _, ws, _), _, _)| clock(ws));

    let mut previous = 0u64;
    legs.into_iter()
        .map(|((origin_kind, destination_kind, ws, we), origin, destination)| {
            let window_start = day_start + clock(ws);
            let window_end = day_start + clock(we);
            let lo = window_start.max(previous);
            let chosen = if lo >= window_end { window_end } else { rng.random_range(lo..=window_end) };
            previous = chosen;
            Trip {
                human: human.id,
                origin_kind,
                destination_kind,
                origin,
                destination,
                window_start: SimTime(window_start),
                window_end: SimTime(window_end),
                chosen_start: SimTime(chosen),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{AgeGroup, HumanId};

    fn human(category: Category) -> Human {
        let home = GeoPoint { lat: 1.30, lon: 103.80 };
        Human {
            id: HumanId(7),
            category,
            age_group: AgeGroup::new(category.allowed_age_groups()[0]).unwrap(),
            home,
            office: (category == WorkingProfessional).then_some(GeoPoint { lat: 1.35, lon: 103.85 }),
            school: (category == Student).then_some(GeoPoint { lat: 1.33, lon: 103.75 }),
            shop: (category == HomeMaker).then_some(GeoPoint { lat: 1.31, lon: 103.81 }),
        }
    }

    #[test]
    fn working_professional_has_four_trips_in_windows() {
        let h = human(WorkingProfessional);
        for day in 0..20 {
            let trips = daily_trips(&h, day, &RngStreams::new(1));
            let kinds: Vec<_> = trips.iter().map(|t| (t.origin_kind, t.destination_kind)).collect();
            assert_eq!(kinds, vec![(Home, Office), (Office, Restaurant), (Restaurant, Office), (Office, Home)]);
            let windows: Vec<_> =
                trips.iter().map(|t| (t.window_start.time_of_day(), t.window_end.time_of_day())).collect();
            assert_eq!(windows, vec![(27_000, 34_200), (43_200, 46_800), (45_000, 48_600), (63_000, 72_000)]);
        }
    }

    #[test]
    fn trips_are_ordered_and_within_windows() {
        let streams = RngStreams::new(5);
        for category in Category::ALL {
            let h = human(category);
            for day in 0..50 {
                let trips = daily_trips(&h, day, &streams);
                for t in &trips {
                    assert!(t.window_start <= t.chosen_start && t.chosen_start <= t.window_end);
                }
                for w in trips.windows(2) {
                    assert!(w[0].chosen_start <= w[1].chosen_start);
                }
                // Outbound/return pairing: every outbound has its matching return.
                assert_eq!(trips.len() % 2, 0);
                for t in trips.iter().filter(|t| t.origin_kind == Home) {
                    assert!(trips.iter().any(|r| r.origin == t.destination
                        && r.destination == t.origin
                        && r.chosen_start >= t.chosen_start));
                }
            }
        }
    }

    #[test]
    fn senior_all_none_day_has_no_trips() {
        let h = human(SeniorCitizen);
        let streams = RngStreams::new(2);
        let empty_days = (0..200).filter(|d| daily_trips(&h, *d, &streams).is_empty()).count();
        // Probability of an empty day is 1/4.
        assert!(empty_days > 20 && empty_days < 90, "{empty_days}");
    }
}
