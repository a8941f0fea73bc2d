//! Humans: categories, age groups, contact points.

mod routing;
mod trips;

pub use routing::{
    attends_with_arrival, choose_alternative_route, decide_attendance, plan_route, rail_search, Attendance,
    AttendanceError, FirstWait, RoadLeg, Route, RoutingError, TrainLeg,
};
pub use trips::{daily_trips, expected_daily_trips, PlaceKind, Trip, TripRule, OPTIONAL_TRIP_PROBABILITY, TRIP_RULES};

use serde::{Deserialize, Serialize};

use crate::config::CategoryWeights;
use crate::geo::{BoundingBox, GeoPoint};
use crate::rng::{self, RngStreams};

/// Radius around home for shops and unplaced "other" destinations.
pub const HOME_ERRAND_RADIUS_M: f64 = 5_000.0;
/// Radius around the office for lunch restaurants.
pub const RESTAURANT_RADIUS_M: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HumanId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    WorkingProfessional,
    Student,
    HomeMaker,
    SeniorCitizen,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::WorkingProfessional, Category::Student, Category::HomeMaker, Category::SeniorCitizen];

    /// Share of each category in the population, in `ALL` order.
    pub const DEFAULT_WEIGHTS: [f64; 4] = [0.40, 0.30, 0.15, 0.15];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Age groups a member of this category may fall in.
    pub fn allowed_age_groups(self) -> &'static [u8] {
        match self {
            Category::Student => &[1, 2],
            Category::WorkingProfessional => &[2, 3, 4, 5],
            Category::HomeMaker => &[3, 4, 5],
            Category::SeniorCitizen => &[6],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::WorkingProfessional => "working-professional",
            Category::Student => "student",
            Category::HomeMaker => "home-maker",
            Category::SeniorCitizen => "senior-citizen",
        }
    }
}

/// Age group 1..=6: 0-14, 15-24, 25-40, 41-54, 55-64, 65+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgeGroup(u8);

impl AgeGroup {
    /// Population percentage per group, index 0 is group 1.
    pub const SHARES_PERCENT: [f64; 6] = [13.6, 18.2, 25.1, 25.0, 9.9, 8.1];

    pub fn new(group: u8) -> Option<Self> {
        (1..=6).contains(&group).then_some(AgeGroup(group))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Human {
    pub id: HumanId,
    pub category: Category,
    pub age_group: AgeGroup,
    pub home: GeoPoint,
    pub office: Option<GeoPoint>,
    pub school: Option<GeoPoint>,
    pub shop: Option<GeoPoint>,
}

impl Human {
    /// Contact-point and age consistency for the human's category.
    pub fn is_consistent(&self) -> bool {
        let points = match self.category {
            Category::WorkingProfessional => self.office.is_some() && self.school.is_none(),
            Category::Student => self.school.is_some() && self.office.is_none(),
            Category::HomeMaker => self.office.is_none() && self.school.is_none() && self.shop.is_some(),
            Category::SeniorCitizen => self.office.is_none() && self.school.is_none(),
        };
        points && self.category.allowed_age_groups().contains(&self.age_group.get())
    }

    pub fn place(&self, kind: PlaceKind) -> Option<GeoPoint> {
        match kind {
            PlaceKind::Home => Some(self.home),
            PlaceKind::Office => self.office,
            PlaceKind::School => self.school,
            PlaceKind::Shop => self.shop,
            _ => None,
        }
    }
}

pub fn category_weights(overrides: Option<&CategoryWeights>) -> [f64; 4] {
    match overrides {
        Some(w) => [w.working_professional, w.student, w.home_maker, w.senior_citizen],
        None => Category::DEFAULT_WEIGHTS,
    }
}

/// Draws `n` humans. Categories follow `weights`; each age group is drawn
/// from the census shares restricted to the groups allowed for the category.
pub fn generate_population(
    n: usize,
    bounds: &BoundingBox,
    weights: [f64; 4],
    streams: &RngStreams,
) -> Result<Vec<Human>, rng::DrawError> {
    let mut stream = streams.stream(rng::POPULATION);
    let mut humans = Vec::with_capacity(n);
    for i in 0..n {
        let category = Category::ALL[stream.choice(&weights)?];
        let allowed = category.allowed_age_groups();
        let age_weights: Vec<f64> = allowed.iter().map(|g| AgeGroup::SHARES_PERCENT[*g as usize - 1]).collect();
        let age_group = AgeGroup(allowed[stream.choice(&age_weights)?]);
        let rng = stream.rng();
        let home = bounds.sample(rng);
        let office = (category == Category::WorkingProfessional).then(|| bounds.sample(rng));
        let school = (category == Category::Student).then(|| bounds.sample(rng));
        let shop = (category == Category::HomeMaker).then(|| home.random_within(rng, HOME_ERRAND_RADIUS_M));
        humans.push(Human { id: HumanId(i as u32), category, age_group, home, office, school, shop });
    }
    Ok(humans)
}
