//! Points, great-circle distances, and straight-line road travel.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Mean Earth radius used by common great-circle calculators.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Option<Self> {
        let valid =
            lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon);
        valid.then_some(GeoPoint { lat, lon })
    }

    pub fn distance_m(&self, other: &GeoPoint) -> f64 {
        haversine_m(*self, *other)
    }

    /// Point at `distance_m` along `bearing_deg` (clockwise from north).
    pub fn offset(&self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let d = distance_m / EARTH_RADIUS_M;
        let b = bearing_deg.to_radians();
        let lat1 = self.lat.to_radians();
        let lon1 = self.lon.to_radians();
        let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * b.cos()).asin();
        let lon2 = lon1 + (b.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
        GeoPoint { lat: lat2.to_degrees(), lon: lon2.to_degrees() }
    }

    /// Uniform point inside the disc of `radius_m` around `self`.
    pub fn random_within<R: Rng + ?Sized>(&self, rng: &mut R, radius_m: f64) -> GeoPoint {
        let r = radius_m * rng.random::<f64>().sqrt();
        let bearing = rng.random::<f64>() * 360.0;
        self.offset(bearing, r)
    }
}

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h =
        (dlat / 2.0).sin().powi(2) + a.lat.to_radians().cos() * b.lat.to_radians().cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn around<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BoundingBox { min_lat: first.lat, max_lat: first.lat, min_lon: first.lon, max_lon: first.lon };
        for p in it {
            bb.min_lat = bb.min_lat.min(p.lat);
            bb.max_lat = bb.max_lat.max(p.lat);
            bb.min_lon = bb.min_lon.min(p.lon);
            bb.max_lon = bb.max_lon.max(p.lon);
        }
        Some(bb)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GeoPoint {
        GeoPoint {
            lat: self.min_lat + (self.max_lat - self.min_lat) * rng.random::<f64>(),
            lon: self.min_lon + (self.max_lon - self.min_lon) * rng.random::<f64>(),
        }
    }
}

/// Straight-line routing at a constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadRouter {
    speed_kmh: f64,
}

impl RoadRouter {
    pub const DEFAULT_SPEED_KMH: f64 = 35.0;

    pub fn new(speed_kmh: f64) -> Option<Self> {
        (speed_kmh.is_finite() && speed_kmh > 0.0).then_some(RoadRouter { speed_kmh })
    }

    pub fn speed_kmh(&self) -> f64 {
        self.speed_kmh
    }

    /// Whole seconds, rounded up so only identical points take zero time.
    pub fn travel_time(&self, from: GeoPoint, to: GeoPoint) -> u64 {
        let meters = haversine_m(from, to);
        if meters == 0.0 {
            return 0;
        }
        let secs = meters * 3600.0 / (self.speed_kmh * 1000.0);
        // Absorb float noise so exact multiples are not bumped up by one.
        (secs - 1e-6).ceil().max(1.0) as u64
    }
}

impl Default for RoadRouter {
    fn default() -> Self {
        RoadRouter { speed_kmh: Self::DEFAULT_SPEED_KMH }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_point_takes_no_time() {
        let p = GeoPoint::new(1.3, 103.8).unwrap();
        assert_eq!(RoadRouter::default().travel_time(p, p), 0);
    }

    #[test]
    fn one_degree_of_longitude_at_equator() {
        // 2*pi*R/360 with R = 6371 km.
        let d = haversine_m(GeoPoint { lat: 0.0, lon: 0.0 }, GeoPoint { lat: 0.0, lon: 1.0 });
        assert!((d - 111_194.93).abs() < 0.01, "{d}");
    }

    #[test]
    fn known_city_pair() {
        // London to Paris, ~343.5 km with R = 6371 km.
        let london = GeoPoint::new(51.5074, -0.1278).unwrap();
        let paris = GeoPoint::new(48.8566, 2.3522).unwrap();
        let d = haversine_m(london, paris) / 1000.0;
        assert!((d - 343.56).abs() < 0.5, "{d}");
    }

    #[test]
    fn thirty_five_km_takes_one_hour() {
        let a = GeoPoint::new(1.30, 103.80).unwrap();
        let b = a.offset(90.0, 35_000.0);
        assert!((haversine_m(a, b) - 35_000.0).abs() < 1e-3);
        assert_eq!(RoadRouter::default().travel_time(a, b), 3600);
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(GeoPoint::new(91.0, 0.0).is_none());
        assert!(GeoPoint::new(0.0, -181.0).is_none());
        assert!(RoadRouter::new(0.0).is_none());
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (1.2f64..1.5, 103.6f64..104.0).prop_map(|(lat, lon)| GeoPoint { lat, lon })
    }

    proptest! {
        #[test]
        fn travel_time_is_symmetric(a in point(), b in point()) {
            let r = RoadRouter::default();
            prop_assert_eq!(r.travel_time(a, b), r.travel_time(b, a));
        }

        #[test]
        fn triangle_inequality_with_rounding_slack(a in point(), b in point(), c in point()) {
            let r = RoadRouter::default();
            prop_assert!(r.travel_time(a, c) <= r.travel_time(a, b) + r.travel_time(b, c) + 1);
        }

        #[test]
        fn random_within_stays_in_radius(seed in any::<u64>(), radius in 10.0f64..5000.0) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = GeoPoint { lat: 1.3, lon: 103.8 };
            let p = c.random_within(&mut rng, radius);
            prop_assert!(haversine_m(c, p) <= radius + 1e-6);
        }
    }
}
