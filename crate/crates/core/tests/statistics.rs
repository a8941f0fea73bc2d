//! Distributional checks on seeded draws.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use railsim::config::EventsConfig;
use railsim::engine::SimTime;
use railsim::events::{poll, BroadcastFeed, EventId, PollState, SocialEvent};
use railsim::geo::{BoundingBox, GeoPoint};
use railsim::population::{daily_trips, generate_population, Category, PlaceKind};
use railsim::rng::{self, RngStreams};

fn bounds() -> BoundingBox {
    BoundingBox { min_lat: 1.25, max_lat: 1.45, min_lon: 103.6, max_lon: 104.0 }
}

#[test]
fn category_counts_pass_chi_square() {
    let n = 10_000;
    let humans = generate_population(n, &bounds(), Category::DEFAULT_WEIGHTS, &RngStreams::new(42)).unwrap();
    let mut counts = [0f64; 4];
    for h in &humans {
        counts[h.category.index()] += 1.0;
    }
    let stat: f64 = counts
        .iter()
        .zip(Category::DEFAULT_WEIGHTS)
        .map(|(o, w)| {
            let e = w * n as f64;
            (o - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(3.0).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat:.2} >= {critical:.2}, counts {counts:?}");
}

#[test]
fn choice_frequencies_track_weights() {
    let mut s = RngStreams::new(9).stream(rng::POPULATION);
    let mut counts = [0usize; 4];
    for _ in 0..100_000 {
        counts[s.choice(&Category::DEFAULT_WEIGHTS).unwrap()] += 1;
    }
    for (c, w) in counts.iter().zip(Category::DEFAULT_WEIGHTS) {
        assert!((*c as f64 / 1e5 - w).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn student_school_starts_are_uniform() {
    let humans = generate_population(4_000, &bounds(), [0.0, 1.0, 0.0, 0.0], &RngStreams::new(5)).unwrap();
    let streams = RngStreams::new(5);
    let (lo, hi) = (7.0 * 3600.0, 8.0 * 3600.0);
    let mut starts: Vec<f64> = humans
        .iter()
        .take(1000)
        .map(|h| {
            let trips = daily_trips(h, 0, &streams);
            let t = trips.iter().find(|t| t.destination_kind == PlaceKind::School).expect("school trip");
            (t.chosen_start.secs() as f64 - lo) / (hi - lo)
        })
        .collect();
    starts.sort_by(f64::total_cmp);
    assert!(starts.iter().all(|u| (0.0..=1.0).contains(u)));
    let n = starts.len() as f64;
    let d = starts
        .iter()
        .enumerate()
        .map(|(i, u)| (u - i as f64 / n).abs().max(((i + 1) as f64 / n - u).abs()))
        .fold(0.0, f64::max);
    // Asymptotic Kolmogorov critical value at alpha 0.01.
    let critical = 1.628 / n.sqrt();
    assert!(d < critical, "KS statistic {d:.4} >= {critical:.4}");
}

#[test]
fn poll_hit_rate_matches_probability() {
    let event = SocialEvent {
        id: EventId(0),
        name: "e".into(),
        location: GeoPoint { lat: 1.3, lon: 103.8 },
        start: SimTime::from_hms(20, 0, 0),
        end: SimTime::from_hms(22, 0, 0),
        age_groups: vec![1, 2, 3, 4, 5, 6],
        broadcast_from: SimTime::ZERO,
    };
    let cfg = EventsConfig { poll_probability: 0.3, ..EventsConfig::default() };
    let feed = BroadcastFeed::new(vec![event], &cfg);
    let n = 10_000u32;
    let mut state = PollState::new(n as usize);
    let streams = RngStreams::new(11);
    let hits = (0..n).filter(|h| !poll(&feed, &mut state, *h, 1, &streams).is_empty()).count();
    let rate = hits as f64 / n as f64;
    assert!((rate - 0.3).abs() < 0.02, "hit rate {rate}");
}
