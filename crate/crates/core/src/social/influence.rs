//! Influence of a poster `a` on a follower `b`.

use crate::population::Human;

use super::SocialGraph;

pub fn similar_age_influence(a: &Human, b: &Human) -> f64 {
    let diff = (a.age_group.get() as f64 - b.age_group.get() as f64).abs();
    1.0 - diff / 6.0
}

pub fn similar_class_influence(a: &Human, b: &Human) -> f64 {
    if a.category == b.category {
        1.0
    } else {
        0.0
    }
}

/// Closest of home-home, office-office and school-school distances in
/// meters. A pair missing on either side is infinitely far.
pub fn proximity(a: &Human, b: &Human) -> f64 {
    let pair = |x: Option<crate::geo::GeoPoint>, y: Option<crate::geo::GeoPoint>| match (x, y) {
        (Some(x), Some(y)) => x.distance_m(&y),
        _ => f64::INFINITY,
    };
    pair(Some(a.home), Some(b.home)).min(pair(a.office, b.office)).min(pair(a.school, b.school))
}

/// `1 - prox / least`, where `least` is the largest proximity among the
/// follower's connections. An infinite `least` gives 1 for a finite
/// `prox` and 0 otherwise.
pub fn proximity_influence_from(prox: f64, least: f64) -> f64 {
    if least.is_infinite() {
        return if prox.is_finite() { 1.0 } else { 0.0 };
    }
    if least <= 0.0 {
        // Every connection sits at the same spot as the follower.
        return 0.0;
    }
    (1.0 - prox / least).clamp(0.0, 1.0)
}

pub fn proximity_influence(a: u32, b: u32, graph: &SocialGraph, humans: &[Human]) -> f64 {
    let hb = &humans[b as usize];
    let least = graph.connections(b).map(|i| proximity(&humans[i as usize], hb)).fold(0.0, f64::max);
    proximity_influence_from(proximity(&humans[a as usize], hb), least)
}

/// Mean of the age, class and proximity components for poster `a` and
/// follower `b`.
pub fn influence_probability(a: u32, b: u32, graph: &SocialGraph, humans: &[Human]) -> f64 {
    let (ha, hb) = (&humans[a as usize], &humans[b as usize]);
    (similar_age_influence(ha, hb) + similar_class_influence(ha, hb) + proximity_influence(a, b, graph, humans)) / 3.0
}
