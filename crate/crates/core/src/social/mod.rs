//! Follower graph with per-edge influence probabilities.
//!
//! An edge `follower -> poster` means the follower reads the poster's posts,
//! so influence flows from poster to follower. The people a human follows
//! are that human's connections.

mod cascade;
mod influence;

pub use cascade::{cascade, cascade_step, edge_succeeds, ActivationState};
pub use influence::{
    influence_probability, proximity, proximity_influence, proximity_influence_from, similar_age_influence,
    similar_class_influence,
};

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::config::{DegreeConfig, InfluenceModelKind, SocialConfig};
use crate::population::Human;
use crate::rng::{self, RngStreams};

#[derive(Debug, Error, PartialEq)]
pub enum SocialError {
    #[error("infeasible degree parameters: {0}")]
    InfeasibleDegree(String),
    #[error("edge list line {line}: {reason}")]
    BadEdgeList { line: usize, reason: String },
}

/// Friend-count distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeParams {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl DegreeParams {
    /// Scales a reference triple linearly to a population of `n`, clamping
    /// the maximum to `n - 1`.
    pub fn scaled(cfg: &DegreeConfig, n: usize) -> DegreeParams {
        let f = n as f64 / cfg.reference_population.max(1) as f64;
        let cap = n.saturating_sub(1).max(1);
        let min = ((cfg.min * f).round() as usize).clamp(1, cap);
        let max = ((cfg.max * f).round() as usize).clamp(min, cap);
        let mean = (cfg.mean * f).clamp(min as f64, max as f64);
        DegreeParams { min, max, mean }
    }

    fn validate(&self, n: usize) -> Result<(), SocialError> {
        if n < 2 {
            return Err(SocialError::InfeasibleDegree(format!("population of {n} cannot give everyone a friend")));
        }
        if self.max >= n {
            return Err(SocialError::InfeasibleDegree(format!("max {} >= population {n}", self.max)));
        }
        if self.min == 0 || self.min > self.max || !(self.min as f64..=self.max as f64).contains(&self.mean) {
            return Err(SocialError::InfeasibleDegree(format!(
                "need 1 <= min <= mean <= max, got ({}, {}, {})",
                self.min, self.max, self.mean
            )));
        }
        Ok(())
    }
}

const MAX_DEGREE_ATTEMPTS: usize = 1_000;

/// Friend counts from an exponential with the target mean, clamped to
/// `[min, max]`. Whole batches are redrawn until the empirical mean is
/// within 5% of the target; the closest batch is kept if none is.
pub fn sample_degrees<R: Rng>(rng: &mut R, n: usize, p: DegreeParams) -> Vec<usize> {
    let exp = Exp::new(1.0 / p.mean).expect("positive mean");
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..MAX_DEGREE_ATTEMPTS {
        let degrees: Vec<usize> = (0..n).map(|_| (exp.sample(rng).round() as usize).clamp(p.min, p.max)).collect();
        let mean = degrees.iter().sum::<usize>() as f64 / n.max(1) as f64;
        let err = (mean - p.mean).abs() / p.mean;
        if err <= 0.05 {
            return degrees;
        }
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, degrees));
        }
    }
    best.map(|(_, d)| d).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub follower: u32,
    pub poster: u32,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    /// Per follower: posters followed and the edge probability.
    follows: Vec<Vec<(u32, f64)>>,
    /// Per poster: followers and the edge probability.
    followers: Vec<Vec<(u32, f64)>>,
}

impl SocialGraph {
    /// Builds a graph from `(follower, poster)` pairs with zero probabilities.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> SocialGraph {
        let mut follows = vec![Vec::new(); n];
        for (f, p) in pairs {
            follows[f as usize].push((p, 0.0));
        }
        let mut g = SocialGraph { follows, followers: Vec::new() };
        g.rebuild_followers();
        g
    }

    fn rebuild_followers(&mut self) {
        let mut followers = vec![Vec::new(); self.follows.len()];
        for (f, out) in self.follows.iter().enumerate() {
            for (p, prob) in out {
                followers[*p as usize].push((f as u32, *prob));
            }
        }
        self.followers = followers;
    }

    pub fn node_count(&self) -> usize {
        self.follows.len()
    }

    pub fn edge_count(&self) -> usize {
        self.follows.iter().map(Vec::len).sum()
    }

    /// Posters `follower` reads: its connections.
    pub fn connections(&self, follower: u32) -> impl Iterator<Item = u32> + '_ {
        self.follows[follower as usize].iter().map(|(p, _)| *p)
    }

    pub fn out_degree(&self, follower: u32) -> usize {
        self.follows[follower as usize].len()
    }

    /// Followers `poster` can influence, with probabilities.
    pub fn followers(&self, poster: u32) -> &[(u32, f64)] {
        &self.followers[poster as usize]
    }

    pub fn probability(&self, follower: u32, poster: u32) -> Option<f64> {
        self.follows[follower as usize].iter().find(|(p, _)| *p == poster).map(|(_, prob)| *prob)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.follows.iter().enumerate().flat_map(|(f, out)| {
            out.iter().map(move |(p, prob)| Edge { follower: f as u32, poster: *p, probability: *prob })
        })
    }

    /// Sets every edge probability from `f(follower, poster)`.
    pub fn assign_probabilities(&mut self, mut f: impl FnMut(u32, u32) -> f64) {
        for (fo, out) in self.follows.iter_mut().enumerate() {
            for (p, prob) in out.iter_mut() {
                *prob = f(fo as u32, *p);
            }
        }
        self.rebuild_followers();
    }

    /// Edge list, one `source target probability` line per edge, where the
    /// source is the poster and the target the follower.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in self.edges() {
            let _ = writeln!(out, "{} {} {:.6}", e.poster, e.follower, e.probability);
        }
        out
    }

    pub fn from_edge_list(n: usize, text: &str) -> Result<SocialGraph, SocialError> {
        let mut follows = vec![Vec::new(); n];
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| SocialError::BadEdgeList { line: i + 1, reason: reason.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [src, tgt, prob] = fields[..] else {
                return Err(err("expected `source target probability`"));
            };
            let src: u32 = src.parse().map_err(|_| err("bad source id"))?;
            let tgt: u32 = tgt.parse().map_err(|_| err("bad target id"))?;
            let prob: f64 = prob.parse().map_err(|_| err("bad probability"))?;
            if src as usize >= n || tgt as usize >= n {
                return Err(err("node id out of range"));
            }
            if src == tgt {
                return Err(err("self edge"));
            }
            if !(0.0..=1.0).contains(&prob) {
                return Err(err("probability outside [0, 1]"));
            }
            follows[tgt as usize].push((src, prob));
        }
        let mut g = SocialGraph { follows, followers: Vec::new() };
        g.rebuild_followers();
        Ok(g)
    }
}

/// Random follower graph: friend counts from [`sample_degrees`], targets
/// uniform without self-loops or duplicates.
pub fn generate_structure(n: usize, params: DegreeParams, streams: &RngStreams) -> Result<SocialGraph, SocialError> {
    params.validate(n)?;
    let mut stream = streams.stream(rng::GRAPH);
    let rng = stream.rng();
    let degrees = sample_degrees(rng, n, params);
    let mut pairs = Vec::with_capacity(degrees.iter().sum());
    for (f, k) in degrees.iter().enumerate() {
        for j in index::sample(rng, n - 1, *k).into_iter() {
            let poster = if j >= f { j + 1 } else { j };
            pairs.push((f as u32, poster as u32));
        }
    }
    Ok(SocialGraph::from_pairs(n, pairs))
}

/// Full graph for a population: structure plus probabilities under the
/// configured influence model.
pub fn generate_graph(
    humans: &[Human],
    params: DegreeParams,
    model: InfluenceModelKind,
    constant: f64,
    streams: &RngStreams,
) -> Result<SocialGraph, SocialError> {
    let mut g = generate_structure(humans.len(), params, streams)?;
    apply_model(&mut g, humans, model, constant);
    Ok(g)
}

pub fn apply_model(g: &mut SocialGraph, humans: &[Human], model: InfluenceModelKind, constant: f64) {
    match model {
        InfluenceModelKind::Constant => g.assign_probabilities(|_, _| constant),
        InfluenceModelKind::Influence => {
            let least: Vec<f64> = (0..g.node_count() as u32)
                .map(|f| {
                    g.connections(f).map(|p| proximity(&humans[p as usize], &humans[f as usize])).fold(0.0, f64::max)
                })
                .collect();
            g.assign_probabilities(|f, p| {
                let (poster, follower) = (&humans[p as usize], &humans[f as usize]);
                (similar_age_influence(poster, follower)
                    + similar_class_influence(poster, follower)
                    + proximity_influence_from(proximity(poster, follower), least[f as usize]))
                    / 3.0
            });
        }
    }
}

pub fn graph_for(humans: &[Human], cfg: &SocialConfig, streams: &RngStreams) -> Result<SocialGraph, SocialError> {
    let params = DegreeParams::scaled(&cfg.degree, humans.len());
    generate_graph(humans, params, cfg.model, cfg.constant_probability, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::BoundingBox;
    use crate::population::{generate_population, Category};

    fn bounds() -> BoundingBox {
        BoundingBox { min_lat: 1.25, max_lat: 1.45, min_lon: 103.65, max_lon: 103.95 }
    }

    #[test]
    fn reference_triple_degree_statistics() {
        let p = DegreeParams { min: 1, max: 5000, mean: 500.0 };
        let mut rng = RngStreams::new(4).stream(rng::GRAPH);
        let d = sample_degrees(rng.rng(), 100_000, p);
        let mean = d.iter().sum::<usize>() as f64 / d.len() as f64;
        assert_eq!(*d.iter().min().unwrap(), 1);
        assert!(*d.iter().max().unwrap() <= 5000);
        assert!((mean - 500.0).abs() <= 25.0, "{mean}");
    }

    #[test]
    fn scaling_to_desk_population() {
        let p = DegreeParams::scaled(&DegreeConfig::default(), 5_000);
        assert_eq!((p.min, p.max), (1, 250));
        assert!((p.mean - 25.0).abs() < 1e-9);
        let p2 = DegreeParams::scaled(&DegreeConfig::default(), 2);
        assert_eq!((p2.min, p2.max, p2.mean), (1, 1, 1.0));
    }

    #[test]
    fn two_people_follow_each_other() {
        let g = generate_structure(2, DegreeParams::scaled(&DegreeConfig::default(), 2), &RngStreams::new(1)).unwrap();
        assert_eq!(g.connections(0).collect::<Vec<_>>(), vec![1]);
        assert_eq!(g.connections(1).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn infeasible_max_is_rejected() {
        let p = DegreeParams { min: 1, max: 10, mean: 5.0 };
        assert!(matches!(generate_structure(10, p, &RngStreams::new(1)), Err(SocialError::InfeasibleDegree(_))));
        assert!(generate_structure(1, DegreeParams { min: 1, max: 1, mean: 1.0 }, &RngStreams::new(1)).is_err());
    }

    #[test]
    fn structure_has_no_self_or_duplicate_edges() {
        let p = DegreeParams { min: 1, max: 50, mean: 10.0 };
        let g = generate_structure(300, p, &RngStreams::new(3)).unwrap();
        for f in 0..300u32 {
            let mut c: Vec<u32> = g.connections(f).collect();
            assert!(!c.is_empty());
            assert!(!c.contains(&f));
            let len = c.len();
            c.sort_unstable();
            c.dedup();
            assert_eq!(c.len(), len);
        }
    }

    #[test]
    fn probabilities_in_unit_interval_and_constant_mode() {
        let humans = generate_population(400, &bounds(), Category::DEFAULT_WEIGHTS, &RngStreams::new(2)).unwrap();
        let p = DegreeParams { min: 1, max: 40, mean: 8.0 };
        let g = generate_graph(&humans, p, InfluenceModelKind::Influence, 0.5, &RngStreams::new(2)).unwrap();
        assert!(g.edges().all(|e| (0.0..=1.0).contains(&e.probability)));
        let c = generate_graph(&humans, p, InfluenceModelKind::Constant, 0.5, &RngStreams::new(2)).unwrap();
        assert!(c.edges().all(|e| e.probability == 0.5));
        assert_eq!(g.edge_count(), c.edge_count());
    }

    #[test]
    fn edge_list_round_trip() {
        let humans = generate_population(50, &bounds(), Category::DEFAULT_WEIGHTS, &RngStreams::new(2)).unwrap();
        let p = DegreeParams { min: 1, max: 10, mean: 3.0 };
        let g = generate_graph(&humans, p, InfluenceModelKind::Influence, 0.5, &RngStreams::new(2)).unwrap();
        let text = g.to_edge_list();
        let back = SocialGraph::from_edge_list(50, &text).unwrap();
        assert_eq!(back.edge_count(), g.edge_count());
        for e in g.edges() {
            let q = back.probability(e.follower, e.poster).unwrap();
            assert!((q - e.probability).abs() < 1e-6);
        }
        assert!(SocialGraph::from_edge_list(2, "0 0 0.5").is_err());
        assert!(SocialGraph::from_edge_list(2, "0 1 1.5").is_err());
    }
}
