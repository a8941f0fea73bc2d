//! Independent cascade.
//!
//! Every edge coin is drawn from a generator keyed by `(event, source,
//! target)`, so outcomes do not depend on traversal order.

use crate::events::EventId;
use crate::rng::{self, RngStreams};

use super::SocialGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationState {
    pub event: EventId,
    active: Vec<bool>,
    /// Humans that were reached but refused; never retried.
    declined: Vec<bool>,
    /// Activated since the last step and not yet propagated.
    pub frontier: Vec<u32>,
    pub step: u32,
    /// Coin flips performed so far.
    pub flips: u64,
}

impl ActivationState {
    pub fn new(event: EventId, n: usize) -> Self {
        ActivationState {
            event,
            active: vec![false; n],
            declined: vec![false; n],
            frontier: Vec::new(),
            step: 0,
            flips: 0,
        }
    }

    pub fn is_active(&self, h: u32) -> bool {
        self.active[h as usize]
    }

    pub fn is_declined(&self, h: u32) -> bool {
        self.declined[h as usize]
    }

    /// Marks `h` active and queues it for propagation. Returns false if it
    /// was already active or had declined.
    pub fn activate(&mut self, h: u32) -> bool {
        let i = h as usize;
        if self.active[i] || self.declined[i] {
            return false;
        }
        self.active[i] = true;
        self.frontier.push(h);
        true
    }

    pub fn decline(&mut self, h: u32) {
        if !self.active[h as usize] {
            self.declined[h as usize] = true;
        }
    }

    pub fn active_set(&self) -> Vec<u32> {
        (0..self.active.len() as u32).filter(|h| self.active[*h as usize]).collect()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

pub fn edge_succeeds(streams: &RngStreams, event: EventId, source: u32, target: u32, p: f64) -> bool {
    streams.keyed_uniform(rng::CASCADE, &[event.0 as u64, source as u64, target as u64]) < p
}

/// One synchronous step: each frontier node tries each inactive follower
/// once. A follower whose coin succeeds is activated only if `accept`
/// agrees; otherwise it is marked declined. Returns the nodes activated.
pub fn cascade_step<F>(
    graph: &SocialGraph,
    state: &mut ActivationState,
    streams: &RngStreams,
    mut accept: F,
) -> Vec<u32>
where
    F: FnMut(u32) -> bool,
{
    let mut frontier = std::mem::take(&mut state.frontier);
    frontier.sort_unstable();
    let mut reached = Vec::new();
    for src in frontier {
        for (tgt, p) in graph.followers(src) {
            if state.is_active(*tgt) || state.is_declined(*tgt) || reached.contains(tgt) {
                continue;
            }
            state.flips += 1;
            if edge_succeeds(streams, state.event, src, *tgt, *p) {
                reached.push(*tgt);
            }
        }
    }
    reached.sort_unstable();
    let mut activated = Vec::new();
    for h in reached {
        if accept(h) {
            state.activate(h);
            activated.push(h);
        } else {
            state.decline(h);
        }
    }
    state.step += 1;
    activated
}

/// Runs a cascade from `seeds` to quiescence, everyone reached accepting.
pub fn cascade(graph: &SocialGraph, seeds: &[u32], event: EventId, streams: &RngStreams) -> ActivationState {
    let mut state = ActivationState::new(event, graph.node_count());
    for s in seeds {
        state.activate(*s);
    }
    while !state.frontier.is_empty() {
        cascade_step(graph, &mut state, streams, |_| true);
    }
    state
}
