//! Congestion-control strategies.

use thiserror::Error;

use crate::engine::SimTime;
use crate::network::StationId;
use crate::population::HumanId;
use crate::transit::{Train, TrainId};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("invalid move: {0}")]
    InvalidMove(String),
}

/// Unattached compartments held by the transport manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompartmentPool {
    pub free: u32,
}

impl CompartmentPool {
    /// Free compartments plus those due back, minus those promised.
    pub fn available(&self, trains: &[Train]) -> u32 {
        let back: u32 = trains.iter().map(|t| t.pending_detach).sum();
        let promised: u32 = trains.iter().map(|t| t.pending_attach).sum();
        (self.free + back).saturating_sub(promised)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveSource {
    Pool,
    Train(TrainId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompartmentMove {
    pub from: MoveSource,
    pub to: TrainId,
    pub count: u32,
    /// Estimated ridership of the receiving train.
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrategyDecision {
    pub effective: SimTime,
    pub moves: Vec<CompartmentMove>,
    /// Overloaded trains that got nothing.
    pub unmet: Vec<TrainId>,
}

impl StrategyDecision {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

/// What the manager knows about one train for the coming hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainView {
    pub id: TrainId,
    /// Compartments after pending changes.
    pub compartments: u32,
    pub seats_per_compartment: u32,
    pub est_next: f64,
    pub est_prev: f64,
}

impl TrainView {
    pub fn capacity(&self) -> f64 {
        (self.compartments * self.seats_per_compartment) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManagerView {
    pub now: SimTime,
    pub target_hour: u64,
    pub trains: Vec<TrainView>,
    pub available_pool: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitView {
    pub human: HumanId,
    pub station: StationId,
    pub now: SimTime,
    /// Free seats on the train that just left the human behind.
    pub next_train_free_seats: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteDirective {
    /// Look for an alternative route.
    Replan,
}

pub trait Strategy: Send {
    fn name(&self) -> &'static str;

    fn on_hour(&mut self, view: &ManagerView) -> StrategyDecision {
        StrategyDecision { effective: view.now, ..Default::default() }
    }

    fn on_human_wait(&mut self, _view: &WaitView) -> Option<RouteDirective> {
        None
    }
}

/// Fixed capacity; humans stick to their plans.
pub struct Baseline;

impl Strategy for Baseline {
    fn name(&self) -> &'static str {
        "none"
    }
}

pub struct Greedy;

impl Strategy for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn on_hour(&mut self, view: &ManagerView) -> StrategyDecision {
        greedy_reallocate(view)
    }
}

pub struct AlternativeRouting;

impl Strategy for AlternativeRouting {
    fn name(&self) -> &'static str {
        "alt-routing"
    }

    fn on_human_wait(&mut self, view: &WaitView) -> Option<RouteDirective> {
        (view.next_train_free_seats == 0).then_some(RouteDirective::Replan)
    }
}

/// Several strategies; hourly decisions are concatenated and the first
/// routing directive wins.
pub struct StrategySet(pub Vec<Box<dyn Strategy>>);

impl Strategy for StrategySet {
    fn name(&self) -> &'static str {
        "set"
    }

    fn on_hour(&mut self, view: &ManagerView) -> StrategyDecision {
        let mut out = StrategyDecision { effective: view.now, ..Default::default() };
        for s in &mut self.0 {
            let d = s.on_hour(view);
            out.moves.extend(d.moves);
            out.unmet.extend(d.unmet);
        }
        out
    }

    fn on_human_wait(&mut self, view: &WaitView) -> Option<RouteDirective> {
        self.0.iter_mut().find_map(|s| s.on_human_wait(view))
    }
}

/// One compartment for each train whose estimate exceeds its capacity,
/// highest estimate first. Compartments come from the pool, then from
/// trains whose estimate fell, largest fall first, one each.
pub fn greedy_reallocate(view: &ManagerView) -> StrategyDecision {
    let mut overloaded: Vec<&TrainView> = view.trains.iter().filter(|t| t.est_next > t.capacity()).collect();
    overloaded.sort_by(|a, b| b.est_next.total_cmp(&a.est_next).then(a.id.cmp(&b.id)));

    let mut donors: Vec<&TrainView> = view
        .trains
        .iter()
        .filter(|t| {
            t.est_next < t.est_prev && t.est_next < t.capacity() - t.seats_per_compartment as f64 && t.compartments > 1
        })
        .collect();
    donors.sort_by(|a, b| (b.est_prev - b.est_next).total_cmp(&(a.est_prev - a.est_next)).then(a.id.cmp(&b.id)));
    let mut donors = donors.into_iter();

    let mut pool = view.available_pool;
    let mut out = StrategyDecision { effective: view.now, ..Default::default() };
    for t in overloaded {
        let from = if pool > 0 {
            pool -= 1;
            Some(MoveSource::Pool)
        } else {
            donors.next().map(|d| MoveSource::Train(d.id))
        };
        match from {
            Some(from) => out.moves.push(CompartmentMove { from, to: t.id, count: 1, estimate: t.est_next }),
            None => out.unmet.push(t.id),
        }
    }
    out
}

fn train_mut(trains: &mut [Train], id: TrainId) -> Result<&mut Train, StrategyError> {
    trains.iter_mut().find(|t| t.id == id).ok_or_else(|| StrategyError::InvalidMove(format!("unknown train {}", id.0)))
}

/// Records the moves as pending changes. They take effect when each train
/// next enters a terminal depot (see [`service_at_terminal`]). The whole
/// decision is rejected if any move is invalid.
pub fn apply_decision(
    decision: &StrategyDecision,
    trains: &mut [Train],
    pool: &CompartmentPool,
) -> Result<(), StrategyError> {
    let mut staged = trains.to_vec();
    let mut from_pool = 0;
    for m in &decision.moves {
        if m.count == 0 {
            continue;
        }
        train_mut(&mut staged, m.to)?;
        match m.from {
            MoveSource::Pool => from_pool += m.count,
            MoveSource::Train(d) => {
                if d == m.to {
                    return Err(StrategyError::InvalidMove(format!("train {} cannot donate to itself", d.0)));
                }
                let donor = train_mut(&mut staged, d)?;
                if donor.effective_compartments() <= m.count {
                    return Err(StrategyError::InvalidMove(format!("train {} would drop below one compartment", d.0)));
                }
                donor.pending_detach += m.count;
            }
        }
        train_mut(&mut staged, m.to)?.pending_attach += m.count;
    }
    if from_pool > pool.available(trains) {
        return Err(StrategyError::InvalidMove(format!(
            "pool has {} compartments, decision takes {from_pool}",
            pool.available(trains)
        )));
    }
    trains.clone_from_slice(&staged);
    Ok(())
}

/// Applies pending compartment changes to a train standing empty at a
/// terminal. Detaches go to the pool first, so donors feed receivers.
/// Returns true if the capacity changed.
pub fn service_at_terminal(train: &mut Train, pool: &mut CompartmentPool) -> bool {
    let before = train.compartments;
    let room = train.compartments.saturating_sub(1);
    let detach = train.pending_detach.min(room);
    train.compartments -= detach;
    train.pending_detach -= detach;
    pool.free += detach;
    let attach = train.pending_attach.min(pool.free);
    train.compartments += attach;
    train.pending_attach -= attach;
    pool.free -= attach;
    train.compartments != before
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Direction, LineId, RouteId};

    fn view(trains: Vec<(u32, u32, f64, f64)>, pool: u32) -> ManagerView {
        ManagerView {
            now: SimTime(0),
            target_hour: 1,
            trains: trains
                .into_iter()
                .map(|(id, c, next, prev)| TrainView {
                    id: TrainId(id),
                    compartments: c,
                    seats_per_compartment: 31,
                    est_next: next,
                    est_prev: prev,
                })
                .collect(),
            available_pool: pool,
        }
    }

    fn train(id: u32, compartments: u32) -> Train {
        Train::new(TrainId(id), LineId(0), compartments, 31, StationId(0), RouteId::new(LineId(0), Direction::Forward))
    }

    #[test]
    fn nothing_overloaded_means_no_moves() {
        assert!(greedy_reallocate(&view(vec![(0, 10, 200.0, 200.0)], 5)).is_empty());
    }

    #[test]
    fn single_overloaded_train_gets_one_from_pool() {
        let d = greedy_reallocate(&view(vec![(0, 10, 340.0, 300.0)], 3));
        assert_eq!(
            d.moves,
            vec![CompartmentMove { from: MoveSource::Pool, to: TrainId(0), count: 1, estimate: 340.0 }]
        );
    }

    #[test]
    fn pool_then_donor_in_decreasing_ridership() {
        let d = greedy_reallocate(&view(vec![(0, 10, 350.0, 300.0), (1, 10, 400.0, 300.0), (2, 10, 100.0, 250.0)], 1));
        assert_eq!(d.moves.len(), 2);
        assert_eq!((d.moves[0].from, d.moves[0].to), (MoveSource::Pool, TrainId(1)));
        assert_eq!((d.moves[1].from, d.moves[1].to), (MoveSource::Train(TrainId(2)), TrainId(0)));
        assert!(d.moves.windows(2).all(|w| w[0].estimate >= w[1].estimate));
    }

    #[test]
    fn without_donor_requests_go_unmet() {
        let d = greedy_reallocate(&view(vec![(0, 10, 350.0, 300.0), (1, 1, 10.0, 30.0)], 0));
        assert!(d.moves.is_empty());
        assert_eq!(d.unmet, vec![TrainId(0)]);
    }

    #[test]
    fn attach_takes_effect_at_terminal() {
        let mut trains = vec![train(0, 10)];
        let mut pool = CompartmentPool { free: 2 };
        let d = greedy_reallocate(&view(vec![(0, 10, 340.0, 300.0)], pool.available(&trains)));
        apply_decision(&d, &mut trains, &pool).unwrap();
        assert_eq!(trains[0].capacity(), 310);
        assert!(service_at_terminal(&mut trains[0], &mut pool));
        assert_eq!(trains[0].compartments, 11);
        assert_eq!(trains[0].capacity(), 341);
        assert_eq!(pool.free, 1);
    }

    #[test]
    fn detach_below_one_is_invalid() {
        let mut trains = vec![train(0, 1), train(1, 3)];
        let pool = CompartmentPool { free: 0 };
        let d = StrategyDecision {
            effective: SimTime(0),
            moves: vec![CompartmentMove {
                from: MoveSource::Train(TrainId(0)),
                to: TrainId(1),
                count: 1,
                estimate: 0.0,
            }],
            unmet: vec![],
        };
        assert!(matches!(apply_decision(&d, &mut trains, &pool), Err(StrategyError::InvalidMove(_))));
        assert_eq!(trains[0].pending_detach, 0);
        apply_decision(&StrategyDecision::default(), &mut trains, &pool).unwrap();
        assert_eq!(trains[1].compartments, 3);
    }

    #[test]
    fn strategy_hooks() {
        let mut b = Baseline;
        assert!(b.on_hour(&view(vec![(0, 1, 999.0, 0.0)], 5)).is_empty());
        let mut alt = AlternativeRouting;
        let mut wv = WaitView { human: HumanId(0), station: StationId(0), now: SimTime(0), next_train_free_seats: 0 };
        assert_eq!(alt.on_human_wait(&wv), Some(RouteDirective::Replan));
        wv.next_train_free_seats = 4;
        assert_eq!(alt.on_human_wait(&wv), None);
    }
}
