//! The simulated city: humans, trains and station masters driven by the
//! scheduler.

use std::collections::{BTreeMap, VecDeque};
use std::mem;

use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig, StrategyKind};
use crate::engine::{Actor, DispatchRecord, EngineError, Scheduler, SimTime, SECONDS_PER_DAY, SECONDS_PER_HOUR};
use crate::events::{generate_events, inject, poll, BroadcastFeed, EventError, EventId, PollState, SocialEvent};
use crate::geo::{GeoPoint, RoadRouter};
use crate::metrics::{MetricsLedger, MoveKind, MovementRecord, TripRecord, WaitRecord};
use crate::network::{Direction, LineId, NetworkError, RouteId, StationId, TransitNetwork};
use crate::population::{
    category_weights, choose_alternative_route, daily_trips, decide_attendance, expected_daily_trips,
    generate_population, plan_route, Attendance, Human, HumanId, Route, Trip,
};
use crate::rng::{DrawError, RngStreams};
use crate::social::{cascade_step, graph_for, ActivationState, SocialError, SocialGraph};
use crate::strategy::{
    apply_decision, service_at_terminal, AlternativeRouting, Baseline, CompartmentPool, Greedy, ManagerView,
    RouteDirective, Strategy, StrategyDecision, StrategySet, TrainView, WaitView,
};
use crate::transit::{
    estimate_ridership, fleet_size, initial_capacity, origin_terminal, Admission, DelayBoard, LiveInquiry,
    RidershipHistory, ScheduleError, StationMaster, Token, Train, TrainId, TrainSchedule, TrainState, TripKey,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Social(#[from] SocialError),
    #[error(transparent)]
    Draw(#[from] DrawError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    DayStart(u64),
    TripStart { human: u32, trip: usize },
    Dispatch(TripKey),
    TrainArrive(u32),
    TrainAdmit(u32),
    TrainDepart(u32),
    TrainReady(u32),
    ReachStation(u32),
    Arrive(u32),
    PollTick(u64),
    CascadeStep(u32),
    EventDepart { human: u32, event: u32 },
    EventLeave { human: u32, event: u32 },
    HourTick(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Place {
    Idle,
    Road,
    Station { station: StationId, token: Token },
    Onboard(TrainId),
    AtEvent(EventId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    Trip,
    ToEvent(EventId),
    Return,
}

#[derive(Debug, Clone)]
struct Journey {
    purpose: Purpose,
    route: Route,
    leg: usize,
    started: SimTime,
    road_s: u64,
    wait_s: u64,
    onboard_s: u64,
    /// Start of the current wait or ride.
    since: SimTime,
    rode: bool,
}

#[derive(Debug, Clone)]
struct Agent {
    loc: GeoPoint,
    place: Place,
    trips: Vec<Trip>,
    queue: VecDeque<usize>,
    journey: Option<Journey>,
    /// Event the human committed to and when they set off for it.
    plan: Option<(EventId, SimTime)>,
    pending_event: bool,
}

impl Agent {
    fn suppressed(&self, trip: &Trip, feed: &BroadcastFeed) -> bool {
        self.plan.is_some_and(|(ev, depart)| trip.chosen_start >= depart && trip.chosen_start < feed.event(ev).end)
    }

    fn busy(&self) -> bool {
        self.journey.is_some() || matches!(self.place, Place::AtEvent(_))
    }
}

/// One simulation run.
pub struct World {
    pub network: TransitNetwork,
    pub road: RoadRouter,
    pub schedule: TrainSchedule,
    pub humans: Vec<Human>,
    pub feed: BroadcastFeed,
    pub graph: Option<SocialGraph>,
    streams: RngStreams,
    horizon: SimTime,
    step_s: u64,
    lookahead: u64,
    strategy: StrategySet,
    agents: Vec<Agent>,
    pub trains: Vec<Train>,
    pub masters: Vec<StationMaster>,
    waiting_dispatch: BTreeMap<(LineId, StationId), VecDeque<TripKey>>,
    delays: DelayBoard,
    pub history: RidershipHistory,
    pub pool: CompartmentPool,
    compartments_total: u32,
    pub activations: Vec<ActivationState>,
    pub attendees: Vec<Vec<HumanId>>,
    polls: PollState,
    adopted: Vec<bool>,
    pub ledger: MetricsLedger,
    pub violations: Vec<String>,
    pub decisions: Vec<StrategyDecision>,
    pub checkpoints: u64,
}

fn first_after(seq: &[StationId], pos: usize, station: StationId) -> bool {
    seq[pos + 1..].contains(&station)
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Result<World, BuildError> {
        let seed = cfg.require_seed()?;
        let streams = RngStreams::new(seed);
        let network = TransitNetwork::from_config(cfg)?;
        let road = RoadRouter::new(cfg.road.speed_kmh)
            .ok_or_else(|| BuildError::Invalid(format!("road speed {} must be positive", cfg.road.speed_kmh)))?;
        let schedule = TrainSchedule::from_config(&network, &cfg.schedule)?;
        let bounds = cfg.population.bounds.unwrap_or_else(|| network.bounding_box());
        let weights = category_weights(cfg.population.weights.as_ref());
        let pop_streams = RngStreams::new(cfg.population.seed.unwrap_or(seed));
        let humans = generate_population(cfg.population.size, &bounds, weights, &pop_streams)?;
        let events = generate_events(&cfg.events, &network, &streams)?;
        let graph = if events.is_empty() { None } else { Some(graph_for(&humans, &cfg.social, &streams)?) };
        if cfg.social.step_minutes == 0 {
            return Err(BuildError::Invalid("social.step_minutes must be positive".into()));
        }

        let seats = cfg.trains.compartment_seats;
        if seats == 0 {
            return Err(BuildError::Invalid("trains.compartment_seats must be positive".into()));
        }
        let capacity = match cfg.trains.initial_capacity {
            Some(c) => c,
            None => {
                let sim = cfg.trains.sim_daily_ridership.unwrap_or(humans.len() as f64 * expected_daily_trips(weights));
                initial_capacity(sim, cfg.trains.real_daily_ridership, cfg.trains.real_capacity, seats)
            }
        };
        if capacity == 0 || capacity % seats != 0 {
            return Err(BuildError::Invalid(format!(
                "initial capacity {capacity} is not a positive multiple of {seats}"
            )));
        }

        let mut trains = Vec::new();
        for line in network.lines() {
            let fwd = RouteId::new(line.id, Direction::Forward);
            let n = fleet_size(line, schedule.profile(fwd).min_headway(), schedule.turnaround_s);
            for i in 0..n {
                let dir = if line.circular || i < n.div_ceil(2) { Direction::Forward } else { Direction::Backward };
                let id = TrainId(trains.len() as u32);
                let depot = origin_terminal(line, dir);
                trains.push(Train::new(id, line.id, capacity / seats, seats, depot, RouteId::new(line.id, dir)));
            }
        }
        let compartments_total = trains.iter().map(|t| t.compartments).sum::<u32>() + cfg.strategy.pool;

        let mut strategies: Vec<Box<dyn Strategy>> = vec![Box::new(Baseline)];
        if cfg.strategy.kind == StrategyKind::Greedy {
            strategies.push(Box::new(Greedy));
        }
        if cfg.strategy.alt_routing {
            strategies.push(Box::new(AlternativeRouting));
        }

        let n = humans.len();
        let agents = humans
            .iter()
            .map(|h| Agent {
                loc: h.home,
                place: Place::Idle,
                trips: Vec::new(),
                queue: VecDeque::new(),
                journey: None,
                plan: None,
                pending_event: false,
            })
            .collect();
        let masters = network.stations().iter().map(|s| StationMaster::new(s.id, s.platforms)).collect();
        let hours = cfg.horizon_hours as usize;
        let ledger = MetricsLedger::new(&network, trains.iter().map(|t| t.line).collect(), n, hours);
        let activations = events.iter().map(|e| ActivationState::new(e.id, n)).collect();
        let attendees = vec![Vec::new(); events.len()];

        Ok(World {
            road,
            schedule,
            feed: BroadcastFeed::new(events, &cfg.events),
            graph,
            streams,
            horizon: SimTime(cfg.horizon_hours * SECONDS_PER_HOUR),
            step_s: cfg.social.step_minutes * 60,
            lookahead: cfg.strategy.lookahead_hours,
            strategy: StrategySet(strategies),
            agents,
            trains,
            masters,
            waiting_dispatch: BTreeMap::new(),
            delays: DelayBoard::default(),
            history: RidershipHistory::default(),
            pool: CompartmentPool { free: cfg.strategy.pool },
            compartments_total,
            activations,
            attendees,
            polls: PollState::new(n),
            adopted: vec![false; n],
            ledger,
            violations: Vec::new(),
            decisions: Vec::new(),
            checkpoints: 0,
            humans,
            network,
        })
    }

    pub fn horizon(&self) -> SimTime {
        self.horizon
    }

    pub fn place_of(&self, human: HumanId) -> Place {
        self.agents[human.0 as usize].place
    }

    pub fn adopters(&self) -> usize {
        self.adopted.iter().filter(|a| **a).count()
    }

    /// Runs to the horizon and returns the dispatch log.
    pub fn run(&mut self) -> Result<Vec<DispatchRecord>, EngineError> {
        let mut sched = Scheduler::new().with_log();
        self.seed(&mut sched)?;
        while let Some(a) = sched.pop_due(self.horizon) {
            self.handle(&mut sched, a.payload, a.fire_at)?;
        }
        sched.advance_to(self.horizon)?;
        self.finish();
        Ok(sched.take_log())
    }

    fn seed(&mut self, sched: &mut Scheduler<Action>) -> Result<(), EngineError> {
        for t in &self.trains {
            let TrainState::Depot { station, .. } = t.state else { unreachable!("trains start in depots") };
            self.ledger.record_movement(MovementRecord {
                time: SimTime::ZERO,
                train: t.id,
                line: t.line,
                station,
                kind: MoveKind::Start,
                onboard: 0,
                capacity: t.capacity(),
            });
        }
        let days = self.horizon.secs().div_ceil(SECONDS_PER_DAY);
        for d in 0..days {
            sched.schedule(SimTime::on_day(d, 0), Actor::World, "day-start", Action::DayStart(d))?;
        }
        for h in 0..=self.horizon.hour() {
            sched.schedule(SimTime(h * SECONDS_PER_HOUR), Actor::World, "hour", Action::HourTick(h))?;
        }
        if let Some(first) = self.feed.events.iter().map(|e| e.broadcast_from).min() {
            let k = first.secs() / self.feed.poll_interval_s;
            sched.schedule(self.feed.tick_time(k), Actor::World, "poll", Action::PollTick(k))?;
        }
        for e in &self.feed.events {
            let t = e.broadcast_from.plus(self.step_s);
            if t < e.end {
                sched.schedule(t, Actor::Event(e.id.0), "cascade", Action::CascadeStep(e.id.0))?;
            }
        }
        Ok(())
    }

    fn handle(&mut self, sched: &mut Scheduler<Action>, action: Action, now: SimTime) -> Result<(), EngineError> {
        match action {
            Action::DayStart(d) => self.day_start(sched, d, now),
            Action::TripStart { human, trip } => self.trip_start(sched, human, trip, now),
            Action::Dispatch(trip) => self.dispatch(sched, trip, now),
            Action::TrainArrive(t) => self.train_arrive(sched, t, now),
            Action::TrainAdmit(t) => {
                let TrainState::Held { pos } = self.trains[t as usize].state else { return Ok(()) };
                self.trains[t as usize].state = TrainState::Dwelling { pos };
                self.log_train(t, MoveKind::Admit, now);
                self.exchange(sched, t, now)
            }
            Action::TrainDepart(t) => self.train_depart(sched, t, now),
            Action::TrainReady(t) => self.train_ready(sched, t, now),
            Action::ReachStation(h) => self.reach_station(sched, h, now),
            Action::Arrive(h) => self.arrive(sched, h, now),
            Action::PollTick(k) => self.poll_tick(sched, k, now),
            Action::CascadeStep(e) => self.cascade_tick(sched, e, now),
            Action::EventDepart { human, event } => self.event_depart(sched, human, EventId(event), now),
            Action::EventLeave { human, event } => self.event_leave(sched, human, EventId(event), now),
            Action::HourTick(h) => {
                self.checkpoint(now);
                if h < self.horizon.hour() {
                    self.hourly_strategy(h, now);
                }
                Ok(())
            }
        }
    }

    fn inquiry(&self) -> LiveInquiry<'_> {
        LiveInquiry { schedule: &self.schedule, delays: &self.delays }
    }

    // ---- humans ----

    fn day_start(&mut self, sched: &mut Scheduler<Action>, day: u64, _now: SimTime) -> Result<(), EngineError> {
        for i in 0..self.humans.len() {
            let trips = daily_trips(&self.humans[i], day, &self.streams);
            for (j, t) in trips.iter().enumerate() {
                if t.chosen_start < self.horizon {
                    sched.schedule(
                        t.chosen_start,
                        Actor::Human(i as u32),
                        "trip",
                        Action::TripStart { human: i as u32, trip: j },
                    )?;
                }
            }
            let a = &mut self.agents[i];
            a.trips = trips;
            a.queue.clear();
        }
        for route in self.network.routes().collect::<Vec<_>>() {
            for slot in self.schedule.slots(route, day).collect::<Vec<_>>() {
                if slot < self.horizon {
                    let trip = TripKey { route, slot };
                    sched.schedule(slot, Actor::World, "dispatch", Action::Dispatch(trip))?;
                }
            }
        }
        Ok(())
    }

    fn trip_start(&mut self, sched: &mut Scheduler<Action>, h: u32, j: usize, now: SimTime) -> Result<(), EngineError> {
        let a = &mut self.agents[h as usize];
        let Some(trip) = a.trips.get(j).cloned() else { return Ok(()) };
        if a.suppressed(&trip, &self.feed) {
            return Ok(());
        }
        if a.busy() {
            a.queue.push_back(j);
            return Ok(());
        }
        self.start_journey(sched, h, trip.destination, Purpose::Trip, now)
    }

    fn start_journey(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        dest: GeoPoint,
        purpose: Purpose,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let from = self.agents[h as usize].loc;
        let route = plan_route(&self.network, &self.road, &self.inquiry(), from, dest, now)
            .unwrap_or_else(|_| Route::road_only(from, dest, &self.road));
        let rail = route.uses_rail();
        let first = if rail { route.access.duration_s } else { route.total_s };
        let journey = Journey {
            purpose,
            route,
            leg: 0,
            started: now,
            road_s: first,
            wait_s: 0,
            onboard_s: 0,
            since: now,
            rode: false,
        };
        let a = &mut self.agents[h as usize];
        a.journey = Some(journey);
        a.place = Place::Road;
        let (kind, action) =
            if rail { ("reach-station", Action::ReachStation(h)) } else { ("arrive", Action::Arrive(h)) };
        sched.schedule(now.plus(first), Actor::Human(h), kind, action)?;
        Ok(())
    }

    fn reach_station(&mut self, _sched: &mut Scheduler<Action>, h: u32, now: SimTime) -> Result<(), EngineError> {
        let j = self.agents[h as usize].journey.as_ref().expect("human on a journey");
        let leg = j.route.legs[j.leg];
        self.wait_at(h, leg.from, leg.route, leg.to, now);
        Ok(())
    }

    /// Issues a token and boards straight away if a suitable train is at the platform.
    fn wait_at(&mut self, h: u32, station: StationId, route: RouteId, dest: StationId, now: SimTime) {
        let master = &mut self.masters[station.0 as usize];
        let token = match master.issue_token(HumanId(h), dest, route, now) {
            Ok(t) => t,
            Err(e) => {
                self.violations.push(format!("{now}: {e}"));
                return;
            }
        };
        self.history.record(route, station, now);
        let a = &mut self.agents[h as usize];
        a.place = Place::Station { station, token };
        if let Some(j) = a.journey.as_mut() {
            j.since = now;
        }
        let dwelling: Vec<TrainId> = master.occupied_platforms().to_vec();
        for t in dwelling {
            let train = &self.trains[t.0 as usize];
            let (TrainState::Dwelling { pos }, Some(trip)) = (train.state, train.trip) else { continue };
            let seq = self.schedule.sequence(trip.route);
            if trip.route == route
                && pos + 1 < seq.len()
                && seq[pos] == station
                && first_after(seq, pos, dest)
                && train.free_seats() > 0
            {
                self.board(h, t.0, now);
                self.log_train(t.0, MoveKind::Board, now);
                return;
            }
        }
    }

    fn board(&mut self, h: u32, t: u32, now: SimTime) {
        let a = &mut self.agents[h as usize];
        let Place::Station { station, token } = a.place else { return };
        let rec = match self.masters[station.0 as usize].return_token(token) {
            Ok(r) => r,
            Err(e) => {
                self.violations.push(format!("{now}: {e}"));
                return;
            }
        };
        self.ledger.record_wait(WaitRecord {
            human: HumanId(h),
            station,
            line: rec.route.line,
            start: rec.issued_at,
            end: now,
        });
        let j = a.journey.as_mut().expect("waiting human has a journey");
        j.wait_s += now.saturating_sub(rec.issued_at);
        j.since = now;
        j.rode = true;
        a.place = Place::Onboard(TrainId(t));
        let train = &mut self.trains[t as usize];
        train.onboard.push(HumanId(h));
        if train.onboard.len() as u32 > train.capacity() {
            self.violations.push(format!("{now}: train {t} over capacity"));
        }
    }

    fn arrive(&mut self, sched: &mut Scheduler<Action>, h: u32, now: SimTime) -> Result<(), EngineError> {
        let a = &mut self.agents[h as usize];
        let j = a.journey.take().expect("arriving human has a journey");
        a.loc = j.route.destination;
        a.place = Place::Idle;
        self.ledger.record_trip(TripRecord {
            human: HumanId(h),
            start: j.started,
            end: now,
            road_s: j.road_s,
            wait_s: j.wait_s,
            onboard_s: j.onboard_s,
            rail: j.rode,
        });
        if let Purpose::ToEvent(ev) = j.purpose {
            a.place = Place::AtEvent(ev);
            let leave = self.feed.event(ev).end.max(now);
            sched.schedule(leave, Actor::Human(h), "event-leave", Action::EventLeave { human: h, event: ev.0 })?;
            return Ok(());
        }
        if a.pending_event {
            a.pending_event = false;
            if let Some((ev, _)) = a.plan {
                return self.go_to_event(sched, h, ev, now);
            }
        }
        while let Some(k) = a.queue.pop_front() {
            let trip = a.trips[k].clone();
            if !a.suppressed(&trip, &self.feed) {
                return self.start_journey(sched, h, trip.destination, Purpose::Trip, now);
            }
        }
        Ok(())
    }

    // ---- trains ----

    fn log_train(&mut self, t: u32, kind: MoveKind, now: SimTime) {
        let train = &self.trains[t as usize];
        let station = match (train.state, train.trip) {
            (TrainState::Depot { station, .. }, _) => station,
            (TrainState::Held { pos } | TrainState::Dwelling { pos } | TrainState::Running { pos }, Some(trip)) => {
                self.schedule.sequence(trip.route)[pos]
            }
            _ => unreachable!("a train away from its depot runs a trip"),
        };
        self.ledger.record_movement(MovementRecord {
            time: now,
            train: train.id,
            line: train.line,
            station,
            kind,
            onboard: train.onboard.len() as u32,
            capacity: train.capacity(),
        });
    }

    fn dispatch(&mut self, sched: &mut Scheduler<Action>, trip: TripKey, now: SimTime) -> Result<(), EngineError> {
        let line = self.network.line(trip.route.line);
        let depot = origin_terminal(line, trip.route.dir);
        let ready = self
            .trains
            .iter()
            .filter(|t| t.line == trip.route.line)
            .filter_map(|t| match t.state {
                TrainState::Depot { station, ready_at } if station == depot && ready_at <= now.secs() => {
                    Some((ready_at, t.id))
                }
                _ => None,
            })
            .min();
        match ready {
            Some((_, id)) => self.start_trip(sched, id.0, trip, now),
            None => {
                self.waiting_dispatch.entry((trip.route.line, depot)).or_default().push_back(trip);
                Ok(())
            }
        }
    }

    fn train_ready(&mut self, sched: &mut Scheduler<Action>, t: u32, now: SimTime) -> Result<(), EngineError> {
        let train = &self.trains[t as usize];
        let TrainState::Depot { station, .. } = train.state else { return Ok(()) };
        let key = (train.line, station);
        if let Some(trip) = self.waiting_dispatch.get_mut(&key).and_then(VecDeque::pop_front) {
            self.start_trip(sched, t, trip, now)?;
        }
        Ok(())
    }

    fn start_trip(
        &mut self,
        sched: &mut Scheduler<Action>,
        t: u32,
        trip: TripKey,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let train = &mut self.trains[t as usize];
        train.trip = Some(trip);
        train.next_route = trip.route;
        let station = self.schedule.sequence(trip.route)[0];
        self.request_platform(sched, t, 0, station, now)
    }

    fn request_platform(
        &mut self,
        sched: &mut Scheduler<Action>,
        t: u32,
        pos: usize,
        station: StationId,
        now: SimTime,
    ) -> Result<(), EngineError> {
        match self.masters[station.0 as usize].request_arrival(TrainId(t), now) {
            Admission::Admit => {
                self.trains[t as usize].state = TrainState::Dwelling { pos };
                self.log_train(t, MoveKind::Arrive, now);
                self.exchange(sched, t, now)
            }
            Admission::Hold => {
                self.trains[t as usize].state = TrainState::Held { pos };
                self.log_train(t, MoveKind::Hold, now);
                Ok(())
            }
        }
    }

    fn train_arrive(&mut self, sched: &mut Scheduler<Action>, t: u32, now: SimTime) -> Result<(), EngineError> {
        let train = &self.trains[t as usize];
        let (TrainState::Running { pos }, Some(trip)) = (train.state, train.trip) else { return Ok(()) };
        let station = self.schedule.sequence(trip.route)[pos + 1];
        self.request_platform(sched, t, pos + 1, station, now)
    }

    /// Alighting, then boarding, at the platform; then the departure or depot entry.
    fn exchange(&mut self, sched: &mut Scheduler<Action>, t: u32, now: SimTime) -> Result<(), EngineError> {
        let train = &self.trains[t as usize];
        let (TrainState::Dwelling { pos }, Some(trip)) = (train.state, train.trip) else { return Ok(()) };
        let seq = self.schedule.sequence(trip.route).to_vec();
        let station = seq[pos];
        let last = pos + 1 == seq.len();
        let before = train.onboard.len();

        let onboard = mem::take(&mut self.trains[t as usize].onboard);
        let mut staying = Vec::with_capacity(onboard.len());
        let mut leaving = Vec::new();
        for h in onboard {
            let j = self.agents[h.0 as usize].journey.as_ref().expect("rider has a journey");
            if last || j.route.legs[j.leg].to == station {
                leaving.push(h);
            } else {
                staying.push(h);
            }
        }
        self.trains[t as usize].onboard = staying;
        let mut transfers = Vec::new();
        for h in &leaving {
            if let Some(next) = self.alight(sched, h.0, station, now)? {
                transfers.push((h.0, next));
            }
        }

        if last {
            if self.trains[t as usize].onboard.len() != before {
                self.log_train(t, MoveKind::Board, now);
            }
            return self.send_to_depot(sched, t, station, trip, now);
        }

        let waiting = self.masters[station.0 as usize].waiting_for(trip.route);
        for (_, rec) in waiting {
            if self.trains[t as usize].free_seats() == 0 {
                break;
            }
            if first_after(&seq, pos, rec.destination) {
                self.board(rec.human.0, t, now);
            }
        }
        if self.trains[t as usize].onboard.len() != before || !leaving.is_empty() {
            self.log_train(t, MoveKind::Board, now);
        }
        for (h, (route, dest)) in transfers {
            self.wait_at(h, station, route, dest, now);
        }
        let line = self.network.line(trip.route.line);
        let depart = now.plus(line.dwell_s).max(self.schedule.planned_departure(trip, pos));
        sched.schedule(depart, Actor::Train(t), "depart", Action::TrainDepart(t))?;
        Ok(())
    }

    /// Moves a rider off the train. Returns the next leg's route and
    /// destination when the rider transfers here.
    fn alight(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        station: StationId,
        now: SimTime,
    ) -> Result<Option<(RouteId, StationId)>, EngineError> {
        let here = self.network.station(station).location;
        let a = &mut self.agents[h as usize];
        let j = a.journey.as_mut().expect("rider has a journey");
        j.onboard_s += now.saturating_sub(j.since);
        j.leg += 1;
        j.since = now;
        if let Some(next) = j.route.legs.get(j.leg) {
            if next.from == station {
                a.place = Place::Road;
                return Ok(Some((next.route, next.to)));
            }
        }
        let egress = self.road.travel_time(here, j.route.destination);
        j.road_s += egress;
        j.leg = j.route.legs.len();
        a.place = Place::Road;
        sched.schedule(now.plus(egress), Actor::Human(h), "arrive", Action::Arrive(h))?;
        Ok(None)
    }

    fn send_to_depot(
        &mut self,
        sched: &mut Scheduler<Action>,
        t: u32,
        station: StationId,
        trip: TripKey,
        now: SimTime,
    ) -> Result<(), EngineError> {
        self.delays.finish(trip);
        if let Some(next) = self.masters[station.0 as usize].release_platform(TrainId(t)) {
            sched.schedule(now, Actor::Train(next.0), "admit", Action::TrainAdmit(next.0))?;
        }
        let circular = self.network.line(trip.route.line).circular;
        let ready_at = now.plus(self.schedule.turnaround_s);
        let train = &mut self.trains[t as usize];
        train.trip = None;
        train.next_route = if circular { trip.route } else { RouteId::new(trip.route.line, trip.route.dir.reverse()) };
        train.state = TrainState::Depot { station, ready_at: ready_at.secs() };
        if service_at_terminal(train, &mut self.pool) {
            self.log_train(t, MoveKind::Capacity, now);
        }
        self.log_train(t, MoveKind::Depot, now);
        sched.schedule(ready_at, Actor::Train(t), "ready", Action::TrainReady(t))?;
        Ok(())
    }

    fn train_depart(&mut self, sched: &mut Scheduler<Action>, t: u32, now: SimTime) -> Result<(), EngineError> {
        let train = &self.trains[t as usize];
        let (TrainState::Dwelling { pos }, Some(trip)) = (train.state, train.trip) else { return Ok(()) };
        let seq = self.schedule.sequence(trip.route).to_vec();
        let station = seq[pos];

        let free = train.free_seats();
        let left: Vec<HumanId> = self.masters[station.0 as usize]
            .waiting_for(trip.route)
            .into_iter()
            .filter(|(_, r)| first_after(&seq, pos, r.destination))
            .map(|(_, r)| r.human)
            .collect();
        for h in left {
            let view = WaitView { human: h, station, now, next_train_free_seats: free };
            if self.strategy.on_human_wait(&view) == Some(RouteDirective::Replan) {
                self.replan(sched, h.0, station, trip, now)?;
            }
        }

        let planned = self.schedule.planned_departure(trip, pos);
        self.delays.report(trip, now.secs() as i64 - planned.secs() as i64);
        self.delays.departed(trip, pos);
        if let Some(next) = self.masters[station.0 as usize].release_platform(TrainId(t)) {
            sched.schedule(now, Actor::Train(next.0), "admit", Action::TrainAdmit(next.0))?;
        }
        self.trains[t as usize].state = TrainState::Running { pos };
        self.log_train(t, MoveKind::Depart, now);
        let run = self.network.line(trip.route.line).run_s;
        sched.schedule(now.plus(run), Actor::Train(t), "arrive", Action::TrainArrive(t))?;
        Ok(())
    }

    /// A human left behind by a full train looks for another way on.
    fn replan(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        station: StationId,
        full: TripKey,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let a = &self.agents[h as usize];
        let Place::Station { token, .. } = a.place else { return Ok(()) };
        let j = a.journey.as_ref().expect("waiting human has a journey");
        let current_route = j.route.legs[j.leg].route;
        let alt = choose_alternative_route(&self.network, &self.road, &self.inquiry(), &j.route, station, now, full);
        let master = &mut self.masters[station.0 as usize];
        if !alt.uses_rail() {
            let rec = match master.return_token(token) {
                Ok(r) => r,
                Err(e) => {
                    self.violations.push(format!("{now}: {e}"));
                    return Ok(());
                }
            };
            self.ledger.record_wait(WaitRecord {
                human: HumanId(h),
                station,
                line: rec.route.line,
                start: rec.issued_at,
                end: now,
            });
            self.adopted[h as usize] = true;
            let a = &mut self.agents[h as usize];
            let j = a.journey.as_mut().expect("checked above");
            j.wait_s += now.saturating_sub(rec.issued_at);
            j.road_s += alt.total_s;
            j.route = alt;
            j.leg = j.route.legs.len();
            a.place = Place::Road;
            sched.schedule(now.plus(j.route.total_s), Actor::Human(h), "arrive", Action::Arrive(h))?;
            return Ok(());
        }
        let first = alt.legs[0];
        if master.retarget(token, first.route, first.to).is_err() {
            return Ok(());
        }
        if first.route != current_route {
            self.adopted[h as usize] = true;
        }
        let j = self.agents[h as usize].journey.as_mut().expect("checked above");
        j.route = alt;
        j.leg = 0;
        Ok(())
    }

    // ---- events ----

    /// Where the human will next be free, and from when.
    fn position_and_ready(&self, h: u32, now: SimTime) -> (GeoPoint, SimTime) {
        let a = &self.agents[h as usize];
        match &a.journey {
            Some(j) => (j.route.destination, j.started.plus(j.route.total_s).max(now)),
            None => (a.loc, now),
        }
    }

    fn decide(&self, h: u32, ev: EventId, now: SimTime) -> Option<Attendance> {
        let (from, ready) = self.position_and_ready(h, now);
        decide_attendance(&self.network, &self.road, &self.inquiry(), from, now, ready, self.feed.event(ev)).ok()
    }

    fn commit(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        ev: EventId,
        att: &Attendance,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let (_, ready) = self.position_and_ready(h, now);
        let start = self.feed.event(ev).start;
        let depart = ready.max(SimTime(start.secs().saturating_sub(att.route.total_s)));
        self.agents[h as usize].plan = Some((ev, depart));
        self.attendees[ev.0 as usize].push(HumanId(h));
        sched.schedule(depart, Actor::Human(h), "event-depart", Action::EventDepart { human: h, event: ev.0 })?;
        Ok(())
    }

    fn poll_tick(&mut self, sched: &mut Scheduler<Action>, k: u64, now: SimTime) -> Result<(), EngineError> {
        for h in 0..self.humans.len() as u32 {
            let seen = poll(&self.feed, &mut self.polls, h, k, &self.streams);
            for ev in seen {
                let i = ev.0 as usize;
                if self.agents[h as usize].plan.is_some()
                    || self.activations[i].is_active(h)
                    || self.activations[i].is_declined(h)
                    || !self.feed.event(ev).targets(self.humans[h as usize].age_group.get())
                {
                    continue;
                }
                let Some(att) = self.decide(h, ev, now) else { continue };
                if inject(self.feed.event(ev), &self.humans[h as usize], att.arrival) {
                    self.activations[i].activate(h);
                    self.commit(sched, h, ev, &att, now)?;
                }
            }
        }
        let last_end = self.feed.events.iter().map(|e| e.end).max().unwrap_or(SimTime::ZERO);
        let next = self.feed.tick_time(k + 1);
        if next < last_end && next < self.horizon {
            sched.schedule(next, Actor::World, "poll", Action::PollTick(k + 1))?;
        }
        Ok(())
    }

    fn cascade_tick(&mut self, sched: &mut Scheduler<Action>, e: u32, now: SimTime) -> Result<(), EngineError> {
        let ev = EventId(e);
        let mut state = mem::replace(&mut self.activations[e as usize], ActivationState::new(ev, 0));
        let mut accepted = Vec::new();
        if let Some(graph) = self.graph.as_ref() {
            cascade_step(graph, &mut state, &self.streams, |h| {
                if self.agents[h as usize].plan.is_some() {
                    return false;
                }
                match self.decide(h, ev, now) {
                    Some(att) if att.attend => {
                        accepted.push((h, att));
                        true
                    }
                    _ => false,
                }
            });
        }
        self.activations[e as usize] = state;
        for (h, att) in accepted {
            self.commit(sched, h, ev, &att, now)?;
        }
        let next = now.plus(self.step_s);
        if next < self.feed.event(ev).end {
            sched.schedule(next, Actor::Event(e), "cascade", Action::CascadeStep(e))?;
        }
        Ok(())
    }

    fn go_to_event(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        ev: EventId,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let event = self.feed.event(ev);
        if now >= event.end {
            self.agents[h as usize].plan = None;
            return Ok(());
        }
        let at = event.location;
        self.start_journey(sched, h, at, Purpose::ToEvent(ev), now)
    }

    fn event_depart(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        ev: EventId,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let a = &mut self.agents[h as usize];
        if a.plan.map(|p| p.0) != Some(ev) {
            return Ok(());
        }
        if a.busy() {
            a.pending_event = true;
            return Ok(());
        }
        self.go_to_event(sched, h, ev, now)
    }

    fn event_leave(
        &mut self,
        sched: &mut Scheduler<Action>,
        h: u32,
        ev: EventId,
        now: SimTime,
    ) -> Result<(), EngineError> {
        let human = &self.humans[h as usize];
        let a = &mut self.agents[h as usize];
        if a.place != Place::AtEvent(ev) {
            return Ok(());
        }
        a.plan = None;
        a.place = Place::Idle;
        let dest = a.trips.iter().filter(|t| t.chosen_start <= now).next_back().map_or(human.home, |t| t.destination);
        self.start_journey(sched, h, dest, Purpose::Return, now)
    }

    // ---- manager ----

    fn hourly_strategy(&mut self, hour: u64, now: SimTime) {
        let target = hour + self.lookahead;
        let events: Vec<(&SocialEvent, Vec<&Human>)> = self
            .feed
            .events
            .iter()
            .zip(&self.attendees)
            .map(|(e, who)| (e, who.iter().map(|h| &self.humans[h.0 as usize]).collect()))
            .collect();
        let next = estimate_ridership(&self.network, &self.history, target, &events);
        let prev = estimate_ridership(&self.network, &self.history, target.saturating_sub(1), &events);
        let per_train = |est: &crate::transit::RidershipEstimate, route: RouteId, hour: u64| {
            let deps = self.schedule.departures_in_hour(route, hour);
            if deps == 0 {
                0.0
            } else {
                est.total(route) as f64 / deps as f64
            }
        };
        let views: Vec<TrainView> = self
            .trains
            .iter()
            .map(|t| {
                let route = match t.trip {
                    None => t.next_route,
                    Some(trip) if self.network.line(t.line).circular => trip.route,
                    Some(trip) => RouteId::new(t.line, trip.route.dir.reverse()),
                };
                TrainView {
                    id: t.id,
                    compartments: t.effective_compartments(),
                    seats_per_compartment: t.seats_per_compartment,
                    est_next: per_train(&next, route, target),
                    est_prev: per_train(&prev, route, target.saturating_sub(1)),
                }
            })
            .collect();
        drop(events);
        let view =
            ManagerView { now, target_hour: target, trains: views, available_pool: self.pool.available(&self.trains) };
        let decision = self.strategy.on_hour(&view);
        if decision.is_empty() {
            return;
        }
        if let Err(e) = apply_decision(&decision, &mut self.trains, &self.pool) {
            self.violations.push(format!("{now}: {e}"));
            return;
        }
        for t in 0..self.trains.len() {
            let train = &mut self.trains[t];
            if train.in_depot() && service_at_terminal(train, &mut self.pool) {
                self.log_train(t as u32, MoveKind::Capacity, now);
            }
        }
        self.decisions.push(decision);
    }

    /// Sweeps the conservation invariants.
    fn checkpoint(&mut self, now: SimTime) {
        self.checkpoints += 1;
        let mut v = Vec::new();
        let mut at_station = vec![0usize; self.masters.len()];
        let mut riding = 0usize;
        for (i, a) in self.agents.iter().enumerate() {
            match a.place {
                Place::Station { station, token } => {
                    at_station[station.0 as usize] += 1;
                    if self.masters[station.0 as usize].token_of(HumanId(i as u32)) != Some(token) {
                        v.push(format!("human {i} at station {station} without its token"));
                    }
                }
                Place::Onboard(_) => riding += 1,
                _ => {}
            }
        }
        for m in &self.masters {
            if m.issued - m.returned != m.occupancy() as u64 {
                v.push(format!("station {}: issued - returned != occupancy", m.station));
            }
            if m.occupancy() != at_station[m.station.0 as usize] {
                v.push(format!(
                    "station {}: {} tokens for {} humans",
                    m.station,
                    m.occupancy(),
                    at_station[m.station.0 as usize]
                ));
            }
            if m.occupied_platforms().len() as u32 > m.platforms {
                v.push(format!("station {}: platforms over-occupied", m.station));
            }
        }
        let mut listed = 0usize;
        for t in &self.trains {
            listed += t.onboard.len();
            if t.onboard.len() as u32 > t.capacity() {
                v.push(format!("train {} over capacity", t.id.0));
            }
            for h in &t.onboard {
                if self.agents[h.0 as usize].place != Place::Onboard(t.id) {
                    v.push(format!("human {} listed on train {} but elsewhere", h.0, t.id.0));
                }
            }
        }
        if listed != riding {
            v.push(format!("{listed} onboard entries for {riding} riders"));
        }
        let compartments = self.pool.free + self.trains.iter().map(|t| t.compartments).sum::<u32>();
        if compartments != self.compartments_total {
            v.push(format!("{compartments} compartments, expected {}", self.compartments_total));
        }
        self.violations.extend(v.into_iter().map(|s| format!("{now}: {s}")));
    }

    /// Closes waits still open at the horizon and the usage integrals.
    fn finish(&mut self) {
        let end = self.horizon;
        for m in &self.masters {
            for (_, rec) in m.tokens() {
                self.ledger.record_wait(WaitRecord {
                    human: rec.human,
                    station: m.station,
                    line: rec.route.line,
                    start: rec.issued_at,
                    end,
                });
            }
        }
        self.ledger.alt_adopters = self.adopted.iter().filter(|a| **a).count();
        self.ledger.finish();
    }
}
