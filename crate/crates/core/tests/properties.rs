//! Property tests over randomly generated inputs.

use std::collections::BTreeSet;

use proptest::prelude::*;

use railsim::engine::{Actor, Scheduler, SimTime};
use railsim::events::{EventId, SocialEvent};
use railsim::geo::{BoundingBox, GeoPoint, RoadRouter};
use railsim::metrics::partition;
use railsim::network::{Direction, RouteId, StationId, TransitNetwork};
use railsim::population::{
    attends_with_arrival, daily_trips, generate_population, plan_route, Category, HumanId, TRIP_RULES,
};
use railsim::rng::{self, RngStreams};
use railsim::social::{cascade, edge_succeeds, graph_for, SocialGraph};
use railsim::transit::{initial_capacity, HeadwayProfile, StationMaster, TrainId, TrainInquiry, TrainSchedule};

fn point() -> impl Strategy<Value = GeoPoint> {
    (1.2f64..1.5, 103.6f64..104.0).prop_map(|(lat, lon)| GeoPoint { lat, lon })
}

fn bounds() -> BoundingBox {
    BoundingBox { min_lat: 1.25, max_lat: 1.45, min_lon: 103.6, max_lon: 104.0 }
}

fn network_text(stations: &[GeoPoint], lines: &[(Vec<usize>, bool)]) -> String {
    let mut text = String::new();
    for (i, s) in stations.iter().enumerate() {
        text += &format!("[[stations]]\nid = \"S{i}\"\nlat = {}\nlon = {}\n", s.lat, s.lon);
    }
    for (l, (order, circular)) in lines.iter().enumerate() {
        let ids: Vec<String> = order.iter().map(|s| format!("\"S{s}\"")).collect();
        text += &format!(
            "[[lines]]\nid = \"L{l}\"\nstations = [{}]\ncircular = {circular}\nrun_s = {}\ndwell_s = 20\n",
            ids.join(", "),
            60 + 30 * l
        );
    }
    text
}

/// Two lines crossing at a shared station, stations scattered at random.
fn crossing() -> impl Strategy<Value = TransitNetwork> {
    (2usize..7, 2usize..7, any::<bool>())
        .prop_flat_map(|(a, b, circular)| (prop::collection::vec(point(), a + b + 1), Just((a, b, circular))))
        .prop_map(|(pts, (a, b, circular))| {
            let line_a: Vec<usize> = (0..=a).collect();
            let mut line_b: Vec<usize> = (a + 1..=a + b).collect();
            line_b.insert(b / 2, a / 2);
            let circular = circular && line_b.len() >= 3;
            TransitNetwork::parse(&network_text(&pts, &[(line_a, false), (line_b, circular)])).unwrap()
        })
}

fn schedule(net: &TransitNetwork, headways: &[u64]) -> TrainSchedule {
    let profiles = (0..net.lines().len())
        .map(|l| HeadwayProfile {
            first_departure_s: 5 * 3600,
            last_departure_s: 23 * 3600,
            default_headway_s: headways[l % headways.len()],
            bands: vec![(7 * 3600, 9 * 3600, headways[l % headways.len()] / 2)],
        })
        .collect();
    TrainSchedule::new(net, profiles, 60)
}

/// Fastest rail time found by trying every chain of up to four legs that
/// never revisits a station.
fn brute_rail(net: &TransitNetwork, inq: &dyn TrainInquiry, from: StationId, to: StationId, t: u64) -> Option<u64> {
    fn go(
        net: &TransitNetwork,
        inq: &dyn TrainInquiry,
        at: StationId,
        to: StationId,
        now: u64,
        seen: &mut Vec<StationId>,
        best: &mut Option<u64>,
        depth: usize,
    ) {
        if at == to {
            *best = Some(best.map_or(now, |b| b.min(now)));
            return;
        }
        if depth == 4 {
            return;
        }
        for route in net.routes() {
            let seq = net.sequence(route);
            let Some(pos) = seq[..seq.len() - 1].iter().position(|s| *s == at) else { continue };
            let Some(wait) = inq.expected_wait_s(route, at, SimTime(now)) else { continue };
            let line = net.line(route.line);
            for (p, next) in seq.iter().enumerate().skip(pos + 1) {
                if seen.contains(next) {
                    continue;
                }
                let ride = (p - pos) as u64 * line.hop_s() - line.dwell_s;
                seen.push(*next);
                go(net, inq, *next, to, now + wait + ride, seen, best, depth + 1);
                seen.pop();
            }
        }
    }
    let mut best = None;
    go(net, inq, from, to, t, &mut vec![from], &mut best, 0);
    best.map(|b| b - t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispatch_follows_time_then_insertion(times in prop::collection::vec(0u64..500, 1..60)) {
        let mut s: Scheduler<usize> = Scheduler::new();
        for (i, t) in times.iter().enumerate() {
            s.schedule(SimTime(*t), Actor::World, "x", i).unwrap();
        }
        let mut seen = Vec::new();
        s.run_until(SimTime(1_000), |sch, a| {
            assert!(sch.now() >= a.fire_at);
            assert_eq!(sch.now(), a.fire_at);
            seen.push((a.fire_at.secs(), a.payload));
        }).unwrap();
        let mut want: Vec<(u64, usize)> = times.iter().copied().zip(0..).collect();
        want.sort();
        prop_assert_eq!(seen, want);
    }

    #[test]
    fn streams_are_isolated(seed in any::<u64>(), extra in 0usize..50) {
        let streams = RngStreams::new(seed);
        let reference: Vec<f64> = {
            let mut b = streams.stream(rng::TRIPS);
            (0..10).map(|_| b.uniform()).collect()
        };
        let mut a = streams.stream(rng::POPULATION);
        for _ in 0..extra {
            a.uniform();
        }
        let mut b = streams.stream(rng::TRIPS);
        let again: Vec<f64> = (0..10).map(|_| b.uniform()).collect();
        prop_assert_eq!(reference, again);
    }

    #[test]
    fn nearest_station_matches_scan(net in crossing(), probes in prop::collection::vec(point(), 1..20)) {
        for p in probes {
            let got = net.nearest_station(p).unwrap();
            let mut best = 0;
            for (i, s) in net.stations().iter().enumerate() {
                if p.distance_m(&s.location) < p.distance_m(&net.stations()[best].location) {
                    best = i;
                }
            }
            prop_assert_eq!(got, StationId(best as u32));
        }
    }

    #[test]
    fn road_time_is_nearly_metric(a in point(), b in point(), c in point(), speed in 5.0f64..80.0) {
        let road = RoadRouter::new(speed).unwrap();
        prop_assert!(road.travel_time(a, c) <= road.travel_time(a, b) + road.travel_time(b, c) + 1);
        prop_assert_eq!(road.travel_time(a, a), 0);
    }

    #[test]
    fn circular_loop_time(n in 3usize..12, run in 30u64..300, dwell in 0u64..60) {
        let pts: Vec<String> = (0..n).map(|i| format!("[[stations]]\nid = \"C{i}\"\nlat = 1.3\nlon = {}\n", 103.6 + i as f64 * 0.01)).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("\"C{i}\"")).collect();
        let text = format!("{}[[lines]]\nid = \"C\"\nstations = [{}]\ncircular = true\nrun_s = {run}\ndwell_s = {dwell}\n", pts.concat(), ids.join(", "));
        let net = TransitNetwork::parse(&text).unwrap();
        let line = &net.lines()[0];
        for s in &line.stations {
            for dir in Direction::BOTH {
                prop_assert_eq!(line.traversal_time_s(*s, *s, dir), Some(n as u64 * (run + dwell)));
            }
        }
    }

    #[test]
    fn humans_are_consistent(n in 0usize..300, seed in any::<u64>()) {
        let humans = generate_population(n, &bounds(), Category::DEFAULT_WEIGHTS, &RngStreams::new(seed)).unwrap();
        prop_assert_eq!(humans.len(), n);
        for (i, h) in humans.iter().enumerate() {
            prop_assert!(h.is_consistent());
            prop_assert_eq!(h.id, HumanId(i as u32));
            prop_assert!(bounds().contains(&h.home));
            prop_assert!(category_allows(h.category, h.age_group.get()));
            prop_assert_eq!(h.office.is_some(), h.category == Category::WorkingProfessional);
            prop_assert_eq!(h.school.is_some(), h.category == Category::Student);
        }
    }

    #[test]
    fn trips_pair_and_stay_in_windows(n in 1usize..60, seed in any::<u64>(), day in 0u64..3) {
        let streams = RngStreams::new(seed);
        let humans = generate_population(n, &bounds(), Category::DEFAULT_WEIGHTS, &streams).unwrap();
        for h in &humans {
            let trips = daily_trips(h, day, &streams);
            for t in &trips {
                prop_assert!(t.window_start <= t.chosen_start && t.chosen_start <= t.window_end);
                prop_assert_eq!(t.chosen_start.day(), day);
            }
            for w in trips.windows(2) {
                prop_assert!(w[0].chosen_start <= w[1].chosen_start);
            }
            for rule in TRIP_RULES.iter().filter(|r| r.category == h.category) {
                let count = |k: (railsim::population::PlaceKind, railsim::population::PlaceKind)| {
                    trips.iter().filter(|t| (t.origin_kind, t.destination_kind) == k).count()
                };
                let out = count((rule.outbound.0, rule.outbound.1));
                let back = count((rule.inbound.0, rule.inbound.1));
                prop_assert_eq!(out, back);
                if !rule.optional {
                    prop_assert!(out >= 1);
                }
            }
        }
    }

    #[test]
    fn attendance_is_monotone_in_arrival(start in 0u64..100_000, dur in 60u64..20_000, a in 0u64..200_000, b in 0u64..200_000) {
        let (early, late) = (a.min(b), a.max(b));
        let (s, e) = (SimTime(start), SimTime(start + dur));
        if attends_with_arrival(SimTime(late), s, e) {
            prop_assert!(attends_with_arrival(SimTime(early), s, e));
        }
        prop_assert_eq!(attends_with_arrival(SimTime(late), s, e), late <= start + dur / 10);
    }

    #[test]
    fn plan_route_is_optimal(
        net in crossing(),
        a in point(),
        b in point(),
        minute in 5u64 * 60..22 * 60,
        h0 in 120u64..1200,
        h1 in 120u64..1200,
    ) {
        let sched = schedule(&net, &[h0, h1]);
        let road = RoadRouter::default();
        let t = SimTime(minute * 60);
        let got = plan_route(&net, &road, &sched, a, b, t).unwrap();
        prop_assert_eq!(got.component_sum(), got.total_s);
        let board = net.nearest_station(a).unwrap();
        let alight = net.nearest_station(b).unwrap();
        let road_s = road.travel_time(a, b);
        let want = if board == alight {
            road_s
        } else {
            let access = road.travel_time(a, net.station(board).location);
            let egress = road.travel_time(net.station(alight).location, b);
            match brute_rail(&net, &sched, board, alight, t.secs() + access) {
                Some(r) => road_s.min(access + r + egress),
                None => road_s,
            }
        };
        prop_assert_eq!(got.total_s, want);
    }

    #[test]
    fn probabilities_lie_in_unit_interval(n in 20usize..200, seed in any::<u64>()) {
        let streams = RngStreams::new(seed);
        let humans = generate_population(n, &bounds(), Category::DEFAULT_WEIGHTS, &streams).unwrap();
        let mut cfg = railsim::config::SocialConfig::default();
        cfg.degree.min = 1.0;
        cfg.degree.max = (n.min(50) - 1) as f64;
        cfg.degree.mean = 5.0;
        cfg.degree.reference_population = n;
        let g = graph_for(&humans, &cfg, &streams).unwrap();
        for e in g.edges() {
            prop_assert!((0.0..=1.0).contains(&e.probability));
            prop_assert_ne!(e.follower, e.poster);
        }
        for f in 0..n as u32 {
            prop_assert!(g.out_degree(f) >= 1);
        }
    }
}

fn category_allows(c: Category, group: u8) -> bool {
    match c {
        Category::Student => (1..=2).contains(&group),
        Category::WorkingProfessional => (2..=5).contains(&group),
        Category::SeniorCitizen => group == 6,
        Category::HomeMaker => (3..=5).contains(&group),
    }
}

fn random_graph() -> impl Strategy<Value = SocialGraph> {
    (3usize..25).prop_flat_map(|n| {
        prop::collection::vec((0..n as u32, 0..n as u32, 0.0f64..=1.0), 0..80).prop_map(move |edges| {
            let edges: Vec<_> = edges.into_iter().filter(|(f, p, _)| f != p).collect();
            let mut seen = BTreeSet::new();
            let edges: Vec<_> = edges.into_iter().filter(|(f, p, _)| seen.insert((*f, *p))).collect();
            let mut g = SocialGraph::from_pairs(n, edges.iter().map(|(f, p, _)| (*f, *p)));
            let probs: std::collections::HashMap<(u32, u32), f64> =
                edges.iter().map(|(f, p, q)| ((*f, *p), *q)).collect();
            g.assign_probabilities(|f, p| probs[&(f, p)]);
            g
        })
    })
}

/// Reachability through edges whose keyed coin succeeds.
fn live_edge_closure(g: &SocialGraph, seeds: &[u32], event: EventId, streams: &RngStreams) -> BTreeSet<u32> {
    let mut active: BTreeSet<u32> = seeds.iter().copied().collect();
    let mut stack: Vec<u32> = seeds.to_vec();
    while let Some(u) = stack.pop() {
        for (v, p) in g.followers(u) {
            if !active.contains(v) && edge_succeeds(streams, event, u, *v, *p) {
                active.insert(*v);
                stack.push(*v);
            }
        }
    }
    active
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adding_seeds_never_shrinks_activation(g in random_graph(), seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let n = g.node_count();
        let seeds: Vec<u32> = picks.iter().map(|i| i.index(n) as u32).collect();
        let streams = RngStreams::new(seed);
        let fewer = cascade(&g, &seeds[..seeds.len() - 1], EventId(3), &streams);
        let more = cascade(&g, &seeds, EventId(3), &streams);
        for v in fewer.active_set() {
            prop_assert!(more.is_active(v));
        }
    }

    #[test]
    fn cascade_matches_live_edge_closure(g in random_graph(), seed in any::<u64>(), s in any::<prop::sample::Index>()) {
        let streams = RngStreams::new(seed);
        let seeds = [s.index(g.node_count()) as u32];
        let state = cascade(&g, &seeds, EventId(1), &streams);
        let got: BTreeSet<u32> = state.active_set().into_iter().collect();
        prop_assert_eq!(got, live_edge_closure(&g, &seeds, EventId(1), &streams));
    }

    #[test]
    fn constant_model_depends_only_on_p(g in random_graph(), seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut g = g;
        g.assign_probabilities(|_, _| p);
        let streams = RngStreams::new(seed);
        let state = cascade(&g, &[0], EventId(2), &streams);
        // Oracle: BFS over edges, each flipped with the same keyed uniform against p.
        let mut active = BTreeSet::from([0u32]);
        let mut frontier = vec![0u32];
        let mut steps = 0;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for u in frontier {
                for (v, _) in g.followers(u) {
                    if !active.contains(v) && streams.keyed_uniform(rng::CASCADE, &[2, u as u64, *v as u64]) < p {
                        active.insert(*v);
                        next.push(*v);
                    }
                }
            }
            frontier = next;
            steps += 1;
        }
        prop_assert!(steps <= g.node_count());
        let got: BTreeSet<u32> = state.active_set().into_iter().collect();
        prop_assert_eq!(got, active);
    }

    #[test]
    fn capacity_is_whole_compartments(sim in 0.0f64..1e7, real in 1.0f64..1e8, cap in 1.0f64..5000.0, seats in 1u32..100) {
        let c = initial_capacity(sim, real, cap, seats);
        prop_assert_eq!(c % seats, 0);
        prop_assert!(c >= seats);
    }

    #[test]
    fn partition_is_balanced(n in 0usize..200, k in 1usize..10) {
        let parts = partition(n, k);
        prop_assert_eq!(parts.len(), k);
        prop_assert_eq!(parts[0].start, 0);
        prop_assert_eq!(parts[k - 1].end, n);
        for w in parts.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        let sizes: Vec<usize> = parts.iter().map(|r| r.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn token_balance_holds(ops in prop::collection::vec((any::<bool>(), 0u32..20), 1..200)) {
        let mut m = StationMaster::new(StationId(0), 2);
        let route = RouteId::new(railsim::network::LineId(0), Direction::Forward);
        let (mut issued, mut returned) = (0usize, 0usize);
        for (issue, h) in ops {
            let human = HumanId(h);
            match (issue, m.token_of(human)) {
                (true, None) => {
                    m.issue_token(human, StationId(1), route, SimTime(0)).unwrap();
                    issued += 1;
                }
                (true, Some(_)) => prop_assert!(m.issue_token(human, StationId(1), route, SimTime(0)).is_err()),
                (false, Some(t)) => {
                    prop_assert_eq!(m.return_token(t).unwrap().human, human);
                    returned += 1;
                }
                (false, None) => {}
            }
            prop_assert_eq!(m.occupancy(), issued - returned);
        }
    }

    #[test]
    fn platforms_never_overfill(platforms in 1u32..4, ops in prop::collection::vec((any::<bool>(), 0u32..8), 1..200)) {
        let mut m = StationMaster::new(StationId(0), platforms);
        for (i, (arrive, t)) in ops.into_iter().enumerate() {
            let train = TrainId(t);
            if arrive {
                if !m.occupied_platforms().contains(&train) && !m.held().iter().any(|(_, h)| *h == train) {
                    m.request_arrival(train, SimTime(i as u64));
                }
            } else if m.occupied_platforms().contains(&train) {
                m.release_platform(train);
            }
            prop_assert!(m.occupied_platforms().len() <= platforms as usize);
        }
    }

    #[test]
    fn generated_events_are_valid(seed in any::<u64>()) {
        let net = TransitNetwork::parse(&network_text(
            &[GeoPoint { lat: 1.3, lon: 103.7 }, GeoPoint { lat: 1.35, lon: 103.8 }],
            &[(vec![0, 1], false)],
        )).unwrap();
        let cfg = railsim::config::EventsConfig {
            generator: Some(railsim::config::EventGeneratorConfig {
            count: 100,
            bounds: None,
            duration_min_minutes: 30,
            duration_max_minutes: 300,
            lead_min_minutes: 0,
            lead_max_minutes: 600,
            day: 0,
            earliest_start: "06:00".into(),
            latest_start: "22:00".into(),
        }),
            ..Default::default()
        };
        let events = railsim::events::generate_events(&cfg, &net, &RngStreams::new(seed)).unwrap();
        prop_assert_eq!(events.len(), 100);
        for e in events {
            prop_assert!(e.start < e.end);
            prop_assert!(e.broadcast_from <= e.start);
            prop_assert!(!e.age_groups.is_empty());
            prop_assert!(e.is_valid());
        }
    }
}

#[test]
fn late_seed_cannot_inject() {
    let h = generate_population(1, &bounds(), [0.0, 1.0, 0.0, 0.0], &RngStreams::new(1)).unwrap().remove(0);
    let ev = SocialEvent {
        id: EventId(0),
        name: "e".into(),
        location: h.home,
        start: SimTime(3600),
        end: SimTime(7200),
        age_groups: vec![h.age_group.get()],
        broadcast_from: SimTime(0),
    };
    assert!(railsim::events::inject(&ev, &h, SimTime(3600)));
    assert!(!railsim::events::inject(&ev, &h, SimTime(3601)));
    let other = SocialEvent { age_groups: vec![6], ..ev };
    assert!(!railsim::events::inject(&other, &h, SimTime(0)));
}
