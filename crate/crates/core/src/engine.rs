//! Discrete-event scheduler.
//!
//! Actions are ordered by `(fire_at, seq)`, where `seq` is a counter assigned
//! at insertion. Equal fire times therefore dispatch in insertion order and
//! never depend on actor identity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: u64 = 86_400;
pub const SECONDS_PER_HOUR: u64 = 3_600;

/// Integer seconds since midnight of simulation day 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_hms(h: u64, m: u64, s: u64) -> Self {
        SimTime(h * SECONDS_PER_HOUR + m * 60 + s)
    }

    pub fn on_day(day: u64, time_of_day: u64) -> Self {
        SimTime(day * SECONDS_PER_DAY + time_of_day)
    }

    pub fn secs(self) -> u64 {
        self.0
    }

    pub fn day(self) -> u64 {
        self.0 / SECONDS_PER_DAY
    }

    pub fn time_of_day(self) -> u64 {
        self.0 % SECONDS_PER_DAY
    }

    /// Absolute hour index since day 0.
    pub fn hour(self) -> u64 {
        self.0 / SECONDS_PER_HOUR
    }

    pub fn hour_of_day(self) -> u64 {
        self.time_of_day() / SECONDS_PER_HOUR
    }

    pub fn plus(self, secs: u64) -> Self {
        SimTime(self.0 + secs)
    }

    pub fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }

    /// Parses `HH:MM` or `HH:MM:SS`. Hours may exceed 23 to address later days.
    pub fn parse_clock(text: &str) -> Option<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return None;
        }
        let h: u64 = parts[0].parse().ok()?;
        let m: u64 = parts[1].parse().ok()?;
        let s: u64 = if parts.len() == 3 { parts[2].parse().ok()? } else { 0 };
        if m >= 60 || s >= 60 {
            return None;
        }
        Some(SimTime::from_hms(h, m, s))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.0;
        write!(f, "{}:{:02}:{:02}", t / 3600, (t / 60) % 60, t % 60)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u64);

/// Who an action belongs to. Only used for logging; never for ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Actor {
    World,
    Human(u32),
    Train(u32),
    Station(u32),
    Event(u32),
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::World => write!(f, "world"),
            Actor::Human(id) => write!(f, "human:{id}"),
            Actor::Train(id) => write!(f, "train:{id}"),
            Actor::Station(id) => write!(f, "station:{id}"),
            Actor::Event(id) => write!(f, "event:{id}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimedAction<P> {
    pub fire_at: SimTime,
    pub actor: Actor,
    pub kind: &'static str,
    pub payload: P,
    pub seq: u64,
}

impl<P> TimedAction<P> {
    pub fn id(&self) -> ActionId {
        ActionId(self.seq)
    }
}

struct Pending<P>(TimedAction<P>);

impl<P> PartialEq for Pending<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.fire_at == other.0.fire_at && self.0.seq == other.0.seq
    }
}
impl<P> Eq for Pending<P> {}

impl<P> PartialOrd for Pending<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Pending<P> {
    // Reversed so the max-heap pops the smallest (fire_at, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_at, other.0.seq).cmp(&(self.0.fire_at, self.0.seq))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("cannot schedule action at {at} before current time {now}")]
    PastTime { at: SimTime, now: SimTime },
    #[error("cannot run until {until}: current time is {now}")]
    RunBackwards { until: SimTime, now: SimTime },
}

/// One line of the dispatch log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchRecord {
    pub time: SimTime,
    pub actor: Actor,
    pub kind: &'static str,
}

impl DispatchRecord {
    pub fn write_line(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{}\t{}\t{}", self.time.0, self.actor, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub dispatched: u64,
    pub now: SimTime,
}

pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Pending<P>>,
    log: Option<Vec<DispatchRecord>>,
    dispatched: u64,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler { now: SimTime::ZERO, next_seq: 0, queue: BinaryHeap::new(), log: None, dispatched: 0 }
    }

    /// Keeps a record of every dispatched action.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn log(&self) -> &[DispatchRecord] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_log(&mut self) -> Vec<DispatchRecord> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        actor: Actor,
        kind: &'static str,
        payload: P,
    ) -> Result<ActionId, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::PastTime { at: fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Pending(TimedAction { fire_at, actor, kind, payload, seq }));
        Ok(ActionId(seq))
    }

    /// Pops the next action due at or before `t_end`, advancing the clock to it.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<TimedAction<P>> {
        let due = matches!(self.queue.peek(), Some(p) if p.0.fire_at <= t_end);
        if !due {
            return None;
        }
        let Pending(action) = self.queue.pop()?;
        self.now = action.fire_at;
        self.dispatched += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(DispatchRecord { time: action.fire_at, actor: action.actor, kind: action.kind });
        }
        Some(action)
    }

    /// Moves the clock forward to `t_end` once no earlier action is pending.
    pub fn advance_to(&mut self, t_end: SimTime) -> Result<(), EngineError> {
        if t_end < self.now {
            return Err(EngineError::RunBackwards { until: t_end, now: self.now });
        }
        if let Some(p) = self.queue.peek() {
            debug_assert!(p.0.fire_at > t_end, "advance_to skips a pending action");
        }
        self.now = t_end;
        Ok(())
    }

    /// Dispatches everything due up to `t_end` through `handler`, which may
    /// schedule further actions.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<RunSummary, EngineError>
    where
        F: FnMut(&mut Scheduler<P>, TimedAction<P>),
    {
        if t_end < self.now {
            return Err(EngineError::RunBackwards { until: t_end, now: self.now });
        }
        let mut count = 0;
        while let Some(action) = self.pop_due(t_end) {
            handler(self, action);
            count += 1;
        }
        self.now = t_end;
        Ok(RunSummary { dispatched: count, now: self.now })
    }
}
