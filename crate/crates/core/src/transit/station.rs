//! Station master: presence tokens and platform arbitration.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::TrainId;
use crate::engine::SimTime;
use crate::network::{RouteId, StationId};
use crate::population::HumanId;

#[derive(Debug, Error, PartialEq)]
pub enum StationError {
    #[error("human {0:?} already holds a token at station {1}")]
    DuplicatePresence(HumanId, StationId),
    #[error("unknown token {0:?} at station {1}")]
    UnknownToken(Token, StationId),
}

/// Tokens are numbered in issue order per station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenRecord {
    pub human: HumanId,
    pub destination: StationId,
    /// Route the holder is waiting for.
    pub route: RouteId,
    pub issued_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Hold,
}

#[derive(Debug, Clone)]
pub struct StationMaster {
    pub station: StationId,
    pub platforms: u32,
    tokens: BTreeMap<Token, TokenRecord>,
    holders: HashMap<HumanId, Token>,
    next_token: u64,
    occupied: Vec<TrainId>,
    /// Held trains with the time they started waiting.
    hold: Vec<(SimTime, TrainId)>,
    pub issued: u64,
    pub returned: u64,
}

impl StationMaster {
    pub fn new(station: StationId, platforms: u32) -> Self {
        StationMaster {
            station,
            platforms,
            tokens: BTreeMap::new(),
            holders: HashMap::new(),
            next_token: 0,
            occupied: Vec::new(),
            hold: Vec::new(),
            issued: 0,
            returned: 0,
        }
    }

    pub fn issue_token(
        &mut self,
        human: HumanId,
        destination: StationId,
        route: RouteId,
        now: SimTime,
    ) -> Result<Token, StationError> {
        if self.holders.contains_key(&human) {
            return Err(StationError::DuplicatePresence(human, self.station));
        }
        let token = Token(self.next_token);
        self.next_token += 1;
        self.tokens.insert(token, TokenRecord { human, destination, route, issued_at: now });
        self.holders.insert(human, token);
        self.issued += 1;
        Ok(token)
    }

    /// Retires `token`, returning its record. The holder waited from
    /// `issued_at` until now.
    pub fn return_token(&mut self, token: Token) -> Result<TokenRecord, StationError> {
        let rec = self.tokens.remove(&token).ok_or(StationError::UnknownToken(token, self.station))?;
        self.holders.remove(&rec.human);
        self.returned += 1;
        Ok(rec)
    }

    /// Points a waiting human at a different route.
    pub fn retarget(&mut self, token: Token, route: RouteId, destination: StationId) -> Result<(), StationError> {
        let rec = self.tokens.get_mut(&token).ok_or(StationError::UnknownToken(token, self.station))?;
        rec.route = route;
        rec.destination = destination;
        Ok(())
    }

    pub fn occupancy(&self) -> usize {
        self.tokens.len()
    }

    pub fn token_of(&self, human: HumanId) -> Option<Token> {
        self.holders.get(&human).copied()
    }

    pub fn tokens(&self) -> impl Iterator<Item = (Token, &TokenRecord)> {
        self.tokens.iter().map(|(t, r)| (*t, r))
    }

    /// Humans waiting for `route`, earliest token first.
    pub fn waiting_for(&self, route: RouteId) -> Vec<(Token, TokenRecord)> {
        self.tokens.iter().filter(|(_, r)| r.route == route).map(|(t, r)| (*t, *r)).collect()
    }

    pub fn request_arrival(&mut self, train: TrainId, now: SimTime) -> Admission {
        if (self.occupied.len() as u32) < self.platforms {
            self.occupied.push(train);
            Admission::Admit
        } else {
            self.hold.push((now, train));
            Admission::Hold
        }
    }

    /// Frees the platform of `train` and admits the longest-held train,
    /// lower id first on ties.
    pub fn release_platform(&mut self, train: TrainId) -> Option<TrainId> {
        self.occupied.retain(|t| *t != train);
        let next = self.hold.iter().enumerate().min_by_key(|(_, (t, id))| (*t, *id)).map(|(i, _)| i)?;
        let (_, admitted) = self.hold.remove(next);
        self.occupied.push(admitted);
        Some(admitted)
    }

    pub fn occupied_platforms(&self) -> &[TrainId] {
        &self.occupied
    }

    pub fn held(&self) -> &[(SimTime, TrainId)] {
        &self.hold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Direction, LineId};

    fn route() -> RouteId {
        RouteId::new(LineId(0), Direction::Forward)
    }

    #[test]
    fn token_round_trip() {
        let mut sm = StationMaster::new(StationId(0), 2);
        let t = sm.issue_token(HumanId(1), StationId(3), route(), SimTime(100)).unwrap();
        assert_eq!(sm.occupancy(), 1);
        assert_eq!(
            sm.issue_token(HumanId(1), StationId(3), route(), SimTime(101)),
            Err(StationError::DuplicatePresence(HumanId(1), StationId(0)))
        );
        let rec = sm.return_token(t).unwrap();
        assert_eq!(rec.issued_at, SimTime(100));
        assert_eq!(sm.occupancy(), 0);
        assert_eq!(sm.return_token(t), Err(StationError::UnknownToken(t, StationId(0))));
    }

    #[test]
    fn occupancy_counts_outstanding_tokens() {
        let mut sm = StationMaster::new(StationId(0), 2);
        let tokens: Vec<Token> =
            (0..50).map(|i| sm.issue_token(HumanId(i), StationId(1), route(), SimTime(i as u64)).unwrap()).collect();
        for t in &tokens[..20] {
            sm.return_token(*t).unwrap();
        }
        assert_eq!(sm.occupancy(), 30);
        assert_eq!(sm.issued - sm.returned, 30);
    }

    #[test]
    fn platform_arbitration() {
        let mut sm = StationMaster::new(StationId(0), 2);
        assert_eq!(sm.request_arrival(TrainId(1), SimTime(0)), Admission::Admit);
        assert_eq!(sm.request_arrival(TrainId(2), SimTime(0)), Admission::Admit);
        assert_eq!(sm.request_arrival(TrainId(9), SimTime(200)), Admission::Hold);
        assert_eq!(sm.request_arrival(TrainId(8), SimTime(100)), Admission::Hold);
        assert_eq!(sm.request_arrival(TrainId(7), SimTime(100)), Admission::Hold);
        assert_eq!(sm.release_platform(TrainId(1)), Some(TrainId(7)));
        assert_eq!(sm.release_platform(TrainId(2)), Some(TrainId(8)));
        assert_eq!(sm.release_platform(TrainId(7)), Some(TrainId(9)));
        assert_eq!(sm.release_platform(TrainId(8)), None);
        assert!(sm.occupied_platforms().len() <= 2);
    }
}
