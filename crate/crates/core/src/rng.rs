//! Named random streams derived from one global seed.
//!
//! Every stream is an independent ChaCha8 generator keyed by `(seed, name)`,
//! so drawing more from one stream never shifts another. Keyed draws hash an
//! extra tuple of integers into the key for order-independent coin flips.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const POPULATION: &str = "population";
pub const GRAPH: &str = "graph";
pub const CASCADE: &str = "cascade";
pub const EVENTS: &str = "events";
pub const TRIPS: &str = "trips";
pub const POLLS: &str = "polls";

#[derive(Debug, Error, PartialEq)]
pub enum DrawError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DrawKind<'a> {
    Uniform,
    Bernoulli(f64),
    Choice(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Uniform(f64),
    Bernoulli(bool),
    Choice(usize),
}

/// Source of all randomness in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, name: &str) -> RngStream {
        RngStream { name: name.to_string(), rng: ChaCha8Rng::from_seed(derive_key(self.seed, name, &[])) }
    }

    /// A generator for one `(name, keys...)` tuple.
    pub fn keyed(&self, name: &str, keys: &[u64]) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(derive_key(self.seed, name, keys))
    }

    /// One uniform draw in `[0, 1)` for a `(name, keys...)` tuple.
    pub fn keyed_uniform(&self, name: &str, keys: &[u64]) -> f64 {
        self.keyed(name, keys).random::<f64>()
    }
}

fn derive_key(seed: u64, name: &str, keys: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    for k in keys {
        hasher.update(k.to_le_bytes());
    }
    hasher.finalize().into()
}

pub struct RngStream {
    name: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool, DrawError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DrawError::BadParameter(format!("bernoulli p={p} outside [0,1]")));
        }
        // Compare against p directly so p=0 and p=1 are exact.
        Ok(self.rng.random::<f64>() < p)
    }

    pub fn choice(&mut self, weights: &[f64]) -> Result<usize, DrawError> {
        choose(&mut self.rng, weights)
    }

    pub fn draw(&mut self, kind: DrawKind<'_>) -> Result<Sample, DrawError> {
        match kind {
            DrawKind::Uniform => Ok(Sample::Uniform(self.uniform())),
            DrawKind::Bernoulli(p) => self.bernoulli(p).map(Sample::Bernoulli),
            DrawKind::Choice(w) => self.choice(w).map(Sample::Choice),
        }
    }
}

/// Weighted choice with parameter validation.
pub fn choose<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Result<usize, DrawError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(DrawError::BadParameter("weights must be finite and non-negative".into()));
    }
    let dist = WeightedIndex::new(weights).map_err(|e| DrawError::BadParameter(format!("weights: {e}")))?;
    Ok(dist.sample(rng))
}
