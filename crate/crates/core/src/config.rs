//! Scenario configuration (TOML).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geo::BoundingBox;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_horizon")]
    pub horizon_hours: u64,
    #[serde(default)]
    pub road: RoadConfig,
    pub stations: Vec<StationConfig>,
    pub lines: Vec<LineConfig>,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub social: SocialConfig,
    #[serde(default)]
    pub events: EventsConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub trains: TrainsConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
}

fn default_horizon() -> u64 {
    24
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub speed_kmh: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig { speed_kmh: 35.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub platforms: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub id: String,
    pub stations: Vec<String>,
    #[serde(default)]
    pub circular: bool,
    #[serde(default)]
    pub run_s: Option<u64>,
    #[serde(default)]
    pub dwell_s: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryWeights {
    pub working_professional: f64,
    pub student: f64,
    pub home_maker: f64,
    pub senior_citizen: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub size: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub weights: Option<CategoryWeights>,
    /// Area for contact points; defaults to the stations' bounding box.
    #[serde(default)]
    pub bounds: Option<BoundingBox>,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig { size: 5_000, seed: None, weights: None, bounds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluenceModelKind {
    Influence,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeConfig {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population size the (min, max, mean) triple was measured on.
    pub reference_population: usize,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        DegreeConfig { min: 1.0, max: 5000.0, mean: 500.0, reference_population: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocialConfig {
    pub model: InfluenceModelKind,
    pub constant_probability: f64,
    pub degree: DegreeConfig,
    /// Sim-time spacing of cascade steps.
    pub step_minutes: u64,
}

impl Default for SocialConfig {
    fn default() -> Self {
        SocialConfig {
            model: InfluenceModelKind::Influence,
            constant_probability: 0.5,
            degree: DegreeConfig::default(),
            step_minutes: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEventConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Place the event at a station instead of explicit coordinates.
    #[serde(default)]
    pub station: Option<String>,
    #[serde(default)]
    pub lat: Option<f64>,
    #[serde(default)]
    pub lon: Option<f64>,
    pub start: String,
    pub end: String,
    #[serde(default = "all_age_groups")]
    pub age_groups: Vec<u8>,
    #[serde(default = "default_lead")]
    pub lead_minutes: u64,
}

fn all_age_groups() -> Vec<u8> {
    (1..=6).collect()
}

fn default_lead() -> u64 {
    180
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventGeneratorConfig {
    pub count: usize,
    #[serde(default)]
    pub bounds: Option<BoundingBox>,
    pub duration_min_minutes: u64,
    pub duration_max_minutes: u64,
    pub lead_min_minutes: u64,
    pub lead_max_minutes: u64,
    #[serde(default)]
    pub day: u64,
    #[serde(default = "default_earliest")]
    pub earliest_start: String,
    #[serde(default = "default_latest")]
    pub latest_start: String,
}

fn default_earliest() -> String {
    "08:00".into()
}

fn default_latest() -> String {
    "20:00".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsConfig {
    pub poll_interval_minutes: u64,
    pub poll_probability: f64,
    #[serde(default)]
    pub fixed: Vec<FixedEventConfig>,
    #[serde(default)]
    pub generator: Option<EventGeneratorConfig>,
}

impl Default for EventsConfig {
    fn default() -> Self {
        EventsConfig { poll_interval_minutes: 60, poll_probability: 0.25, fixed: Vec::new(), generator: None }
    }
}

impl EventsConfig {
    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty() && self.generator.as_ref().is_none_or(|g| g.count == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadwayBand {
    pub from: String,
    pub to: String,
    pub headway_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineScheduleConfig {
    #[serde(default)]
    pub first_departure: Option<String>,
    #[serde(default)]
    pub last_departure: Option<String>,
    #[serde(default)]
    pub default_headway_minutes: Option<f64>,
    #[serde(default)]
    pub bands: Option<Vec<HeadwayBand>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub first_departure: String,
    pub last_departure: String,
    pub default_headway_minutes: f64,
    #[serde(default)]
    pub bands: Vec<HeadwayBand>,
    pub turnaround_s: u64,
    #[serde(default)]
    pub lines: BTreeMap<String, LineScheduleConfig>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            first_departure: "05:30".into(),
            last_departure: "23:30".into(),
            default_headway_minutes: 7.0,
            bands: vec![
                HeadwayBand { from: "07:00".into(), to: "09:30".into(), headway_minutes: 4.0 },
                HeadwayBand { from: "17:00".into(), to: "20:00".into(), headway_minutes: 4.0 },
            ],
            turnaround_s: 60,
            lines: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainsConfig {
    pub compartment_seats: u32,
    /// Seats per train; computed from ridership ratios when absent.
    #[serde(default)]
    pub initial_capacity: Option<u32>,
    /// Simulated riders per day used for capacity sizing; estimated from
    /// the population when absent.
    #[serde(default)]
    pub sim_daily_ridership: Option<f64>,
    pub real_daily_ridership: f64,
    pub real_capacity: f64,
}

impl Default for TrainsConfig {
    fn default() -> Self {
        TrainsConfig {
            compartment_seats: 31,
            initial_capacity: None,
            sim_daily_ridership: None,
            real_daily_ridership: 2_300_000.0,
            real_capacity: 1920.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    None,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub pool: u32,
    pub alt_routing: bool,
    /// How many hours ahead the hourly capacity decision looks.
    pub lookahead_hours: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { kind: StrategyKind::None, pool: 10, alt_routing: false, lookahead_hours: 1 }
    }
}

impl ScenarioConfig {
    /// Loads a scenario from a TOML file, or from `scenario.toml` inside a directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = if path.is_dir() { path.join("scenario.toml") } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|source| ConfigError::Io { path: file.clone(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: file, message },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string().replace('\n', " ") })
    }

    /// Stable digest of the parsed config; insensitive to formatting.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::Invalid("seed missing: set `seed` or pass --seed".into()))
    }
}
