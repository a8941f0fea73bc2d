//! Agent-based simulation of a city rail network whose demand is shaped by
//! social events spreading through a follower graph.

pub mod config;
pub mod engine;
pub mod events;
pub mod geo;
pub mod metrics;
pub mod network;
pub mod population;
pub mod rng;
pub mod run;
pub mod social;
pub mod strategy;
pub mod transit;
pub mod world;
