//! Deterministic, time-stepped simulator for drone-assisted IoT data
//! collection under four charging strategies: no charging, landing pads,
//! tether docks and laser power beaming.
//!
//! A trial draws one [`Scenario`] and flies every policy through it, so
//! comparisons between strategies are paired.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod world;

pub use config::{Settings, WorldConfig, GBIT};
pub use energy::{BatteryState, Breakeven, LaserLink, PowerModel, StationCharger};
pub use engine::{
    run_episode, run_episode_with, run_paired_trial, PairedTrial, SimConfig, Trace, TraceEvent,
    TraceRecord,
};
pub use error::{ConfigError, InvariantViolation, SimError};
pub use metrics::{
    run_monte_carlo, AggregateRow, EpisodeMetrics, MeanCi, MonteCarloResult, MonteCarloSpec, Sweep,
};
pub use policy::{DroneMode, DroneParams, DroneState, EventKind, MissionState, PolicyKind};
pub use world::{generate_scenario, Position, Scenario};
