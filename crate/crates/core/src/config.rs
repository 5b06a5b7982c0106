//! Bundled configuration for all simulator modules.

use serde::{Deserialize, Serialize};

use crate::energy::{LaserLink, PowerModel, StationCharger};
use crate::engine::SimConfig;
use crate::error::ConfigError;
use crate::policy::DroneParams;

pub const GBIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub area_km2: f64,
    pub clusters: usize,
    pub stations: usize,
    /// Per-cluster data volume bounds, bits.
    pub data_min: f64,
    pub data_max: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            area_km2: 25.0,
            clusters: 18,
            stations: 6,
            data_min: 1.8 * GBIT,
            data_max: 2.4 * GBIT,
        }
    }
}

impl WorldConfig {
    pub fn area_side(&self) -> f64 {
        (self.area_km2 * 1e6).sqrt()
    }

    pub fn data_range(&self) -> (f64, f64) {
        (self.data_min, self.data_max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.area_km2 > 0.0) || !self.area_km2.is_finite() {
            return Err(ConfigError::invalid("world.area_km2", "must be positive"));
        }
        if !(self.data_min > 0.0) {
            return Err(ConfigError::invalid("world.data_min", "must be positive"));
        }
        if !(self.data_min <= self.data_max) || !self.data_max.is_finite() {
            return Err(ConfigError::invalid(
                "world.data_max",
                "must be at least world.data_min",
            ));
        }
        Ok(())
    }
}

/// Every module configuration a run needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Settings {
    pub world: WorldConfig,
    pub drone: DroneParams,
    pub power: PowerModel,
    pub laser: LaserLink,
    pub charger: StationCharger,
    pub sim: SimConfig,
}

impl Settings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.world.validate()?;
        self.drone.validate()?;
        self.power.validate()?;
        self.laser.validate()?;
        if !(self.charger.power >= 0.0) || !self.charger.power.is_finite() {
            return Err(ConfigError::invalid(
                "charger.power",
                "must be non-negative",
            ));
        }
        self.sim.validate()
    }
}
