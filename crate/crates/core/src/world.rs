//! Simulated area: IoT clusters and ground power-station sites.
//!
//! Placement is drawn from a ChaCha8 generator seeded with the trial seed.
//! Each entity class reads from its own stream of that generator so that,
//! for example, asking for more stations never perturbs cluster placement:
//!
//! | stream | draws                              |
//! |--------|------------------------------------|
//! | 0      | cluster positions (x then y)       |
//! | 1      | cluster data volumes               |
//! | 2      | station sites (x then y)           |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

const STREAM_CLUSTER_POS: u64 = 0;
const STREAM_CLUSTER_DATA: u64 = 1;
const STREAM_STATIONS: u64 = 2;

/// Ground-plane coordinates in meters (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Moves at most `max_step` meters toward `goal`. Returns the new point
    /// and the distance actually covered.
    pub fn step_toward(self, goal: Position, max_step: f64) -> (Position, f64) {
        let d = distance(self, goal);
        if d <= max_step {
            (goal, d)
        } else {
            let k = max_step / d;
            (
                Position::new(
                    self.x + (goal.x - self.x) * k,
                    self.y + (goal.y - self.y) * k,
                ),
                max_step,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub position: Position,
    /// Total data volume held by the cluster's devices, bits.
    pub data_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationKind {
    ChargingPad,
    TetherDock,
    LaserDirector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: usize,
    pub position: Position,
    pub kind: StationKind,
}

/// Immutable world shared by every policy run of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area_side: f64,
    pub clusters: Vec<Cluster>,
    pub station_sites: Vec<Position>,
    pub seed: u64,
}

impl Scenario {
    /// The station sites interpreted as stations of one kind.
    pub fn stations(&self, kind: StationKind) -> Vec<Station> {
        self.station_sites
            .iter()
            .enumerate()
            .map(|(id, &position)| Station { id, position, kind })
            .collect()
    }

    /// Copy of this scenario keeping only the first `n` station sites.
    pub fn with_station_count(&self, n: usize) -> Scenario {
        let mut sc = self.clone();
        sc.station_sites.truncate(n);
        sc
    }

    pub fn total_data(&self) -> f64 {
        self.clusters.iter().map(|c| c.data_total).sum()
    }

    pub fn center(&self) -> Position {
        Position::new(self.area_side / 2.0, self.area_side / 2.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the JSON form, hex encoded. Used to audit trial pairing.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn generate_scenario(
    seed: u64,
    area_side: f64,
    n_clusters: usize,
    n_stations: usize,
    data_range: (f64, f64),
) -> Result<Scenario, ConfigError> {
    if !(area_side > 0.0) || !area_side.is_finite() {
        return Err(ConfigError::invalid("area_side", "must be positive"));
    }
    let (lo, hi) = data_range;
    if !(lo > 0.0) || !hi.is_finite() || lo > hi {
        return Err(ConfigError::invalid(
            "data_range",
            format!("need 0 < min <= max, got ({lo}, {hi})"),
        ));
    }

    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    };
    let mut pos_rng = stream(STREAM_CLUSTER_POS);
    let mut data_rng = stream(STREAM_CLUSTER_DATA);
    let mut site_rng = stream(STREAM_STATIONS);

    let uniform_point = |rng: &mut ChaCha8Rng| {
        let x = rng.gen_range(0.0..=area_side);
        let y = rng.gen_range(0.0..=area_side);
        Position::new(x, y)
    };

    let clusters = (0..n_clusters)
        .map(|id| {
            let position = uniform_point(&mut pos_rng);
            let data_total = if lo == hi {
                lo
            } else {
                data_rng.gen_range(lo..=hi)
            };
            Cluster {
                id,
                position,
                data_total,
            }
        })
        .collect();
    let station_sites = (0..n_stations)
        .map(|_| uniform_point(&mut site_rng))
        .collect();

    Ok(Scenario {
        area_side,
        clusters,
        station_sites,
        seed,
    })
}

/// Euclidean ground distance, meters.
pub fn distance(p: Position, q: Position) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Straight-line distance from a ground point to an airborne point above `q`.
pub fn slant_distance(p: Position, q: Position, altitude: f64) -> f64 {
    distance(p, q).hypot(altitude)
}
