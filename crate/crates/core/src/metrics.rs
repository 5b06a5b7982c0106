//! Episode metrics and paired Monte Carlo aggregation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::engine::{generate_for, run_episode_with, Trace};
use crate::error::SimError;
use crate::policy::{EventKind, PolicyKind};
use crate::world::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndedBy {
    Window,
    Complete,
    Emergency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub efficiency: f64,
    pub distance_total: f64,
    pub clusters_served: usize,
    pub collected: f64,
    pub ended_by: EndedBy,
}

/// Fraction of clusters whose whole volume was uplinked; 1 for an empty area.
pub fn harvesting_efficiency(trace: &Trace, sc: &Scenario) -> f64 {
    if sc.clusters.is_empty() {
        1.0
    } else {
        trace.served_count() as f64 / sc.clusters.len() as f64
    }
}

pub fn episode_metrics(trace: &Trace, sc: &Scenario) -> EpisodeMetrics {
    let ended_by = if trace.has_event(|e| e == EventKind::MissionComplete) {
        EndedBy::Complete
    } else if trace.has_event(|e| e == EventKind::EmergencyLanding) {
        EndedBy::Emergency
    } else {
        EndedBy::Window
    };
    EpisodeMetrics {
        efficiency: harvesting_efficiency(trace, sc),
        distance_total: trace.last.odometer,
        clusters_served: trace.served_count(),
        collected: trace.last.bits,
        ended_by,
    }
}

/// Odometer readings at each cluster-served event, in order.
pub fn served_odometers(trace: &Trace) -> Vec<f64> {
    trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::ClusterServed(_)))
        .map(|e| e.odometer)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementPoint {
    /// Number of clusters served.
    pub served: usize,
    /// Mean distance flown, meters.
    pub mean_distance: f64,
    /// Traces contributing to this point.
    pub traces: usize,
}

/// Distance flown to serve `n` clusters: the odometer at the `n`-th served
/// event, averaged over every episode that served at least `n`. Counts no
/// episode reached are omitted.
pub fn movement_efficiency<'a, I>(served_odometers: I) -> Vec<MovementPoint>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for odo in served_odometers {
        if sums.len() < odo.len() {
            sums.resize(odo.len(), (0.0, 0));
        }
        for (slot, &d) in sums.iter_mut().zip(odo) {
            slot.0 += d;
            slot.1 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (sum, n))| MovementPoint {
            served: i + 1,
            mean_distance: sum / n as f64,
            traces: n,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfiles {
    pub battery: Vec<(f64, f64)>,
    pub collected: Vec<(f64, f64)>,
}

pub fn time_profiles(trace: &Trace) -> TimeProfiles {
    TimeProfiles {
        battery: trace.records.iter().map(|r| (r.t, r.battery_j)).collect(),
        collected: trace.records.iter().map(|r| (r.t, r.bits)).collect(),
    }
}

/// Mean with a normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci: f64,
}

impl MeanCi {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                ci: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, ci: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            ci: 1.96 * (var / n as f64).sqrt(),
        }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.ci
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.ci
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sweep {
    Stations(Vec<usize>),
    Window(Vec<f64>),
}

impl Sweep {
    pub fn kind(&self) -> &'static str {
        match self {
            Sweep::Stations(_) => "stations",
            Sweep::Window(_) => "window",
        }
    }

    fn points(&self) -> Vec<f64> {
        match self {
            Sweep::Stations(v) => v.iter().map(|&k| k as f64).collect(),
            Sweep::Window(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloSpec {
    pub n_trials: usize,
    pub base_seed: u64,
    pub sweep: Option<Sweep>,
    pub policies: Vec<PolicyKind>,
    pub settings: Settings,
    /// Worker threads; rayon's default when `None`.
    pub threads: Option<usize>,
}

/// One episode's outcome inside a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub policy: PolicyKind,
    /// Index into the sweep points, 0 without a sweep.
    pub point: usize,
    pub metrics: EpisodeMetrics,
    pub served_odometers: Vec<f64>,
    /// Digest of the exact scenario flown.
    pub scenario_digest: String,
    /// Digest of the cluster layout, shared across sweep points.
    pub cluster_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub runs: Vec<RunOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: PolicyKind,
    pub sweep_kind: String,
    pub sweep_value: Option<f64>,
    pub trials: usize,
    pub efficiency: MeanCi,
    pub distance: MeanCi,
    pub bits: MeanCi,
    pub served_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementRow {
    pub policy: PolicyKind,
    pub sweep_kind: String,
    pub sweep_value: Option<f64>,
    pub point: MovementPoint,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub rows: Vec<AggregateRow>,
    pub movement: Vec<MovementRow>,
    pub trials: Vec<TrialOutcome>,
}

/// Summary statistics of a set of episodes flown by one policy.
pub fn aggregate(
    policy: PolicyKind,
    sweep_kind: &str,
    sweep_value: Option<f64>,
    runs: &[EpisodeMetrics],
) -> AggregateRow {
    let col = |f: fn(&EpisodeMetrics) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    AggregateRow {
        policy,
        sweep_kind: sweep_kind.to_string(),
        sweep_value,
        trials: runs.len(),
        efficiency: MeanCi::of(&col(|m| m.efficiency)),
        distance: MeanCi::of(&col(|m| m.distance_total)),
        bits: MeanCi::of(&col(|m| m.collected)),
        served_mean: MeanCi::of(&col(|m| m.clusters_served as f64)).mean,
    }
}

fn cluster_digest(sc: &Scenario) -> String {
    Scenario {
        station_sites: Vec::new(),
        ..sc.clone()
    }
    .digest()
}

fn run_trial(spec: &MonteCarloSpec, trial: usize) -> Result<TrialOutcome, SimError> {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let mut settings = spec.settings.clone();
    if let Some(Sweep::Stations(ks)) = &spec.sweep {
        settings.world.stations = ks.iter().copied().max().unwrap_or(0);
    }
    let base = generate_for(seed, &settings)?;
    let clusters = cluster_digest(&base);

    let points: Vec<(Scenario, Settings)> = match &spec.sweep {
        None => vec![(base.clone(), settings.clone())],
        Some(Sweep::Stations(ks)) => ks
            .iter()
            .map(|&k| (base.with_station_count(k), settings.clone()))
            .collect(),
        Some(Sweep::Window(ws)) => ws
            .iter()
            .map(|&w| {
                let mut s = settings.clone();
                s.sim.time_window = w;
                (base.clone(), s)
            })
            .collect(),
    };

    let mut runs = Vec::with_capacity(points.len() * spec.policies.len());
    for (point, (sc, s)) in points.iter().enumerate() {
        let digest = sc.digest();
        for &policy in &spec.policies {
            let trace = run_episode_with(sc, policy, s)?;
            runs.push(RunOutcome {
                policy,
                point,
                metrics: episode_metrics(&trace, sc),
                served_odometers: served_odometers(&trace),
                scenario_digest: digest.clone(),
                cluster_digest: clusters.clone(),
            });
        }
    }
    Ok(TrialOutcome { trial, seed, runs })
}

/// Runs `n_trials` paired trials and aggregates per policy and sweep point.
///
/// Trial `i` uses seed `base_seed + i`. Results are reduced in trial order,
/// so the output does not depend on the worker count.
pub fn run_monte_carlo(spec: &MonteCarloSpec) -> Result<MonteCarloResult, SimError> {
    let mut settings = spec.settings.clone();
    // Aggregation only needs final states.
    settings.sim.trace_stride = usize::MAX;
    settings.validate()?;
    let spec = MonteCarloSpec {
        settings,
        ..spec.clone()
    };

    let work = || {
        (0..spec.n_trials)
            .into_par_iter()
            .map(|i| run_trial(&spec, i))
            .collect::<Result<Vec<_>, _>>()
    };
    let trials = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(work)?,
        None => work()?,
    };

    let sweep_kind = spec.sweep.as_ref().map_or("none", Sweep::kind).to_string();
    let sweep_points = spec.sweep.as_ref().map(Sweep::points);
    let n_points = sweep_points.as_ref().map_or(1, Vec::len);

    let mut rows = Vec::new();
    let mut movement = Vec::new();
    for point in 0..n_points {
        let sweep_value = sweep_points.as_ref().map(|p| p[point]);
        for &policy in &spec.policies {
            let runs: Vec<&RunOutcome> = trials
                .iter()
                .flat_map(|t| t.runs.iter())
                .filter(|r| r.point == point && r.policy == policy)
                .collect();
            let metrics: Vec<EpisodeMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
            rows.push(aggregate(policy, &sweep_kind, sweep_value, &metrics));
            for p in movement_efficiency(runs.iter().map(|r| r.served_odometers.as_slice())) {
                movement.push(MovementRow {
                    policy,
                    sweep_kind: sweep_kind.clone(),
                    sweep_value,
                    point: p,
                });
            }
        }
    }
    Ok(MonteCarloResult {
        rows,
        movement,
        trials,
    })
}

/// Checks that every run of a trial flew the same cluster layout and that
/// runs at one sweep point shared one scenario.
pub fn pairing_holds(result: &MonteCarloResult) -> bool {
    result.trials.iter().all(|t| {
        let clusters_same = t
            .runs
            .windows(2)
            .all(|w| w[0].cluster_digest == w[1].cluster_digest);
        let per_point_same = t.runs.iter().all(|r| {
            t.runs
                .iter()
                .filter(|o| o.point == r.point)
                .all(|o| o.scenario_digest == r.scenario_digest)
        });
        clusters_same && per_point_same
    })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub const SUMMARY_HEADER: &str =
    "policy,sweep_kind,sweep_value,trials,eff_mean,eff_ci,dist_mean_m,dist_ci_m,bits_mean,bits_ci,served_mean";

/// `summary.csv` contents, LF line endings.
pub fn summary_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.3},{:.3},{:.1},{:.1},{:.4}",
            r.policy,
            r.sweep_kind,
            fmt_value(r.sweep_value),
            r.trials,
            r.efficiency.mean,
            r.efficiency.ci,
            r.distance.mean,
            r.distance.ci,
            r.bits.mean,
            r.bits.ci,
            r.served_mean
        )
        .expect("write to string");
    }
    out
}

pub const MOVEMENT_HEADER: &str = "policy,sweep_kind,sweep_value,served,dist_mean_m,traces";

/// `movement.csv` contents: one row per (policy, sweep point, served count).
pub fn movement_csv(rows: &[MovementRow]) -> String {
    let mut out = String::from(MOVEMENT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.3},{}",
            r.policy,
            r.sweep_kind,
            fmt_value(r.sweep_value),
            r.point.served,
            r.point.mean_distance,
            r.point.traces
        )
        .expect("write to string");
    }
    out
}
