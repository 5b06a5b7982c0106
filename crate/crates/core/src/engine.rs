//! Fixed-step mission loop and trace recording.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::energy::{LaserLink, PowerModel, StationCharger};
use crate::error::{ConfigError, InvariantViolation, SimError};
use crate::policy::{
    legal_transition, step, DroneMode, DroneParams, EventKind, MissionState, PolicyKind, StepEnv,
    REACH_EPS,
};
use crate::world::{distance, generate_scenario, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step length, seconds.
    pub dt: f64,
    /// Mission window, seconds.
    pub time_window: f64,
    /// Keep every n-th step record.
    pub trace_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            time_window: 9000.0,
            trace_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ConfigError::invalid("sim.dt", "dt must be positive"));
        }
        if !(self.time_window >= self.dt) || !self.time_window.is_finite() {
            return Err(ConfigError::invalid(
                "sim.window",
                "window must be at least dt",
            ));
        }
        if self.trace_stride == 0 {
            return Err(ConfigError::invalid(
                "sim.trace_stride",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Drone status after one step. Only the first seven fields are written to
/// JSON lines; the rest support in-process checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub alt: f64,
    pub battery_j: f64,
    pub bits: f64,
    pub mode: DroneMode,
    #[serde(skip)]
    pub harvest_w: f64,
    #[serde(skip)]
    pub consumption_w: f64,
    #[serde(skip)]
    pub odometer: f64,
    #[serde(skip)]
    pub moved: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: EventKind,
    /// Odometer reading when the event fired.
    pub odometer: f64,
}

#[derive(Serialize)]
struct EventLine<'a> {
    t: f64,
    event: &'a str,
    id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub policy: PolicyKind,
    pub seed: u64,
    pub n_clusters: usize,
    pub dt: f64,
    pub records: Vec<TraceRecord>,
    pub events: Vec<TraceEvent>,
    /// State after the last step, regardless of stride.
    pub last: TraceRecord,
}

impl Trace {
    pub fn served_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ClusterServed(_)))
            .count()
    }

    pub fn has_event(&self, pred: impl Fn(EventKind) -> bool) -> bool {
        self.events.iter().any(|e| pred(e.kind))
    }

    /// JSON lines: step records first, then events, each in time order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        for e in &self.events {
            let line = EventLine {
                t: e.t,
                event: e.kind.name(),
                id: e.kind.id(),
            };
            out.push_str(&serde_json::to_string(&line).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

fn record(t: f64, s: &MissionState, harvest_w: f64, consumption_w: f64, moved: f64) -> TraceRecord {
    let d = &s.drone;
    TraceRecord {
        t,
        x: d.position.x,
        y: d.position.y,
        alt: d.altitude,
        battery_j: d.battery.energy,
        bits: d.collected,
        mode: d.mode,
        harvest_w,
        consumption_w,
        odometer: d.odometer,
        moved,
    }
}

fn check_step(
    kind: PolicyKind,
    env: &StepEnv,
    t: f64,
    before: &MissionState,
    after: &MissionState,
    moved: f64,
    total_data: f64,
) -> Result<(), InvariantViolation> {
    let fail = |what: String| Err(InvariantViolation { t, what });
    let p = env.params;
    let (a, b) = (&before.drone, &after.drone);
    if !legal_transition(kind, a.mode, b.mode) {
        return fail(format!(
            "{kind}: illegal transition {:?} -> {:?}",
            a.mode, b.mode
        ));
    }
    if moved > p.v_cruise.max(p.v_climb) * env.dt + 1e-9 {
        return fail(format!("moved {moved} m in one step"));
    }
    if !(b.battery.energy >= 0.0 && b.battery.energy <= b.battery.capacity) {
        return fail(format!(
            "battery {} outside [0, {}]",
            b.battery.energy, b.battery.capacity
        ));
    }
    if !(b.altitude >= 0.0 && b.altitude <= p.altitude_op + 1e-9) {
        return fail(format!("altitude {}", b.altitude));
    }
    if b.odometer < a.odometer || b.collected < a.collected {
        return fail("odometer or collected decreased".into());
    }
    if b.collected > total_data * (1.0 + 1e-12) {
        return fail(format!(
            "collected {} exceeds scenario total {total_data}",
            b.collected
        ));
    }
    for (id, (&r0, &r1)) in before.remaining.iter().zip(&after.remaining).enumerate() {
        if r1 == r0 {
            continue;
        }
        let c = &env.scenario.clusters[id];
        let expected = (p.uplink_rate * env.dt).min(r0);
        let gap = distance(b.position, c.position);
        if !b.mode.can_uplink()
            || gap > p.r_cov + REACH_EPS
            || (r0 - r1 - expected).abs() > 1e-6 * expected.max(1.0)
        {
            return fail(format!(
                "cluster {id} lost {} bits in mode {:?} at {gap} m",
                r0 - r1,
                b.mode
            ));
        }
    }
    Ok(())
}

/// Flies one mission under one policy and records the trace.
pub fn run_episode(
    sc: &Scenario,
    kind: PolicyKind,
    params: &DroneParams,
    model: &PowerModel,
    link: &LaserLink,
    charger: &StationCharger,
    cfg: &SimConfig,
) -> Result<Trace, SimError> {
    cfg.validate()?;
    params.validate()?;
    let env = StepEnv::new(kind, sc, params, model, link, charger, cfg.dt);
    let total_data = sc.total_data();
    let mut state = MissionState::initial(sc, params);
    let mut records = vec![record(0.0, &state, 0.0, 0.0, 0.0)];
    let mut events = Vec::new();
    let mut last = records[0].clone();

    let max_steps = (cfg.time_window / cfg.dt + 1e-9).floor() as u64;
    for k in 1..=max_steps {
        let t = k as f64 * cfg.dt;
        let out = step(kind, &state, &env);
        check_step(kind, &env, t, &state, &out.state, out.moved, total_data)?;
        events.extend(out.events.iter().map(|&kind| TraceEvent {
            t,
            kind,
            odometer: out.state.drone.odometer,
        }));
        state = out.state;
        last = record(t, &state, out.harvest, out.consumption, out.moved);
        let finished = state.drone.mode == DroneMode::Done;
        if (k as usize).is_multiple_of(cfg.trace_stride) || finished || k == max_steps {
            records.push(last.clone());
        }
        if finished {
            break;
        }
    }

    Ok(Trace {
        policy: kind,
        seed: sc.seed,
        n_clusters: sc.clusters.len(),
        dt: cfg.dt,
        records,
        events,
        last,
    })
}

pub fn run_episode_with(
    sc: &Scenario,
    kind: PolicyKind,
    settings: &Settings,
) -> Result<Trace, SimError> {
    run_episode(
        sc,
        kind,
        &settings.drone,
        &settings.power,
        &settings.laser,
        &settings.charger,
        &settings.sim,
    )
}

/// One scenario flown by several policies.
#[derive(Debug, Clone)]
pub struct PairedTrial {
    pub scenario: Scenario,
    pub traces: BTreeMap<PolicyKind, Trace>,
}

pub fn generate_for(seed: u64, settings: &Settings) -> Result<Scenario, ConfigError> {
    let w = &settings.world;
    generate_scenario(seed, w.area_side(), w.clusters, w.stations, w.data_range())
}

pub fn run_paired_trial(
    seed: u64,
    policies: &[PolicyKind],
    settings: &Settings,
) -> Result<PairedTrial, SimError> {
    settings.validate()?;
    let scenario = generate_for(seed, settings)?;
    let mut traces = BTreeMap::new();
    for &kind in policies {
        traces.insert(kind, run_episode_with(&scenario, kind, settings)?);
    }
    Ok(PairedTrial { scenario, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Position;

    fn settings() -> Settings {
        Settings::default()
    }

    fn episode(seed: u64, kind: PolicyKind, s: &Settings) -> (Scenario, Trace) {
        let sc = generate_for(seed, s).unwrap();
        let trace = run_episode_with(&sc, kind, s).unwrap();
        (sc, trace)
    }

    #[test]
    fn empty_scenario_completes_on_first_step() {
        let mut s = settings();
        s.world.clusters = 0;
        for kind in PolicyKind::ALL {
            let (_, trace) = episode(9, kind, &s);
            assert_eq!(trace.events.len(), 1);
            assert_eq!(trace.events[0].kind, EventKind::MissionComplete);
            assert_eq!(trace.events[0].t, 1.0);
            assert_eq!(trace.last.mode, DroneMode::Done);
        }
    }

    #[test]
    fn jsonl_is_deterministic() {
        let s = settings();
        for kind in PolicyKind::ALL {
            let a = episode(42, kind, &s).1.to_jsonl();
            let b = episode(42, kind, &s).1.to_jsonl();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn jsonl_line_shapes() {
        let (_, trace) = episode(3, PolicyKind::Charged, &settings());
        let text = trace.to_jsonl();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let first = &lines[0];
        for key in ["t", "x", "y", "alt", "battery_j", "bits", "mode"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(first.as_object().unwrap().len(), 7);
        let served = lines
            .iter()
            .find(|v| v["event"] == "cluster_served")
            .expect("an event line");
        assert!(served["id"].is_u64());
        assert_eq!(lines.len(), trace.records.len() + trace.events.len());
    }

    #[test]
    fn battery_replays_from_recorded_powers() {
        let s = settings();
        for kind in PolicyKind::ALL {
            let (_, trace) = episode(5, kind, &s);
            let cap = s.drone.battery_capacity();
            let mut e = trace.records[0].battery_j;
            for r in &trace.records[1..] {
                e = (e + (r.harvest_w - r.consumption_w) * trace.dt).clamp(0.0, cap);
                assert!(
                    (e - r.battery_j).abs() <= 1e-6 * cap,
                    "{kind} at t={}: {e} vs {}",
                    r.t,
                    r.battery_j
                );
            }
        }
    }

    #[test]
    fn odometer_is_sum_of_steps() {
        let s = settings();
        for kind in PolicyKind::ALL {
            let (_, trace) = episode(6, kind, &s);
            let sum: f64 = trace.records.iter().map(|r| r.moved).sum();
            assert!(
                (sum - trace.last.odometer).abs() <= 1e-6 * sum.max(1.0),
                "{kind}"
            );
            let bound = s.drone.v_cruise.max(s.drone.v_climb) * s.sim.dt + 1e-9;
            assert!(trace.records.iter().all(|r| r.moved <= bound));
        }
    }

    #[test]
    fn stride_keeps_final_record() {
        let mut s = settings();
        s.sim.trace_stride = 1000;
        let (_, trace) = episode(2, PolicyKind::Laser, &s);
        assert_eq!(trace.records.last().unwrap(), &trace.last);
        assert!(trace
            .records
            .iter()
            .skip(1)
            .rev()
            .skip(1)
            .all(|r| (r.t as usize).is_multiple_of(1000)));
    }

    #[test]
    fn no_stations_means_noncharged_trajectory() {
        let mut s = settings();
        s.world.stations = 0;
        let (sc, base) = episode(11, PolicyKind::NonCharged, &s);
        for kind in [PolicyKind::Charged, PolicyKind::Laser] {
            let t = run_episode_with(&sc, kind, &s).unwrap();
            assert_eq!(t.records, base.records, "{kind}");
            assert_eq!(t.events, base.events, "{kind}");
        }
    }

    #[test]
    fn bad_dt_is_rejected() {
        let mut s = settings();
        s.sim.dt = 0.0;
        let sc = generate_for(1, &s).unwrap();
        match run_episode_with(&sc, PolicyKind::Laser, &s) {
            Err(SimError::Config(e)) => assert_eq!(e.key(), "sim.dt"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn paired_trial_shares_scenario() {
        let trial = run_paired_trial(4, &PolicyKind::ALL, &settings()).unwrap();
        assert_eq!(trial.traces.len(), 4);
        assert!(trial
            .traces
            .values()
            .all(|t| t.seed == 4 && t.n_clusters == trial.scenario.clusters.len()));
    }

    #[test]
    fn noncharged_battery_never_rises() {
        let (_, trace) = episode(8, PolicyKind::NonCharged, &settings());
        assert!(trace
            .records
            .windows(2)
            .all(|w| w[1].battery_j <= w[0].battery_j));
    }

    #[test]
    fn custom_start_is_used() {
        let mut s = settings();
        s.drone.start = Some(Position::new(0.0, 0.0));
        let (_, trace) = episode(1, PolicyKind::NonCharged, &s);
        assert_eq!((trace.records[0].x, trace.records[0].y), (0.0, 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            // Every step passes the engine's invariant checks, including
            // transition legality, across random worlds and configurations.
            #[test]
            fn random_worlds_stay_legal(
                seed in any::<u64>(),
                clusters in 0usize..25,
                stations in 0usize..8,
                r_cov in 0.0..400.0f64,
                window in 500.0..6000.0f64,
                tether in 50.0..400.0f64,
            ) {
                let mut s = Settings::default();
                s.world.clusters = clusters;
                s.world.stations = stations;
                s.drone.r_cov = r_cov;
                s.drone.tether_length = tether;
                s.sim.time_window = window;
                for kind in PolicyKind::ALL {
                    let sc = generate_for(seed, &s).unwrap();
                    let t = run_episode_with(&sc, kind, &s);
                    prop_assert!(t.is_ok(), "{kind}: {:?}", t.err());
                    let t = t.unwrap();
                    prop_assert!(t.last.bits <= sc.total_data() * (1.0 + 1e-12));
                    for w in t.records.windows(2) {
                        prop_assert!(legal_transition(kind, w[0].mode, w[1].mode));
                    }
                }
            }
        }
    }
}
