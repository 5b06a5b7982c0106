//! Drone controllers for the four charging strategies.
//!
//! Every policy is a state machine over [`DroneMode`]. A step runs in a fixed
//! order: the policy decides a mode, motion and uplink target from the state
//! at the start of the step; the drone moves; data is uplinked; finally the
//! battery is integrated with the step's harvest and consumption.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::{
    battery_step, laser_breakeven_range, laser_harvest_power, propulsion_power,
    station_charge_power, vertical_power, BatteryState, Breakeven, LaserLink, PowerModel,
    StationCharger,
};
use crate::error::ConfigError;
use crate::world::{distance, slant_distance, Cluster, Position, Scenario};

/// Slack used when deciding that the drone has reached a point or a cluster
/// has entered coverage.
pub const REACH_EPS: f64 = 1e-6;

/// Search cap for the laser break-even range.
pub const MAX_LASER_RANGE: f64 = 50_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    NonCharged,
    Charged,
    Tethered,
    Laser,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::NonCharged,
        PolicyKind::Charged,
        PolicyKind::Tethered,
        PolicyKind::Laser,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::NonCharged => "noncharged",
            PolicyKind::Charged => "charged",
            PolicyKind::Tethered => "tethered",
            PolicyKind::Laser => "laser",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroneMode {
    TravelToCluster,
    Serving,
    TravelToStation,
    Descending,
    ChargingOnPad,
    Ascending,
    Docking,
    TetheredServing,
    Undocking,
    /// Laser drone hovering inside a beam director's charging disc.
    BeamCharging,
    EmergencyLanding,
    Landed,
    Done,
}

impl DroneMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DroneMode::TravelToCluster => "travel_to_cluster",
            DroneMode::Serving => "serving",
            DroneMode::TravelToStation => "travel_to_station",
            DroneMode::Descending => "descending",
            DroneMode::ChargingOnPad => "charging_on_pad",
            DroneMode::Ascending => "ascending",
            DroneMode::Docking => "docking",
            DroneMode::TetheredServing => "tethered_serving",
            DroneMode::Undocking => "undocking",
            DroneMode::BeamCharging => "beam_charging",
            DroneMode::EmergencyLanding => "emergency_landing",
            DroneMode::Landed => "landed",
            DroneMode::Done => "done",
        }
    }

    /// Modes in which the cluster being uplinked may lose data.
    pub fn can_uplink(self) -> bool {
        matches!(
            self,
            DroneMode::Serving | DroneMode::TetheredServing | DroneMode::BeamCharging
        )
    }
}

/// Whether `from -> to` is an edge of the policy's mode graph. Self-loops are
/// always legal.
pub fn legal_transition(kind: PolicyKind, from: DroneMode, to: DroneMode) -> bool {
    use DroneMode::*;
    if from == to {
        return true;
    }
    let airborne = !matches!(from, Landed | Done | ChargingOnPad);
    // Battery depletion in the air always forces a landing.
    if to == EmergencyLanding && airborne && from != Descending {
        return true;
    }
    let common = matches!(
        (from, to),
        (TravelToCluster, Serving)
            | (TravelToCluster, Done)
            | (Serving, TravelToCluster)
            | (Serving, Done)
            | (EmergencyLanding, Landed)
            | (Landed, Done)
    );
    if common {
        return true;
    }
    // Modes that hand control back to the cruise decision.
    let resumes = |m| matches!(m, TravelToCluster | Serving | TravelToStation | Done);
    match kind {
        PolicyKind::NonCharged => false,
        PolicyKind::Charged => match (from, to) {
            (TravelToCluster | Serving, TravelToStation) => true,
            (TravelToStation, Descending) => true,
            (Descending, ChargingOnPad) => true,
            (ChargingOnPad, Ascending) => true,
            (Ascending, m) => resumes(m),
            _ => false,
        },
        PolicyKind::Tethered => match (from, to) {
            (TravelToCluster | Serving, TravelToStation) => true,
            (TravelToStation, Docking) => true,
            (Docking, TetheredServing | Undocking | Done) => true,
            (TetheredServing, Undocking | Done) => true,
            (Undocking, m) => resumes(m),
            _ => false,
        },
        PolicyKind::Laser => match (from, to) {
            (TravelToCluster | Serving, TravelToStation | BeamCharging) => true,
            (TravelToStation, BeamCharging) => true,
            (BeamCharging, m) => resumes(m),
            _ => false,
        },
    }
}

/// Physical and policy constants of the drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneParams {
    pub altitude_op: f64,
    pub v_cruise: f64,
    pub v_climb: f64,
    /// Horizontal uplink coverage radius.
    pub r_cov: f64,
    /// bits/s
    pub uplink_rate: f64,
    pub dock_time: f64,
    pub tether_length: f64,
    pub reserve_frac: f64,
    pub charge_resume_frac: f64,
    pub battery_voltage: f64,
    pub battery_mah: f64,
    /// Tethered drone may serve clusters on battery between docks.
    pub tethered_serve_untethered: bool,
    /// Laser drone hovers to recharge inside this fraction of the
    /// break-even slant range.
    pub laser_hover_frac: f64,
    /// Start point; area center when absent.
    pub start: Option<Position>,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            altitude_op: 100.0,
            v_cruise: 6.2,
            v_climb: 2.0,
            r_cov: 50.0,
            uplink_rate: 2e7,
            dock_time: 120.0,
            tether_length: 150.0,
            reserve_frac: 0.10,
            charge_resume_frac: 0.95,
            battery_voltage: 14.8,
            battery_mah: 6700.0,
            tethered_serve_untethered: true,
            laser_hover_frac: 0.5,
            start: None,
        }
    }
}

impl DroneParams {
    pub fn battery_capacity(&self) -> f64 {
        BatteryState::pack_capacity(self.battery_voltage, self.battery_mah)
    }

    /// Horizontal freedom around a dock while tethered.
    pub fn tether_play(&self) -> f64 {
        (self.tether_length * self.tether_length - self.altitude_op * self.altitude_op)
            .max(0.0)
            .sqrt()
    }

    /// Ground distance from a dock within which a cluster can be served tethered.
    pub fn tether_reach(&self) -> f64 {
        self.r_cov + self.tether_play()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [
            ("drone.v_cruise", self.v_cruise),
            ("drone.v_climb", self.v_climb),
            ("drone.uplink_rate", self.uplink_rate),
            ("drone.battery_voltage", self.battery_voltage),
            ("drone.battery_mah", self.battery_mah),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::invalid(key, "must be positive"));
            }
        }
        for (key, v) in [
            ("drone.altitude_op", self.altitude_op),
            ("drone.r_cov", self.r_cov),
            ("drone.dock_time", self.dock_time),
            ("drone.tether_length", self.tether_length),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::invalid(key, "must be non-negative"));
            }
        }
        if !(self.reserve_frac > 0.0 && self.reserve_frac < self.charge_resume_frac) {
            return Err(ConfigError::invalid(
                "drone.reserve_frac",
                "need 0 < reserve_frac < charge_resume_frac",
            ));
        }
        if !(self.charge_resume_frac <= 1.0) {
            return Err(ConfigError::invalid(
                "drone.charge_resume_frac",
                "must be at most 1",
            ));
        }
        if !(self.laser_hover_frac > 0.0 && self.laser_hover_frac <= 1.0) {
            return Err(ConfigError::invalid(
                "drone.laser_hover_frac",
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Target {
    Cluster(usize),
    Station(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub position: Position,
    pub altitude: f64,
    pub battery: BatteryState,
    pub mode: DroneMode,
    pub target: Option<Target>,
    /// bits
    pub collected: f64,
    /// 3-D path length flown, meters.
    pub odometer: f64,
    /// Seconds left in a timed procedure (docking, undocking).
    pub mode_timer: f64,
}

/// Drone state plus the data still held by each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionState {
    pub drone: DroneState,
    pub remaining: Vec<f64>,
}

impl MissionState {
    pub fn initial(sc: &Scenario, params: &DroneParams) -> Self {
        Self {
            drone: DroneState {
                position: params.start.unwrap_or_else(|| sc.center()),
                altitude: params.altitude_op,
                battery: BatteryState::full(params.battery_capacity()),
                mode: DroneMode::TravelToCluster,
                target: None,
                collected: 0.0,
                odometer: 0.0,
                mode_timer: 0.0,
            },
            remaining: sc.clusters.iter().map(|c| c.data_total).collect(),
        }
    }

    pub fn all_served(&self) -> bool {
        self.remaining.iter().all(|&r| r <= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ClusterServed(usize),
    ChargeStart(usize),
    ChargeStop(usize),
    Dock(usize),
    Undock(usize),
    EmergencyLanding,
    HardLanding,
    MissionComplete,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::ClusterServed(_) => "cluster_served",
            EventKind::ChargeStart(_) => "charge_start",
            EventKind::ChargeStop(_) => "charge_stop",
            EventKind::Dock(_) => "dock",
            EventKind::Undock(_) => "undock",
            EventKind::EmergencyLanding => "emergency_landing",
            EventKind::HardLanding => "hard_landing",
            EventKind::MissionComplete => "mission_complete",
        }
    }

    pub fn id(self) -> Option<usize> {
        match self {
            EventKind::ClusterServed(id)
            | EventKind::ChargeStart(id)
            | EventKind::ChargeStop(id)
            | EventKind::Dock(id)
            | EventKind::Undock(id) => Some(id),
            _ => None,
        }
    }
}

/// Everything a policy step reads besides the mission state.
#[derive(Debug, Clone)]
pub struct StepEnv<'a> {
    pub scenario: &'a Scenario,
    pub params: &'a DroneParams,
    pub model: &'a PowerModel,
    pub link: &'a LaserLink,
    pub charger: &'a StationCharger,
    pub dt: f64,
    /// Clusters the drone may target; all of them unless the tethered drone
    /// is barred from serving away from a dock.
    eligible: Vec<bool>,
    /// Horizontal radius of the laser hover disc; `None` when beaming can
    /// never sustain hover.
    laser_hover_radius: Option<f64>,
}

impl<'a> StepEnv<'a> {
    pub fn new(
        kind: PolicyKind,
        scenario: &'a Scenario,
        params: &'a DroneParams,
        model: &'a PowerModel,
        link: &'a LaserLink,
        charger: &'a StationCharger,
        dt: f64,
    ) -> Self {
        let eligible = scenario
            .clusters
            .iter()
            .map(|c| {
                kind != PolicyKind::Tethered
                    || params.tethered_serve_untethered
                    || scenario
                        .station_sites
                        .iter()
                        .any(|&s| distance(s, c.position) <= params.tether_reach() + REACH_EPS)
            })
            .collect();
        let laser_hover_radius = match laser_breakeven_range(link, model, MAX_LASER_RANGE) {
            Breakeven::NeverChargeable => None,
            b => {
                let slant = params.laser_hover_frac * b.radius();
                Some(
                    (slant * slant - params.altitude_op * params.altitude_op)
                        .max(0.0)
                        .sqrt(),
                )
            }
        };
        Self {
            scenario,
            params,
            model,
            link,
            charger,
            dt,
            eligible,
            laser_hover_radius,
        }
    }

    pub fn cruise_power(&self) -> f64 {
        propulsion_power(self.model, self.params.v_cruise)
    }
}

/// Result of one policy step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: MissionState,
    pub events: Vec<EventKind>,
    /// Power into the battery during the step, W.
    pub harvest: f64,
    /// Power drawn from the battery during the step, W.
    pub consumption: f64,
    /// 3-D distance flown during the step, m.
    pub moved: f64,
}

fn nearest_index<I>(from: Position, candidates: I) -> Option<usize>
where
    I: IntoIterator<Item = (usize, Position)>,
{
    let mut best: Option<(usize, f64)> = None;
    for (id, p) in candidates {
        let d = distance(from, p);
        // Strict comparison keeps the lowest id on ties.
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((id, d));
        }
    }
    best.map(|(id, _)| id)
}

/// The unserved cluster closest to the drone on the ground, lowest id on ties.
pub fn nearest_unserved_cluster<'s>(state: &MissionState, sc: &'s Scenario) -> Option<&'s Cluster> {
    nearest_unserved_where(state, sc, |_| true)
}

fn nearest_unserved_where<'s>(
    state: &MissionState,
    sc: &'s Scenario,
    keep: impl Fn(&Cluster) -> bool,
) -> Option<&'s Cluster> {
    nearest_index(
        state.drone.position,
        sc.clusters
            .iter()
            .filter(|c| state.remaining[c.id] > 0.0 && keep(c))
            .map(|c| (c.id, c.position)),
    )
    .map(|id| &sc.clusters[id])
}

/// Energy needed to fly to `dest` at cruise speed, descend from the current
/// altitude, and still hold the reserve.
pub fn required_return_energy(
    s: &DroneState,
    dest: Position,
    model: &PowerModel,
    p: &DroneParams,
) -> f64 {
    let travel = propulsion_power(model, p.v_cruise) * distance(s.position, dest) / p.v_cruise;
    let descent = vertical_power(model, -p.v_climb) * s.altitude / p.v_climb;
    travel + descent + p.reserve_frac * s.battery.capacity
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Motion {
    Hold,
    Fly(Position),
    /// Vertical move toward this altitude.
    Vertical(f64),
    /// Dock or undock altitude excursion driven by the mode timer.
    Excursion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Supply {
    Battery,
    /// Tether carries the load and recharges the battery.
    Tether,
    /// On the ground; pads recharge.
    Ground,
}

#[derive(Debug, Clone)]
struct Plan {
    mode: DroneMode,
    target: Option<Target>,
    motion: Motion,
    uplink: Option<usize>,
    supply: Supply,
    timer: f64,
    events: Vec<EventKind>,
}

impl Plan {
    fn new(mode: DroneMode, target: Option<Target>, motion: Motion) -> Self {
        Self {
            mode,
            target,
            motion,
            uplink: None,
            supply: Supply::Battery,
            timer: 0.0,
            events: Vec::new(),
        }
    }

    fn with_event(mut self, e: EventKind) -> Self {
        self.events.insert(0, e);
        self
    }
}

fn done_plan(state: &MissionState) -> Plan {
    let mut plan = Plan::new(DroneMode::Done, None, Motion::Hold);
    if state.drone.altitude <= 0.0 {
        plan.supply = Supply::Ground;
    }
    if state.all_served() {
        plan.events.push(EventKind::MissionComplete);
    }
    plan
}

fn emergency_plan() -> Plan {
    Plan::new(DroneMode::EmergencyLanding, None, Motion::Vertical(0.0))
        .with_event(EventKind::EmergencyLanding)
}

/// Greedy service of the nearest eligible cluster, with the in-place
/// emergency landing rule. Shared by every policy.
fn serve_or_land(state: &MissionState, env: &StepEnv) -> Plan {
    let sc = env.scenario;
    let p = env.params;
    let Some(c) = nearest_unserved_where(state, sc, |c| env.eligible[c.id]) else {
        return done_plan(state);
    };
    let d = &state.drone;
    if d.battery.energy <= required_return_energy(d, d.position, env.model, p) {
        return emergency_plan();
    }
    let gap = distance(d.position, c.position);
    if gap <= p.r_cov + REACH_EPS {
        let mut plan = Plan::new(
            DroneMode::Serving,
            Some(Target::Cluster(c.id)),
            Motion::Hold,
        );
        plan.uplink = Some(c.id);
        plan
    } else {
        // Stop on the coverage boundary instead of overflying the center.
        let goal = d.position.step_toward(c.position, gap - p.r_cov).0;
        Plan::new(
            DroneMode::TravelToCluster,
            Some(Target::Cluster(c.id)),
            Motion::Fly(goal),
        )
    }
}

fn all_eligible_served(state: &MissionState, env: &StepEnv) -> bool {
    state
        .remaining
        .iter()
        .zip(&env.eligible)
        .all(|(&r, &e)| r <= 0.0 || !e)
}

fn station_pos(env: &StepEnv, id: usize) -> Position {
    env.scenario.station_sites[id]
}

fn nearest_station(env: &StepEnv, from: Position) -> Option<usize> {
    nearest_index(from, env.scenario.station_sites.iter().copied().enumerate())
}

/// Divert to `dest` for station `id` when the battery can just make it;
/// `None` when the battery is still above the return threshold.
fn low_battery_divert(
    state: &MissionState,
    env: &StepEnv,
    dest: Position,
) -> Option<Result<(), Plan>> {
    let d = &state.drone;
    let need = required_return_energy(d, dest, env.model, env.params);
    if d.battery.energy > need {
        return None;
    }
    if d.battery.energy < need - env.params.reserve_frac * d.battery.capacity {
        // Cannot reach the station even by spending the reserve.
        return Some(Err(emergency_plan()));
    }
    Some(Ok(()))
}

fn cruise_decision(kind: PolicyKind, state: &MissionState, env: &StepEnv) -> Plan {
    if all_eligible_served(state, env) {
        return done_plan(state);
    }
    let pos = state.drone.position;
    let Some(nearest) = nearest_station(env, pos) else {
        return serve_or_land(state, env);
    };
    match kind {
        PolicyKind::NonCharged => serve_or_land(state, env),
        PolicyKind::Charged => {
            let pad = station_pos(env, nearest);
            match low_battery_divert(state, env, pad) {
                None => serve_or_land(state, env),
                Some(Err(plan)) => plan,
                Some(Ok(())) => Plan::new(
                    DroneMode::TravelToStation,
                    Some(Target::Station(nearest)),
                    Motion::Fly(pad),
                ),
            }
        }
        PolicyKind::Tethered => {
            let dock = station_pos(env, nearest);
            match low_battery_divert(state, env, dock) {
                Some(Err(plan)) => return plan,
                Some(Ok(())) => {
                    return Plan::new(
                        DroneMode::TravelToStation,
                        Some(Target::Station(nearest)),
                        Motion::Fly(dock),
                    )
                }
                None => {}
            }
            let Some(c) = nearest_unserved_where(state, env.scenario, |c| env.eligible[c.id])
            else {
                return done_plan(state);
            };
            let serving_dock = nearest_station(env, c.position).expect("stations exist");
            let dock = station_pos(env, serving_dock);
            if distance(dock, c.position) <= env.params.tether_reach() + REACH_EPS {
                Plan::new(
                    DroneMode::TravelToStation,
                    Some(Target::Station(serving_dock)),
                    Motion::Fly(dock),
                )
            } else {
                serve_or_land(state, env)
            }
        }
        PolicyKind::Laser => {
            let Some(radius) = env.laser_hover_radius else {
                return serve_or_land(state, env);
            };
            let lbd = station_pos(env, nearest);
            let gap = (distance(pos, lbd) - radius).max(0.0);
            let entry = pos.step_toward(lbd, gap).0;
            match low_battery_divert(state, env, entry) {
                None => serve_or_land(state, env),
                Some(Err(plan)) => plan,
                Some(Ok(())) if gap <= REACH_EPS => beam_charging_plan(state, env, nearest)
                    .with_event(EventKind::ChargeStart(nearest)),
                Some(Ok(())) => Plan::new(
                    DroneMode::TravelToStation,
                    Some(Target::Station(nearest)),
                    Motion::Fly(entry),
                ),
            }
        }
    }
}

fn beam_charging_plan(state: &MissionState, env: &StepEnv, lbd: usize) -> Plan {
    let mut plan = Plan::new(
        DroneMode::BeamCharging,
        Some(Target::Station(lbd)),
        Motion::Hold,
    );
    if let Some(c) = nearest_unserved_cluster(state, env.scenario) {
        if distance(state.drone.position, c.position) <= env.params.r_cov + REACH_EPS {
            plan.uplink = Some(c.id);
        }
    }
    plan
}

fn resume_target(state: &MissionState, env: &StepEnv) -> f64 {
    env.params.charge_resume_frac * state.drone.battery.capacity
}

fn station_id(state: &MissionState) -> usize {
    match state.drone.target {
        Some(Target::Station(id)) => id,
        other => panic!("station mode without station target: {other:?}"),
    }
}

fn tethered_serving_plan(state: &MissionState, env: &StepEnv, dock_id: usize) -> Plan {
    let p = env.params;
    let dock = station_pos(env, dock_id);
    let pos = state.drone.position;
    let target = Some(Target::Station(dock_id));
    let servable = nearest_unserved_where(state, env.scenario, |c| {
        env.eligible[c.id] && distance(dock, c.position) <= p.tether_reach() + REACH_EPS
    });
    if let Some(c) = servable {
        let mut plan = Plan::new(DroneMode::TetheredServing, target, Motion::Hold);
        plan.supply = Supply::Tether;
        if distance(pos, c.position) <= p.r_cov + REACH_EPS {
            plan.uplink = Some(c.id);
        } else {
            let span = distance(dock, c.position);
            let along = (span - p.r_cov).clamp(0.0, p.tether_play());
            plan.motion = Motion::Fly(dock.step_toward(c.position, along).0);
        }
        return plan;
    }
    if state.all_served() {
        return done_plan(state);
    }
    let at_dock = distance(pos, dock) <= REACH_EPS;
    if at_dock && state.drone.battery.energy >= resume_target(state, env) {
        let mut plan = Plan::new(DroneMode::Undocking, target, Motion::Excursion);
        plan.timer = p.dock_time;
        return plan.with_event(EventKind::Undock(dock_id));
    }
    let mut plan = Plan::new(
        DroneMode::TetheredServing,
        target,
        if at_dock {
            Motion::Hold
        } else {
            Motion::Fly(dock)
        },
    );
    plan.supply = Supply::Tether;
    plan
}

fn decide(kind: PolicyKind, state: &MissionState, env: &StepEnv) -> Plan {
    use DroneMode::*;
    let d = &state.drone;
    let p = env.params;
    match d.mode {
        TravelToCluster | Serving => cruise_decision(kind, state, env),
        TravelToStation => {
            let id = station_id(state);
            let site = station_pos(env, id);
            let (arrived, goal) = match kind {
                PolicyKind::Laser => {
                    let radius = env.laser_hover_radius.unwrap_or(0.0);
                    let gap = (distance(d.position, site) - radius).max(0.0);
                    (gap <= REACH_EPS, d.position.step_toward(site, gap).0)
                }
                _ => (distance(d.position, site) <= REACH_EPS, site),
            };
            if !arrived {
                return Plan::new(TravelToStation, d.target, Motion::Fly(goal));
            }
            match kind {
                PolicyKind::Charged => Plan::new(Descending, d.target, Motion::Vertical(0.0)),
                PolicyKind::Tethered => {
                    let mut plan = Plan::new(Docking, d.target, Motion::Excursion);
                    plan.timer = p.dock_time;
                    plan.with_event(EventKind::Dock(id))
                }
                PolicyKind::Laser => {
                    beam_charging_plan(state, env, id).with_event(EventKind::ChargeStart(id))
                }
                PolicyKind::NonCharged => unreachable!("noncharged drone never targets a station"),
            }
        }
        Descending => {
            if d.altitude > 0.0 {
                Plan::new(Descending, d.target, Motion::Vertical(0.0))
            } else {
                let mut plan = Plan::new(ChargingOnPad, d.target, Motion::Hold);
                plan.supply = Supply::Ground;
                plan.with_event(EventKind::ChargeStart(station_id(state)))
            }
        }
        ChargingOnPad => {
            if d.battery.energy >= resume_target(state, env) {
                Plan::new(Ascending, d.target, Motion::Vertical(p.altitude_op))
                    .with_event(EventKind::ChargeStop(station_id(state)))
            } else {
                let mut plan = Plan::new(ChargingOnPad, d.target, Motion::Hold);
                plan.supply = Supply::Ground;
                plan
            }
        }
        Ascending => {
            if d.altitude < p.altitude_op {
                Plan::new(Ascending, d.target, Motion::Vertical(p.altitude_op))
            } else {
                cruise_decision(kind, state, env)
            }
        }
        Docking => {
            if d.mode_timer > 1e-9 {
                let mut plan = Plan::new(Docking, d.target, Motion::Excursion);
                plan.timer = d.mode_timer;
                plan
            } else {
                tethered_serving_plan(state, env, station_id(state))
            }
        }
        TetheredServing => tethered_serving_plan(state, env, station_id(state)),
        Undocking => {
            if d.mode_timer > 1e-9 {
                let mut plan = Plan::new(Undocking, d.target, Motion::Excursion);
                plan.timer = d.mode_timer;
                plan
            } else {
                cruise_decision(kind, state, env)
            }
        }
        BeamCharging => {
            let id = station_id(state);
            if state.all_served() {
                done_plan(state).with_event(EventKind::ChargeStop(id))
            } else if d.battery.energy >= resume_target(state, env) {
                cruise_decision(kind, state, env).with_event(EventKind::ChargeStop(id))
            } else {
                beam_charging_plan(state, env, id)
            }
        }
        EmergencyLanding => {
            if d.altitude > 0.0 {
                Plan::new(EmergencyLanding, None, Motion::Vertical(0.0))
            } else {
                let mut plan = Plan::new(Landed, None, Motion::Hold);
                plan.supply = Supply::Ground;
                plan
            }
        }
        Landed => {
            let mut plan = Plan::new(Done, None, Motion::Hold);
            plan.supply = Supply::Ground;
            plan
        }
        Done => panic!("step called on a finished mission"),
    }
}

/// Altitude during a dock/undock excursion `elapsed` seconds in: descend at
/// climb speed, wait at the station, climb back so the procedure ends at
/// operational altitude.
fn excursion_altitude(p: &DroneParams, elapsed: f64) -> f64 {
    let e = elapsed.clamp(0.0, p.dock_time);
    (p.altitude_op - p.v_climb * e)
        .max(p.altitude_op - p.v_climb * (p.dock_time - e))
        .clamp(0.0, p.altitude_op)
}

fn execute(kind: PolicyKind, state: &MissionState, env: &StepEnv, plan: Plan) -> StepOutcome {
    let p = env.params;
    let dt = env.dt;
    let mut next = state.clone();
    let mut events = plan.events;
    let d = &mut next.drone;

    // Motion.
    let (horizontal, vertical) = match plan.motion {
        Motion::Hold => (0.0, 0.0),
        Motion::Fly(goal) => {
            let (pos, moved) = d.position.step_toward(goal, p.v_cruise * dt);
            d.position = pos;
            (moved, 0.0)
        }
        Motion::Vertical(goal) => {
            let dz = (goal - d.altitude).clamp(-p.v_climb * dt, p.v_climb * dt);
            d.altitude = if (goal - d.altitude).abs() <= p.v_climb * dt {
                goal
            } else {
                d.altitude + dz
            };
            (0.0, dz)
        }
        Motion::Excursion => {
            let elapsed = p.dock_time - plan.timer;
            let before = excursion_altitude(p, elapsed);
            let after = excursion_altitude(p, elapsed + dt);
            d.altitude = after;
            (0.0, after - before)
        }
    };
    let moved = horizontal.hypot(vertical);
    d.odometer += moved;
    d.mode = plan.mode;
    d.target = plan.target;
    d.mode_timer = if plan.motion == Motion::Excursion {
        (plan.timer - dt).max(0.0)
    } else {
        0.0
    };

    // Uplink.
    if let Some(id) = plan.uplink {
        let left = next.remaining[id];
        let chunk = (p.uplink_rate * dt).min(left);
        next.remaining[id] = if chunk >= left { 0.0 } else { left - chunk };
        next.drone.collected += chunk;
        if next.remaining[id] == 0.0 {
            events.push(EventKind::ClusterServed(id));
        }
    }
    let d = &mut next.drone;

    // Energy.
    let (mut harvest, consumption) = match plan.supply {
        Supply::Ground => {
            let h = if plan.mode == DroneMode::ChargingOnPad {
                station_charge_power(env.charger)
            } else {
                0.0
            };
            (h, 0.0)
        }
        Supply::Tether => (station_charge_power(env.charger), 0.0),
        Supply::Battery => {
            let draw = match plan.motion {
                Motion::Fly(_) => propulsion_power(env.model, horizontal / dt),
                Motion::Vertical(_) => vertical_power(env.model, vertical / dt),
                Motion::Hold | Motion::Excursion => env.model.hover_power(),
            };
            (0.0, draw)
        }
    };
    if kind == PolicyKind::Laser && plan.supply == Supply::Battery {
        harvest = env
            .scenario
            .station_sites
            .iter()
            .map(|&s| laser_harvest_power(env.link, slant_distance(s, d.position, d.altitude)))
            .fold(0.0, f64::max);
    }
    let had_energy = d.battery.energy > 0.0;
    let (battery, depleted) = battery_step(d.battery, harvest, consumption, dt);
    d.battery = battery;
    if depleted {
        if had_energy {
            events.push(EventKind::HardLanding);
        }
        if d.altitude > 0.0
            && !matches!(d.mode, DroneMode::EmergencyLanding | DroneMode::Descending)
        {
            d.mode = DroneMode::EmergencyLanding;
            d.target = None;
            d.mode_timer = 0.0;
            events.push(EventKind::EmergencyLanding);
        }
    }
    StepOutcome {
        state: next,
        events,
        harvest,
        consumption,
        moved,
    }
}

/// Advances the mission by one step under `kind`.
pub fn step(kind: PolicyKind, state: &MissionState, env: &StepEnv) -> StepOutcome {
    let plan = decide(kind, state, env);
    execute(kind, state, env, plan)
}

pub fn step_noncharged(state: &MissionState, env: &StepEnv) -> StepOutcome {
    step(PolicyKind::NonCharged, state, env)
}

pub fn step_charged(state: &MissionState, env: &StepEnv) -> StepOutcome {
    step(PolicyKind::Charged, state, env)
}

pub fn step_tethered(state: &MissionState, env: &StepEnv) -> StepOutcome {
    step(PolicyKind::Tethered, state, env)
}

pub fn step_laser(state: &MissionState, env: &StepEnv) -> StepOutcome {
    step(PolicyKind::Laser, state, env)
}
