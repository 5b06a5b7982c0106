//! Power and energy physics for a rotary-wing drone.
//!
//! All powers are watts, energies joules, speeds m/s, distances meters.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Battery charge, joules. `0 <= energy <= capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub energy: f64,
    pub capacity: f64,
}

impl BatteryState {
    pub fn full(capacity: f64) -> Self {
        Self {
            energy: capacity,
            capacity,
        }
    }

    /// Capacity of a pack from its nominal voltage and charge rating.
    pub fn pack_capacity(nominal_voltage: f64, charge_mah: f64) -> f64 {
        nominal_voltage * charge_mah / 1000.0 * 3600.0
    }

    pub fn fraction(&self) -> f64 {
        self.energy / self.capacity
    }
}

/// Integrates one step of net power into the battery.
///
/// The returned flag is set when the unclamped result went below zero.
pub fn battery_step(
    b: BatteryState,
    harvest: f64,
    consumption: f64,
    dt: f64,
) -> (BatteryState, bool) {
    debug_assert!(dt > 0.0 && harvest >= 0.0 && consumption >= 0.0);
    let raw = b.energy + (harvest - consumption) * dt;
    let depleted = raw < 0.0;
    let energy = raw.clamp(0.0, b.capacity);
    (BatteryState { energy, ..b }, depleted)
}

/// Rotary-wing propulsion model: blade profile, induced and parasite power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Blade profile power at hover.
    pub p_blade: f64,
    /// Induced power at hover.
    pub p_induced: f64,
    pub tip_speed: f64,
    /// Mean rotor induced velocity at hover.
    pub v_induced_hover: f64,
    /// Lumped parasite drag coefficient, W·s³/m³.
    pub drag_coeff: f64,
    /// Airframe plus battery, kg.
    pub mass_total: f64,
    pub gravity: f64,
}

/// Drag coefficient that places the minimum-power speed at 6.2 m/s for the
/// default airframe. Reproduced by [`calibrate_drag_coeff`].
pub const DEFAULT_DRAG_COEFF: f64 = 0.07553;

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_blade: 90.0,
            p_induced: 120.0,
            tip_speed: 120.0,
            v_induced_hover: 4.03,
            drag_coeff: DEFAULT_DRAG_COEFF,
            mass_total: 2.0,
            gravity: 9.81,
        }
    }
}

impl PowerModel {
    pub fn hover_power(&self) -> f64 {
        self.p_blade + self.p_induced
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("power.p_blade", self.p_blade),
            ("power.p_induced", self.p_induced),
            ("power.tip_speed", self.tip_speed),
            ("power.v_induced_hover", self.v_induced_hover),
            ("power.drag_coeff", self.drag_coeff),
            ("power.mass_total", self.mass_total),
            ("power.gravity", self.gravity),
        ];
        for (key, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::invalid(key, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Level-flight propulsion power at horizontal speed `v`.
pub fn propulsion_power(model: &PowerModel, v: f64) -> f64 {
    debug_assert!(v >= 0.0);
    let v2 = v * v;
    let v0_2 = model.v_induced_hover * model.v_induced_hover;
    let blade = model.p_blade * (1.0 + 3.0 * v2 / (model.tip_speed * model.tip_speed));
    let induced_ratio = ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2)).sqrt();
    blade + model.p_induced * induced_ratio + model.drag_coeff * v2 * v
}

/// Power while climbing (`climb_rate > 0`) or descending (`< 0`) in place.
///
/// Descent never draws less than half of hover power.
pub fn vertical_power(model: &PowerModel, climb_rate: f64) -> f64 {
    let hover = model.hover_power();
    let weight = model.mass_total * model.gravity;
    if climb_rate > 0.0 {
        hover + weight * climb_rate
    } else if climb_rate < 0.0 {
        (hover - weight * climb_rate.abs()).max(0.5 * hover)
    } else {
        hover
    }
}

/// Speed in `[0, v_max]` minimizing propulsion power, by golden-section search.
pub fn min_power_speed(model: &PowerModel, v_max: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, v_max);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (propulsion_power(model, c), propulsion_power(model, d));
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = propulsion_power(model, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = propulsion_power(model, d);
        }
    }
    0.5 * (a + b)
}

/// Drag coefficient whose minimum-power speed equals `target_speed`.
///
/// The optimum speed falls monotonically as drag grows, so this bisects on
/// the coefficient. Returns `None` when the target is not bracketed by
/// `[1e-6, 10]` W·s³/m³.
pub fn calibrate_drag_coeff(model: &PowerModel, target_speed: f64) -> Option<f64> {
    let v_max = 4.0 * target_speed.max(1.0);
    let speed_for = |c: f64| {
        min_power_speed(
            &PowerModel {
                drag_coeff: c,
                ..*model
            },
            v_max,
        )
    };
    let (mut lo, mut hi) = (1e-6, 10.0);
    if speed_for(lo) < target_speed || speed_for(hi) > target_speed {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if speed_for(mid) > target_speed {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Ground laser beam director to airborne photovoltaic receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserLink {
    pub source_power: f64,
    /// End-to-end electrical efficiency, electro-optical times photovoltaic.
    pub conversion_eff: f64,
    /// Beam radius at the exit aperture.
    pub beam_radius_0: f64,
    /// Half-angle divergence, radians.
    pub divergence: f64,
    pub receiver_radius: f64,
    /// Atmospheric extinction coefficient, 1/m.
    pub extinction: f64,
}

impl Default for LaserLink {
    fn default() -> Self {
        Self {
            source_power: 2000.0,
            conversion_eff: 0.22,
            beam_radius_0: 0.01,
            divergence: 5e-5,
            receiver_radius: 0.1,
            extinction: 1e-4,
        }
    }
}

impl LaserLink {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.conversion_eff > 0.0 && self.conversion_eff <= 1.0) {
            return Err(ConfigError::invalid(
                "laser.conversion_eff",
                "must lie in (0, 1]",
            ));
        }
        for (key, v) in [
            ("laser.source_power", self.source_power),
            ("laser.beam_radius_0", self.beam_radius_0),
            ("laser.divergence", self.divergence),
            ("laser.receiver_radius", self.receiver_radius),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::invalid(key, "must be positive"));
            }
        }
        if !(self.extinction >= 0.0) || !self.extinction.is_finite() {
            return Err(ConfigError::invalid(
                "laser.extinction",
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

/// DC power delivered at the receiver at slant range `slant`.
pub fn laser_harvest_power(link: &LaserLink, slant: f64) -> f64 {
    debug_assert!(slant >= 0.0);
    let beam_radius = link.beam_radius_0 + link.divergence * slant;
    // Ratio of areas; the common pi cancels.
    let capture =
        (link.receiver_radius * link.receiver_radius / (beam_radius * beam_radius)).min(1.0);
    link.conversion_eff * link.source_power * capture * (-link.extinction * slant).exp()
}

/// Slant range at which laser harvest equals hover power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "range_m")]
pub enum Breakeven {
    /// Harvest drops to hover power at this slant range.
    Range(f64),
    /// Even at zero range the beam cannot sustain hover.
    NeverChargeable,
    /// Harvest stays above hover out to the search cap, reported here.
    NeverDischarging(f64),
}

impl Breakeven {
    /// Radius of the charging disc, zero when charging is impossible.
    pub fn radius(&self) -> f64 {
        match *self {
            Breakeven::Range(d) | Breakeven::NeverDischarging(d) => d,
            Breakeven::NeverChargeable => 0.0,
        }
    }
}

pub fn laser_breakeven_range(link: &LaserLink, model: &PowerModel, max_range: f64) -> Breakeven {
    let hover = model.hover_power();
    let surplus = |d: f64| laser_harvest_power(link, d) - hover;
    if surplus(0.0) <= 0.0 {
        return Breakeven::NeverChargeable;
    }
    if surplus(max_range) >= 0.0 {
        return Breakeven::NeverDischarging(max_range);
    }
    let (mut lo, mut hi) = (0.0, max_range);
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if surplus(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Breakeven::Range(0.5 * (lo + hi))
}

/// Constant-power charger used by landing pads and tether docks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationCharger {
    pub power: f64,
}

impl Default for StationCharger {
    fn default() -> Self {
        Self { power: 300.0 }
    }
}

pub fn station_charge_power(charger: &StationCharger) -> f64 {
    charger.power
}
