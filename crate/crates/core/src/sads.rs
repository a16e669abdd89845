//! Synthetic air data: sensor-independent AoA estimates, the internal
//! consistency check between them, and the external arbiter that decides
//! which physical measurement (if any) is trustworthy.

use serde::{Deserialize, Serialize};

use crate::dynamics::{atmosphere, AircraftState, AirframeParams, FT_PER_M};
use crate::error::{Result, SimError};
use crate::sensing::{AirDataFrame, Channel, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SadsConfig {
    /// Agreement threshold for AoA, degrees.
    pub epsilon_aoa: f64,
    /// Below this inertial airspeed (m/s) the model-free estimate is absent.
    pub min_airspeed: f64,
}

impl Default for SadsConfig {
    fn default() -> Self {
        Self {
            epsilon_aoa: 3.0 * 0.25 + 1.0,
            min_airspeed: 5.0,
        }
    }
}

impl SadsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_aoa > 0.0 && self.epsilon_aoa.is_finite()) {
            return Err(SimError::config("sads.epsilon_aoa", "must be positive"));
        }
        if !(self.min_airspeed >= 0.0) {
            return Err(SimError::config("sads.min_airspeed", "must be >= 0"));
        }
        Ok(())
    }
}

/// Body-axis velocity from the inertial reference, independent of the vanes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialInputs {
    pub u: f64,
    pub w: f64,
}

impl InertialInputs {
    pub fn from_state(s: &AircraftState) -> Self {
        Self { u: s.u, w: s.w }
    }
}

/// Wind-triangle AoA from inertial velocities (degrees).
pub fn estimate_model_free(inertial: &InertialInputs, cfg: &SadsConfig) -> Option<f64> {
    let speed = inertial.u.hypot(inertial.w);
    if !(speed > cfg.min_airspeed) {
        return None;
    }
    Some(inertial.w.atan2(inertial.u).to_degrees())
}

/// AoA from the lift equation: the load factor fixes the required lift
/// coefficient, which is inverted on the pre-stall branch of the lift curve.
/// Uses the mean of both sides' non-vane channels.
pub fn estimate_model_based(frames: (&AirDataFrame, &AirDataFrame), flaps_up: bool, params: &AirframeParams) -> Option<f64> {
    let (l, r) = frames;
    let n = 0.5 * (l.gforce + r.gforce);
    let mach = 0.5 * (l.mach + r.mach);
    let h = 0.5 * (l.altitude + r.altitude) / FT_PER_M;
    if !(n.is_finite() && mach.is_finite() && h.is_finite()) {
        return None;
    }
    let atm = atmosphere::Atmosphere::at(h);
    let v = mach * atm.speed_of_sound;
    if !(v > 1.0) {
        return None;
    }
    let mut cl = n * params.weight() / (0.5 * atm.density * params.wing_area * v * v);
    if !flaps_up {
        cl -= params.flaps_delta_cl;
    }
    params.lift_curve.invert_below(cl, params.stall_alpha)
}

/// S_SADS for one channel: the model-free value survives when both
/// estimators exist and agree within epsilon.
pub fn internal_consistency(model_free: Option<f64>, model_based: Option<f64>, epsilon: f64) -> Option<f64> {
    match (model_free, model_based) {
        (Some(w), Some(m)) if (w - m).abs() < epsilon => Some(w),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub channel: Channel,
    pub value: f64,
    pub side: Side,
}

/// Physical measurements that survived the external check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectSet {
    pub members: Vec<Measurement>,
}

impl CorrectSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, channel: Channel) -> Option<&Measurement> {
        self.members.iter().find(|m| m.channel == channel)
    }
}

/// Left-preferring selection of a physical measurement that agrees with the
/// synthetic value. Never returns the synthetic value itself.
pub fn arbitrate(channel: Channel, left: Option<f64>, right: Option<f64>, sads: Option<f64>, epsilon: f64) -> Option<Measurement> {
    let s = sads?;
    let near = |v: Option<f64>| v.filter(|v| (v - s).abs() < epsilon);
    if let Some(value) = near(left) {
        Some(Measurement { channel, value, side: Side::Left })
    } else {
        near(right).map(|value| Measurement { channel, value, side: Side::Right })
    }
}

/// Arbiter over every channel that has a synthetic estimate.
pub fn arbiter(left: &AirDataFrame, right: &AirDataFrame, s_sads: &[(Channel, f64)], epsilon: impl Fn(Channel) -> f64) -> CorrectSet {
    let members = s_sads
        .iter()
        .filter_map(|&(c, v)| arbitrate(c, Some(left.get(c)), Some(right.get(c)), Some(v), epsilon(c)))
        .collect();
    CorrectSet { members }
}

/// Full SADS pass for the AoA channel: both estimators, internal check, arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SadsReport {
    pub model_free: Option<f64>,
    pub model_based: Option<f64>,
    pub sads: Option<f64>,
    pub selected: Option<Measurement>,
}

pub fn evaluate(
    left: &AirDataFrame,
    right: &AirDataFrame,
    inertial: &InertialInputs,
    flaps_up: bool,
    params: &AirframeParams,
    cfg: &SadsConfig,
) -> SadsReport {
    let model_free = estimate_model_free(inertial, cfg);
    let model_based = estimate_model_based((left, right), flaps_up, params);
    let sads = internal_consistency(model_free, model_based, cfg.epsilon_aoa);
    let selected = arbitrate(Channel::Aoa, Some(left.aoa), Some(right.aoa), sads, cfg.epsilon_aoa);
    SadsReport {
        model_free,
        model_based,
        sads,
        selected,
    }
}
