//! Longitudinal flight model: point-mass translation in wind axes plus a
//! short-period pitch channel, integrated with fixed-step RK4.
//!
//! Sign conventions: positive elevator is nose-down, positive stabilizer
//! incidence is nose-up, and MCAS trims toward negative incidence.

pub mod airframe;
pub mod atmosphere;
mod trim;

use serde::{Deserialize, Serialize};

pub use airframe::{AeroTable, AirframeParams};
pub use atmosphere::Atmosphere;
pub use trim::{trim_from, TrimCondition};

use crate::error::{Result, SimError};

pub const DEFAULT_DT: f64 = 1.0 / 60.0;
pub const MAX_DT: f64 = 0.1;
pub const FT_PER_M: f64 = 3.280_839_895;
pub const KT_PER_MPS: f64 = 1.943_844_492;

const MIN_SPEED: f64 = 1.0;

/// Full longitudinal truth state. Angles in degrees, SI elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub t: f64,
    pub altitude: f64,
    pub u: f64,
    pub w: f64,
    pub theta: f64,
    pub q: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub airspeed: f64,
    pub hs_trim: f64,
    pub elevator: f64,
    pub thrust: f64,
    pub flaps_up: bool,
    pub heading: f64,
    pub load_factor: f64,
    pub on_ground: bool,
}

impl AircraftState {
    pub fn altitude_ft(&self) -> f64 {
        self.altitude * FT_PER_M
    }

    pub fn vertical_speed(&self) -> f64 {
        self.airspeed * self.gamma.to_radians().sin()
    }

    pub fn vertical_speed_fpm(&self) -> f64 {
        self.vertical_speed() * FT_PER_M * 60.0
    }

    pub fn ias_kts(&self) -> f64 {
        atmosphere::tas_to_ias(self.airspeed, self.altitude) * KT_PER_MPS
    }

    pub fn mach(&self) -> f64 {
        self.airspeed / atmosphere::speed_of_sound(self.altitude)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.altitude,
            self.u,
            self.w,
            self.theta,
            self.q,
            self.alpha,
            self.gamma,
            self.airspeed,
            self.hs_trim,
            self.elevator,
            self.thrust,
            self.heading,
            self.load_factor,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// Stationary on the runway, pointed down it.
    pub fn on_runway(hs_trim: f64) -> Self {
        Self {
            t: 0.0,
            altitude: 0.0,
            u: 0.0,
            w: 0.0,
            theta: 0.0,
            q: 0.0,
            alpha: 0.0,
            gamma: 0.0,
            airspeed: 0.0,
            hs_trim,
            elevator: 0.0,
            thrust: 0.0,
            flaps_up: false,
            heading: 0.0,
            load_factor: 1.0,
            on_ground: true,
        }
    }

    fn with_kinematics(mut self) -> Self {
        self.alpha = self.theta - self.gamma;
        let a = self.alpha.to_radians();
        self.u = self.airspeed * a.cos();
        self.w = self.airspeed * a.sin();
        self
    }
}

/// Pilot/automation inputs held constant over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInputs {
    /// Normalized elevator, positive nose-down.
    pub elevator: f64,
    /// Normalized throttle in [0, 1].
    pub throttle: f64,
    /// Bank angle for the kinematic turn overlay (degrees).
    pub bank: f64,
    pub flaps_up: bool,
}

impl ControlInputs {
    pub fn neutral(throttle: f64, flaps_up: bool) -> Self {
        Self {
            elevator: 0.0,
            throttle,
            bank: 0.0,
            flaps_up,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.elevator) {
            return Err(SimError::InvalidInput(format!("elevator {} outside [-1, 1]", self.elevator)));
        }
        if !(0.0..=1.0).contains(&self.throttle) {
            return Err(SimError::InvalidInput(format!("throttle {} outside [0, 1]", self.throttle)));
        }
        if !(self.bank.abs() < 80.0) {
            return Err(SimError::InvalidInput(format!("bank {} outside (-80, 80)", self.bank)));
        }
        Ok(())
    }
}

/// Integrated subset of the state: [V, gamma(rad), h, theta(deg), q(deg/s), psi(deg)].
type Vector = [f64; 6];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Forces {
    pub lift: f64,
    pub drag: f64,
}

pub(crate) fn aero_forces(params: &AirframeParams, airspeed: f64, altitude: f64, alpha: f64, flaps_up: bool) -> Forces {
    let qbar = 0.5 * atmosphere::density(altitude) * airspeed * airspeed;
    Forces {
        lift: qbar * params.wing_area * params.lift_coefficient(alpha, flaps_up),
        drag: qbar * params.wing_area * params.drag_coefficient(alpha, flaps_up),
    }
}

/// Pitch acceleration (deg/s^2) from the short-period channel.
pub(crate) fn pitch_acceleration(
    params: &AirframeParams,
    airspeed: f64,
    altitude: f64,
    alpha: f64,
    q_deg: f64,
    elevator: f64,
    hs_trim: f64,
) -> f64 {
    let rho = atmosphere::density(altitude);
    let scale = rho * airspeed * airspeed / (params.reference_density * params.reference_airspeed.powi(2));
    let [_, [m_w, m_q]] = params.short_period_a;
    let m_de = params.short_period_b[1];
    let w_ref = params.reference_airspeed * alpha.to_radians().sin();
    let static_part = (m_w * w_ref + m_de * elevator).to_degrees()
        + params.stab_moment_gain * hs_trim
        + params.pitch_moment_bias
        + params.pitch_break.eval(alpha);
    scale * static_part + m_q * (airspeed / params.reference_airspeed) * q_deg
}

fn derivatives(x: &Vector, thrust: f64, controls: &ControlInputs, hs_trim: f64, on_ground: bool, params: &AirframeParams) -> Vector {
    let [v, gamma, h, theta, q, _psi] = *x;
    let v_eff = v.max(MIN_SPEED);
    let alpha = theta - gamma.to_degrees();
    let a = alpha.to_radians();
    let Forces { lift, drag } = aero_forces(params, v, h, alpha, controls.flaps_up);
    let m = params.mass;
    let g = params.gravity;
    let weight = m * g;
    let bank = controls.bank.to_radians();

    let mut q_dot = pitch_acceleration(params, v, h, alpha, q, controls.elevator, hs_trim);

    if on_ground {
        let normal = (weight - lift - thrust * a.sin()).max(0.0);
        let v_dot = (thrust * a.cos() - drag - params.rolling_friction * normal) / m;
        let v_dot = if v <= 0.0 { v_dot.max(0.0) } else { v_dot };
        // nose gear holds theta >= 0
        if theta <= 0.0 && q <= 0.0 && q_dot < 0.0 {
            q_dot = 0.0;
        }
        return [v_dot, 0.0, 0.0, q, q_dot, 0.0];
    }

    let v_dot = (thrust * a.cos() - drag) / m - g * gamma.sin();
    let gamma_dot = ((lift * bank.cos() + thrust * a.sin()) / m - g * gamma.cos()) / v_eff;
    let h_dot = v * gamma.sin();
    let psi_dot = ((lift * bank.sin()) / (m * v_eff)).to_degrees();
    [v_dot, gamma_dot, h_dot, q, q_dot, psi_dot]
}

fn add_scaled(x: &Vector, k: &Vector, s: f64) -> Vector {
    let mut out = *x;
    for i in 0..6 {
        out[i] += s * k[i];
    }
    out
}

/// Advances the airframe one fixed step with classical RK4.
pub fn step(state: &AircraftState, controls: &ControlInputs, params: &AirframeParams, dt: f64) -> Result<AircraftState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(SimError::InvalidInput(format!("dt {dt} outside (0, {MAX_DT}]")));
    }
    if !state.is_finite() {
        return Err(SimError::InvalidInput(format!("non-finite state at t={}", state.t)));
    }
    controls.validate()?;

    let thrust = controls.throttle * params.max_thrust;
    let x0: Vector = [
        state.airspeed,
        state.gamma.to_radians(),
        state.altitude,
        state.theta,
        state.q,
        state.heading,
    ];
    let on_ground = state.on_ground;
    let f = |x: &Vector| derivatives(x, thrust, controls, state.hs_trim, on_ground, params);
    let k1 = f(&x0);
    let k2 = f(&add_scaled(&x0, &k1, dt / 2.0));
    let k3 = f(&add_scaled(&x0, &k2, dt / 2.0));
    let k4 = f(&add_scaled(&x0, &k3, dt));
    let mut x = x0;
    for i in 0..6 {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    let mut next = AircraftState {
        t: state.t + dt,
        airspeed: x[0],
        gamma: x[1].to_degrees(),
        altitude: x[2],
        theta: x[3],
        q: x[4],
        heading: x[5].rem_euclid(360.0),
        elevator: controls.elevator,
        thrust,
        flaps_up: controls.flaps_up,
        on_ground,
        ..*state
    };

    if on_ground {
        next.airspeed = next.airspeed.max(0.0);
        next.gamma = 0.0;
        next.altitude = 0.0;
        if next.theta < 0.0 {
            next.theta = 0.0;
            next.q = next.q.max(0.0);
        }
    }

    let next = next.with_kinematics();
    let forces = aero_forces(params, next.airspeed, next.altitude, next.alpha, next.flaps_up);
    let weight = params.weight();
    let mut next = next;
    if next.on_ground {
        let normal = weight - forces.lift - thrust * next.alpha.to_radians().sin();
        if normal < 0.0 {
            next.on_ground = false;
        }
        next.load_factor = 1.0_f64.max(forces.lift / weight);
    } else {
        next.load_factor = forces.lift / weight;
    }
    Ok(next)
}

/// Moves the stabilizer by `rate * dt`, clamped to the actuator limits.
/// Returns the new state and whether the limit was hit.
pub fn apply_trim_rate(state: &AircraftState, rate: f64, dt: f64, params: &AirframeParams) -> (AircraftState, bool) {
    let raw = state.hs_trim + rate * dt;
    let clamped = raw.clamp(params.hs_min, params.hs_max);
    let hit = rate != 0.0 && clamped != raw;
    (
        AircraftState {
            hs_trim: clamped,
            ..*state
        },
        hit,
    )
}
