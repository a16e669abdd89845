use serde::{Deserialize, Serialize};

use super::{aero_forces, pitch_acceleration, AircraftState, AirframeParams};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimCondition {
    /// Geometric altitude (m).
    pub altitude: f64,
    /// True airspeed (m/s).
    pub airspeed: f64,
    /// Flight-path angle (deg).
    pub climb_angle: f64,
    pub flaps_up: bool,
}

const MAX_ITER: usize = 60;
const TOL: f64 = 1e-12;

/// Normalized force residuals `[axial, normal]` in units of weight.
fn residual(alpha: f64, thrust_ratio: f64, c: &TrimCondition, p: &AirframeParams) -> [f64; 2] {
    let w = p.weight();
    let t = thrust_ratio * w;
    let f = aero_forces(p, c.airspeed, c.altitude, alpha, c.flaps_up);
    let a = alpha.to_radians();
    let g = c.climb_angle.to_radians();
    [
        (t * a.cos() - f.drag - w * g.sin()) / w,
        (f.lift + t * a.sin() - w * g.cos()) / w,
    ]
}

/// Solves for the steady state at the requested condition with damped Newton
/// iteration on (alpha, thrust); stabilizer incidence then balances pitch.
pub fn trim_from(c: &TrimCondition, p: &AirframeParams) -> Result<AircraftState> {
    if !(c.airspeed.is_finite() && c.altitude.is_finite() && c.climb_angle.is_finite()) {
        return Err(SimError::InvalidInput("trim condition must be finite".into()));
    }
    if c.airspeed <= 1.0 {
        return Err(SimError::Envelope(format!("airspeed {:.2} m/s is below stall", c.airspeed)));
    }
    let qbar_s = 0.5 * super::atmosphere::density(c.altitude) * c.airspeed.powi(2) * p.wing_area;
    let cl_max = p.lift_curve.max_below(p.stall_alpha) + if c.flaps_up { 0.0 } else { p.flaps_delta_cl };
    let cl_needed = p.weight() * c.climb_angle.to_radians().cos() / qbar_s;
    if cl_needed >= cl_max {
        return Err(SimError::Envelope(format!(
            "required lift coefficient {cl_needed:.3} exceeds maximum {cl_max:.3}"
        )));
    }

    let mut alpha = p
        .lift_curve
        .invert_below(cl_needed.max(p.lift_curve.eval(-2.0)), p.stall_alpha)
        .unwrap_or(4.0);
    let mut thrust_ratio = 0.1;
    let mut r = residual(alpha, thrust_ratio, c, p);
    let norm = |r: &[f64; 2]| (r[0] * r[0] + r[1] * r[1]).sqrt();
    let mut converged = false;
    for _ in 0..MAX_ITER {
        if norm(&r) < TOL {
            converged = true;
            break;
        }
        let ha = 1e-6;
        let ht = 1e-8;
        let ra = residual(alpha + ha, thrust_ratio, c, p);
        let rt = residual(alpha, thrust_ratio + ht, c, p);
        let j = [
            [(ra[0] - r[0]) / ha, (rt[0] - r[0]) / ht],
            [(ra[1] - r[1]) / ha, (rt[1] - r[1]) / ht],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let da = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dt = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        let mut lambda = 1.0;
        loop {
            let cand_a = alpha + lambda * da;
            let cand_t = thrust_ratio + lambda * dt;
            let rc = residual(cand_a, cand_t, c, p);
            if norm(&rc) < norm(&r) || lambda < 1e-4 {
                alpha = cand_a;
                thrust_ratio = cand_t;
                r = rc;
                break;
            }
            lambda *= 0.5;
        }
    }
    if !converged && norm(&r) >= 1e-9 {
        return Err(SimError::Envelope(format!("trim iteration did not converge (residual {:.3e})", norm(&r))));
    }
    if alpha >= p.stall_alpha {
        return Err(SimError::Envelope(format!("trim alpha {alpha:.2} deg beyond stall")));
    }
    let thrust = thrust_ratio * p.weight();
    if thrust < 0.0 || thrust > p.max_thrust {
        return Err(SimError::Envelope(format!("trim thrust {thrust:.0} N outside [0, {:.0}]", p.max_thrust)));
    }

    // pitch acceleration is affine in stabilizer incidence
    let m0 = pitch_acceleration(p, c.airspeed, c.altitude, alpha, 0.0, 0.0, 0.0);
    let m1 = pitch_acceleration(p, c.airspeed, c.altitude, alpha, 0.0, 0.0, 1.0);
    let hs = -m0 / (m1 - m0);
    if !(p.hs_min..=p.hs_max).contains(&hs) {
        return Err(SimError::Envelope(format!("trim stabilizer {hs:.2} deg outside actuator limits")));
    }

    let theta = alpha + c.climb_angle;
    let a = alpha.to_radians();
    let lift = aero_forces(p, c.airspeed, c.altitude, alpha, c.flaps_up).lift;
    Ok(AircraftState {
        t: 0.0,
        altitude: c.altitude,
        u: c.airspeed * a.cos(),
        w: c.airspeed * a.sin(),
        theta,
        q: 0.0,
        alpha: theta - c.climb_angle,
        gamma: c.climb_angle,
        airspeed: c.airspeed,
        hs_trim: hs,
        elevator: 0.0,
        thrust,
        flaps_up: c.flaps_up,
        heading: 0.0,
        load_factor: lift / p.weight(),
        on_ground: false,
    })
}
