//! Closed-form recoverability analysis: how long the pilot needs, how fast the
//! aircraft falls, and which deadline binds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Seconds needed to crank the stabilizer back by `x_stab_offset` degrees.
/// `None` when the pilot does not crank at all.
pub fn tau_action(x_stab_offset: f64, rpd: f64, crank_rps: f64) -> Option<f64> {
    if crank_rps > 0.0 {
        Some(x_stab_offset * rpd / crank_rps)
    } else {
        None
    }
}

/// Crank speed that exactly cancels one activation per cooldown period.
pub fn required_rps(x_stab_offset: f64, rpd: f64, tau_mcas_cd: f64) -> f64 {
    rpd * x_stab_offset / tau_mcas_cd
}

/// Vertical force model of a falling aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallParams {
    pub mass: f64,
    pub thrust: f64,
    /// Climb angle, radians.
    pub climb_angle: f64,
    pub rho: f64,
    pub area: f64,
    pub cd: f64,
    pub cl: f64,
    #[serde(default = "default_g")]
    pub g: f64,
}

fn default_g() -> f64 {
    9.806_65
}

impl FallParams {
    fn weight(&self) -> f64 {
        self.mass * self.g
    }

    /// Coefficient of v^2 in the net force.
    fn k(&self) -> f64 {
        let (s, c) = self.climb_angle.sin_cos();
        0.5 * self.rho * self.area * (self.cd * s - self.cl * c)
    }

    fn drive(&self) -> f64 {
        self.thrust * self.climb_angle.sin() - self.weight()
    }

    /// Net force G + D sin c - L cos c - T sin c at speed `v`.
    pub fn net_force(&self, v: f64) -> f64 {
        let (s, c) = self.climb_angle.sin_cos();
        let qa = 0.5 * self.rho * self.area * v * v;
        self.weight() + qa * self.cd * s - qa * self.cl * c - self.thrust * s
    }
}

pub fn terminal_velocity(p: &FallParams) -> Result<f64> {
    let radicand = p.drive() / p.k();
    if radicand > 0.0 && radicand.is_finite() {
        Ok(radicand.sqrt())
    } else {
        Err(SimError::OutOfRegime(format!(
            "no terminal velocity (radicand {radicand:.3e})"
        )))
    }
}

pub fn falling_velocity(v0: f64, t: f64, p: &FallParams) -> Result<f64> {
    let vt = terminal_velocity(p)?;
    if !(v0.abs() < vt) {
        return Err(SimError::OutOfRegime(format!("v0 {v0:.3} not below terminal {vt:.3}")));
    }
    if t < 0.0 {
        return Err(SimError::InvalidInput(format!("t {t} must be >= 0")));
    }
    Ok(vt * ((v0 / vt).atanh() - t * p.drive() / (vt * p.mass)).tanh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadlineTerm {
    AltitudeHard,
    McasSoft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineBound {
    pub deadline: f64,
    pub which_term: DeadlineTerm,
    /// Altitude term on its own, for cross-checks.
    pub altitude_deadline: f64,
}

/// Earlier of the ground-impact deadline and the next possible activation.
/// `v0` is the current descent rate; when the closed form does not apply the
/// altitude term falls back to `h / max(v0, 1)`.
pub fn recovery_deadline(
    h: f64,
    v0: f64,
    fall: &FallParams,
    tau: Option<f64>,
    last_mcas_fire_t: Option<f64>,
    tau_mcas_cd: f64,
    t_current: f64,
) -> Result<DeadlineBound> {
    if !(h >= 0.0) {
        return Err(SimError::InvalidInput(format!("altitude {h} must be >= 0")));
    }
    let fallback = h / v0.max(1.0);
    let time_to_ground = match tau {
        Some(tau) => match falling_velocity(v0, tau, fall) {
            Ok(v) if v > 0.0 => h / v.max(1.0),
            _ => fallback,
        },
        None => fallback,
    };
    let altitude_deadline = t_current + time_to_ground;
    let bound = DeadlineBound {
        deadline: altitude_deadline,
        which_term: DeadlineTerm::AltitudeHard,
        altitude_deadline,
    };
    Ok(match last_mcas_fire_t {
        Some(last) if last + tau_mcas_cd < altitude_deadline => DeadlineBound {
            deadline: last + tau_mcas_cd,
            which_term: DeadlineTerm::McasSoft,
            altitude_deadline,
        },
        _ => bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineVerdict {
    /// Total response time; `None` when the action never completes.
    pub tau: Option<f64>,
    pub tau_deadline: f64,
    pub which_term: DeadlineTerm,
    pub recoverable: bool,
}

pub fn is_recoverable(t_start_bad_event: f64, tau_sensing: f64, tau_action: Option<f64>, bound: &DeadlineBound) -> DeadlineVerdict {
    let tau = tau_action.map(|a| tau_sensing + a);
    DeadlineVerdict {
        tau,
        tau_deadline: bound.deadline,
        which_term: bound.which_term,
        recoverable: tau.is_some_and(|tau| t_start_bad_event + tau <= bound.deadline),
    }
}

/// (m, k)-firm bookkeeping: a violation is `m` misses among the last `k`
/// soft deadlines.
#[derive(Debug, Clone, PartialEq)]
pub struct MkFirm {
    pub m: usize,
    pub k: usize,
    window: VecDeque<bool>,
    consecutive: usize,
}

impl Default for MkFirm {
    fn default() -> Self {
        Self::new(3, 3)
    }
}

impl MkFirm {
    pub fn new(m: usize, k: usize) -> Self {
        Self {
            m,
            k: k.max(1),
            window: VecDeque::new(),
            consecutive: 0,
        }
    }

    pub fn record(&mut self, missed: bool) {
        if self.window.len() == self.k {
            self.window.pop_front();
        }
        self.window.push_back(missed);
        self.consecutive = if missed { self.consecutive + 1 } else { 0 };
    }

    pub fn consecutive_misses(&self) -> usize {
        self.consecutive
    }

    pub fn violated(&self) -> bool {
        self.window.iter().filter(|m| **m).count() >= self.m
    }
}

/// Input document for the `deadline` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadlineQuery {
    pub altitude: f64,
    pub descent_rate: f64,
    pub t_current: f64,
    pub t_start_bad_event: f64,
    #[serde(default)]
    pub last_mcas_fire_t: Option<f64>,
    #[serde(default = "default_cd")]
    pub tau_mcas_cd: f64,
    pub tau_sensing: f64,
    pub crank_rps: f64,
    #[serde(default = "default_rpd")]
    pub rpd: f64,
    #[serde(default = "default_offset")]
    pub x_stab_offset: f64,
    pub fall: FallParams,
}

fn default_cd() -> f64 {
    11.0
}

fn default_rpd() -> f64 {
    18.0
}

fn default_offset() -> f64 {
    2.5
}

#[derive(Debug, Clone, Serialize)]
pub struct DeadlineReport {
    pub tau_action: Option<f64>,
    pub required_rps: f64,
    pub terminal_velocity: Option<f64>,
    pub bound: DeadlineBound,
    pub verdict: DeadlineVerdict,
}

pub fn evaluate_query(q: &DeadlineQuery) -> Result<DeadlineReport> {
    let action = tau_action(q.x_stab_offset, q.rpd, q.crank_rps);
    let tau = action.map(|a| a + q.tau_sensing);
    let bound = recovery_deadline(
        q.altitude,
        q.descent_rate,
        &q.fall,
        tau,
        q.last_mcas_fire_t,
        q.tau_mcas_cd,
        q.t_current,
    )?;
    Ok(DeadlineReport {
        tau_action: action,
        required_rps: required_rps(q.x_stab_offset, q.rpd, q.tau_mcas_cd),
        terminal_velocity: terminal_velocity(&q.fall).ok(),
        verdict: is_recoverable(q.t_start_bad_event, q.tau_sensing, action, &bound),
        bound,
    })
}
