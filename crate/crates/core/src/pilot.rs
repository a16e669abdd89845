//! Scripted pilot: phase-based maneuvers flown on cockpit cues, stall
//! induction, and the delayed trim-recovery response to uncommanded
//! stabilizer motion.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    atmosphere, trim_from, AircraftState, AirframeParams, TrimCondition, FT_PER_M, KT_PER_MPS,
};
use crate::error::{Result, SimError};
use crate::sensing::AirDataFrame;

/// What the crew can see: standby/right-side air data, IRS attitude, the
/// trim indicator and trim-wheel motion. Never the truth state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cues {
    pub t: f64,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub heading: f64,
    /// Knots.
    pub ias: f64,
    /// Feet.
    pub altitude: f64,
    /// Feet per minute, positive up.
    pub vertical_speed: f64,
    pub aoa: f64,
    pub hs_trim: f64,
    /// The trim wheel moved during the last step without a pilot command.
    pub uncommanded_trim: bool,
    pub on_ground: bool,
}

impl Cues {
    pub fn new(frame: &AirDataFrame, state: &AircraftState, uncommanded_trim: bool) -> Self {
        Self {
            t: frame.t,
            pitch: state.theta,
            pitch_rate: state.q,
            heading: state.heading,
            ias: frame.ias,
            altitude: frame.altitude,
            vertical_speed: state.vertical_speed_fpm(),
            aoa: frame.aoa,
            hs_trim: state.hs_trim,
            uncommanded_trim,
            on_ground: state.on_ground,
        }
    }
}

/// Angle of attack below which the crew pulls up and re-trims after a stall.
const PULL_UP_ALPHA: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotControls {
    pub elevator: f64,
    /// Stabilizer rate from the hand crank, deg/s (positive nose-up).
    pub trim_crank_rate: f64,
    pub throttle: f64,
    pub bank: f64,
    pub flaps_up: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotResponseModel {
    pub tau_sensing: f64,
    pub crank_rps: f64,
    /// Push used to unload the wing during stall recovery.
    pub stall_recovery_elevator: f64,
    /// Back pressure kept on the column after the break until the crew reacts.
    pub stall_hold_elevator: f64,
    /// Column held while cranking out an erroneous activation.
    pub misfire_elevator: f64,
    /// Seconds without uncommanded trim before the crew resumes normal flying.
    pub quiet_time: f64,
    pub rpd: f64,
}

impl Default for PilotResponseModel {
    fn default() -> Self {
        Self {
            tau_sensing: 5.0,
            crank_rps: 3.5,
            stall_recovery_elevator: 0.3,
            stall_hold_elevator: -0.3,
            misfire_elevator: -0.1,
            quiet_time: 15.0,
            rpd: 18.0,
        }
    }
}

impl PilotResponseModel {
    pub fn crank_rate(&self) -> f64 {
        self.crank_rps / self.rpd
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_sensing >= 0.0 && self.tau_sensing.is_finite()) {
            return Err(SimError::config("pilot.tau_sensing", "must be finite and >= 0"));
        }
        if !(self.crank_rps >= 0.0 && self.crank_rps.is_finite()) {
            return Err(SimError::config("pilot.crank_rps", "must be finite and >= 0"));
        }
        if !(self.quiet_time >= 0.0 && self.quiet_time.is_finite()) {
            return Err(SimError::config("pilot.quiet_time", "must be finite and >= 0"));
        }
        if !(self.rpd > 0.0) {
            return Err(SimError::config("pilot.rpd", "must be positive"));
        }
        for (name, v) in [
            ("stall_recovery_elevator", self.stall_recovery_elevator),
            ("stall_hold_elevator", self.stall_hold_elevator),
            ("misfire_elevator", self.misfire_elevator),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(SimError::config(format!("pilot.{name}"), "must be within [-1, 1]"));
            }
        }
        Ok(())
    }
}

/// Gains of the proportional/integral control laws used by every script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotGains {
    /// Elevator per degree of pitch error.
    pub pitch_p: f64,
    /// Elevator per deg/s of pitch rate.
    pub pitch_d: f64,
    pub pitch_i: f64,
    /// Degrees of pitch per fpm of vertical-speed error.
    pub vs_p: f64,
    pub vs_i: f64,
    /// fpm commanded per foot of altitude error.
    pub alt_p: f64,
    pub max_climb: f64,
    pub max_descent: f64,
    /// Degrees of pitch per knot of airspeed error when flying speed on pitch.
    pub speed_pitch_p: f64,
    pub speed_pitch_i: f64,
    /// Throttle per knot of airspeed error.
    pub throttle_p: f64,
    pub throttle_i: f64,
    /// Stabilizer rate (deg/s) per unit of held elevator when trimming out forces.
    pub auto_trim: f64,
    /// Pitch ramp rate during rotation and stall induction, deg/s.
    pub pitch_ramp: f64,
    /// Elevator per degree of pitch error while pulling into a stall.
    pub stall_pull_p: f64,
}

impl Default for PilotGains {
    fn default() -> Self {
        Self {
            pitch_p: 0.05,
            pitch_d: 0.03,
            pitch_i: 0.01,
            vs_p: 0.002,
            vs_i: 0.0005,
            alt_p: 4.0,
            max_climb: 2500.0,
            max_descent: 2000.0,
            speed_pitch_p: 0.3,
            speed_pitch_i: 0.02,
            throttle_p: 0.02,
            throttle_i: 0.004,
            auto_trim: 0.2,
            pitch_ramp: 3.0,
            stall_pull_p: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Maneuver {
    Takeoff {
        liftoff_ias: f64,
        transition_altitude: f64,
        cruise_climb_ias: f64,
        level_off_altitude: f64,
    },
    Landing {
        initial_altitude: f64,
        descent_rate: f64,
        approach_ias: f64,
    },
    LevelTurn {
        altitude: f64,
        ias: f64,
        bank: f64,
        heading_change: f64,
    },
    ClimbTurn {
        altitude: f64,
        ias: f64,
        bank: f64,
        target_altitude: f64,
    },
    DescendTurn {
        altitude: f64,
        ias: f64,
        bank: f64,
        target_altitude: f64,
    },
    Holding {
        altitude: f64,
        ias: f64,
        leg_time: f64,
    },
    Stall {
        altitude: f64,
        ias: f64,
        target_pitch: f64,
        start_t: f64,
    },
}

impl Default for Maneuver {
    fn default() -> Self {
        Maneuver::Takeoff {
            liftoff_ias: 170.0,
            transition_altitude: 2000.0,
            cruise_climb_ias: 220.0,
            level_off_altitude: 5000.0,
        }
    }
}

fn check(path: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(SimError::config(format!("maneuver.{path}"), format!("{v} outside [{lo}, {hi}]")))
    }
}

impl Maneuver {
    pub fn name(&self) -> &'static str {
        match self {
            Maneuver::Takeoff { .. } => "takeoff",
            Maneuver::Landing { .. } => "landing",
            Maneuver::LevelTurn { .. } => "level_turn",
            Maneuver::ClimbTurn { .. } => "climb_turn",
            Maneuver::DescendTurn { .. } => "descend_turn",
            Maneuver::Holding { .. } => "holding",
            Maneuver::Stall { .. } => "stall",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Maneuver::Takeoff {
                liftoff_ias,
                transition_altitude,
                cruise_climb_ias,
                level_off_altitude,
            } => {
                check("liftoff_ias", liftoff_ias, 120.0, 220.0)?;
                check("transition_altitude", transition_altitude, 500.0, level_off_altitude)?;
                check("cruise_climb_ias", cruise_climb_ias, liftoff_ias, 340.0)?;
                check("level_off_altitude", level_off_altitude, 1000.0, 30_000.0)
            }
            Maneuver::Landing {
                initial_altitude,
                descent_rate,
                approach_ias,
            } => {
                check("initial_altitude", initial_altitude, 200.0, 15_000.0)?;
                check("descent_rate", descent_rate, 100.0, 2000.0)?;
                check("approach_ias", approach_ias, 125.0, 180.0)
            }
            Maneuver::LevelTurn { altitude, ias, bank, heading_change } => {
                check("altitude", altitude, 500.0, 30_000.0)?;
                check("ias", ias, 150.0, 340.0)?;
                check("bank", bank, 5.0, 45.0)?;
                check("heading_change", heading_change, 1.0, 1080.0)
            }
            Maneuver::ClimbTurn {
                altitude,
                ias,
                bank,
                target_altitude,
            }
            | Maneuver::DescendTurn {
                altitude,
                ias,
                bank,
                target_altitude,
            } => {
                check("altitude", altitude, 500.0, 30_000.0)?;
                check("ias", ias, 150.0, 340.0)?;
                check("bank", bank, 5.0, 45.0)?;
                check("target_altitude", target_altitude, 500.0, 30_000.0)?;
                let climbing = matches!(self, Maneuver::ClimbTurn { .. });
                if climbing != (target_altitude > altitude) {
                    return Err(SimError::config(
                        "maneuver.target_altitude",
                        "must lie in the direction of the turn's climb or descent",
                    ));
                }
                Ok(())
            }
            Maneuver::Holding { altitude, ias, leg_time } => {
                check("altitude", altitude, 500.0, 30_000.0)?;
                check("ias", ias, 150.0, 340.0)?;
                check("leg_time", leg_time, 10.0, 300.0)
            }
            Maneuver::Stall {
                altitude,
                ias,
                target_pitch,
                start_t,
            } => {
                check("altitude", altitude, 1000.0, 30_000.0)?;
                check("ias", ias, 150.0, 340.0)?;
                check("target_pitch", target_pitch, 20.0, 90.0)?;
                check("start_t", start_t, 0.0, 1e6)
            }
        }
    }

    /// Altitude (ft) the recovery predicate measures against, when the
    /// maneuver has a natural one.
    pub fn reference_altitude(&self) -> Option<f64> {
        match *self {
            Maneuver::Takeoff { level_off_altitude, .. } => Some(level_off_altitude),
            Maneuver::Landing { .. } => None,
            Maneuver::LevelTurn { altitude, .. } | Maneuver::Holding { altitude, .. } | Maneuver::Stall { altitude, .. } => {
                Some(altitude)
            }
            Maneuver::ClimbTurn { target_altitude, .. } | Maneuver::DescendTurn { target_altitude, .. } => Some(target_altitude),
        }
    }

    pub fn allows_touchdown(&self) -> bool {
        matches!(self, Maneuver::Landing { .. })
    }

    /// Spawn state: on the runway for takeoff, trimmed in the air otherwise.
    pub fn initial_state(&self, params: &AirframeParams) -> Result<AircraftState> {
        let level = |alt_ft: f64, ias: f64, climb: f64, flaps_up: bool| {
            let h = alt_ft / FT_PER_M;
            trim_from(
                &TrimCondition {
                    altitude: h,
                    airspeed: atmosphere::ias_to_tas(ias / KT_PER_MPS, h),
                    climb_angle: climb,
                    flaps_up,
                },
                params,
            )
        };
        match *self {
            Maneuver::Takeoff { liftoff_ias, .. } => {
                let climb = level(0.0, liftoff_ias + 15.0, 8.0, false)?;
                Ok(AircraftState::on_runway(climb.hs_trim))
            }
            Maneuver::Landing {
                initial_altitude,
                descent_rate,
                approach_ias,
            } => {
                let v = approach_ias / KT_PER_MPS * FT_PER_M * 60.0;
                let gamma = -(descent_rate / v).asin().to_degrees();
                level(initial_altitude, approach_ias, gamma, false)
            }
            Maneuver::LevelTurn { altitude, ias, .. }
            | Maneuver::ClimbTurn { altitude, ias, .. }
            | Maneuver::DescendTurn { altitude, ias, .. }
            | Maneuver::Holding { altitude, ias, .. }
            | Maneuver::Stall { altitude, ias, .. } => level(altitude, ias, 0.0, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Roll,
    Rotate,
    InitialClimb,
    CruiseClimb,
    Level,
    Approach,
    Flare,
    Turn,
    Straight,
    Induce,
    StallHold,
    PitchDown,
    PullUp,
    Done,
}

/// Stabilizer overlay for an erroneous activation: nothing until the crew has
/// perceived the motion, then a light pull, cranking against the stabilizer
/// whenever it sits below where it was before the event.
pub fn recovery_response(
    event_t: f64,
    pre_event_hs: f64,
    hs_trim: f64,
    response: &PilotResponseModel,
    t: f64,
) -> Option<PilotControls> {
    if t < event_t + response.tau_sensing {
        return None;
    }
    let crank = if hs_trim < pre_event_hs { response.crank_rate() } else { 0.0 };
    Some(PilotControls {
        elevator: response.misfire_elevator,
        trim_crank_rate: crank,
        throttle: f64::NAN,
        bank: 0.0,
        flaps_up: true,
    })
}

/// Column for the stall-induction pull toward `target_pitch`.
pub fn stall_induction(target_pitch: f64, pitch_cmd: f64, cues: &Cues, gains: &PilotGains) -> Result<f64> {
    if !(20.0..=90.0).contains(&target_pitch) {
        return Err(SimError::config("maneuver.target_pitch", format!("{target_pitch} outside [20, 90]")));
    }
    let cmd = pitch_cmd.min(target_pitch);
    Ok((gains.stall_pull_p * (cues.pitch - cmd) + gains.pitch_d * cues.pitch_rate).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Event {
    onset_t: f64,
    last_motion_t: f64,
    pre_event_hs: f64,
    held: Option<PilotControls>,
}

#[derive(Debug, Clone)]
pub struct Pilot {
    pub maneuver: Maneuver,
    pub response: PilotResponseModel,
    pub gains: PilotGains,
    phase: Phase,
    phase_t: f64,
    elevator_int: f64,
    pitch_int: f64,
    throttle_int: f64,
    pitch_cmd: f64,
    flaps_up: bool,
    last_heading: f64,
    turned: f64,
    event: Option<Event>,
    first_motion_t: Option<f64>,
    stall_t: Option<f64>,
    stall_pre_hs: f64,
    last: Option<PilotControls>,
    completed: bool,
    settled_since: Option<f64>,
    turns_done: u32,
}

impl Pilot {
    pub fn new(
        maneuver: Maneuver,
        response: PilotResponseModel,
        gains: PilotGains,
        initial: &AircraftState,
        params: &AirframeParams,
    ) -> Self {
        let phase = match maneuver {
            Maneuver::Takeoff { .. } => Phase::Roll,
            Maneuver::Landing { .. } => Phase::Approach,
            Maneuver::LevelTurn { .. } | Maneuver::ClimbTurn { .. } | Maneuver::DescendTurn { .. } => Phase::Turn,
            Maneuver::Holding { .. } => Phase::Straight,
            Maneuver::Stall { .. } => Phase::Level,
        };
        Self {
            maneuver,
            response,
            gains,
            phase,
            phase_t: initial.t,
            elevator_int: 0.0,
            pitch_int: initial.theta,
            throttle_int: initial.thrust / params.max_thrust,
            pitch_cmd: initial.theta,
            flaps_up: initial.flaps_up,
            last_heading: initial.heading,
            turned: 0.0,
            event: None,
            first_motion_t: None,
            stall_t: None,
            stall_pre_hs: initial.hs_trim,
            last: None,
            completed: false,
            settled_since: None,
            turns_done: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// The script's own completion predicate has held.
    pub fn completed(&self) -> bool {
        self.completed
    }

    /// The crew is still dealing with an uncommanded trim event.
    pub fn handling_event(&self) -> bool {
        self.event.is_some() || matches!(self.phase, Phase::Induce | Phase::StallHold | Phase::PitchDown)
    }

    pub fn first_motion_t(&self) -> Option<f64> {
        self.first_motion_t
    }

    pub fn stall_t(&self) -> Option<f64> {
        self.stall_t
    }

    fn enter(&mut self, phase: Phase, cues: &Cues) {
        self.phase = phase;
        self.phase_t = cues.t;
        self.pitch_int = cues.pitch;
        self.pitch_cmd = cues.pitch;
        self.settled_since = None;
    }

    fn pitch_law(&mut self, cues: &Cues, cmd: f64, dt: f64) -> f64 {
        let g = self.gains;
        let err = cues.pitch - cmd;
        self.elevator_int = (self.elevator_int + g.pitch_i * err * dt).clamp(-0.6, 0.6);
        (g.pitch_p * err + g.pitch_d * cues.pitch_rate + self.elevator_int).clamp(-1.0, 1.0)
    }

    fn vs_to_pitch(&mut self, cues: &Cues, vs_cmd: f64, dt: f64) -> f64 {
        let g = self.gains;
        let err = vs_cmd - cues.vertical_speed;
        self.pitch_int = (self.pitch_int + g.vs_i * err * dt).clamp(-15.0, 25.0);
        (self.pitch_int + g.vs_p * err).clamp(-15.0, 25.0)
    }

    fn alt_to_vs(&self, cues: &Cues, target_ft: f64) -> f64 {
        let g = self.gains;
        (g.alt_p * (target_ft - cues.altitude)).clamp(-g.max_descent, g.max_climb)
    }

    fn speed_to_pitch(&mut self, cues: &Cues, ias_cmd: f64, dt: f64) -> f64 {
        let g = self.gains;
        let err = cues.ias - ias_cmd;
        self.pitch_int = (self.pitch_int + g.speed_pitch_i * err * dt).clamp(-5.0, 20.0);
        (self.pitch_int + g.speed_pitch_p * err).clamp(-5.0, 20.0)
    }

    fn speed_to_throttle(&mut self, cues: &Cues, ias_cmd: f64, dt: f64) -> f64 {
        let g = self.gains;
        let err = ias_cmd - cues.ias;
        self.throttle_int = (self.throttle_int + g.throttle_i * err * dt).clamp(0.0, 1.0);
        (self.throttle_int + g.throttle_p * err).clamp(0.0, 1.0)
    }

    fn hold_altitude(&mut self, cues: &Cues, target_ft: f64, ias: f64, dt: f64) -> (f64, f64) {
        let vs = self.alt_to_vs(cues, target_ft);
        let pitch = self.vs_to_pitch(cues, vs, dt);
        let e = self.pitch_law(cues, pitch, dt);
        (e, self.speed_to_throttle(cues, ias, dt))
    }

    fn auto_trim(&self, elevator: f64) -> f64 {
        (-self.gains.auto_trim * elevator).clamp(-self.response.crank_rate(), self.response.crank_rate())
    }

    fn settle(&mut self, ok: bool, t: f64, hold: f64) {
        if ok {
            let since = *self.settled_since.get_or_insert(t);
            if t - since >= hold {
                self.completed = true;
            }
        } else {
            self.settled_since = None;
        }
    }

    /// One pilot decision from cockpit cues.
    pub fn step(&mut self, cues: &Cues, dt: f64) -> PilotControls {
        self.turned += (cues.heading - self.last_heading + 180.0).rem_euclid(360.0) - 180.0;
        self.last_heading = cues.heading;
        if cues.uncommanded_trim && self.first_motion_t.is_none() {
            self.first_motion_t = Some(cues.t);
        }
        let scripted_stall = matches!(self.maneuver, Maneuver::Stall { .. });
        if !scripted_stall {
            if let Some(overlay) = self.misfire(cues) {
                self.last = Some(overlay);
                return overlay;
            }
        }
        let out = self.script(cues, dt);
        self.last = Some(out);
        out
    }

    fn misfire(&mut self, cues: &Cues) -> Option<PilotControls> {
        if cues.uncommanded_trim {
            match &mut self.event {
                Some(ev) => ev.last_motion_t = cues.t,
                None => {
                    let held = self.last.map(|c| PilotControls { trim_crank_rate: 0.0, ..c });
                    self.event = Some(Event {
                        onset_t: cues.t,
                        last_motion_t: cues.t,
                        pre_event_hs: cues.hs_trim,
                        held,
                    });
                }
            }
        }
        let ev = self.event?;
        let base = ev.held.unwrap_or(PilotControls {
            elevator: 0.0,
            trim_crank_rate: 0.0,
            throttle: self.throttle_int,
            bank: 0.0,
            flaps_up: self.flaps_up,
        });
        let Some(o) = recovery_response(ev.onset_t, ev.pre_event_hs, cues.hs_trim, &self.response, cues.t) else {
            return Some(base);
        };
        let quiet = cues.t - ev.last_motion_t >= self.response.quiet_time;
        if quiet && o.trim_crank_rate == 0.0 {
            self.event = None;
            self.elevator_int = base.elevator.clamp(-0.6, 0.6);
            self.pitch_int = cues.pitch;
            return None;
        }
        Some(PilotControls {
            throttle: base.throttle,
            bank: base.bank,
            flaps_up: base.flaps_up,
            ..o
        })
    }

    fn script(&mut self, cues: &Cues, dt: f64) -> PilotControls {
        let mut out = PilotControls {
            elevator: 0.0,
            trim_crank_rate: 0.0,
            throttle: self.throttle_int,
            bank: 0.0,
            flaps_up: self.flaps_up,
        };
        match self.maneuver {
            Maneuver::Takeoff {
                liftoff_ias,
                transition_altitude,
                cruise_climb_ias,
                level_off_altitude,
            } => self.takeoff(cues, dt, &mut out, liftoff_ias, transition_altitude, cruise_climb_ias, level_off_altitude),
            Maneuver::Landing {
                descent_rate,
                approach_ias,
                ..
            } => self.landing(cues, dt, &mut out, descent_rate, approach_ias),
            Maneuver::LevelTurn {
                altitude,
                ias,
                bank,
                heading_change,
            } => {
                if self.phase == Phase::Turn {
                    out.bank = bank;
                    if self.turned.abs() >= heading_change {
                        self.enter(Phase::Level, cues);
                        out.bank = 0.0;
                    }
                }
                let (e, thr) = self.hold_altitude(cues, altitude, ias, dt);
                out.elevator = e;
                out.throttle = thr;
                if self.phase == Phase::Level {
                    self.settle((cues.altitude - altitude).abs() < 200.0, cues.t, 10.0);
                }
            }
            Maneuver::ClimbTurn {
                ias, bank, target_altitude, ..
            }
            | Maneuver::DescendTurn {
                ias, bank, target_altitude, ..
            } => {
                if self.phase == Phase::Turn {
                    out.bank = bank;
                    if (cues.altitude - target_altitude).abs() < 100.0 {
                        self.enter(Phase::Level, cues);
                        out.bank = 0.0;
                    }
                }
                let vs = self.alt_to_vs(cues, target_altitude).clamp(-1500.0, 1500.0);
                let pitch = self.vs_to_pitch(cues, vs, dt);
                out.elevator = self.pitch_law(cues, pitch, dt);
                out.throttle = self.speed_to_throttle(cues, ias, dt);
                if self.phase == Phase::Level {
                    self.settle((cues.altitude - target_altitude).abs() < 200.0, cues.t, 10.0);
                }
            }
            Maneuver::Holding { altitude, ias, leg_time } => {
                match self.phase {
                    Phase::Straight if cues.t - self.phase_t >= leg_time => {
                        if self.turns_done >= 2 {
                            self.phase = Phase::Level;
                        } else {
                            self.turned = 0.0;
                            self.phase = Phase::Turn;
                            self.phase_t = cues.t;
                        }
                    }
                    Phase::Turn => {
                        out.bank = 25.0;
                        if self.turned >= 180.0 {
                            self.turns_done += 1;
                            self.phase = Phase::Straight;
                            self.phase_t = cues.t;
                            out.bank = 0.0;
                        }
                    }
                    _ => {}
                }
                let (e, thr) = self.hold_altitude(cues, altitude, ias, dt);
                out.elevator = e;
                out.throttle = thr;
                if self.phase == Phase::Level {
                    self.settle((cues.altitude - altitude).abs() < 200.0, cues.t, 10.0);
                }
            }
            Maneuver::Stall {
                altitude,
                ias,
                target_pitch,
                start_t,
            } => self.stall(cues, dt, &mut out, altitude, ias, target_pitch, start_t),
        }
        if matches!(self.phase, Phase::Level | Phase::Straight | Phase::Turn | Phase::CruiseClimb | Phase::Done) && !cues.on_ground {
            out.trim_crank_rate = self.auto_trim(out.elevator);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn takeoff(
        &mut self,
        cues: &Cues,
        dt: f64,
        out: &mut PilotControls,
        liftoff_ias: f64,
        transition_ft: f64,
        climb_ias: f64,
        level_ft: f64,
    ) {
        match self.phase {
            Phase::Roll => {
                out.throttle = 1.0;
                out.elevator = 0.0;
                if cues.ias >= liftoff_ias {
                    self.enter(Phase::Rotate, cues);
                }
            }
            Phase::Rotate => {
                out.throttle = 1.0;
                self.pitch_cmd = (self.pitch_cmd + self.gains.pitch_ramp * dt).min(12.0);
                out.elevator = self.pitch_law(cues, self.pitch_cmd, dt);
                if !cues.on_ground && cues.altitude > 35.0 {
                    self.enter(Phase::InitialClimb, cues);
                    self.pitch_int = cues.pitch;
                }
            }
            Phase::InitialClimb => {
                out.throttle = 1.0;
                let pitch = self.speed_to_pitch(cues, liftoff_ias + 15.0, dt);
                out.elevator = self.pitch_law(cues, pitch, dt);
                if cues.altitude >= transition_ft {
                    self.flaps_up = true;
                    out.flaps_up = true;
                    self.enter(Phase::CruiseClimb, cues);
                }
            }
            Phase::CruiseClimb => {
                out.throttle = 0.9;
                self.throttle_int = 0.9;
                let pitch = self.speed_to_pitch(cues, climb_ias, dt);
                out.elevator = self.pitch_law(cues, pitch, dt);
                let capture = (cues.vertical_speed.max(0.0) * 0.1).max(150.0);
                if cues.altitude >= level_ft - capture {
                    self.enter(Phase::Level, cues);
                }
            }
            _ => {
                let (e, thr) = self.hold_altitude(cues, level_ft, climb_ias, dt);
                out.elevator = e;
                out.throttle = thr;
                self.settle((cues.altitude - level_ft).abs() < 200.0, cues.t, 10.0);
            }
        }
    }

    fn landing(&mut self, cues: &Cues, dt: f64, out: &mut PilotControls, descent_rate: f64, approach_ias: f64) {
        match self.phase {
            Phase::Approach => {
                let pitch = self.vs_to_pitch(cues, -descent_rate, dt);
                out.elevator = self.pitch_law(cues, pitch, dt);
                out.throttle = self.speed_to_throttle(cues, approach_ias, dt);
                if cues.altitude <= 50.0 {
                    self.enter(Phase::Flare, cues);
                }
            }
            _ => {
                let target = -(200.0_f64).max(descent_rate * (cues.altitude.max(0.0) / 50.0));
                let pitch = self.vs_to_pitch(cues, target, dt);
                out.elevator = self.pitch_law(cues, pitch, dt);
                out.throttle = self.speed_to_throttle(cues, approach_ias - 5.0, dt);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn stall(
        &mut self,
        cues: &Cues,
        dt: f64,
        out: &mut PilotControls,
        altitude: f64,
        ias: f64,
        target_pitch: f64,
        start_t: f64,
    ) {
        let stall_alpha = 17.0;
        match self.phase {
            Phase::Level => {
                let (e, thr) = self.hold_altitude(cues, altitude, ias, dt);
                out.elevator = e;
                out.throttle = thr;
                if cues.t >= start_t {
                    self.stall_pre_hs = cues.hs_trim;
                    self.enter(Phase::Induce, cues);
                }
            }
            Phase::Induce | Phase::StallHold => {
                out.throttle = 0.0;
                self.pitch_cmd += self.gains.pitch_ramp * dt;
                let err = cues.pitch - self.pitch_cmd.min(target_pitch);
                self.elevator_int = (self.elevator_int + self.gains.pitch_i * err * dt).clamp(-0.6, 0.6);
                let pull = stall_induction(target_pitch, self.pitch_cmd, cues, &self.gains).unwrap_or(0.0);
                out.elevator = (pull + self.elevator_int).clamp(-1.0, 1.0);
                if self.phase == Phase::Induce && cues.aoa > stall_alpha {
                    self.stall_t = Some(cues.t);
                    self.enter(Phase::StallHold, cues);
                    self.pitch_cmd = target_pitch;
                }
                if self.phase == Phase::StallHold {
                    out.elevator = out.elevator.min(self.response.stall_hold_elevator);
                    let cue_t = match (self.stall_t, self.first_motion_t) {
                        (Some(a), Some(b)) => a.min(b),
                        (a, b) => a.or(b).unwrap_or(cues.t),
                    };
                    if cues.t >= cue_t + self.response.tau_sensing {
                        self.enter(Phase::PitchDown, cues);
                    }
                }
            }
            Phase::PitchDown => {
                out.throttle = 1.0;
                out.elevator = self.response.stall_recovery_elevator;
                if cues.aoa < 8.0 && cues.ias > 0.8 * ias {
                    self.enter(Phase::PullUp, cues);
                    self.elevator_int = 0.0;
                }
            }
            Phase::PullUp | Phase::Done => {
                let (e, thr) = self.hold_altitude(cues, altitude, ias, dt);
                // no pulling or re-trimming while the wing is still near the break
                let buffeting = cues.aoa > PULL_UP_ALPHA;
                out.elevator = if buffeting { e.max(0.0) } else { e };
                out.throttle = thr;
                if !buffeting && cues.hs_trim < self.stall_pre_hs {
                    out.trim_crank_rate = self.response.crank_rate();
                }
                if self.phase == Phase::PullUp && cues.hs_trim >= self.stall_pre_hs {
                    self.phase = Phase::Done;
                }
                self.settle((cues.altitude - altitude).abs() < 500.0, cues.t, 10.0);
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cues(t: f64) -> Cues {
        Cues {
            t,
            pitch: 3.0,
            pitch_rate: 0.0,
            heading: 0.0,
            ias: 220.0,
            altitude: 5000.0,
            vertical_speed: 0.0,
            aoa: 4.0,
            hs_trim: 0.0,
            uncommanded_trim: false,
            on_ground: false,
        }
    }

    #[test]
    fn overlay_waits_for_reaction_time() {
        let r = PilotResponseModel::default();
        assert!(recovery_response(100.0, 0.5, -0.5, &r, 104.99).is_none());
        let o = recovery_response(100.0, 0.5, -0.5, &r, 105.0).unwrap();
        assert!((o.trim_crank_rate - 3.5 / 18.0).abs() < 1e-12);
        assert!((o.trim_crank_rate - 0.1944).abs() < 1e-4);
        assert_eq!(o.elevator, -0.1);
    }

    #[test]
    fn crank_stops_once_restored() {
        let r = PilotResponseModel::default();
        assert_eq!(recovery_response(100.0, 0.5, 0.5, &r, 120.0).unwrap().trim_crank_rate, 0.0);
        assert_eq!(recovery_response(100.0, 0.5, 0.6, &r, 120.0).unwrap().trim_crank_rate, 0.0);
        assert_eq!(recovery_response(100.0, 0.5, 0.6, &r, 120.0).unwrap().elevator, -0.1);
    }

    #[test]
    fn stall_pitch_outside_range_is_config_error() {
        let g = PilotGains::default();
        let c = cues(0.0);
        assert!(matches!(stall_induction(19.0, 10.0, &c, &g), Err(SimError::Config { .. })));
        assert!(stall_induction(20.0, 10.0, &c, &g).is_ok());
        let m = Maneuver::Stall {
            altitude: 8000.0,
            ias: 220.0,
            target_pitch: 19.0,
            start_t: 10.0,
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn stall_pull_is_nose_up() {
        let g = PilotGains::default();
        let e = stall_induction(50.0, 50.0, &cues(0.0), &g).unwrap();
        assert!(e < 0.0);
    }

    #[test]
    fn level_phase_zero_error_is_neutral() {
        let p = AirframeParams::b737_class();
        let m = Maneuver::LevelTurn {
            altitude: 5000.0,
            ias: 220.0,
            bank: 20.0,
            heading_change: 90.0,
        };
        let s = m.initial_state(&p).unwrap();
        let mut pilot = Pilot::new(m, PilotResponseModel::default(), PilotGains::default(), &s, &p);
        pilot.phase = Phase::Level;
        let mut c = cues(0.0);
        c.pitch = s.theta;
        let out = pilot.step(&c, 1.0 / 30.0);
        assert!(out.elevator.abs() < 1e-3, "{}", out.elevator);
    }

    #[test]
    fn takeoff_rotates_at_liftoff_speed() {
        let m = Maneuver::default();
        let p = AirframeParams::b737_class();
        let s = m.initial_state(&p).unwrap();
        let mut pilot = Pilot::new(m, PilotResponseModel::default(), PilotGains::default(), &s, &p);
        let mut c = cues(10.0);
        c.on_ground = true;
        c.altitude = 0.0;
        c.pitch = 0.0;
        c.ias = 150.0;
        pilot.step(&c, 0.1);
        assert_eq!(pilot.phase(), Phase::Roll);
        c.ias = 171.0;
        pilot.step(&c, 0.1);
        assert_eq!(pilot.phase(), Phase::Rotate);
        let out = pilot.step(&c, 0.1);
        assert!(out.elevator < 0.0);
    }

    #[test]
    fn pilot_is_deterministic() {
        let m = Maneuver::default();
        let p = AirframeParams::b737_class();
        let s = m.initial_state(&p).unwrap();
        let run = || {
            let mut pilot = Pilot::new(m, PilotResponseModel::default(), PilotGains::default(), &s, &p);
            (0..200)
                .map(|k| {
                    let mut c = cues(k as f64 * 0.1);
                    c.pitch = (k as f64 * 0.3).sin();
                    c.uncommanded_trim = k == 50;
                    pilot.step(&c, 0.1)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(format!("{:?}", run()), format!("{:?}", run()));
    }
}
