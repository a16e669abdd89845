//! The three MCAS variants behind one stepping interface.

use serde::{Deserialize, Serialize};

use crate::dynamics::AirframeParams;
use crate::error::{Result, SimError};
use crate::sads::{self, CorrectSet, InertialInputs, SadsConfig};
use crate::sensing::{AirDataFrame, Channel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McasVariant {
    McasOld,
    McasNew,
    SaMcas,
}

impl McasVariant {
    pub const ALL: [McasVariant; 3] = [McasVariant::McasOld, McasVariant::McasNew, McasVariant::SaMcas];

    pub fn name(self) -> &'static str {
        match self {
            McasVariant::McasOld => "mcas_old",
            McasVariant::McasNew => "mcas_new",
            McasVariant::SaMcas => "sa_mcas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    McasOld,
    McasNew,
    SaMcas,
    Pilot,
}

impl From<McasVariant> for CommandSource {
    fn from(v: McasVariant) -> Self {
        match v {
            McasVariant::McasOld => CommandSource::McasOld,
            McasVariant::McasNew => CommandSource::McasNew,
            McasVariant::SaMcas => CommandSource::SaMcas,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McasConfig {
    pub aoa_threshold: f64,
    pub deflection_low_speed: f64,
    pub deflection_high_speed: f64,
    pub cooldown: f64,
    pub disagreement_limit: f64,
    /// Stabilizer actuation rate, deg/s.
    pub trim_rate: f64,
    pub high_speed_mach: f64,
    pub gforce_threshold: f64,
    /// MCAS_new re-arms once the MVS value falls this far below threshold.
    pub rearm_hysteresis: f64,
    /// Normalized nose-up column beyond which MCAS_new holds its command.
    pub override_column: f64,
}

impl Default for McasConfig {
    fn default() -> Self {
        Self {
            aoa_threshold: 17.0,
            deflection_low_speed: 2.5,
            deflection_high_speed: 0.6,
            cooldown: 11.0,
            disagreement_limit: 5.5,
            trim_rate: 0.25,
            high_speed_mach: 0.4,
            gforce_threshold: 1.3,
            rearm_hysteresis: 2.0,
            override_column: 0.25,
        }
    }
}

impl McasConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("aoa_threshold", self.aoa_threshold),
            ("deflection_low_speed", self.deflection_low_speed),
            ("deflection_high_speed", self.deflection_high_speed),
            ("cooldown", self.cooldown),
            ("disagreement_limit", self.disagreement_limit),
            ("trim_rate", self.trim_rate),
            ("high_speed_mach", self.high_speed_mach),
            ("gforce_threshold", self.gforce_threshold),
            ("rearm_hysteresis", self.rearm_hysteresis),
            ("override_column", self.override_column),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::config(format!("mcas.{name}"), "must be positive"));
            }
        }
        if self.deflection_high_speed >= self.deflection_low_speed {
            return Err(SimError::config(
                "mcas.deflection_high_speed",
                "must be smaller than deflection_low_speed",
            ));
        }
        Ok(())
    }

    fn deflection_for(&self, mach: f64, gforce: f64) -> Option<f64> {
        if mach < self.high_speed_mach {
            Some(self.deflection_low_speed)
        } else if gforce > self.gforce_threshold {
            Some(self.deflection_high_speed)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimCommand {
    /// Nose-down stabilizer travel, degrees.
    pub total_deflection: f64,
    /// Actuation rate, deg/s.
    pub rate: f64,
    pub issued_t: f64,
    pub source: CommandSource,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct McasState {
    pub last_fire_t: Option<f64>,
    pub fired_this_event: bool,
    pub mvs_stored: Option<f64>,
    /// Remaining nose-down travel of the command being actuated.
    pub active_command: Option<f64>,
    pub activations: u32,
}

/// Median of stored, left and right; the first call averages left and right.
pub fn mvs_select(stored: Option<f64>, left: f64, right: f64) -> f64 {
    match stored {
        None => 0.5 * (left + right),
        Some(s) => {
            let mut v = [s, left, right];
            v.sort_by(f64::total_cmp);
            v[1]
        }
    }
}

pub fn is_stall(set: &CorrectSet, cfg: &McasConfig) -> bool {
    set.get(Channel::Aoa).is_some_and(|m| m.value > cfg.aoa_threshold)
}

fn cooled_down(state: &McasState, cfg: &McasConfig, t: f64) -> bool {
    state.last_fire_t.map_or(true, |last| t - last >= cfg.cooldown)
}

fn fire(state: &mut McasState, deflection: f64, cfg: &McasConfig, t: f64, source: CommandSource) -> TrimCommand {
    state.last_fire_t = Some(t);
    state.active_command = Some(deflection);
    state.activations += 1;
    TrimCommand {
        total_deflection: deflection,
        rate: cfg.trim_rate,
        issued_t: t,
        source,
    }
}

/// Single-sensor, repeat-firing logic driven by one frame.
pub fn mcas_old_step(frame: &AirDataFrame, state: &mut McasState, cfg: &McasConfig, t: f64) -> Option<TrimCommand> {
    repeat_fire(frame.aoa, frame.mach, frame.gforce, state, cfg, t, CommandSource::McasOld)
}

fn repeat_fire(
    aoa: f64,
    mach: f64,
    gforce: f64,
    state: &mut McasState,
    cfg: &McasConfig,
    t: f64,
    source: CommandSource,
) -> Option<TrimCommand> {
    if !(aoa > cfg.aoa_threshold && cooled_down(state, cfg, t)) {
        return None;
    }
    let d = cfg.deflection_for(mach, gforce)?;
    Some(fire(state, d, cfg, t, source))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Inhibit {
    Disagree,
    FlapsDown,
    AlreadyFired,
    Cooldown,
    SpeedGate,
    NoTrustedAoa,
}

/// Dual-sensor, once-per-event logic with mid-value select.
pub fn mcas_new_step(
    left: &AirDataFrame,
    right: &AirDataFrame,
    flaps_up: bool,
    state: &mut McasState,
    cfg: &McasConfig,
    t: f64,
) -> (Option<TrimCommand>, f64, Option<Inhibit>) {
    let mvs = mvs_select(state.mvs_stored, left.aoa, right.aoa);
    state.mvs_stored = Some(mvs);
    if state.fired_this_event && mvs < cfg.aoa_threshold - cfg.rearm_hysteresis {
        state.fired_this_event = false;
    }
    let inhibit = if (left.aoa - right.aoa).abs() > cfg.disagreement_limit {
        Some(Inhibit::Disagree)
    } else if !flaps_up {
        Some(Inhibit::FlapsDown)
    } else if state.fired_this_event {
        Some(Inhibit::AlreadyFired)
    } else {
        None
    };
    if inhibit.is_some() || mvs <= cfg.aoa_threshold {
        return (None, mvs, inhibit);
    }
    let mach = 0.5 * (left.mach + right.mach);
    let gforce = 0.5 * (left.gforce + right.gforce);
    match cfg.deflection_for(mach, gforce) {
        Some(d) => {
            state.fired_this_event = true;
            (Some(fire(state, d, cfg, t, CommandSource::McasNew)), mvs, None)
        }
        None => (None, mvs, Some(Inhibit::SpeedGate)),
    }
}

/// Arbitrated logic: only a physical AoA value that agrees with the synthetic
/// estimate can trigger, with repeat-fire semantics.
pub fn sa_mcas_step(
    left: &AirDataFrame,
    right: &AirDataFrame,
    inertial: &InertialInputs,
    flaps_up: bool,
    params: &AirframeParams,
    sads_cfg: &SadsConfig,
    state: &mut McasState,
    cfg: &McasConfig,
    t: f64,
) -> (Option<TrimCommand>, sads::SadsReport) {
    let report = sads::evaluate(left, right, inertial, flaps_up, params, sads_cfg);
    let set = CorrectSet {
        members: report.selected.into_iter().collect(),
    };
    if !is_stall(&set, cfg) {
        return (None, report);
    }
    let chosen = match report.selected.map(|m| m.side) {
        Some(crate::sensing::Side::Right) => right,
        _ => left,
    };
    let cmd = repeat_fire(
        set.get(Channel::Aoa).map_or(f64::NAN, |m| m.value),
        chosen.mach,
        chosen.gforce,
        state,
        cfg,
        t,
        CommandSource::SaMcas,
    );
    (cmd, report)
}

/// Everything a controller may look at in one step.
#[derive(Debug, Clone, Copy)]
pub struct ControllerInputs<'a> {
    pub left: &'a AirDataFrame,
    pub right: &'a AirDataFrame,
    pub inertial: InertialInputs,
    pub flaps_up: bool,
    /// Pilot column, normalized, positive nose-down.
    pub pilot_elevator: f64,
    pub t: f64,
}

/// Audit record for one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub t: f64,
    pub command: Option<TrimCommand>,
    pub mvs: Option<f64>,
    pub sads_aoa: Option<f64>,
    pub inhibit: Option<Inhibit>,
    pub frozen: bool,
    /// Stabilizer rate requested this step, deg/s (negative is nose-down).
    pub trim_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub variant: McasVariant,
    pub cfg: McasConfig,
    pub sads: SadsConfig,
    pub state: McasState,
}

impl Controller {
    pub fn new(variant: McasVariant, cfg: McasConfig, sads: SadsConfig) -> Self {
        Self {
            variant,
            cfg,
            sads,
            state: McasState::default(),
        }
    }

    pub fn activations(&self) -> u32 {
        self.state.activations
    }

    /// True while a command is still being actuated.
    pub fn is_actuating(&self) -> bool {
        self.state.active_command.is_some()
    }

    /// Evaluates the activation logic and returns the stabilizer rate to
    /// apply over the next `dt`.
    pub fn step(&mut self, inp: &ControllerInputs, params: &AirframeParams, dt: f64) -> Decision {
        let (command, mvs, sads_aoa, inhibit) = match self.variant {
            McasVariant::McasOld => {
                let cmd = mcas_old_step(inp.left, &mut self.state, &self.cfg, inp.t);
                let gate = if cmd.is_none() && inp.left.aoa > self.cfg.aoa_threshold {
                    Some(if cooled_down(&self.state, &self.cfg, inp.t) {
                        Inhibit::SpeedGate
                    } else {
                        Inhibit::Cooldown
                    })
                } else {
                    None
                };
                (cmd, None, None, gate)
            }
            McasVariant::McasNew => {
                let (cmd, mvs, inhibit) = mcas_new_step(inp.left, inp.right, inp.flaps_up, &mut self.state, &self.cfg, inp.t);
                (cmd, Some(mvs), None, inhibit)
            }
            McasVariant::SaMcas => {
                let (cmd, rep) = sa_mcas_step(
                    inp.left,
                    inp.right,
                    &inp.inertial,
                    inp.flaps_up,
                    params,
                    &self.sads,
                    &mut self.state,
                    &self.cfg,
                    inp.t,
                );
                let inhibit = if rep.selected.is_none() { Some(Inhibit::NoTrustedAoa) } else { None };
                (cmd, None, rep.sads, inhibit)
            }
        };

        let frozen = self.variant == McasVariant::McasNew && inp.pilot_elevator < -self.cfg.override_column;
        let mut trim_rate = 0.0;
        if let Some(remaining) = self.state.active_command {
            if !frozen {
                let travel = (self.cfg.trim_rate * dt).min(remaining);
                trim_rate = -travel / dt;
                let left = remaining - travel;
                self.state.active_command = if left > 1e-12 { Some(left) } else { None };
            }
        }
        Decision {
            t: inp.t,
            command,
            mvs,
            sads_aoa,
            inhibit,
            frozen,
            trim_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::Side;

    fn frame(side: Side, aoa: f64) -> AirDataFrame {
        AirDataFrame {
            side,
            aoa,
            ias: 180.0,
            mach: 0.3,
            altitude: 5000.0,
            gforce: 1.0,
            t: 0.0,
        }
    }

    #[test]
    fn mvs_examples() {
        assert_eq!(mvs_select(Some(5.0), 6.0, 20.0), 6.0);
        assert_eq!(mvs_select(None, 4.0, 6.0), 5.0);
        assert_eq!(mvs_select(Some(5.0), 5.0, 5.0), 5.0);
    }

    #[test]
    fn old_fires_full_deflection_at_low_speed() {
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let cmd = mcas_old_step(&frame(Side::Left, 18.0), &mut st, &cfg, 100.0).unwrap();
        assert_eq!(cmd.total_deflection, 2.5);
        assert_eq!(cmd.source, CommandSource::McasOld);
    }

    #[test]
    fn old_respects_cooldown_and_refires() {
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let f = frame(Side::Left, 18.0);
        assert!(mcas_old_step(&f, &mut st, &cfg, 100.0).is_some());
        assert!(mcas_old_step(&f, &mut st, &cfg, 105.0).is_none());
        assert!(mcas_old_step(&f, &mut st, &cfg, 111.0).is_some());
        assert_eq!(st.activations, 2);
    }

    #[test]
    fn old_high_speed_needs_g() {
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let mut f = frame(Side::Left, 18.0);
        f.mach = 0.6;
        assert!(mcas_old_step(&f, &mut st, &cfg, 0.0).is_none());
        f.gforce = 1.5;
        assert_eq!(mcas_old_step(&f, &mut st, &cfg, 0.0).unwrap().total_deflection, 0.6);
    }

    #[test]
    fn new_inhibited_by_disagreement() {
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let (cmd, _, why) = mcas_new_step(&frame(Side::Left, 18.0), &frame(Side::Right, 12.0), true, &mut st, &cfg, 0.0);
        assert!(cmd.is_none());
        assert_eq!(why, Some(Inhibit::Disagree));
    }

    #[test]
    fn new_fires_once_per_event_and_rearms() {
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let hi = (frame(Side::Left, 18.0), frame(Side::Right, 18.0));
        let (cmd, _, _) = mcas_new_step(&hi.0, &hi.1, true, &mut st, &cfg, 0.0);
        assert_eq!(cmd.unwrap().total_deflection, 2.5);
        for k in 1..100 {
            let (cmd, _, _) = mcas_new_step(&hi.0, &hi.1, true, &mut st, &cfg, k as f64);
            assert!(cmd.is_none());
        }
        // 16 is below threshold but inside the hysteresis band
        let mid = (frame(Side::Left, 16.0), frame(Side::Right, 16.0));
        for _ in 0..3 {
            mcas_new_step(&mid.0, &mid.1, true, &mut st, &cfg, 200.0);
        }
        assert!(st.fired_this_event);
        let lo = (frame(Side::Left, 3.0), frame(Side::Right, 3.0));
        for _ in 0..3 {
            mcas_new_step(&lo.0, &lo.1, true, &mut st, &cfg, 201.0);
        }
        assert!(!st.fired_this_event);
        let mut fired = false;
        for _ in 0..5 {
            fired |= mcas_new_step(&hi.0, &hi.1, true, &mut st, &cfg, 300.0).0.is_some();
        }
        assert!(fired);
    }

    #[test]
    fn new_requires_flaps_up() {
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let (cmd, _, why) = mcas_new_step(&frame(Side::Left, 18.0), &frame(Side::Right, 18.0), false, &mut st, &cfg, 0.0);
        assert!(cmd.is_none());
        assert_eq!(why, Some(Inhibit::FlapsDown));
    }

    #[test]
    fn is_stall_threshold() {
        let cfg = McasConfig::default();
        let set = |v: f64| CorrectSet {
            members: vec![sads::Measurement { channel: Channel::Aoa, value: v, side: Side::Left }],
        };
        assert!(!is_stall(&set(16.9), &cfg));
        assert!(is_stall(&set(17.1), &cfg));
        assert!(!is_stall(&CorrectSet::default(), &cfg));
    }

    #[test]
    fn actuation_spreads_command_over_time() {
        let p = AirframeParams::b737_class();
        let mut c = Controller::new(McasVariant::McasOld, McasConfig::default(), SadsConfig::default());
        let l = frame(Side::Left, 18.0);
        let r = frame(Side::Right, 3.0);
        let dt = 0.05;
        let mut travel = 0.0;
        let mut t = 0.0;
        for _ in 0..400 {
            let inp = ControllerInputs {
                left: &l,
                right: &r,
                inertial: InertialInputs { u: 100.0, w: 5.0 },
                flaps_up: true,
                pilot_elevator: 0.0,
                t,
            };
            let d = c.step(&inp, &p, dt);
            assert!(d.trim_rate <= 0.0 && d.trim_rate >= -0.25 - 1e-12);
            travel += d.trim_rate * dt;
            t += dt;
            if t > 10.9 {
                break;
            }
        }
        assert!((travel + 2.5).abs() < 1e-9, "{travel}");
        assert!(!c.is_actuating());
    }

    #[test]
    fn new_freezes_under_pilot_pull() {
        let p = AirframeParams::b737_class();
        let mut c = Controller::new(McasVariant::McasNew, McasConfig::default(), SadsConfig::default());
        let l = frame(Side::Left, 18.0);
        let r = frame(Side::Right, 18.0);
        let mk = |e: f64, t: f64| ControllerInputs {
            left: &l,
            right: &r,
            inertial: InertialInputs { u: 100.0, w: 5.0 },
            flaps_up: true,
            pilot_elevator: e,
            t,
        };
        let d = c.step(&mk(-0.5, 0.0), &p, 0.1);
        assert!(d.command.is_some() && d.frozen && d.trim_rate == 0.0);
        assert_eq!(c.step(&mk(-0.1, 0.1), &p, 0.1).trim_rate, -0.25);
    }

    #[test]
    fn sa_ignores_correlated_fault() {
        let p = AirframeParams::b737_class();
        let cfg = McasConfig::default();
        let mut st = McasState::default();
        let s = crate::dynamics::trim_from(
            &crate::dynamics::TrimCondition { altitude: 1524.0, airspeed: 110.0, climb_angle: 0.0, flaps_up: true },
            &p,
        )
        .unwrap();
        let mut l = AirDataFrame::from_truth(&s, Side::Left);
        let mut r = AirDataFrame::from_truth(&s, Side::Right);
        l.aoa = 18.0;
        r.aoa = 18.0;
        let inertial = InertialInputs::from_state(&s);
        let (cmd, _) = sa_mcas_step(&l, &r, &inertial, true, &p, &SadsConfig::default(), &mut st, &cfg, 0.0);
        assert!(cmd.is_none());
        r.aoa = s.alpha;
        let (cmd, rep) = sa_mcas_step(&l, &r, &inertial, true, &p, &SadsConfig::default(), &mut st, &cfg, 0.0);
        assert!(cmd.is_none());
        assert_eq!(rep.selected.unwrap().side, Side::Right);
    }
}
