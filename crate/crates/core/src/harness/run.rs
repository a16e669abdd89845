use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::trace::{
    TraceRecorder, TraceRow, FLAG_HS_CLAMPED, FLAG_MCAS_ACTUATING, FLAG_MCAS_FIRED, FLAG_PILOT_EVENT, FLAG_RECOVERY_HOLDING,
};
use crate::controllers::{Controller, ControllerInputs};
use crate::controllers::TrimCommand;
use crate::dynamics::{self, atmosphere, AircraftState, AirframeParams, ControlInputs};
use crate::error::{Result, SimError};
use crate::pilot::{Cues, Pilot};
use crate::sads::InertialInputs;
use crate::sensing::{measure, FaultLatches, NoiseSpec};
use crate::timing::{self, DeadlineVerdict, FallParams, MkFirm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Recovered,
    Crashed,
    Timeout,
    Aborted,
}

impl Verdict {
    pub fn is_recovered(self) -> bool {
        self == Verdict::Recovered
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub verdict: Verdict,
    pub min_altitude_ft: f64,
    pub mcas_activation_count: u32,
    pub consecutive_soft_deadline_misses: usize,
    pub trace_hash: u64,
    pub end_t: f64,
    pub steps: u64,
    pub first_activation_t: Option<f64>,
    /// Closed-form deadline check taken at the first activation.
    pub analytic: Option<AnalyticCheck>,
    pub diagnostic: Option<String>,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

impl SimOutcome {
    pub fn trace_hash_hex(&self) -> String {
        format!("{:016x}", self.trace_hash)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCheck {
    pub verdict: DeadlineVerdict,
    pub altitude_deadline: f64,
    /// The crew cannot undo the activation before the altitude deadline.
    pub hard_infeasible: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub keep_trace: bool,
    /// Stop as soon as the verdict is known.
    pub early_stop: bool,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimOutcome> {
    run_scenario_with(cfg, RunOptions { keep_trace: false, early_stop: true })
}

/// Lockstep loop: sense, pilot, controller, stabilizer, airframe, classify.
pub fn run_scenario_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<SimOutcome> {
    cfg.validate()?;
    let params = &cfg.airframe;
    let dt = cfg.dt;
    let noise = NoiseSpec { seed: cfg.seed, ..cfg.noise };
    let mut state = cfg.maneuver.initial_state(params)?;
    let mut pilot = Pilot::new(cfg.maneuver, cfg.pilot, cfg.gains, &state, params);
    let mut controller = Controller::new(cfg.variant, cfg.mcas, cfg.sads);
    let mut latches = FaultLatches::new(cfg.faults.len());
    let mut recorder = TraceRecorder::new(opts.keep_trace);
    let mut mk = MkFirm::new(cfg.mk_firm.m, cfg.mk_firm.k);

    let crit = cfg.recovery;
    let faults_end = cfg.faults.iter().map(|f| f.t_end).fold(f64::NEG_INFINITY, f64::max);
    let mut event_seen = false;
    let mut last_event_t = faults_end;
    let mut reference_ft = cfg.maneuver.reference_altitude();

    let n_steps = (cfg.duration / dt).round() as u64;
    let mut uncommanded = false;
    let mut airborne = !state.on_ground;
    let mut min_alt = if airborne { state.altitude_ft() } else { f64::INFINITY };
    let mut held_since: Option<f64> = None;
    let mut first_activation_t = None;
    let mut analytic = None;
    let mut chain_hs: Option<f64> = None;
    let mut max_misses = 0usize;
    let mut verdict = None;
    let mut diagnostic = None;
    let mut steps = 0;

    for k in 0..n_steps {
        let t = state.t;
        let (left, right) = measure(&state, &noise, &cfg.faults, &mut latches, k);

        let cues = Cues::new(&right, &state, uncommanded);
        let pc = pilot.step(&cues, dt);
        if !(pc.elevator.is_finite() && pc.throttle.is_finite()) {
            verdict = Some(Verdict::Aborted);
            diagnostic = Some(format!("pilot produced non-finite controls at t={t:.3}"));
            break;
        }
        let pilot_elevator = pc.elevator.clamp(-1.0, 1.0);

        let inputs = ControllerInputs {
            left: &left,
            right: &right,
            inertial: InertialInputs::from_state(&state),
            flaps_up: state.flaps_up,
            pilot_elevator,
            t,
        };
        let decision = controller.step(&inputs, params, dt);
        if let Some(cmd) = &decision.command {
            if first_activation_t.is_none() {
                first_activation_t = Some(t);
                analytic = analytic_check(&state, params, cfg, cmd);
            }
            if controller.activations() > 1 {
                let missed = chain_hs.is_some_and(|hs| state.hs_trim < hs - 0.05);
                mk.record(missed);
                max_misses = max_misses.max(mk.consecutive_misses());
                if !missed {
                    chain_hs = Some(state.hs_trim);
                }
            } else {
                chain_hs = Some(state.hs_trim);
            }
        }
        let actuating = decision.trim_rate != 0.0 || controller.is_actuating();
        if cfg.faults.iter().any(|f| t >= f.t0) {
            event_seen = true;
        }
        if actuating || pilot.handling_event() {
            event_seen = true;
            last_event_t = last_event_t.max(t);
        }
        if event_seen && reference_ft.is_none() {
            reference_ft = Some(state.altitude_ft());
        }

        let (trimmed, clamped) = dynamics::apply_trim_rate(&state, decision.trim_rate + pc.trim_crank_rate, dt, params);
        uncommanded = decision.trim_rate != 0.0;
        let controls = ControlInputs {
            elevator: pilot_elevator,
            throttle: pc.throttle.clamp(0.0, 1.0),
            bank: pc.bank,
            flaps_up: pc.flaps_up,
        };
        let next = match dynamics::step(&trimmed, &controls, params, dt) {
            Ok(s) if s.is_finite() => s,
            Ok(_) => {
                verdict = Some(Verdict::Aborted);
                diagnostic = Some(SimError::Diverged { t, detail: "non-finite state".into() }.to_string());
                break;
            }
            Err(e) => {
                verdict = Some(Verdict::Aborted);
                diagnostic = Some(e.to_string());
                break;
            }
        };
        state = next;
        steps += 1;
        airborne |= !state.on_ground && state.altitude > 3.0;
        let alt = state.altitude_ft();
        if airborne && (event_seen || cfg.faults.is_empty()) {
            min_alt = min_alt.min(alt);
        }

        let holding = classify_recovery(&state, cfg, reference_ft, event_seen, last_event_t, actuating);
        if holding {
            let since = *held_since.get_or_insert(state.t);
            if state.t - since >= crit.hold - 1e-9 {
                verdict.get_or_insert(Verdict::Recovered);
            }
        } else {
            held_since = None;
        }

        let mut flags = 0;
        if decision.command.is_some() {
            flags |= FLAG_MCAS_FIRED;
        }
        if decision.trim_rate != 0.0 {
            flags |= FLAG_MCAS_ACTUATING;
        }
        if clamped {
            flags |= FLAG_HS_CLAMPED;
        }
        if pilot.handling_event() {
            flags |= FLAG_PILOT_EVENT;
        }
        if holding {
            flags |= FLAG_RECOVERY_HOLDING;
        }
        recorder.push(TraceRow {
            t: state.t,
            altitude_ft: alt,
            ias_kts: state.ias_kts(),
            aoa_true: state.alpha,
            aoa_left: left.aoa,
            aoa_right: right.aoa,
            aoa_sads: decision.sads_aoa,
            pitch: state.theta,
            hs_trim: state.hs_trim,
            elevator: pilot_elevator,
            mcas_cmd: decision.trim_rate,
            pilot_crank: pc.trim_crank_rate,
            verdict_flags: flags,
        })?;

        if airborne && state.altitude <= 0.0 {
            let gentle = -state.vertical_speed_fpm() < crit.touchdown_sink;
            if cfg.maneuver.allows_touchdown() && gentle {
                verdict.get_or_insert(Verdict::Recovered);
            } else {
                verdict = Some(Verdict::Crashed);
            }
            break;
        }
        if cfg.faults.is_empty() && !event_seen && pilot.completed() {
            verdict.get_or_insert(Verdict::Recovered);
        }
        if verdict.is_some() && opts.early_stop {
            break;
        }
    }

    let (trace_hash, trace) = recorder.finish()?;
    Ok(SimOutcome {
        verdict: verdict.unwrap_or(Verdict::Timeout),
        min_altitude_ft: if min_alt.is_finite() { min_alt } else { 0.0 },
        mcas_activation_count: controller.activations(),
        consecutive_soft_deadline_misses: max_misses,
        trace_hash,
        end_t: state.t,
        steps,
        first_activation_t,
        analytic,
        diagnostic,
        trace,
    })
}

/// Deadline verdict for undoing one activation, seeded from the state at the
/// moment it fires. `None` when the closed form cannot be evaluated.
fn analytic_check(s: &AircraftState, p: &AirframeParams, cfg: &ScenarioConfig, cmd: &TrimCommand) -> Option<AnalyticCheck> {
    let fall = FallParams {
        mass: p.mass,
        thrust: s.thrust,
        climb_angle: s.gamma.to_radians(),
        rho: atmosphere::density(s.altitude),
        area: p.wing_area,
        cd: p.drag_coefficient(s.alpha, s.flaps_up),
        cl: p.lift_coefficient(s.alpha, s.flaps_up),
        g: p.gravity,
    };
    let action = timing::tau_action(cmd.total_deflection, cfg.pilot.rpd, cfg.pilot.crank_rps);
    let tau = action.map(|a| a + cfg.pilot.tau_sensing);
    let bound = timing::recovery_deadline(
        s.altitude.max(0.0),
        -s.vertical_speed(),
        &fall,
        tau,
        Some(s.t),
        cfg.mcas.cooldown,
        s.t,
    )
    .ok()?;
    let verdict = timing::is_recoverable(s.t, cfg.pilot.tau_sensing, action, &bound);
    Some(AnalyticCheck {
        verdict,
        altitude_deadline: bound.altitude_deadline,
        hard_infeasible: verdict.tau.map_or(true, |tau| s.t + tau > bound.altitude_deadline),
    })
}

fn classify_recovery(
    s: &AircraftState,
    cfg: &ScenarioConfig,
    reference_ft: Option<f64>,
    event_seen: bool,
    last_event_t: f64,
    actuating: bool,
) -> bool {
    let Some(reference) = reference_ft else {
        return false;
    };
    if !event_seen || actuating || s.t < last_event_t || s.on_ground || cfg.maneuver.allows_touchdown() {
        return false;
    }
    let crit = &cfg.recovery;
    (s.altitude_ft() - reference).abs() <= crit.altitude_band
        && s.alpha.abs() < cfg.airframe.stall_alpha
        && s.vertical_speed_fpm().abs() < crit.max_sink
}
