use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::run::{run_scenario, Verdict};
use super::sweep::SweepSpec;
use crate::controllers::McasVariant;
use crate::error::Result;
use crate::pilot::Maneuver;
use crate::sensing::{Channel, FaultKind, FaultSpec, Target};

pub const FAULT_WINDOW: (f64, f64) = (100.0, 150.0);
pub const DESK_DT: f64 = 1.0 / 30.0;

/// Takeoff-then-climb flight used by every sensor-fault suite.
pub fn fault_template(variant: McasVariant, kind: FaultKind) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("takeoff-{}", variant.name()),
        maneuver: Maneuver::Takeoff {
            liftoff_ias: 170.0,
            transition_altitude: 1500.0,
            cruise_climb_ias: 220.0,
            level_off_altitude: 3000.0,
        },
        faults: vec![FaultSpec {
            kind,
            t0: FAULT_WINDOW.0,
            t_end: FAULT_WINDOW.1,
            target: Target::Left,
            channel: Channel::Aoa,
        }],
        variant,
        duration: 400.0,
        dt: DESK_DT,
        ..Default::default()
    }
}

/// Left vane stuck for the whole flight, with more altitude to lose.
pub fn runaway_scenario(variant: McasVariant) -> ScenarioConfig {
    let mut cfg = fault_template(variant, FaultKind::Sudden { delta: 18.0 });
    if let Maneuver::Takeoff { level_off_altitude, .. } = &mut cfg.maneuver {
        *level_off_altitude = 4000.0;
    }
    cfg.faults[0].t_end = cfg.duration;
    cfg.name = format!("runaway-{}", variant.name());
    cfg
}

/// Pilot-induced stall from level cruise.
pub fn stall_template(variant: McasVariant, target_pitch: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("stall-{}", variant.name()),
        maneuver: Maneuver::Stall {
            altitude: 10000.0,
            ias: 220.0,
            target_pitch,
            start_t: 20.0,
        },
        variant,
        duration: 300.0,
        dt: DESK_DT,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    SuddenValue,
    SuddenDuration,
    SuddenRecovery,
    DeltaValue,
    DeltaDuration,
    DeltaRecovery,
    GradualLinear,
    GradualLog,
    GradualQuadratic,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::SuddenValue,
        Suite::SuddenDuration,
        Suite::SuddenRecovery,
        Suite::DeltaValue,
        Suite::DeltaDuration,
        Suite::DeltaRecovery,
        Suite::GradualLinear,
        Suite::GradualLog,
        Suite::GradualQuadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::SuddenValue => "sudden_value",
            Suite::SuddenDuration => "sudden_duration",
            Suite::SuddenRecovery => "sudden_recovery",
            Suite::DeltaValue => "delta_value",
            Suite::DeltaDuration => "delta_duration",
            Suite::DeltaRecovery => "delta_recovery",
            Suite::GradualLinear => "gradual_linear",
            Suite::GradualLog => "gradual_log",
            Suite::GradualQuadratic => "gradual_quadratic",
        }
    }

    /// Sweep definition with the default bisection tolerance.
    pub fn sweep(self, variant: McasVariant) -> SweepSpec {
        let sudden = FaultKind::Sudden { delta: 18.0 };
        let delta = FaultKind::Delta { delta: 18.0 };
        let (kind, path, lo, hi) = match self {
            Suite::SuddenValue => (sudden, "faults[0].delta", 0.0, 90.0),
            Suite::SuddenDuration => (sudden, "faults[0].t_end", 110.0, 180.0),
            Suite::SuddenRecovery => (sudden, "pilot.tau_sensing", 0.0, 10.0),
            Suite::DeltaValue => (delta, "faults[0].delta", 0.0, 90.0),
            Suite::DeltaDuration => (delta, "faults[0].t_end", 110.0, 180.0),
            Suite::DeltaRecovery => (delta, "pilot.tau_sensing", 0.0, 10.0),
            Suite::GradualLinear => (FaultKind::GradualLinear { a: 1.0 }, "faults[0].a", 0.0, 3.0),
            Suite::GradualLog => (FaultKind::GradualLog { a: 100.0 }, "faults[0].a", 0.0, 500.0),
            Suite::GradualQuadratic => (FaultKind::GradualQuadratic { a: 1.0, b: 0.0 }, "faults[0].a", 0.0, 3.0),
        };
        let mut t = fault_template(variant, kind);
        t.name = format!("{}-{}", self.name(), variant.name());
        SweepSpec::new(t, path, lo, hi)
    }
}

/// Reaction-time sweep at a fixed induced pitch.
pub fn stall_recovery_sweep(variant: McasVariant) -> SweepSpec {
    SweepSpec::new(stall_template(variant, 50.0), "pilot.tau_sensing", 0.0, 10.0)
}

/// Induced-pitch sweep at the default reaction time.
pub fn stall_pitch_sweep(variant: McasVariant) -> SweepSpec {
    SweepSpec::new(stall_template(variant, 50.0), "maneuver.target_pitch", 20.0, 90.0)
}

/// Both vanes share the same error, which defeats cross-checking the pair.
pub fn correlated_fault(variant: McasVariant) -> ScenarioConfig {
    let mut cfg = fault_template(variant, FaultKind::Sudden { delta: 18.0 });
    cfg.faults[0].target = Target::Both;
    cfg.name = format!("correlated-{}", variant.name());
    cfg
}

/// Scripted maneuvers spanning the validation parameter ranges.
pub fn validation_corpus() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for liftoff in [160.0, 180.0, 200.0] {
        for transition in [2000.0, 3000.0, 4000.0] {
            for climb in [220.0, 240.0, 260.0, 280.0, 300.0] {
                for level in [5000.0, 7500.0, 10000.0, 12500.0, 15000.0] {
                    out.push(ScenarioConfig {
                        name: format!("takeoff-{liftoff}-{transition}-{climb}-{level}"),
                        maneuver: Maneuver::Takeoff {
                            liftoff_ias: liftoff,
                            transition_altitude: transition,
                            cruise_climb_ias: climb,
                            level_off_altitude: level,
                        },
                        duration: 900.0,
                        dt: DESK_DT,
                        ..Default::default()
                    });
                }
            }
        }
    }
    for altitude in [1000.0, 2125.0, 3250.0, 4375.0, 5500.0] {
        for descent in [600.0, 720.0, 840.0, 960.0] {
            for ias in [130.0, 135.0, 140.0, 145.0, 150.0] {
                out.push(ScenarioConfig {
                    name: format!("landing-{altitude}-{descent}-{ias}"),
                    maneuver: Maneuver::Landing {
                        initial_altitude: altitude,
                        descent_rate: descent,
                        approach_ias: ias,
                    },
                    duration: 900.0,
                    dt: DESK_DT,
                    ..Default::default()
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub name: String,
    pub verdict: Verdict,
    pub passed: bool,
    pub end_t: f64,
    pub trace_hash: u64,
}

/// Runs each scripted maneuver; a run passes when it completes its script
/// (or touches down gently for landings).
pub fn validate_maneuvers(corpus: &[ScenarioConfig]) -> Result<Vec<ValidationRow>> {
    corpus
        .par_iter()
        .map(|cfg| {
            let o = run_scenario(cfg)?;
            Ok(ValidationRow {
                name: cfg.name.clone(),
                verdict: o.verdict,
                passed: o.verdict == Verdict::Recovered,
                end_t: o.end_t,
                trace_hash: o.trace_hash,
            })
        })
        .collect()
}
