//! End-to-end acceptance checks. Each check prints one PASS/FAIL line straight
//! to stderr so the lines show up even when test output is captured.

use std::io::Write;
use std::time::{Duration, Instant};

use mcas_sim::controllers::McasVariant;
use mcas_sim::dynamics::{step, trim_from, AircraftState, AirframeParams, ControlInputs, TrimCondition};
use mcas_sim::harness::grid::{safe_state_grid, Axis};
use mcas_sim::harness::suites::*;
use mcas_sim::harness::sweep::{find_boundary, BoundaryKind, BoundaryResult};
use mcas_sim::harness::{run_scenario, run_scenario_with, RunOptions, ScenarioConfig, Verdict};
use mcas_sim::sads::arbitrate;
use mcas_sim::sensing::{Channel, FaultKind, Side, Target};
use mcas_sim::timing::{falling_velocity, required_rps, terminal_velocity, FallParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REQUIRED_RPS: f64 = 4.0909;
const RPS_TOL: f64 = 1e-3;
const DESK_TOL_FRAC: f64 = 1e-2;
const DESK_PRESCAN: usize = 9;
const SUITE_BUDGET: Duration = Duration::from_secs(600);
const STALL_BUDGET: Duration = Duration::from_secs(300);
const GRID_BUDGET: Duration = Duration::from_secs(600);
const CORPUS_BUDGET: Duration = Duration::from_secs(900);
const MIN_STALL_GAP: f64 = 0.20;
const RK4_RATIO: f64 = 12.0;
const TRIM_DRIFT: f64 = 1e-4;
const FALL_TOL: f64 = 0.1;
const TERMINAL_TOL: f64 = 1e-9;
const DETERMINISM_CONFIGS: usize = 100;

struct Check {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Check {
    Check { passed, detail: detail.into() }
}

fn desk(spec: mcas_sim::harness::sweep::SweepSpec) -> mcas_sim::harness::sweep::SweepSpec {
    let mut s = spec.with_relative_tolerance(DESK_TOL_FRAC);
    s.prescan = DESK_PRESCAN;
    s
}

fn crank_constant() -> Check {
    let got = required_rps(2.5, 18.0, 11.0);
    check((got - REQUIRED_RPS).abs() <= RPS_TOL, format!("required_rps = {got:.5} (want {REQUIRED_RPS} +/- {RPS_TOL})"))
}

fn fault_suites() -> (Check, Option<BoundaryResult>) {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    let mut sudden_value = None;
    for variant in McasVariant::ALL {
        for suite in Suite::ALL {
            let spec = desk(suite.sweep(variant));
            assert_eq!(spec.template.dt, 1.0 / 30.0);
            match find_boundary(&spec) {
                Ok(r) => {
                    let good = match variant {
                        McasVariant::McasOld => r.boundary().is_some(),
                        _ => r.result == BoundaryKind::NoFailure,
                    };
                    if !good {
                        ok = false;
                        notes.push(format!("{} {}: {:?}", variant.name(), suite.name(), r.result));
                    }
                    if variant == McasVariant::McasOld && suite == Suite::SuddenValue {
                        sudden_value = Some(r);
                    }
                }
                Err(e) => {
                    ok = false;
                    notes.push(format!("{} {}: {e}", variant.name(), suite.name()));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= SUITE_BUDGET;
    let detail = if notes.is_empty() {
        format!("old bounded in all 9 suites, new and SA never fail ({elapsed:.1?})")
    } else {
        format!("{} ({elapsed:.1?})", notes.join("; "))
    };
    (check(ok, detail), sudden_value)
}

fn sudden_value_threshold(r: Option<BoundaryResult>) -> Check {
    let Some(r) = r else {
        return check(false, "no sudden-value result");
    };
    let tol = r.tolerance;
    match r.boundary() {
        Some(b) => check(
            (17.0..=17.0 + tol).contains(&b),
            format!("boundary {b:.4} deg, want [17, {:.4}]", 17.0 + tol),
        ),
        None => check(false, format!("{:?}", r.result)),
    }
}

fn correlated() -> Check {
    let new = run_scenario(&correlated_fault(McasVariant::McasNew)).unwrap();
    let sa = run_scenario(&correlated_fault(McasVariant::SaMcas)).unwrap();
    check(
        new.mcas_activation_count >= 1 && sa.mcas_activation_count == 0 && sa.verdict == Verdict::Recovered,
        format!(
            "new {} activation(s); SA {} activation(s), {:?}",
            new.mcas_activation_count, sa.mcas_activation_count, sa.verdict
        ),
    )
}

/// Largest recovered value of a sweep that fails above it.
fn bound(spec: mcas_sim::harness::sweep::SweepSpec) -> (f64, f64) {
    let r = find_boundary(&spec).unwrap();
    (r.max_recoverable().unwrap_or(f64::NAN), r.tolerance)
}

fn stall_reaction() -> Check {
    let start = Instant::now();
    let (old, tol) = bound(desk(stall_recovery_sweep(McasVariant::McasOld)));
    let (new, _) = bound(desk(stall_recovery_sweep(McasVariant::McasNew)));
    let (sa, _) = bound(desk(stall_recovery_sweep(McasVariant::SaMcas)));
    let gap = (old - new) / old;
    let elapsed = start.elapsed();
    check(
        new < old && (old - sa).abs() <= tol && gap >= MIN_STALL_GAP && elapsed <= STALL_BUDGET,
        format!("new {new:.3} s, old {old:.3} s, SA {sa:.3} s, gap {:.0}% ({elapsed:.1?})", gap * 100.0),
    )
}

fn stall_pitch() -> Check {
    let (old, tol) = bound(desk(stall_pitch_sweep(McasVariant::McasOld)));
    let (new, _) = bound(desk(stall_pitch_sweep(McasVariant::McasNew)));
    let (sa, _) = bound(desk(stall_pitch_sweep(McasVariant::SaMcas)));
    check(
        new < old && (old - sa).abs() <= tol,
        format!("new {new:.2} deg, old {old:.2} deg, SA {sa:.2} deg"),
    )
}

fn runaway() -> Check {
    let cfg = runaway_scenario(McasVariant::McasOld);
    assert_eq!(cfg.pilot.tau_sensing, 5.0);
    let o = run_scenario(&cfg).unwrap();
    check(
        o.mcas_activation_count >= 3 && o.verdict == Verdict::Crashed,
        format!("{} activations, {:?} at t = {:.1} s", o.mcas_activation_count, o.verdict, o.end_t),
    )
}

fn rps_invariance() -> Check {
    let start = Instant::now();
    let g = safe_state_grid(
        &stall_template(McasVariant::McasOld, 50.0),
        Axis::new(0.1, 7.0, 12),
        Axis::new(0.1, 4.0, 12),
    )
    .unwrap();
    let mut bad = Vec::new();
    for (i, &r) in g.reactions.iter().enumerate() {
        let first = g.cell(i, 0).verdict;
        let uniform = (0..g.rps.len()).all(|j| g.cell(i, j).verdict == first && first.is_some());
        if r <= 5.0 && !uniform {
            bad.push(r);
        }
    }
    let elapsed = start.elapsed();
    check(
        bad.is_empty() && elapsed <= GRID_BUDGET,
        format!("12x12 grid, RPS-dependent rows at reaction <= 5 s: {bad:?} ({elapsed:.1?})"),
    )
}

fn max_rel_diff(a: &AircraftState, b: &AircraftState) -> f64 {
    [
        (a.airspeed - b.airspeed) / 100.0,
        a.gamma - b.gamma,
        (a.altitude - b.altitude) / 1000.0,
        a.theta - b.theta,
        a.q - b.q,
    ]
    .iter()
    .fold(0.0_f64, |m, d| m.max(d.abs()))
}

fn numerics() -> Check {
    let p = AirframeParams::b737_class();
    let s0 = trim_from(
        &TrimCondition {
            altitude: 1524.0,
            airspeed: 110.0,
            climb_angle: 0.0,
            flaps_up: true,
        },
        &p,
    )
    .unwrap();
    let throttle = s0.thrust / p.max_thrust;

    let pushed = ControlInputs {
        elevator: -0.05,
        ..ControlInputs::neutral(throttle, true)
    };
    let run = |dt: f64| {
        let mut x = s0;
        for _ in 0..(1.0 / dt).round() as usize {
            x = step(&x, &pushed, &p, dt).unwrap();
        }
        x
    };
    let reference = run(1e-4);
    let ratio = max_rel_diff(&run(0.1), &reference) / max_rel_diff(&run(0.05), &reference);

    let drift = max_rel_diff(&s0, &step(&s0, &ControlInputs::neutral(throttle, true), &p, 1.0 / 60.0).unwrap());

    let fall = FallParams {
        mass: 65_000.0,
        thrust: 40_000.0,
        climb_angle: (-20.0_f64).to_radians(),
        rho: 1.1,
        area: 127.0,
        cd: 0.03,
        cl: 0.2,
        g: 9.806_65,
    };
    let accel = |v: f64| fall.net_force(v) / fall.mass;
    let (mut v, h) = (20.0, 1e-3);
    let mut fall_err: f64 = 0.0;
    for i in 1..=60_000 {
        let k1 = accel(v);
        let k2 = accel(v + 0.5 * h * k1);
        let k3 = accel(v + 0.5 * h * k2);
        let k4 = accel(v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        fall_err = fall_err.max((v - falling_velocity(20.0, i as f64 * h, &fall).unwrap()).abs());
    }
    let vt = terminal_velocity(&fall).unwrap();
    let residual = (fall.net_force(vt) / (fall.mass * fall.g)).abs();

    let arbiter_ok = arbiter_table_holds();
    check(
        ratio >= RK4_RATIO && drift < TRIM_DRIFT && fall_err < FALL_TOL && residual < TERMINAL_TOL && arbiter_ok,
        format!(
            "rk4 ratio {ratio:.1}, trim drift {drift:.1e}, fall error {fall_err:.1e} m/s, terminal residual {residual:.1e}, arbiter table {}",
            if arbiter_ok { "ok" } else { "mismatch" }
        ),
    )
}

fn arbiter_table_holds() -> bool {
    let eps = 0.5;
    let s = 4.0;
    let classes = [Some(4.2), Some(11.0), None];
    let mut ok = true;
    for l in classes {
        for r in classes {
            for sads in [Some(s), Some(-30.0), None] {
                let close = |v: Option<f64>| match (v, sads) {
                    (Some(v), Some(x)) => (v - x).abs() < eps,
                    _ => false,
                };
                let want = if close(l) {
                    Some((l.unwrap(), Side::Left))
                } else if close(r) {
                    Some((r.unwrap(), Side::Right))
                } else {
                    None
                };
                let got = arbitrate(Channel::Aoa, l, r, sads, eps).map(|m| (m.value, m.side));
                ok &= got == want;
            }
        }
    }
    ok
}

fn corpus() -> Check {
    let start = Instant::now();
    let scenarios = validation_corpus();
    let takeoffs = scenarios.iter().filter(|c| c.name.starts_with("takeoff")).count();
    let landings = scenarios.iter().filter(|c| c.name.starts_with("landing")).count();
    let rows = validate_maneuvers(&scenarios).unwrap();
    let passed = rows.iter().filter(|r| r.passed).count();
    let elapsed = start.elapsed();
    check(
        takeoffs == 225 && landings == 100 && passed == rows.len() && elapsed <= CORPUS_BUDGET,
        format!("{passed}/{} ({takeoffs} takeoffs, {landings} landings, {elapsed:.1?})", rows.len()),
    )
}

fn random_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let variant = McasVariant::ALL[rng.gen_range(0..3)];
    let mut cfg = match rng.gen_range(0..4) {
        0 => {
            let kinds = [
                FaultKind::Sudden { delta: rng.gen_range(0.0..40.0) },
                FaultKind::Delta { delta: rng.gen_range(0.0..40.0) },
                FaultKind::GradualLinear { a: rng.gen_range(0.0..3.0) },
                FaultKind::GradualLog { a: rng.gen_range(0.0..500.0) },
                FaultKind::GradualQuadratic { a: rng.gen_range(0.0..3.0), b: 0.0 },
            ];
            let mut c = fault_template(variant, kinds[rng.gen_range(0..kinds.len())]);
            c.faults[0].target = [Target::Left, Target::Right, Target::Both][rng.gen_range(0..3)];
            c
        }
        1 => stall_template(variant, rng.gen_range(20.0..90.0)),
        2 => {
            let corpus = validation_corpus();
            ScenarioConfig {
                variant,
                ..corpus[rng.gen_range(0..corpus.len())].clone()
            }
        }
        _ => runaway_scenario(variant),
    };
    cfg.seed = rng.gen();
    cfg.pilot.tau_sensing = rng.gen_range(0.0..10.0);
    cfg.pilot.crank_rps = rng.gen_range(0.1..4.0);
    cfg.duration = cfg.duration.min(250.0);
    for f in &mut cfg.faults {
        f.t_end = f.t_end.min(cfg.duration);
    }
    cfg.dt = [1.0 / 30.0, 1.0 / 60.0][rng.gen_range(0..2)];
    cfg
}

fn determinism() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec1de);
    let configs: Vec<ScenarioConfig> = (0..DETERMINISM_CONFIGS).map(|_| random_config(&mut rng)).collect();
    let mut mismatches = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let a = run_scenario(cfg).unwrap();
        let b = run_scenario_with(&cfg.clone(), RunOptions { keep_trace: true, early_stop: true }).unwrap();
        if a.trace_hash != b.trace_hash || a.verdict != b.verdict {
            mismatches.push(i);
        }
    }
    check(
        mismatches.is_empty(),
        format!("{} randomized configs, mismatching: {mismatches:?}", configs.len()),
    )
}

#[test]
fn acceptance() {
    let (suites, sudden) = fault_suites();
    let results = [
        ("exact required crank speed", crank_constant()),
        ("single-sensor fault suites", suites),
        ("sudden-value boundary at activation threshold", sudden_value_threshold(sudden)),
        ("correlated both-sensor fault", correlated()),
        ("stall reaction-time ordering", stall_reaction()),
        ("stall pitch ordering", stall_pitch()),
        ("runaway stabilizer", runaway()),
        ("stall grid RPS invariance", rps_invariance()),
        ("numerical properties", numerics()),
        ("maneuver validation corpus", corpus()),
        ("determinism", determinism()),
    ];
    let mut err = std::io::stderr().lock();
    for (i, (name, c)) in results.iter().enumerate() {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(err, "{tag} [{:2}] {name}: {}", i + 1, c.detail).unwrap();
    }
    drop(err);
    let failed: Vec<&str> = results.iter().filter(|(_, c)| !c.passed).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
