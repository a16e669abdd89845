//! Left/right ADIRU air-data frames with Gaussian noise and scheduled faults.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::AircraftState;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn index(self) -> u64 {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Aoa,
    Ias,
    Mach,
    Altitude,
    Gforce,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::Aoa, Channel::Ias, Channel::Mach, Channel::Altitude, Channel::Gforce];

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Left,
    Right,
    Both,
}

impl Target {
    pub fn covers(self, side: Side) -> bool {
        matches!(
            (self, side),
            (Target::Both, _) | (Target::Left, Side::Left) | (Target::Right, Side::Right)
        )
    }
}

/// One side's sensed air data. Angles in degrees, IAS in knots, altitude in feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirDataFrame {
    pub side: Side,
    pub aoa: f64,
    pub ias: f64,
    pub mach: f64,
    pub altitude: f64,
    pub gforce: f64,
    pub t: f64,
}

impl AirDataFrame {
    pub fn from_truth(state: &AircraftState, side: Side) -> Self {
        Self {
            side,
            aoa: state.alpha,
            ias: state.ias_kts(),
            mach: state.mach(),
            altitude: state.altitude_ft(),
            gforce: state.load_factor,
            t: state.t,
        }
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Aoa => self.aoa,
            Channel::Ias => self.ias,
            Channel::Mach => self.mach,
            Channel::Altitude => self.altitude,
            Channel::Gforce => self.gforce,
        }
    }

    pub fn set(&mut self, channel: Channel, value: f64) {
        match channel {
            Channel::Aoa => self.aoa = value,
            Channel::Ias => self.ias = value,
            Channel::Mach => self.mach = value,
            Channel::Altitude => self.altitude = value,
            Channel::Gforce => self.gforce = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        Channel::ALL.iter().all(|c| self.get(*c).is_finite()) && self.t.is_finite()
    }
}

/// Error-model shapes. Gradual kinds add `f(t - t0)` to the value latched at onset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultKind {
    Sudden { delta: f64 },
    Delta { delta: f64 },
    GradualLinear { a: f64 },
    GradualQuadratic { a: f64, b: f64 },
    GradualLog { a: f64 },
}

impl FaultKind {
    /// Offset function of elapsed time since onset. The log kind is shifted by
    /// one second so it vanishes at onset.
    fn offset(&self, elapsed: f64) -> f64 {
        match *self {
            FaultKind::Sudden { delta } | FaultKind::Delta { delta } => delta,
            FaultKind::GradualLinear { a } => a * elapsed,
            FaultKind::GradualQuadratic { a, b } => a * elapsed * elapsed + b * elapsed,
            FaultKind::GradualLog { a } => a * (elapsed + 1.0).ln(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FaultKind::Sudden { .. } => "sudden",
            FaultKind::Delta { .. } => "delta",
            FaultKind::GradualLinear { .. } => "gradual_linear",
            FaultKind::GradualQuadratic { .. } => "gradual_quadratic",
            FaultKind::GradualLog { .. } => "gradual_log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFaultSpec", into = "RawFaultSpec")]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub t0: f64,
    pub t_end: f64,
    pub target: Target,
    pub channel: Channel,
}

impl FaultSpec {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t_end
    }

    fn overlaps(&self, other: &FaultSpec) -> bool {
        let shares_side = [Side::Left, Side::Right]
            .iter()
            .any(|s| self.target.covers(*s) && other.target.covers(*s));
        shares_side && self.channel == other.channel && self.t0 <= other.t_end && other.t0 <= self.t_end
    }

    /// Mutable access to the kind's primary coefficient (delta or a).
    pub fn primary_coefficient_mut(&mut self) -> &mut f64 {
        match &mut self.kind {
            FaultKind::Sudden { delta } | FaultKind::Delta { delta } => delta,
            FaultKind::GradualLinear { a } | FaultKind::GradualQuadratic { a, .. } | FaultKind::GradualLog { a } => a,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFaultSpec {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    t0: f64,
    t_end: f64,
    target: Target,
    #[serde(default = "default_channel")]
    channel: Channel,
}

fn default_channel() -> Channel {
    Channel::Aoa
}

impl TryFrom<RawFaultSpec> for FaultSpec {
    type Error = String;

    fn try_from(r: RawFaultSpec) -> Result<Self, String> {
        let need = |name: &str, v: Option<f64>| v.ok_or_else(|| format!("`{}` requires coefficient `{name}`", r.kind));
        let forbid = |name: &str, v: Option<f64>| match v {
            Some(_) => Err(format!("`{}` does not take coefficient `{name}`", r.kind)),
            None => Ok(()),
        };
        let kind = match r.kind.as_str() {
            "sudden" | "delta" => {
                forbid("a", r.a)?;
                forbid("b", r.b)?;
                let delta = need("delta", r.delta)?;
                if r.kind == "sudden" {
                    FaultKind::Sudden { delta }
                } else {
                    FaultKind::Delta { delta }
                }
            }
            "gradual_linear" | "gradual_log" => {
                forbid("delta", r.delta)?;
                forbid("b", r.b)?;
                let a = need("a", r.a)?;
                if r.kind == "gradual_linear" {
                    FaultKind::GradualLinear { a }
                } else {
                    FaultKind::GradualLog { a }
                }
            }
            "gradual_quadratic" => {
                forbid("delta", r.delta)?;
                FaultKind::GradualQuadratic {
                    a: need("a", r.a)?,
                    b: need("b", r.b)?,
                }
            }
            other => return Err(format!("unknown fault kind `{other}`")),
        };
        if !(r.t0 < r.t_end) {
            return Err(format!("t0 ({}) must be before t_end ({})", r.t0, r.t_end));
        }
        Ok(FaultSpec {
            kind,
            t0: r.t0,
            t_end: r.t_end,
            target: r.target,
            channel: r.channel,
        })
    }
}

impl From<FaultSpec> for RawFaultSpec {
    fn from(f: FaultSpec) -> Self {
        let (delta, a, b) = match f.kind {
            FaultKind::Sudden { delta } | FaultKind::Delta { delta } => (Some(delta), None, None),
            FaultKind::GradualLinear { a } | FaultKind::GradualLog { a } => (None, Some(a), None),
            FaultKind::GradualQuadratic { a, b } => (None, Some(a), Some(b)),
        };
        RawFaultSpec {
            kind: f.kind.name().to_string(),
            delta,
            a,
            b,
            t0: f.t0,
            t_end: f.t_end,
            target: f.target,
            channel: f.channel,
        }
    }
}

/// Rejects fault lists where two faults hit the same side and channel at once.
/// Errors name the offending entry as `faults[i]`.
pub fn validate_faults(faults: &[FaultSpec]) -> Result<()> {
    for (i, f) in faults.iter().enumerate() {
        for (j, g) in faults.iter().enumerate().skip(i + 1) {
            if f.overlaps(g) {
                return Err(SimError::config(
                    format!("faults[{j}]"),
                    format!("overlaps faults[{i}] on the same side and channel"),
                ));
            }
        }
    }
    Ok(())
}

/// Value of a faulted channel. `latched` is the sensor value at fault onset.
pub fn apply_fault(truth: f64, latched: f64, spec: &FaultSpec, t: f64) -> f64 {
    let elapsed = (t - spec.t0).max(0.0);
    match spec.kind {
        FaultKind::Sudden { delta } => delta,
        FaultKind::Delta { delta } => truth + delta,
        kind => latched + kind.offset(elapsed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSigmas {
    pub aoa: f64,
    pub ias: f64,
    pub mach: f64,
    pub altitude: f64,
    pub gforce: f64,
}

impl Default for ChannelSigmas {
    fn default() -> Self {
        Self {
            aoa: 0.25,
            ias: 1.0,
            mach: 0.002,
            altitude: 10.0,
            gforce: 0.01,
        }
    }
}

impl ChannelSigmas {
    pub fn zero() -> Self {
        Self {
            aoa: 0.0,
            ias: 0.0,
            mach: 0.0,
            altitude: 0.0,
            gforce: 0.0,
        }
    }

    pub fn get(&self, c: Channel) -> f64 {
        match c {
            Channel::Aoa => self.aoa,
            Channel::Ias => self.ias,
            Channel::Mach => self.mach,
            Channel::Altitude => self.altitude,
            Channel::Gforce => self.gforce,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: ChannelSigmas,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: ChannelSigmas::default(),
            seed: 0x5eed,
        }
    }
}

impl NoiseSpec {
    pub fn silent() -> Self {
        Self {
            sigma: ChannelSigmas::zero(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in Channel::ALL {
            let s = self.sigma.get(c);
            if !(s >= 0.0 && s.is_finite()) {
                return Err(SimError::config(
                    format!("noise.sigma.{}", channel_name(c)),
                    "sigma must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }
}

pub fn channel_name(c: Channel) -> &'static str {
    match c {
        Channel::Aoa => "aoa",
        Channel::Ias => "ias",
        Channel::Mach => "mach",
        Channel::Altitude => "altitude",
        Channel::Gforce => "gforce",
    }
}

/// Standard normal sample keyed by (seed, side, channel, step). Stateless:
/// the ChaCha stream is selected by side/channel and positioned by step.
pub fn keyed_normal(seed: u64, side: Side, channel: Channel, step: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(side.index() * 16 + channel.index());
    rng.set_word_pos(u128::from(step) * 16);
    StandardNormal.sample(&mut rng)
}

/// Onset values captured per (fault, side) the first time a fault is active.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultLatches {
    values: Vec<[Option<f64>; 2]>,
}

impl FaultLatches {
    pub fn new(n_faults: usize) -> Self {
        Self {
            values: vec![[None, None]; n_faults],
        }
    }
}

fn noisy_frame(state: &AircraftState, noise: &NoiseSpec, side: Side, step: u64) -> AirDataFrame {
    let mut f = AirDataFrame::from_truth(state, side);
    for c in Channel::ALL {
        let sigma = noise.sigma.get(c);
        if sigma > 0.0 {
            let v = f.get(c) + sigma * keyed_normal(noise.seed, side, c, step);
            f.set(c, v);
        }
    }
    f
}

/// Produces the (left, right) frames for one sample.
pub fn measure(
    state: &AircraftState,
    noise: &NoiseSpec,
    faults: &[FaultSpec],
    latches: &mut FaultLatches,
    step: u64,
) -> (AirDataFrame, AirDataFrame) {
    if latches.values.len() != faults.len() {
        *latches = FaultLatches::new(faults.len());
    }
    let t = state.t;
    let mut frames = [
        noisy_frame(state, noise, Side::Left, step),
        noisy_frame(state, noise, Side::Right, step),
    ];
    for (fi, fault) in faults.iter().enumerate() {
        if !fault.is_active(t) {
            continue;
        }
        for frame in frames.iter_mut() {
            if !fault.target.covers(frame.side) {
                continue;
            }
            let sensed = frame.get(fault.channel);
            let latch = &mut latches.values[fi][frame.side.index() as usize];
            let latched = *latch.get_or_insert(sensed);
            frame.set(fault.channel, apply_fault(sensed, latched, fault, t));
        }
    }
    let [left, right] = frames;
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{trim_from, AirframeParams, TrimCondition};

    fn spec(kind: FaultKind, target: Target) -> FaultSpec {
        FaultSpec {
            kind,
            t0: 100.0,
            t_end: 150.0,
            target,
            channel: Channel::Aoa,
        }
    }

    fn cruise() -> AircraftState {
        trim_from(
            &TrimCondition {
                altitude: 1524.0,
                airspeed: 110.0,
                climb_angle: 0.0,
                flaps_up: true,
            },
            &AirframeParams::b737_class(),
        )
        .unwrap()
    }

    #[test]
    fn sudden_replaces_value() {
        let f = spec(FaultKind::Sudden { delta: 18.0 }, Target::Left);
        assert_eq!(apply_fault(2.3, 2.3, &f, 120.0), 18.0);
    }

    #[test]
    fn delta_offsets_value() {
        let f = spec(FaultKind::Delta { delta: 15.0 }, Target::Left);
        assert!((apply_fault(2.3, 2.3, &f, 120.0) - 17.3).abs() < 1e-12);
    }

    #[test]
    fn gradual_linear_grows_from_latch() {
        let f = spec(FaultKind::GradualLinear { a: 1.5 }, Target::Left);
        assert!((apply_fault(5.0, 2.0, &f, 110.0) - 17.0).abs() < 1e-12);
    }

    #[test]
    fn gradual_kinds_start_at_latch() {
        for kind in [
            FaultKind::GradualLinear { a: 2.0 },
            FaultKind::GradualQuadratic { a: 2.0, b: 1.0 },
            FaultKind::GradualLog { a: 300.0 },
        ] {
            let f = spec(kind, Target::Left);
            assert_eq!(apply_fault(9.0, 3.25, &f, 100.0), 3.25);
        }
    }

    #[test]
    fn gradual_log_is_natural_log_of_shifted_time() {
        let f = spec(FaultKind::GradualLog { a: 10.0 }, Target::Left);
        let v = apply_fault(0.0, 1.0, &f, 100.0 + std::f64::consts::E - 1.0);
        assert!((v - 11.0).abs() < 1e-12);
    }

    #[test]
    fn fault_spec_json_requires_matching_coefficients() {
        let ok: FaultSpec =
            serde_json::from_str(r#"{"kind":"delta","delta":15,"t0":100,"t_end":150,"target":"left"}"#).unwrap();
        assert_eq!(ok.kind, FaultKind::Delta { delta: 15.0 });
        assert_eq!(ok.channel, Channel::Aoa);
        let missing = serde_json::from_str::<FaultSpec>(r#"{"kind":"gradual_quadratic","a":1,"t0":0,"t_end":1,"target":"left"}"#);
        assert!(missing.is_err());
        let extra = serde_json::from_str::<FaultSpec>(r#"{"kind":"sudden","delta":1,"a":2,"t0":0,"t_end":1,"target":"left"}"#);
        assert!(extra.is_err());
        let backwards = serde_json::from_str::<FaultSpec>(r#"{"kind":"sudden","delta":1,"t0":5,"t_end":1,"target":"left"}"#);
        assert!(backwards.is_err());
    }

    #[test]
    fn fault_spec_serde_round_trip() {
        let f = spec(FaultKind::GradualQuadratic { a: 1.0, b: 0.0 }, Target::Both);
        let s = serde_json::to_string(&f).unwrap();
        let back: FaultSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn overlapping_faults_rejected() {
        let a = spec(FaultKind::Sudden { delta: 18.0 }, Target::Left);
        let mut b = spec(FaultKind::Delta { delta: 3.0 }, Target::Both);
        b.t0 = 140.0;
        b.t_end = 160.0;
        let err = validate_faults(&[a, b]).unwrap_err();
        assert!(err.to_string().contains("faults[1]"));
        let mut c = b;
        c.target = Target::Right;
        validate_faults(&[a, c]).unwrap();
    }

    #[test]
    fn zero_noise_no_faults_equals_truth() {
        let s = cruise();
        let mut latches = FaultLatches::default();
        let (l, r) = measure(&s, &NoiseSpec::silent(), &[], &mut latches, 7);
        assert_eq!(l.aoa, s.alpha);
        assert_eq!(l.ias, s.ias_kts());
        assert_eq!(l.gforce, s.load_factor);
        assert_eq!(Side::Left, l.side);
        assert_eq!((l.aoa, l.ias, l.mach, l.altitude, l.gforce), (r.aoa, r.ias, r.mach, r.altitude, r.gforce));
    }

    #[test]
    fn noise_is_keyed_and_reproducible() {
        let s = cruise();
        let noise = NoiseSpec::default();
        let run = || {
            let mut latches = FaultLatches::default();
            (0..50).map(|k| measure(&s, &noise, &[], &mut latches, k)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        let a = keyed_normal(1, Side::Left, Channel::Aoa, 3);
        assert_eq!(a.to_bits(), keyed_normal(1, Side::Left, Channel::Aoa, 3).to_bits());
        assert_ne!(a, keyed_normal(1, Side::Right, Channel::Aoa, 3));
        assert_ne!(a, keyed_normal(1, Side::Left, Channel::Ias, 3));
        assert_ne!(a, keyed_normal(1, Side::Left, Channel::Aoa, 4));
    }

    #[test]
    fn correlated_fault_hits_both_sides() {
        let mut s = cruise();
        s.t = 120.0;
        let f = spec(FaultKind::Sudden { delta: 18.0 }, Target::Both);
        let mut latches = FaultLatches::default();
        let (l, r) = measure(&s, &NoiseSpec::default(), &[f], &mut latches, 7200);
        assert_eq!(l.aoa, 18.0);
        assert_eq!(r.aoa, 18.0);
        assert!((l.aoa - r.aoa).abs() < 5.5);
    }

    #[test]
    fn fault_window_is_exact() {
        let noise = NoiseSpec::default();
        let f = spec(FaultKind::Delta { delta: 10.0 }, Target::Left);
        let mut s = cruise();
        for (t, active) in [(99.99, false), (100.0, true), (150.0, true), (150.01, false)] {
            s.t = t;
            let step = (t * 100.0) as u64;
            let mut l1 = FaultLatches::default();
            let mut l2 = FaultLatches::default();
            let (faulted, _) = measure(&s, &noise, &[f], &mut l1, step);
            let (clean, _) = measure(&s, &noise, &[], &mut l2, step);
            if active {
                assert!((faulted.aoa - clean.aoa - 10.0).abs() < 1e-12);
            } else {
                assert_eq!(faulted.aoa.to_bits(), clean.aoa.to_bits());
            }
        }
    }
}
