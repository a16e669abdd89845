use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controllers::{McasConfig, McasVariant};
use crate::dynamics::{AirframeParams, DEFAULT_DT, MAX_DT};
use crate::error::{Result, SimError};
use crate::pilot::{Maneuver, PilotGains, PilotResponseModel};
use crate::sads::SadsConfig;
use crate::sensing::{validate_faults, FaultSpec, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryCriteria {
    /// Allowed distance from the pre-event altitude, ft.
    pub altitude_band: f64,
    /// Maximum |vertical speed|, ft/min.
    pub max_sink: f64,
    /// Seconds the predicate must hold.
    pub hold: f64,
    /// Touchdown sink limit for landings, ft/min.
    pub touchdown_sink: f64,
}

impl Default for RecoveryCriteria {
    fn default() -> Self {
        Self {
            altitude_band: 500.0,
            max_sink: 500.0,
            hold: 10.0,
            touchdown_sink: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MkFirmConfig {
    pub m: usize,
    pub k: usize,
}

impl Default for MkFirmConfig {
    fn default() -> Self {
        Self { m: 3, k: 3 }
    }
}

/// A complete runnable experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub airframe: AirframeParams,
    pub maneuver: Maneuver,
    pub faults: Vec<FaultSpec>,
    pub noise: NoiseSpec,
    pub variant: McasVariant,
    pub mcas: McasConfig,
    pub sads: SadsConfig,
    pub pilot: PilotResponseModel,
    pub gains: PilotGains,
    pub recovery: RecoveryCriteria,
    pub mk_firm: MkFirmConfig,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            airframe: AirframeParams::default(),
            maneuver: Maneuver::default(),
            faults: Vec::new(),
            noise: NoiseSpec::default(),
            variant: McasVariant::McasOld,
            mcas: McasConfig::default(),
            sads: SadsConfig::default(),
            pilot: PilotResponseModel::default(),
            gains: PilotGains::default(),
            recovery: RecoveryCriteria::default(),
            mk_firm: MkFirmConfig::default(),
            duration: 400.0,
            dt: DEFAULT_DT,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(SimError::config("dt", format!("{} outside (0, {MAX_DT}]", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::config("duration", "must be positive"));
        }
        self.airframe
            .validate()
            .map_err(|e| SimError::config("airframe", e.to_string()))?;
        self.maneuver.validate()?;
        self.mcas.validate()?;
        self.sads.validate()?;
        self.pilot.validate()?;
        self.noise.validate()?;
        for (i, f) in self.faults.iter().enumerate() {
            if f.t0 < 0.0 {
                return Err(SimError::config(format!("faults[{i}].t0"), "must be >= 0"));
            }
            if f.t_end > self.duration {
                return Err(SimError::config(
                    format!("faults[{i}].t_end"),
                    format!("{} exceeds scenario duration {}", f.t_end, self.duration),
                ));
            }
        }
        validate_faults(&self.faults)?;
        if (self.pilot.rpd - self.airframe.rpd).abs() > 1e-12 {
            return Err(SimError::config("pilot.rpd", "must equal airframe.rpd"));
        }
        if self.mk_firm.m == 0 || self.mk_firm.k < self.mk_firm.m {
            return Err(SimError::config("mk_firm", "need 0 < m <= k"));
        }
        Ok(())
    }

    /// Parses and validates a JSON document, reporting the failing field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            SimError::config(if path == "." { String::new() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `dotted.path=value` overrides and re-validates.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for o in overrides {
            let (path, raw) = parse_override(o.as_ref())?;
            set_path(&mut v, &path, raw)?;
        }
        Self::from_value(v)
    }

    /// Sets one numeric parameter by path.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        set_path(&mut v, path, serde_json::json!(value))?;
        Self::from_value(v)
    }

    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).unwrap_or_default();
        super::trace::hash_bytes(text.as_bytes())
    }
}

pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (path, raw) = s
        .split_once('=')
        .ok_or_else(|| SimError::config(s, "override must look like path=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path.trim().to_string(), value))
}

enum Seg {
    Key(String),
    Index(usize),
}

fn segments(path: &str) -> Result<Vec<Seg>> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() && out.is_empty() && rest.is_empty() {
            return Err(SimError::config(path, "empty path"));
        }
        if !key.is_empty() {
            out.push(Seg::Key(key.to_string()));
        }
        while let Some(stripped) = rest.strip_prefix('[') {
            let end = stripped
                .find(']')
                .ok_or_else(|| SimError::config(path, "unclosed index"))?;
            let idx = stripped[..end]
                .parse()
                .map_err(|_| SimError::config(path, "index must be an integer"))?;
            out.push(Seg::Index(idx));
            rest = &stripped[end + 1..];
        }
    }
    Ok(out)
}

/// Replaces the value at `path` (e.g. `faults[0].t_end`) inside a JSON tree.
pub fn set_path(root: &mut Value, path: &str, new: Value) -> Result<()> {
    let segs = segments(path)?;
    let mut cur = root;
    for (i, seg) in segs.iter().enumerate() {
        let last = i + 1 == segs.len();
        cur = match seg {
            Seg::Key(k) => {
                let obj = cur
                    .as_object_mut()
                    .ok_or_else(|| SimError::config(path, format!("`{k}` is not inside an object")))?;
                if last {
                    obj.insert(k.clone(), new);
                    return Ok(());
                }
                obj.get_mut(k)
                    .ok_or_else(|| SimError::config(path, format!("no field `{k}`")))?
            }
            Seg::Index(idx) => {
                let arr = cur
                    .as_array_mut()
                    .ok_or_else(|| SimError::config(path, "indexing a non-array"))?;
                let n = arr.len();
                let slot = arr
                    .get_mut(*idx)
                    .ok_or_else(|| SimError::config(path, format!("index {idx} out of bounds ({n})")))?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
        };
    }
    Ok(())
}
