use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::run::{run_scenario, Verdict};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrescanPoint {
    pub value: f64,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub template: ScenarioConfig,
    /// Dotted path into the scenario, e.g. `faults[0].delta`.
    pub parameter: String,
    pub lo: f64,
    pub hi: f64,
    /// Absolute bracket width at which bisection stops; defaults to 1e-4 of the range.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iterations: u32,
    #[serde(default = "default_prescan")]
    pub prescan: usize,
}

fn default_max_iter() -> u32 {
    60
}

fn default_prescan() -> usize {
    9
}

impl SweepSpec {
    pub fn new(template: ScenarioConfig, parameter: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            template,
            parameter: parameter.into(),
            lo,
            hi,
            tolerance: None,
            max_iterations: default_max_iter(),
            prescan: default_prescan(),
        }
    }

    /// Tolerance as a fraction of the swept range.
    pub fn with_relative_tolerance(mut self, frac: f64) -> Self {
        self.tolerance = Some(frac * (self.hi - self.lo));
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(1e-4 * (self.hi - self.lo))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(SimError::config("lo", "need finite lo < hi"));
        }
        if !(self.tolerance() > 0.0) {
            return Err(SimError::config("tolerance", "must be positive"));
        }
        if self.prescan < 2 {
            return Err(SimError::config("prescan", "need at least 2 points"));
        }
        self.template.validate()?;
        // both endpoints must produce valid scenarios
        self.template.with_value(&self.parameter, self.lo)?;
        self.template.with_value(&self.parameter, self.hi)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Recovered across the whole range.
    NoFailure,
    /// Unrecoverable across the whole range.
    AlwaysFails,
    Boundary {
        last_recoverable: f64,
        first_unrecoverable: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub result: BoundaryKind,
    pub prescan: Vec<PrescanPoint>,
    pub iterations: u32,
    pub evaluations: usize,
    pub tolerance: f64,
}

impl BoundaryResult {
    /// First unrecoverable value, when there is a finite boundary.
    pub fn boundary(&self) -> Option<f64> {
        match self.result {
            BoundaryKind::Boundary { first_unrecoverable, .. } => Some(first_unrecoverable),
            _ => None,
        }
    }

    pub fn bracket(&self) -> Option<(f64, f64)> {
        match self.result {
            BoundaryKind::Boundary {
                last_recoverable,
                first_unrecoverable,
            } => Some((last_recoverable, first_unrecoverable)),
            _ => None,
        }
    }

    /// Largest value still recovered, for sweeps that fail above it.
    pub fn max_recoverable(&self) -> Option<f64> {
        match self.result {
            BoundaryKind::Boundary { last_recoverable, .. } => Some(last_recoverable),
            BoundaryKind::NoFailure => self.prescan.last().map(|p| p.value),
            BoundaryKind::AlwaysFails => None,
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Prescan plus bisection over any recovered-predicate.
pub fn find_boundary_with<F>(
    lo: f64,
    hi: f64,
    tolerance: f64,
    prescan: usize,
    max_iterations: u32,
    predicate: F,
) -> Result<BoundaryResult>
where
    F: Fn(f64) -> Result<bool> + Sync,
{
    if !(lo < hi) || !(tolerance > 0.0) || prescan < 2 {
        return Err(SimError::InvalidInput(format!(
            "sweep needs lo < hi, tolerance > 0 and >= 2 prescan points (got [{lo}, {hi}], {tolerance}, {prescan})"
        )));
    }
    let points: Vec<PrescanPoint> = linspace(lo, hi, prescan)
        .into_par_iter()
        .map(|v| predicate(v).map(|recovered| PrescanPoint { value: v, recovered }))
        .collect::<Result<_>>()?;
    let changes = points.windows(2).filter(|w| w[0].recovered != w[1].recovered).count();
    let mut evaluations = points.len();
    if changes > 1 {
        return Err(SimError::NonMonotone { prescan: points });
    }
    if changes == 0 {
        let result = if points[0].recovered {
            BoundaryKind::NoFailure
        } else {
            BoundaryKind::AlwaysFails
        };
        return Ok(BoundaryResult {
            result,
            prescan: points,
            iterations: 0,
            evaluations,
            tolerance,
        });
    }
    let i = points
        .windows(2)
        .position(|w| w[0].recovered != w[1].recovered)
        .expect("one change");
    let (mut a, mut b) = (points[i], points[i + 1]);
    let mut iterations = 0;
    while (b.value - a.value).abs() > tolerance && iterations < max_iterations {
        let mid = 0.5 * (a.value + b.value);
        let rec = predicate(mid)?;
        evaluations += 1;
        iterations += 1;
        if rec == a.recovered {
            a = PrescanPoint { value: mid, recovered: rec };
        } else {
            b = PrescanPoint { value: mid, recovered: rec };
        }
    }
    let (good, bad) = if a.recovered { (a, b) } else { (b, a) };
    Ok(BoundaryResult {
        result: BoundaryKind::Boundary {
            last_recoverable: good.value,
            first_unrecoverable: bad.value,
        },
        prescan: points,
        iterations,
        evaluations,
        tolerance,
    })
}

pub fn find_boundary(spec: &SweepSpec) -> Result<BoundaryResult> {
    spec.validate()?;
    find_boundary_with(spec.lo, spec.hi, spec.tolerance(), spec.prescan, spec.max_iterations, |v| {
        let cfg = spec.template.with_value(&spec.parameter, v)?;
        let out = run_scenario(&cfg)?;
        Ok(out.verdict == Verdict::Recovered)
    })
}

pub fn write_prescan_csv<W: std::io::Write>(out: W, points: &[PrescanPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_step_boundary() {
        let r = find_boundary_with(0.0, 10.0, 1e-4, 9, 60, |x| Ok(x < 3.7)).unwrap();
        let (good, bad) = r.bracket().unwrap();
        assert!(good < 3.7 && bad >= 3.7);
        assert!(bad - good <= 1e-4);
        assert!((r.boundary().unwrap() - 3.7).abs() <= 1e-4);
        assert_eq!(r.prescan.len(), 9);
    }

    #[test]
    fn rising_predicate_is_supported() {
        let r = find_boundary_with(0.0, 1.0, 1e-6, 5, 60, |x| Ok(x > 0.25)).unwrap();
        let (good, bad) = r.bracket().unwrap();
        assert!(good > 0.25 && bad <= 0.25 && good - bad <= 1e-6);
    }

    #[test]
    fn alternating_prescan_is_rejected() {
        let err = find_boundary_with(0.0, 8.0, 1e-3, 9, 60, |x| Ok((x as i64) % 2 == 0)).unwrap_err();
        match err {
            SimError::NonMonotone { prescan } => assert_eq!(prescan.len(), 9),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn constant_predicates() {
        let r = find_boundary_with(0.0, 1.0, 1e-3, 9, 60, |_| Ok(true)).unwrap();
        assert_eq!(r.result, BoundaryKind::NoFailure);
        let r = find_boundary_with(0.0, 1.0, 1e-3, 9, 60, |_| Ok(false)).unwrap();
        assert_eq!(r.result, BoundaryKind::AlwaysFails);
        assert!(find_boundary_with(1.0, 0.0, 1e-3, 9, 60, |_| Ok(true)).is_err());
    }

    proptest! {
        #[test]
        fn bisection_brackets_any_step(c in 0.01f64..9.99, tol in 1e-6f64..1e-2) {
            let r = find_boundary_with(0.0, 10.0, tol, 9, 80, |x| Ok(x < c)).unwrap();
            let (good, bad) = r.bracket().unwrap();
            prop_assert!(good < c && c <= bad);
            prop_assert!(bad - good <= tol);
        }
    }
}
