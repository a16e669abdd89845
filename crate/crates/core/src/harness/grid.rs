use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::run::{run_scenario, SimOutcome, Verdict};
use super::sweep::linspace;
use crate::controllers::McasVariant;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }
}

pub const REACTION_RANGE: (f64, f64) = (0.1, 7.0);
pub const RPS_RANGE: (f64, f64) = (0.1, 4.0);
pub const DEFAULT_GRID_POINTS: usize = 24;

/// Input document for a safe-state grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub template: ScenarioConfig,
    #[serde(default = "default_reaction_axis")]
    pub reaction: Axis,
    #[serde(default = "default_rps_axis")]
    pub rps: Axis,
}

fn default_reaction_axis() -> Axis {
    Axis::new(REACTION_RANGE.0, REACTION_RANGE.1, DEFAULT_GRID_POINTS)
}

fn default_rps_axis() -> Axis {
    Axis::new(RPS_RANGE.0, RPS_RANGE.1, DEFAULT_GRID_POINTS)
}

impl GridSpec {
    pub fn new(template: ScenarioConfig) -> Self {
        Self {
            template,
            reaction: default_reaction_axis(),
            rps: default_rps_axis(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        check_axis("reaction", &self.reaction, REACTION_RANGE)?;
        check_axis("rps", &self.rps, RPS_RANGE)
    }

    pub fn run(&self) -> Result<GridResult> {
        safe_state_grid(&self.template, self.reaction, self.rps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub reaction: f64,
    pub rps: f64,
    /// `None` when the cell's run failed to execute.
    pub verdict: Option<Verdict>,
    pub activations: u32,
    pub min_altitude_ft: f64,
    pub trace_hash: u64,
    /// Closed-form verdict that the altitude deadline is missed; `None`
    /// when nothing fired.
    pub hard_infeasible: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub reactions: Vec<f64>,
    pub rps: Vec<f64>,
    /// Row-major: reaction outer, rps inner.
    pub cells: Vec<GridCell>,
}

impl GridResult {
    /// Cells the closed-form check calls hopeless but the simulation did not crash.
    pub fn analytic_disagreements(&self) -> Vec<&GridCell> {
        self.cells
            .iter()
            .filter(|c| c.hard_infeasible == Some(true) && c.verdict != Some(Verdict::Crashed))
            .collect()
    }

    pub fn cell(&self, i_reaction: usize, j_rps: usize) -> &GridCell {
        &self.cells[i_reaction * self.rps.len() + j_rps]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "reaction",
            "rps",
            "verdict",
            "activations",
            "min_altitude_ft",
            "trace_hash",
            "hard_infeasible",
            "error",
        ])?;
        for c in &self.cells {
            let verdict = c.verdict.map(|v| serde_json::to_value(v).map(|j| j.as_str().unwrap_or("").to_string()));
            w.write_record([
                c.reaction.to_string(),
                c.rps.to_string(),
                verdict.transpose()?.unwrap_or_else(|| "error".into()),
                c.activations.to_string(),
                c.min_altitude_ft.to_string(),
                format!("{:016x}", c.trace_hash),
                c.hard_infeasible.map(|b| b.to_string()).unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_axis(name: &str, a: &Axis, range: (f64, f64)) -> Result<()> {
    let ok = a.n >= 1 && a.lo <= a.hi && a.lo >= range.0 - 1e-12 && a.hi <= range.1 + 1e-12;
    if !ok {
        return Err(SimError::config(
            name,
            format!("axis [{}, {}] x{} must lie within [{}, {}]", a.lo, a.hi, a.n, range.0, range.1),
        ));
    }
    Ok(())
}

/// Recoverability over pilot reaction time and crank speed. Failed cells are
/// recorded and the grid still completes.
pub fn safe_state_grid(template: &ScenarioConfig, reaction: Axis, rps: Axis) -> Result<GridResult> {
    template.validate()?;
    check_axis("reaction", &reaction, REACTION_RANGE)?;
    check_axis("rps", &rps, RPS_RANGE)?;
    let reactions = reaction.values();
    let rps_values = rps.values();
    let pairs: Vec<(f64, f64)> = reactions
        .iter()
        .flat_map(|&r| rps_values.iter().map(move |&c| (r, c)))
        .collect();
    let cells = pairs
        .into_par_iter()
        .map(|(r, c)| {
            let mut cfg = template.clone();
            cfg.pilot.tau_sensing = r;
            cfg.pilot.crank_rps = c;
            match run_scenario(&cfg) {
                Ok(o) => GridCell {
                    reaction: r,
                    rps: c,
                    verdict: Some(o.verdict),
                    activations: o.mcas_activation_count,
                    min_altitude_ft: o.min_altitude_ft,
                    trace_hash: o.trace_hash,
                    hard_infeasible: o.analytic.map(|a| a.hard_infeasible),
                    error: None,
                },
                Err(e) => GridCell {
                    reaction: r,
                    rps: c,
                    verdict: None,
                    activations: 0,
                    min_altitude_ft: f64::NAN,
                    trace_hash: 0,
                    hard_infeasible: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(GridResult {
        reactions,
        rps: rps_values,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub variant: McasVariant,
    pub outcome: SimOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub outcomes: Vec<VariantOutcome>,
    pub diff: Vec<String>,
}

impl Comparison {
    pub fn get(&self, v: McasVariant) -> &SimOutcome {
        &self.outcomes.iter().find(|o| o.variant == v).expect("all variants run").outcome
    }
}

/// The same scenario and seed under every variant.
pub fn compare_variants(template: &ScenarioConfig) -> Result<Comparison> {
    template.validate()?;
    let outcomes = McasVariant::ALL
        .par_iter()
        .map(|&variant| {
            let cfg = ScenarioConfig {
                variant,
                ..template.clone()
            };
            run_scenario(&cfg).map(|outcome| VariantOutcome { variant, outcome })
        })
        .collect::<Result<Vec<_>>>()?;
    let base = &outcomes[0];
    let mut diff = Vec::new();
    for o in &outcomes {
        diff.push(format!(
            "{}: {:?}, {} activation(s), min altitude {:.0} ft",
            o.variant.name(),
            o.outcome.verdict,
            o.outcome.mcas_activation_count,
            o.outcome.min_altitude_ft
        ));
    }
    for o in &outcomes[1..] {
        if o.outcome.verdict != base.outcome.verdict {
            diff.push(format!(
                "verdict differs: {} {:?} vs {} {:?}",
                base.variant.name(),
                base.outcome.verdict,
                o.variant.name(),
                o.outcome.verdict
            ));
        }
    }
    Ok(Comparison { outcomes, diff })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_outside_range_are_rejected() {
        let t = ScenarioConfig::default();
        assert!(safe_state_grid(&t, Axis::new(0.0, 7.0, 3), Axis::new(0.1, 4.0, 3)).is_err());
        assert!(safe_state_grid(&t, Axis::new(0.1, 7.0, 3), Axis::new(0.1, 5.0, 3)).is_err());
    }

    #[test]
    fn one_by_one_grid_is_a_single_run() {
        let mut t = ScenarioConfig::default();
        t.dt = 1.0 / 30.0;
        let g = safe_state_grid(&t, Axis::new(2.0, 2.0, 1), Axis::new(1.0, 1.0, 1)).unwrap();
        assert_eq!(g.cells.len(), 1);
        let mut cfg = t.clone();
        cfg.pilot.tau_sensing = 2.0;
        cfg.pilot.crank_rps = 1.0;
        let o = run_scenario(&cfg).unwrap();
        assert_eq!(g.cells[0].verdict, Some(o.verdict));
        assert_eq!(g.cells[0].trace_hash, o.trace_hash);
    }
}
