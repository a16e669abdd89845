//! Batch front end: load a JSON document, apply overrides, run the experiment
//! and write its artifacts into one output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn, LevelFilter};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Result, SimError};
use crate::harness::config::{parse_override, set_path};
use crate::harness::grid::{compare_variants, GridSpec};
use crate::harness::suites::{validate_maneuvers, validation_corpus};
use crate::harness::sweep::{find_boundary, write_prescan_csv, SweepSpec};
use crate::harness::trace::{hash_bytes, write_trace_csv};
use crate::harness::{run_scenario_with, RunOptions, ScenarioConfig, Verdict};
use crate::timing::{evaluate_query, DeadlineQuery};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "mcas-sim", version, about = "Stress-test MCAS trim controllers in a longitudinal flight simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON input document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory that receives every artifact.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a field, e.g. `--set pilot.tau_sensing=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Replaces the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "warn")]
    pub log: LevelFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run one scenario: trace.csv and summary.json.
    Run,
    /// Bisect a parameter for the recoverability boundary: boundary.json and prescan.csv.
    Sweep,
    /// Reaction time by crank speed matrix: grid.csv and grid.json.
    Grid,
    /// Same scenario under every variant: compare.json.
    Compare,
    /// Closed-form recovery deadline: deadline.json.
    Deadline,
    /// Run the scripted maneuver corpus: validation.csv and validation.json.
    ValidateManeuvers,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Sweep => "sweep",
            Command::Grid => "grid",
            Command::Compare => "compare",
            Command::Deadline => "deadline",
            Command::ValidateManeuvers => "validate-maneuvers",
        }
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    result: &'a T,
}

struct Output {
    dir: PathBuf,
    command: Command,
    config_hash: String,
}

impl Output {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, result: &T) -> Result<()> {
        let doc = Artifact {
            tool: "mcas-sim",
            version: VERSION,
            command: self.command.name(),
            config_hash: self.config_hash.clone(),
            result,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    /// Opens a CSV file whose first line records the tool version and config hash.
    fn csv(&self, name: &str) -> Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "# mcas-sim {VERSION} config {}", self.config_hash)?;
        Ok(w)
    }
}

/// Exit status for an error: 2 for bad input, 1 for everything else.
pub fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Config { .. } | SimError::Json(_) | SimError::InvalidInput(_) => 2,
        _ => 1,
    }
}

fn from_json<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let p = e.path().to_string();
        SimError::config(if p == "." { String::new() } else { p }, e.inner().to_string())
    })
}

/// Reads a document, merges overrides and the seed, and deserializes it with
/// field paths in any error.
fn load<T: DeserializeOwned + Serialize>(
    path: Option<&Path>,
    fallback: Option<Value>,
    common: &Common,
    seed_path: Option<&str>,
) -> Result<T> {
    let value = match (path, fallback) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| SimError::config("--config", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| SimError::config("--config", format!("{}: {e}", p.display())))?
        }
        (None, Some(v)) => v,
        (None, None) => return Err(SimError::config("--config", "this subcommand needs a config file")),
    };
    // round-trip through the typed document so overrides can reach defaulted fields
    let typed: T = from_json(value)?;
    let mut value = serde_json::to_value(&typed)?;
    for o in &common.overrides {
        let (p, v) = parse_override(o)?;
        set_path(&mut value, &p, v)?;
    }
    if let (Some(seed), Some(sp)) = (common.seed, seed_path) {
        set_path(&mut value, sp, seed.into())?;
    }
    from_json(value)
}

fn prepare(common: &Common, command: Command, effective: &impl Serialize) -> Result<Output> {
    let text = serde_json::to_string_pretty(effective)?;
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("effective_config.json"), format!("{text}\n"))?;
    Ok(Output {
        dir: common.out.clone(),
        command,
        config_hash: format!("{:016x}", hash_bytes(text.as_bytes())),
    })
}

pub fn execute(command: Command, common: &Common) -> Result<ExitCode> {
    let cfg_path = common.config.as_deref();
    let started = Instant::now();
    let code = match command {
        Command::Run => {
            let cfg = load::<ScenarioConfig>(cfg_path, None, common, Some("seed"))?;
            cfg.validate()?;
            let out = prepare(common, command, &cfg)?;
            let o = run_scenario_with(&cfg, RunOptions { keep_trace: true, early_stop: true })?;
            write_trace_csv(out.csv("trace.csv")?, o.trace.as_deref().unwrap_or_default())?;
            out.json("summary.json", &o)?;
            info!("{}: {:?} after {:.1} s, trace {}", cfg.name, o.verdict, o.end_t, o.trace_hash_hex());
            if o.verdict == Verdict::Aborted {
                warn!("aborted: {}", o.diagnostic.as_deref().unwrap_or("no diagnostic"));
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Sweep => {
            let spec = load::<SweepSpec>(cfg_path, None, common, Some("template.seed"))?;
            spec.validate()?;
            let out = prepare(common, command, &spec)?;
            match find_boundary(&spec) {
                Ok(r) => {
                    write_prescan_csv(out.csv("prescan.csv")?, &r.prescan)?;
                    out.json("boundary.json", &r)?;
                    info!("{}: {:?}", spec.parameter, r.result);
                    ExitCode::SUCCESS
                }
                Err(SimError::NonMonotone { prescan }) => {
                    write_prescan_csv(out.csv("prescan.csv")?, &prescan)?;
                    return Err(SimError::NonMonotone { prescan });
                }
                Err(e) => return Err(e),
            }
        }
        Command::Grid => {
            let spec = load::<GridSpec>(cfg_path, None, common, Some("template.seed"))?;
            spec.validate()?;
            let out = prepare(common, command, &spec)?;
            let g = spec.run()?;
            g.write_csv(out.csv("grid.csv")?)?;
            let recovered = g.cells.iter().filter(|c| c.verdict == Some(Verdict::Recovered)).count();
            let failed = g.cells.iter().filter(|c| c.verdict.is_none()).count();
            out.json(
                "grid.json",
                &serde_json::json!({
                    "reactions": g.reactions,
                    "rps": g.rps,
                    "cells": g.cells.len(),
                    "recovered": recovered,
                    "failed_cells": failed,
                    "analytic_disagreements": g.analytic_disagreements().len(),
                }),
            )?;
            ExitCode::SUCCESS
        }
        Command::Compare => {
            let cfg = load::<ScenarioConfig>(cfg_path, None, common, Some("seed"))?;
            cfg.validate()?;
            let out = prepare(common, command, &cfg)?;
            let c = compare_variants(&cfg)?;
            out.json("compare.json", &c)?;
            for line in &c.diff {
                info!("{line}");
            }
            ExitCode::SUCCESS
        }
        Command::Deadline => {
            let q = load::<DeadlineQuery>(cfg_path, None, common, None)?;
            let report = evaluate_query(&q)?;
            let out = prepare(common, command, &q)?;
            out.json("deadline.json", &report)?;
            ExitCode::SUCCESS
        }
        Command::ValidateManeuvers => {
            let fallback = serde_json::to_value(validation_corpus())?;
            let raw = load::<Vec<Value>>(cfg_path, Some(fallback), common, None)?;
            let corpus = raw
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let cfg = ScenarioConfig::from_value(v).map_err(|e| match e {
                        SimError::Config { path, message } => SimError::config(format!("[{i}].{path}"), message),
                        e => e,
                    })?;
                    let seeded = common.seed.map_or(cfg.clone(), |seed| ScenarioConfig { seed, ..cfg });
                    Ok(seeded)
                })
                .collect::<Result<Vec<_>>>()?;
            let out = prepare(common, command, &corpus)?;
            let rows = validate_maneuvers(&corpus)?;
            let mut w = csv::Writer::from_writer(out.csv("validation.csv")?);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            let passed = rows.iter().filter(|r| r.passed).count();
            out.json(
                "validation.json",
                &serde_json::json!({
                    "passed": passed,
                    "total": rows.len(),
                    "failures": rows.iter().filter(|r| !r.passed).map(|r| &r.name).collect::<Vec<_>>(),
                }),
            )?;
            println!("{passed}/{} maneuvers passed", rows.len());
            ExitCode::SUCCESS
        }
    };
    info!("{} finished in {:.2?}", command.name(), started.elapsed());
    Ok(code)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = env_logger::Builder::new().filter_level(cli.common.log).try_init();
    if let Some(n) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size the worker pool: {e}");
        }
    }
    match execute(cli.command, &cli.common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
