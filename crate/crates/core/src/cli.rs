//! Command-line front end: single points, parameter sweeps and figure presets.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{AnalysisError, AnalyticEngine, AssociationBreakdown, CoverageResult, EngineOptions};
use crate::config::{reference_config, validate, ConfigError, NetworkConfig, RawConfig, SCALAR_KEYS};
use crate::exec::{with_workers, Exec};
use crate::montecarlo::{estimate, McError, McReport, Mode};
use crate::quadrature::QuadError;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_REALIZATIONS: u64 = 100_000;

/// Fixed CSV header after the swept-parameter column.
pub const SWEEP_COLUMNS: [&str; 17] = [
    "cp_total_analytic",
    "cp_mc",
    "cp_direct",
    "cp_ris",
    "cp_composite",
    "cp_mc_stderr",
    "quad_error",
    "assoc_direct",
    "assoc_ris",
    "assoc_composite",
    "assoc_none",
    "mc_assoc_direct",
    "mc_assoc_ris",
    "mc_assoc_composite",
    "mc_assoc_none",
    "series",
    "error",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("quadrature did not converge: {0}")]
    Quadrature(QuadError),
    #[error("{0}")]
    Scenario(AnalysisError),
    #[error("mode unavailable: {0}")]
    ModeUnavailable(McError),
    #[error("invalid Monte-Carlo request: {0}")]
    Mc(McError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("unknown preset `{0}` (expected fig2..fig7)")]
    UnknownPreset(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Quadrature(q) => CliError::Quadrature(q),
            other => CliError::Scenario(other),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::ModeUnavailable { .. } => CliError::ModeUnavailable(e),
            other => CliError::Mc(other),
        }
    }
}

impl CliError {
    /// Process exit status: 2 for bad input, 3 for quadrature failure, 4 when
    /// the requested Monte-Carlo mode cannot run.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::InvalidSweep(_) | CliError::UnknownPreset(_) | CliError::Mc(_) => 2,
            CliError::Scenario(_) => 2,
            CliError::Quadrature(_) => 3,
            CliError::ModeUnavailable(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Analytic,
    Mc,
    #[default]
    Both,
}

impl Engine {
    fn analytic(self) -> bool {
        matches!(self, Engine::Analytic | Engine::Both)
    }

    fn mc(self) -> bool {
        matches!(self, Engine::Mc | Engine::Both)
    }
}

#[derive(Debug, Parser)]
#[command(name = "riscov", version, about = "Coverage of RIS-assisted indoor THz networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one configuration and print a JSON record.
    Coverage(CoverageArgs),
    /// Sweep one parameter and print CSV.
    Sweep(SweepArgs),
    /// Reproduce one of the figure sweeps and print CSV.
    Figure(FigureArgs),
    /// Print the reference configuration as JSON.
    Defaults,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// Monte-Carlo seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte-Carlo realizations per point.
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    pub realizations: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Monte-Carlo fading model.
    #[arg(long, value_enum, default_value_t = Mode::Distribution)]
    pub fidelity: Mode,
    /// Override a config value, e.g. `--set tau_db=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Write to a file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl Default for RunArgs {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            realizations: DEFAULT_REALIZATIONS,
            workers: None,
            fidelity: Mode::Distribution,
            overrides: Vec::new(),
            output: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Both)]
    pub mode: Engine,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Config key to sweep.
    #[arg(long)]
    pub param: String,
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long)]
    pub steps: usize,
    /// Space the grid logarithmically.
    #[arg(long)]
    pub log: bool,
    #[arg(long, value_enum, default_value_t = Engine::Both)]
    pub engine: Engine,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// fig2, fig3, fig4, fig5, fig6 or fig7.
    #[arg(long)]
    pub preset: String,
    /// Base configuration (default: the reference parameters).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Loads a config file and applies `key=value` overrides.
pub fn load_config(path: Option<&std::path::Path>, overrides: &[String]) -> Result<NetworkConfig, ConfigError> {
    let mut raw = match path {
        Some(p) => RawConfig::from_file(p)?,
        None => reference_config().to_raw(),
    };
    for o in overrides {
        raw.apply_override(o)?;
    }
    validate(&raw)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AnalyticOutput {
    pub coverage: CoverageResult,
    pub association: AssociationBreakdown,
}

/// Analytic coverage and association masses, dispatched on the placement.
pub fn analytic_point(cfg: &NetworkConfig, exec: Exec) -> Result<AnalyticOutput, AnalysisError> {
    let engine = AnalyticEngine::with_options(
        cfg,
        EngineOptions {
            exec,
            ..EngineOptions::default()
        },
    );
    Ok(AnalyticOutput {
        coverage: engine.coverage()?,
        association: engine.association_mass()?,
    })
}

#[derive(Debug, Serialize)]
pub struct CoverageRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub realizations: u64,
    pub engine: Engine,
    pub fidelity: Mode,
    pub scenario: &'static str,
    pub config: std::collections::BTreeMap<String, serde_json::Value>,
    pub analytic: Option<AnalyticOutput>,
    pub mc: Option<McReport>,
}

/// Evaluates one configuration with the requested engines.
pub fn coverage_record(cfg: &NetworkConfig, engine: Engine, run: &RunArgs) -> Result<CoverageRecord, CliError> {
    let exec = Exec::Parallel;
    if engine.mc() {
        run.fidelity.check(cfg)?;
    }
    let analytic = if engine.analytic() {
        Some(analytic_point(cfg, exec)?)
    } else {
        None
    };
    let mc = if engine.mc() {
        Some(estimate(cfg, run.realizations, run.fidelity, run.seed, exec)?)
    } else {
        None
    };
    Ok(CoverageRecord {
        tool: TOOL,
        version: VERSION,
        seed: run.seed,
        realizations: run.realizations,
        engine,
        fidelity: run.fidelity,
        scenario: cfg.placement().as_str(),
        config: cfg.echo(),
        analytic,
        mc,
    })
}

/// A one-parameter grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub log: bool,
    pub engine: Engine,
    pub realizations: u64,
    pub seed: u64,
    pub fidelity: Mode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if !SCALAR_KEYS.contains(&self.param.as_str()) {
            return Err(CliError::InvalidSweep(format!(
                "`{}` is not a sweepable config field",
                self.param
            )));
        }
        if self.steps < 2 {
            return Err(CliError::InvalidSweep("steps must be at least 2".into()));
        }
        if self.from.partial_cmp(&self.to) != Some(std::cmp::Ordering::Less) {
            return Err(CliError::InvalidSweep(format!(
                "need from < to, got {} and {}",
                self.from, self.to
            )));
        }
        if self.log && self.from <= 0.0 {
            return Err(CliError::InvalidSweep("log grids need from > 0".into()));
        }
        if self.realizations == 0 && self.engine.mc() {
            return Err(CliError::Mc(McError::NoRealizations));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k == self.steps - 1 {
                    return self.to;
                }
                let t = k as f64 / last;
                if self.log {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect()
    }
}

/// One grid point of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: f64,
    pub series: String,
    pub analytic: Option<AnalyticOutput>,
    pub mc: Option<McReport>,
    pub error: Option<String>,
}

/// Sweep results with everything needed to reproduce them.
#[derive(Clone, Debug)]
pub struct SweepTable {
    pub param: String,
    pub seed: u64,
    pub realizations: u64,
    pub base: NetworkConfig,
    pub note: Option<String>,
    pub rows: Vec<SweepRow>,
}

fn evaluate_row(base: &NetworkConfig, spec: &SweepSpec, value: f64, series: &str) -> SweepRow {
    let mut row = SweepRow {
        value,
        series: series.to_string(),
        analytic: None,
        mc: None,
        error: None,
    };
    let cfg = match base.with(&spec.param, value) {
        Ok(c) => c,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let mut errors = Vec::new();
    if spec.engine.analytic() {
        match analytic_point(&cfg, Exec::Parallel) {
            Ok(a) => row.analytic = Some(a),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if spec.engine.mc() {
        match estimate(&cfg, spec.realizations, spec.fidelity, spec.seed, Exec::Parallel) {
            Ok(m) => row.mc = Some(m),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Runs a sweep; failing points are reported in the `error` column.
pub fn run_sweep(base: &NetworkConfig, spec: &SweepSpec) -> Result<SweepTable, CliError> {
    spec.validate()?;
    let grid = spec.grid();
    let rows = Exec::Parallel.map(grid.len(), |k| evaluate_row(base, spec, grid[k], ""));
    Ok(SweepTable {
        param: spec.param.clone(),
        seed: spec.seed,
        realizations: spec.realizations,
        base: base.clone(),
        note: None,
        rows,
    })
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        std::iter::once(self.param.clone())
            .chain(SWEEP_COLUMNS.iter().map(|s| s.to_string()))
            .collect()
    }

    /// CSV with a `#` preamble carrying the tool version, seed and base config.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {TOOL} {VERSION}\n"));
        out.push_str(&format!("# seed={} realizations={}\n", self.seed, self.realizations));
        if let Some(n) = &self.note {
            out.push_str(&format!("# {n}\n"));
        }
        let cfg = serde_json::to_string(&self.base).unwrap_or_default();
        out.push_str(&format!("# config={cfg}\n"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let _ = w.write_record(self.header());
        for r in &self.rows {
            let a = r.analytic.as_ref();
            let m = r.mc.as_ref();
            let rec = [
                fmt_f(r.value),
                opt(a.map(|a| a.coverage.total)),
                opt(m.map(|m| m.coverage.value)),
                opt(a.map(|a| a.coverage.contrib_direct)),
                opt(a.map(|a| a.coverage.contrib_ris)),
                opt(a.map(|a| a.coverage.contrib_composite)),
                opt(m.map(|m| m.coverage.stderr)),
                opt(a.map(|a| a.coverage.quad_error_estimate)),
                opt(a.map(|a| a.association.direct)),
                opt(a.map(|a| a.association.ris)),
                opt(a.map(|a| a.association.composite)),
                opt(a.map(|a| a.association.none)),
                opt(m.map(|m| m.association.direct.value)),
                opt(m.map(|m| m.association.ris.value)),
                opt(m.map(|m| m.association.composite.value)),
                opt(m.map(|m| m.association.none.value)),
                r.series.clone(),
                r.error.clone().unwrap_or_default(),
            ];
            let _ = w.write_record(&rec);
        }
        let bytes = w.into_inner().unwrap_or_default();
        out.push_str(&String::from_utf8_lossy(&bytes));
        out
    }
}

/// Figure presets: name, swept parameter and grid, series levels and engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl std::str::FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "fig2" => Preset::Fig2,
            "fig3" => Preset::Fig3,
            "fig4" => Preset::Fig4,
            "fig5" => Preset::Fig5,
            "fig6" => Preset::Fig6,
            "fig7" => Preset::Fig7,
            other => return Err(CliError::UnknownPreset(other.to_string())),
        })
    }
}

/// Base-config modifications that define one curve of a preset.
type Series = (String, Vec<(&'static str, f64)>);

impl Preset {
    /// The swept grid and the curves drawn over it.
    pub fn plan(self, base: &NetworkConfig, run: &RunArgs) -> (SweepSpec, Vec<Series>) {
        let spec = |param: &str, from: f64, to: f64, steps: usize, log: bool, engine: Engine| SweepSpec {
            param: param.to_string(),
            from,
            to,
            steps,
            log,
            engine,
            realizations: run.realizations,
            seed: run.seed,
            fidelity: run.fidelity,
        };
        let single = vec![(String::new(), vec![])];
        match self {
            Preset::Fig2 | Preset::Fig3 => (spec("lambda_b", 0.0, 4.0, 9, false, Engine::Both), single),
            Preset::Fig4 => (
                spec("v0", 1.0, 8.0, 8, false, Engine::Both),
                [1.8, 2.25, 2.7]
                    .iter()
                    .map(|&h| (format!("h_r={h}"), vec![("h_r", h)]))
                    .collect(),
            ),
            Preset::Fig5 => (
                spec("lambda_a", 1e-2, 1e1, 13, true, Engine::Both),
                [-5.0, 2.0, 10.0]
                    .iter()
                    .map(|&t| (format!("tau_db={t}"), vec![("tau_db", t)]))
                    .collect(),
            ),
            Preset::Fig6 => (spec("ue_offset", 0.0, 0.95 * base.radius, 20, false, Engine::Mc), single),
            // Starts above zero: without blockages both placements coincide.
            Preset::Fig7 => (
                spec("lambda_b", 0.5, 4.0, 8, false, Engine::Both),
                vec![
                    ("low-ris".to_string(), vec![("h_r", 0.75 * base.h_b)]),
                    ("high-ris".to_string(), vec![]),
                ],
            ),
        }
    }
}

/// Runs a figure preset on top of `base`.
pub fn figure_preset(name: &str, base: &NetworkConfig, run: &RunArgs) -> Result<SweepTable, CliError> {
    let preset: Preset = name.parse()?;
    let (spec, series) = preset.plan(base, run);
    spec.validate()?;
    let grid = spec.grid();
    let mut bases = Vec::with_capacity(series.len());
    for (label, mods) in &series {
        let mut cfg = base.clone();
        for (k, v) in mods {
            cfg = cfg.with(k, *v)?;
        }
        bases.push((label.clone(), cfg));
    }
    let jobs: Vec<(usize, f64)> = (0..bases.len())
        .flat_map(|s| grid.iter().map(move |&v| (s, v)))
        .collect();
    let rows = Exec::Parallel.map(jobs.len(), |j| {
        let (s, v) = jobs[j];
        evaluate_row(&bases[s].1, &spec, v, &bases[s].0)
    });
    Ok(SweepTable {
        param: spec.param.clone(),
        seed: spec.seed,
        realizations: spec.realizations,
        base: base.clone(),
        note: Some(format!("preset={name}")),
        rows,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

/// Executes a parsed command and returns its output text.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Defaults => Ok(to_json(&reference_config())),
        Command::Coverage(a) => in_pool(&a.run, || {
            let cfg = load_config(Some(&a.config), &a.run.overrides)?;
            Ok(to_json(&coverage_record(&cfg, a.mode, &a.run)?))
        }),
        Command::Sweep(a) => in_pool(&a.run, || {
            let cfg = load_config(Some(&a.config), &a.run.overrides)?;
            let spec = SweepSpec {
                param: a.param.clone(),
                from: a.from,
                to: a.to,
                steps: a.steps,
                log: a.log,
                engine: a.engine,
                realizations: a.run.realizations,
                seed: a.run.seed,
                fidelity: a.run.fidelity,
            };
            Ok(run_sweep(&cfg, &spec)?.to_csv())
        }),
        Command::Figure(a) => in_pool(&a.run, || {
            let cfg = load_config(a.config.as_deref(), &a.run.overrides)?;
            Ok(figure_preset(&a.preset, &cfg, &a.run)?.to_csv())
        }),
    }
}

fn in_pool(run: &RunArgs, op: impl FnOnce() -> Result<String, CliError> + Send) -> Result<String, CliError> {
    match run.workers {
        Some(w) => with_workers(w, op),
        None => op(),
    }
}

/// Output destination of a command, if it has one.
pub fn output_path(cli: &Cli) -> Option<&std::path::Path> {
    match &cli.command {
        Command::Coverage(a) => a.run.output.as_deref(),
        Command::Sweep(a) => a.run.output.as_deref(),
        Command::Figure(a) => a.run.output.as_deref(),
        Command::Defaults => None,
    }
}

/// Parses, runs and writes; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = execute(&cli).and_then(|text| match output_path(&cli) {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
