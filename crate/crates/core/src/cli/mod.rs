//! Command-line front end.
//!
//! Every subcommand reads JSON/CSV inputs, writes its artifacts, and reports
//! a [`CommandOutcome`]. Exit codes: 0 success, 1 invalid input, 2 a
//! computation that could not complete.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calibration::{
    calibrate, CalibrationConfig, CalibrationError, CalibrationResult, CalibrationTargets,
};
use crate::metrics::{
    average_delta, compare_metrics, compute_metrics, detect_event_time, format_average_table,
    format_comparison, FrequencyMetrics, MetricsConfig, MetricsError, DEFAULT_TRIGGER_MHZ_PER_S,
};
use crate::model::{parse_case, parse_event, serialize_case, ModelError, SystemCase, TripEvent};
use crate::scenario::{
    build_scenario, penetration_sweep, write_sweep_csv, DisplacementStrategy, ScenarioError,
    ScenarioSpec, SweepRowOutcome, DEFAULT_WIND_PCT,
};
use crate::simulator::ufls::UflsTable;
use crate::simulator::{simulate, verify_convergence, ConvergenceError, SimConfig, SimError};
use crate::trace::{
    read_annotations, read_trace_csv, sidecar_path, write_annotations, write_trace_csv,
    Annotations, FrequencyTrace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub artifacts_written: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Debug, Parser)]
#[command(
    name = "gridfreq",
    version,
    about = "System frequency response simulation and calibration"
)]
pub struct Cli {
    /// Worker threads for sweeps and calibration batches.
    #[arg(long, env = "GRIDFREQ_JOBS", global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trip event and write the frequency trace.
    Simulate(SimulateArgs),
    /// Extract frequency response metrics from a trace.
    Metrics(MetricsArgs),
    /// Fit governor capacity, reheater time and inertia to measured metrics.
    Calibrate(CalibrateArgs),
    /// Renewable scenario tools.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Sweep renewable penetration levels under one trip.
    Sweep(SweepArgs),
    /// Compare metrics at dt and dt/2.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Write a case with synchronous output displaced by wind and PV.
    Build(ScenarioBuildArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EventArgs {
    /// Trip event JSON file.
    #[arg(long, conflicts_with_all = ["event_mw", "trip_unit"])]
    pub event: Option<PathBuf>,
    /// Trip this many MW.
    #[arg(long, conflicts_with = "trip_unit")]
    pub event_mw: Option<f64>,
    /// Trip the named unit.
    #[arg(long)]
    pub trip_unit: Option<String>,
    /// Trip time for `--event-mw` / `--trip-unit`.
    #[arg(long, default_value_t = 1.0)]
    pub trip_time: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 60.0)]
    pub t_end: f64,
    /// UFLS stage table JSON; load is shed during the run.
    #[arg(long)]
    pub ufls: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricFlags {
    #[arg(long, default_value_t = 0.0)]
    pub rocof_window_start: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rocof_window_end: f64,
    #[arg(long, default_value_t = 5.0)]
    pub settle_band_mhz: f64,
    #[arg(long, default_value_t = 5.0)]
    pub settle_tail: f64,
}

impl MetricFlags {
    fn config(&self) -> MetricsConfig {
        MetricsConfig {
            rocof_window_s: (self.rocof_window_start, self.rocof_window_end),
            settle_band_mhz: self.settle_band_mhz,
            settle_tail_s: self.settle_tail,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[command(flatten)]
    pub event: EventArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Add `pm_<id>_pu` columns.
    #[arg(long)]
    pub per_unit: bool,
    #[command(flatten)]
    pub metric_flags: MetricFlags,
    /// Trace CSV; the annotation sidecar is written next to it.
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Trace to analyse (the simulation, when comparing).
    #[arg(long)]
    pub trace: PathBuf,
    /// Measured trace to compare against.
    #[arg(long)]
    pub measured: Option<PathBuf>,
    /// Event time in seconds; overrides the sidecar.
    #[arg(long, conflicts_with = "auto_detect")]
    pub event_time: Option<f64>,
    /// Locate the event from the trace itself when no sidecar is present.
    #[arg(long)]
    pub auto_detect: bool,
    #[arg(long, default_value_t = DEFAULT_TRIGGER_MHZ_PER_S)]
    pub trigger_mhz_per_s: f64,
    #[command(flatten)]
    pub metric_flags: MetricFlags,
    /// Metrics JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub case: PathBuf,
    /// Single target `{event, metrics}` or batch `{events: [...]}`.
    #[arg(long)]
    pub targets: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub metric_flags: MetricFlags,
    #[arg(long, default_value_t = 2)]
    pub outer_passes: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    RetireSmallestFirst,
    ProportionalDerate,
    PriorityList,
}

#[derive(Debug, Args)]
pub struct ScenarioBuildArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WIND_PCT)]
    pub wind_pct: f64,
    #[arg(long)]
    pub pv_pct: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::RetireSmallestFirst)]
    pub strategy: StrategyArg,
    /// Comma-separated unit ids for `priority-list`.
    #[arg(long, value_delimiter = ',')]
    pub priority: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub case: PathBuf,
    /// Comma-separated total renewable levels in percent; the base row is always included.
    #[arg(long, default_value = "20,40,60")]
    pub levels: String,
    #[arg(long, default_value_t = DEFAULT_WIND_PCT)]
    pub wind_pct: f64,
    #[command(flatten)]
    pub event: EventArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub metric_flags: MetricFlags,
    /// UFLS table to flag rows against (default: one stage at 59.3 Hz).
    #[arg(long)]
    pub flag_table: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[command(flatten)]
    pub event: EventArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub metric_flags: MetricFlags,
    #[arg(long, default_value = "convergence.json")]
    pub out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(self) -> String {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Event(_) | SimError::GovernorInit { .. } => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Config(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = Result<(Vec<PathBuf>, String), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_case(path: &Path) -> Result<SystemCase, Failure> {
    parse_case(&read_text(path)?)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Failure::Validation(format!(
            "{}: at {}: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

fn write_artifact(path: &Path, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    written.push(path.to_path_buf());
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn resolve_event(args: &EventArgs) -> Result<TripEvent, Failure> {
    match (&args.event, args.event_mw, &args.trip_unit) {
        (Some(path), _, _) => parse_event(&read_text(path)?)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display()))),
        (None, Some(mw), _) => Ok(TripEvent::magnitude(args.trip_time, mw)),
        (None, None, Some(id)) => Ok(TripEvent::unit(args.trip_time, id.clone())),
        (None, None, None) => Err(Failure::Validation(
            "no event given: pass --event, --event-mw or --trip-unit".into(),
        )),
    }
}

fn sim_config(args: &SimArgs, record_per_unit: bool) -> Result<SimConfig, Failure> {
    let ufls = match &args.ufls {
        Some(p) => Some(load_json::<UflsTable>(p)?),
        None => None,
    };
    let cfg = SimConfig {
        dt_s: args.dt,
        t_end_s: args.t_end,
        ufls,
        record_per_unit,
    };
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(Failure::Validation(format!(
            "invalid simulation settings: {}",
            v.join("; ")
        )))
    }
}

fn metrics_config(flags: &MetricFlags) -> Result<MetricsConfig, Failure> {
    let cfg = flags.config();
    cfg.validate()?;
    Ok(cfg)
}

fn metrics_line(m: &FrequencyMetrics) -> String {
    format!(
        "rocof {:.1} mHz/s, nadir {:.4} Hz, settling time {:.2} s, settling frequency {:.4} Hz",
        m.rocof_mhz_per_s, m.nadir_hz, m.settling_time_s, m.settling_freq_hz
    )
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let case = load_case(&args.case)?;
    let event = resolve_event(&args.event)?;
    let cfg = sim_config(&args.sim, args.per_unit)?;
    let mcfg = metrics_config(&args.metric_flags)?;
    let out = simulate(&case, &event, &cfg)?;

    let mut annotations = out.trace.annotations.clone();
    annotations.config = Some(json!({ "simulation": cfg, "event": event }));
    let mut written = Vec::new();
    write_artifact(
        &args.out,
        &write_trace_csv(&out.trace, &out.pm),
        &mut written,
    )?;
    write_artifact(
        &sidecar_path(&args.out),
        &write_annotations(&annotations),
        &mut written,
    )?;

    let summary = match compute_metrics(&out.trace, out.trip.t_event_s, &mcfg) {
        Ok(m) => metrics_line(&m),
        Err(e) => format!("metrics unavailable: {e}"),
    };
    Ok((
        written,
        format!("{} samples written; {summary}", out.trace.len()),
    ))
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum EventTimeSource {
    Flag,
    Sidecar,
    AutoDetect,
}

fn load_trace(path: &Path) -> Result<(FrequencyTrace, Option<Annotations>), Failure> {
    let mut trace = read_trace_csv(&read_text(path)?)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let side = sidecar_path(path);
    let annotations = if side.exists() {
        let a = read_annotations(&read_text(&side)?)
            .map_err(|e| Failure::Validation(format!("{}: {e}", side.display())))?;
        trace.annotations = a.clone();
        Some(a)
    } else {
        None
    };
    Ok((trace, annotations))
}

fn event_time_for(
    trace: &FrequencyTrace,
    annotations: Option<&Annotations>,
    args: &MetricsArgs,
) -> Result<(f64, EventTimeSource), Failure> {
    if let Some(t) = args.event_time {
        return Ok((t, EventTimeSource::Flag));
    }
    if let Some(t) = annotations.and_then(Annotations::event_time) {
        return Ok((t, EventTimeSource::Sidecar));
    }
    if args.auto_detect {
        let t = detect_event_time(trace, args.trigger_mhz_per_s)?;
        return Ok((t, EventTimeSource::AutoDetect));
    }
    Err(Failure::Validation(
        "no event time: pass --event-time, --auto-detect, or provide an annotation sidecar".into(),
    ))
}

fn cmd_metrics(args: &MetricsArgs) -> CmdResult {
    let mcfg = metrics_config(&args.metric_flags)?;
    if !(args.trigger_mhz_per_s > 0.0) {
        return Err(Failure::Validation(
            "--trigger-mhz-per-s must be positive".into(),
        ));
    }
    let analyse = |path: &Path| -> Result<(FrequencyMetrics, f64, EventTimeSource), Failure> {
        let (trace, ann) = load_trace(path)?;
        let (te, source) = event_time_for(&trace, ann.as_ref(), args)?;
        Ok((compute_metrics(&trace, te, &mcfg)?, te, source))
    };
    let (m, te, source) = analyse(&args.trace)?;
    let mut doc = json!({
        "config": {
            "metrics": mcfg,
            "trigger_mhz_per_s": args.trigger_mhz_per_s,
        },
        "trace": { "event_time_s": te, "event_time_source": source, "metrics": m },
    });
    let mut summary = metrics_line(&m);
    if let Some(measured_path) = &args.measured {
        let (mm, mte, msource) = analyse(measured_path)?;
        let table = format_comparison(&mm, &m);
        doc["measured"] =
            json!({ "event_time_s": mte, "event_time_source": msource, "metrics": mm });
        doc["difference"] = json!(compare_metrics(&mm, &m));
        doc["comparison_table"] = Value::String(table.clone());
        summary = table;
    }
    let mut written = Vec::new();
    let text = to_json(&doc);
    if let Some(out) = &args.out {
        write_artifact(out, &text, &mut written)?;
    } else {
        summary = format!("{summary}\n{}", text.trim_end());
    }
    Ok((written, summary))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    #[serde(default)]
    label: Option<String>,
    event: TripEvent,
    metrics: FrequencyMetrics,
    /// Measured trace CSV, relative to the targets file.
    #[serde(default)]
    measured_trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TargetsFile {
    Batch { events: Vec<TargetEntry> },
    Single(TargetEntry),
}

#[derive(Debug, Serialize)]
struct EventCalibration {
    label: String,
    event: TripEvent,
    measured: FrequencyMetrics,
    result: CalibrationResult,
}

fn cmd_calibrate(args: &CalibrateArgs) -> CmdResult {
    let case = load_case(&args.case)?;
    let entries = match load_json::<TargetsFile>(&args.targets)? {
        TargetsFile::Batch { events } => events,
        TargetsFile::Single(e) => vec![e],
    };
    if entries.is_empty() {
        return Err(Failure::Validation("targets file lists no events".into()));
    }
    let cfg = CalibrationConfig {
        outer_passes: args.outer_passes,
        sim: sim_config(&args.sim, false)?,
        metrics: metrics_config(&args.metric_flags)?,
        ..CalibrationConfig::default()
    };
    let base_dir = args.targets.parent().unwrap_or(Path::new(""));
    let mut targets = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let mut t = CalibrationTargets::new(e.metrics, e.event.clone());
        if let Some(rel) = &e.measured_trace {
            t.trace = Some(load_trace(&base_dir.join(rel))?.0);
        }
        let label = e.label.clone().unwrap_or_else(|| format!("event{}", i + 1));
        targets.push((label, t));
    }

    let results: Vec<Result<(CalibrationResult, SystemCase), CalibrationError>> = targets
        .par_iter()
        .map(|(_, t)| calibrate(&case, t, &cfg))
        .collect();

    let mut per_event = Vec::new();
    let mut patched_cases = Vec::new();
    for ((label, t), r) in targets.iter().zip(results) {
        let (result, patched) = r.map_err(|e| match e {
            CalibrationError::Simulation(s) => Failure::from(s),
            CalibrationError::Metrics(m) => Failure::from(m),
            other => Failure::Validation(format!("{label}: {other}")),
        })?;
        per_event.push(EventCalibration {
            label: label.clone(),
            event: t.event.clone(),
            measured: t.metrics,
            result,
        });
        patched_cases.push((label.clone(), patched));
    }

    let deltas: Vec<_> = per_event.iter().map(|e| e.result.residuals).collect();
    let table = format_average_table(&deltas);
    let doc = json!({
        "config": cfg,
        "events": per_event,
        "average_difference": average_delta(&deltas),
        "average_table": table,
    });

    let mut written = Vec::new();
    write_artifact(
        &args.out_dir.join("calibration.json"),
        &to_json(&doc),
        &mut written,
    )?;
    if patched_cases.len() == 1 {
        let path = args.out_dir.join("calibrated_case.json");
        write_artifact(&path, &serialize_case(&patched_cases[0].1), &mut written)?;
    } else {
        for (label, c) in &patched_cases {
            let path = args
                .out_dir
                .join(format!("calibrated_case_{}.json", file_label(label)));
            write_artifact(&path, &serialize_case(c), &mut written)?;
        }
    }

    let mut summary = String::new();
    for e in &per_event {
        let r = &e.result;
        let flags = &r.converged;
        let unconverged: Vec<&str> = [
            ("governor_capacity", flags.governor_capacity),
            ("reheater", flags.reheater),
            ("inertia", flags.inertia),
        ]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
        summary.push_str(&format!(
            "{}: kappa {:.3}, t3 x{:.3}, h x{:.3}{}\n",
            e.label,
            r.kappa,
            r.t3_mult,
            r.h_mult,
            if unconverged.is_empty() {
                String::new()
            } else {
                format!(" (unconverged: {})", unconverged.join(", "))
            }
        ));
    }
    summary.push_str(&table);
    Ok((written, summary.trim_end().to_string()))
}

fn scenario_spec(
    wind_pct: f64,
    pv_pct: f64,
    strategy: StrategyArg,
    priority: &[String],
) -> Result<ScenarioSpec, Failure> {
    let displacement_strategy = match strategy {
        StrategyArg::RetireSmallestFirst => DisplacementStrategy::RetireSmallestFirst,
        StrategyArg::ProportionalDerate => DisplacementStrategy::ProportionalDerate,
        StrategyArg::PriorityList => {
            if priority.is_empty() {
                return Err(Failure::Validation(
                    "priority-list needs --priority ids".into(),
                ));
            }
            DisplacementStrategy::PriorityList(priority.to_vec())
        }
    };
    Ok(ScenarioSpec {
        wind_pct,
        pv_pct,
        displacement_strategy,
    })
}

fn cmd_scenario_build(args: &ScenarioBuildArgs) -> CmdResult {
    let base = load_case(&args.case)?;
    let spec = scenario_spec(args.wind_pct, args.pv_pct, args.strategy, &args.priority)?;
    let case = build_scenario(&base, &spec).map_err(|e| match e {
        ScenarioError::Model(m) => Failure::from(m),
        other => Failure::Validation(other.to_string()),
    })?;
    let mut written = Vec::new();
    write_artifact(&args.out, &serialize_case(&case), &mut written)?;
    let shares = crate::model::penetration_shares(&case);
    Ok((
        written,
        format!(
            "{} synchronous units kept; wind {:.2} %, PV {:.2} %, system inertia {:.4} s",
            case.units().len(),
            shares.wind_pct,
            shares.pv_pct,
            crate::model::system_inertia(&case)
        ),
    ))
}

/// Parse `--levels`: comma-separated percentages, empty for none.
pub fn parse_levels(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('%')
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("bad level {s:?}"))
        })
        .collect()
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '%' => "pct".to_string(),
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' => c.to_string(),
            _ => "_".to_string(),
        })
        .collect()
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let base = load_case(&args.case)?;
    let levels = parse_levels(&args.levels).map_err(Failure::Validation)?;
    let event = resolve_event(&args.event)?;
    let cfg = sim_config(&args.sim, false)?;
    let mcfg = metrics_config(&args.metric_flags)?;
    let flag_table = match &args.flag_table {
        Some(p) => load_json::<UflsTable>(p)?,
        None => UflsTable::first_stage(),
    };

    let mut specs = vec![ScenarioSpec::level(0.0, args.wind_pct)];
    for &l in &levels {
        if l != 0.0 {
            specs.push(ScenarioSpec::level(l, args.wind_pct));
        }
    }
    let rows = penetration_sweep(&base, &specs, &event, &cfg, &mcfg, Some(&flag_table));

    let mut written = Vec::new();
    write_artifact(
        &args.out_dir.join("sweep.csv"),
        &write_sweep_csv(&rows),
        &mut written,
    )?;
    let mut row_docs = Vec::new();
    for r in &rows {
        let mut row = json!({ "label": r.label, "spec": r.spec, "flags": r.flags() });
        if let SweepRowOutcome::Ok {
            metrics, output, ..
        } = &r.outcome
        {
            let name = format!("trace_{}.csv", file_label(&r.label));
            write_artifact(
                &args.out_dir.join(&name),
                &write_trace_csv(&output.trace, &[]),
                &mut written,
            )?;
            row["metrics"] = json!(metrics);
            row["trace"] = Value::String(name);
        }
        row_docs.push(row);
    }
    let doc = json!({
        "config": {
            "simulation": cfg,
            "metrics": mcfg,
            "event": event,
            "wind_pct": args.wind_pct,
            "flag_table": flag_table,
        },
        "rows": row_docs,
    });
    write_artifact(
        &args.out_dir.join("sweep.json"),
        &to_json(&doc),
        &mut written,
    )?;

    let table = write_sweep_csv(&rows);
    if rows.iter().all(|r| r.metrics().is_none()) {
        return Err(Failure::Runtime(format!(
            "every sweep row failed\n{}",
            table.trim_end()
        )));
    }
    Ok((written, table.trim_end().to_string()))
}

fn cmd_convergence(args: &ConvergenceArgs) -> CmdResult {
    let case = load_case(&args.case)?;
    let event = resolve_event(&args.event)?;
    let cfg = sim_config(&args.sim, false)?;
    let mcfg = metrics_config(&args.metric_flags)?;
    let report = verify_convergence(&case, &event, &cfg, &mcfg).map_err(|e| match e {
        ConvergenceError::Sim(s) => Failure::from(s),
        ConvergenceError::Metrics(m) => Failure::from(m),
    })?;
    let doc = json!({
        "config": { "simulation": cfg, "metrics": mcfg, "event": event },
        "report": report,
    });
    let mut written = Vec::new();
    write_artifact(&args.out, &to_json(&doc), &mut written)?;
    Ok((
        written,
        format!(
            "nadir {:.6} Hz at dt {} s, {:.6} Hz at dt {} s: delta {:.3e} Hz{}",
            report.nadir_hz,
            report.dt_s,
            report.nadir_half_hz,
            report.dt_half_s,
            report.nadir_delta_hz,
            if report.non_smooth {
                " (valve limits hit)"
            } else {
                ""
            }
        ),
    ))
}

fn dispatch(command: &Command) -> CmdResult {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Scenario(ScenarioCommand::Build(a)) => cmd_scenario_build(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Convergence(a) => cmd_convergence(a),
    }
}

/// Run a parsed command.
pub fn run(cli: &Cli) -> CommandOutcome {
    let result = match cli.jobs {
        Some(0) => Err(Failure::Validation("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Failure::Runtime(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok((artifacts_written, summary)) => CommandOutcome {
            exit_code: EXIT_OK,
            artifacts_written,
            summary,
        },
        Err(f) => CommandOutcome {
            exit_code: f.code(),
            artifacts_written: Vec::new(),
            summary: f.message(),
        },
    }
}

/// Parse arguments and run. Usage errors exit 1; `--help` and `--version` exit 0.
pub fn run_from_args<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let exit_code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            CommandOutcome {
                exit_code,
                artifacts_written: Vec::new(),
                summary: e.render().to_string(),
            }
        }
    }
}
