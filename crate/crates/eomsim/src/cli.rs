//! Command-line front end.
//!
//! Four subcommands cover the workflow: `spectrum` sweeps the steady
//! response, `simulate` runs a drive waveform through the time-domain solver,
//! `synthesize` compiles an absorption target into a voltage program (and can
//! replay it), and `metrics` prints figures of merit. Every run that writes
//! files also writes a manifest with content digests, so identical inputs can
//! be checked to give identical outputs.
//!
//! Exit codes: 0 success, 2 usage or configuration problem, 3 numeric or
//! solver failure, 4 target out of the reachable band with clamping off.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis;
use crate::dynamics::{self, Method, SolverConfig};
use crate::io;
use crate::params::Config;
use crate::synthesis::{self, SynthesisError, WaveformShape};

#[derive(Debug, Parser)]
#[command(
    name = "eomsim",
    version,
    about = "Voltage-to-absorption modulator simulator and waveform synthesis"
)]
pub struct Cli {
    /// Device configuration JSON.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration scalar, dotted.path=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep steady-state susceptibility over probe detuning and drive.
    Spectrum {
        /// Lowest probe detuning (rad/s).
        #[arg(long, allow_hyphen_values = true)]
        dp_min: f64,
        /// Highest probe detuning (rad/s).
        #[arg(long, allow_hyphen_values = true)]
        dp_max: f64,
        /// Number of probe detuning points.
        #[arg(long)]
        dp_steps: usize,
        /// Lowest squared drive voltage (V^2).
        #[arg(long)]
        u2_min: f64,
        /// Highest squared drive voltage (V^2).
        #[arg(long)]
        u2_max: f64,
        /// Number of drive points.
        #[arg(long)]
        u2_steps: usize,
        /// Output CSV path; the manifest lands alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the coupled system under a drive waveform.
    Simulate {
        /// Analytic waveform kind. Mutually exclusive with --table.
        #[arg(long, value_enum, conflicts_with = "table")]
        kind: Option<Kind>,
        /// Waveform period (s).
        #[arg(long)]
        period: Option<f64>,
        /// High drive level (V^2).
        #[arg(long)]
        peak: Option<f64>,
        /// Low drive level (V^2).
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        /// Sine phase offset (rad).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phase: f64,
        /// How many periods to run.
        #[arg(long, default_value_t = 3.0)]
        cycles: f64,
        /// Drive program CSV (t,u_sq) to play back instead of --kind.
        #[arg(long, value_name = "FILE")]
        table: Option<PathBuf>,
        /// Solver step (s).
        #[arg(long, default_value_t = 1e-9)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::ClosedForm)]
        method: MethodArg,
        /// Output trajectory CSV path; the manifest lands alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile an absorption target into a voltage program.
    Synthesize {
        /// Target CSV (t,a_target).
        #[arg(long, value_name = "FILE")]
        target: PathBuf,
        /// Move out-of-band samples to the nearest reachable level instead of
        /// failing; clipped samples are reported alongside the program.
        #[arg(long)]
        clamp: bool,
        /// Also run the compiled program through the solver and write the
        /// replayed trajectory next to the program.
        #[arg(long)]
        replay: bool,
        /// Solver step for the replay (s).
        #[arg(long, default_value_t = 1e-9)]
        dt: f64,
        /// Output program CSV path; clip report, replay, and manifest land
        /// alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print modulation figures of merit as JSON on stdout.
    Metrics {
        /// Squared drive voltage of the on state (V^2).
        #[arg(long)]
        um_sq: f64,
        /// Also write the metrics JSON and a manifest to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Sine,
    Square,
    Sawtooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    ClosedForm,
    Rk4Adaptive,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::ClosedForm => Method::ClosedForm,
            MethodArg::Rk4Adaptive => Method::Rk4Adaptive,
        }
    }
}

enum Failure {
    /// Usage, configuration, or file problem.
    Usage(String),
    /// Solver or numeric failure.
    Numeric(String),
    /// Target outside the reachable band with clamping off.
    Band(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Band(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) | Failure::Band(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Entry point behind `main`; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_thread_pool();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output; keep its exit code
            // for those and map real parse errors to the usage code.
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("EOMSIM_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("warning: ignoring unparsable EOMSIM_THREADS={raw:?}");
            }
        }
    }
}

struct LoadedConfig {
    config: Config,
    device: crate::params::DeviceParams,
    /// SHA-256 of the canonical post-override configuration document.
    digest: String,
    /// SHA-256 of the configuration file as given.
    file_digest: String,
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig, Failure> {
    let path = path.ok_or_else(|| usage("--config is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let file_digest = io::sha256_hex(text.as_bytes());
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    let canonical = io::canonical_json(&value);
    let digest = io::sha256_hex(canonical.as_bytes());
    let config: Config = serde_json::from_value(value)
        .map_err(|e| usage(format!("config rejected: {e}")))?;
    let (device, warnings) = config.device().map_err(|e| usage(e.to_string()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(LoadedConfig { config, device, digest, file_digest })
}

fn apply_override(value: &mut serde_json::Value, item: &str) -> Result<(), Failure> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| usage(format!("--set needs KEY=VALUE, got {item:?}")))?;
    if key.is_empty() {
        return Err(usage(format!("--set needs a key, got {item:?}")));
    }
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = value;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| usage(format!("--set path {key:?} does not address an object")))?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(usage(format!("--set needs a key, got {item:?}")))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let loaded = load_config(cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::Spectrum { dp_min, dp_max, dp_steps, u2_min, u2_max, u2_steps, out } => {
            cmd_spectrum(&loaded, dp_min, dp_max, dp_steps, u2_min, u2_max, u2_steps, &out)
        }
        Command::Simulate {
            kind,
            period,
            peak,
            floor,
            phase,
            cycles,
            table,
            dt,
            method,
            out,
        } => cmd_simulate(
            &loaded, kind, period, peak, floor, phase, cycles, table, dt, method, &out,
        ),
        Command::Synthesize { target, clamp, replay, dt, out } => {
            cmd_synthesize(&loaded, &target, clamp, replay, dt, &out)
        }
        Command::Metrics { um_sq, out } => cmd_metrics(&loaded, um_sq, out.as_deref()),
    }
}

/// Path of a companion file: the output path with its extension replaced by
/// `suffix` (e.g. "run.csv" -> "run.manifest.json").
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

struct ManifestBuilder {
    command: &'static str,
    config_digest: String,
    parameters: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl ManifestBuilder {
    fn new(command: &'static str, loaded: &LoadedConfig, parameters: serde_json::Value) -> Self {
        let mut inputs = BTreeMap::new();
        inputs.insert("config".to_string(), loaded.file_digest.clone());
        ManifestBuilder {
            command,
            config_digest: loaded.digest.clone(),
            parameters,
            inputs,
            outputs: BTreeMap::new(),
        }
    }

    fn input(&mut self, role: &str, bytes: &[u8]) {
        self.inputs.insert(role.to_string(), io::sha256_hex(bytes));
    }

    fn emit(&mut self, path: &Path, content: &str) -> Result<(), Failure> {
        write_file(path, content)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.outputs.insert(name, io::sha256_hex(content.as_bytes()));
        Ok(())
    }

    fn finish(self, out: &Path) -> Result<(), Failure> {
        let manifest = io::RunManifest {
            tool: "eomsim".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config_digest: self.config_digest,
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        write_file(&sibling(out, "manifest.json"), &manifest.to_json())
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectrum(
    loaded: &LoadedConfig,
    dp_min: f64,
    dp_max: f64,
    dp_steps: usize,
    u2_min: f64,
    u2_max: f64,
    u2_steps: usize,
    out: &Path,
) -> Result<(), Failure> {
    if dp_steps == 0 || u2_steps == 0 {
        return Err(usage("step counts must be at least 1"));
    }
    if !(dp_min <= dp_max) || !(u2_min <= u2_max) {
        return Err(usage("sweep ranges must satisfy min <= max"));
    }
    if !(u2_min >= 0.0) {
        return Err(usage("squared voltages cannot be negative"));
    }
    let dps = analysis::linspace(dp_min, dp_max, dp_steps);
    let us = analysis::linspace(u2_min, u2_max, u2_steps);
    let table = analysis::spectrum_sweep(&loaded.device, &dps, &us)
        .map_err(|e| Failure::Numeric(e.to_string()))?;
    let mut manifest = ManifestBuilder::new(
        "spectrum",
        loaded,
        serde_json::json!({
            "dp_min": dp_min, "dp_max": dp_max, "dp_steps": dp_steps,
            "u2_min": u2_min, "u2_max": u2_max, "u2_steps": u2_steps,
        }),
    );
    manifest.emit(out, &io::spectrum_csv(&table))?;
    manifest.finish(out)
}

/// Pick a recording stride that keeps trajectory files near a few thousand
/// rows regardless of the step count.
fn stride_for(steps: f64) -> usize {
    ((steps / 5000.0).ceil() as usize).max(1)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    loaded: &LoadedConfig,
    kind: Option<Kind>,
    period: Option<f64>,
    peak: Option<f64>,
    floor: f64,
    phase: f64,
    cycles: f64,
    table: Option<PathBuf>,
    dt: f64,
    method: MethodArg,
    out: &Path,
) -> Result<(), Failure> {
    let mut manifest_params = serde_json::json!({
        "dt": dt,
        "method": match method { MethodArg::ClosedForm => "closed-form", MethodArg::Rk4Adaptive => "rk4-adaptive" },
    });
    let mut table_bytes: Option<String> = None;

    let (shape, duration, description) = if let Some(path) = table {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| usage(format!("cannot read table {}: {e}", path.display())))?;
        let program = io::parse_program_csv(&text).map_err(|e| usage(e.to_string()))?;
        let nodes: Vec<(f64, f64)> = program.times.iter().copied().zip(program.u_sq).collect();
        let shape = WaveformShape::Table { nodes };
        shape.validate().map_err(|e| usage(e.to_string()))?;
        let duration = shape.period();
        if !(duration > 0.0) {
            return Err(usage("table must span a positive time range"));
        }
        table_bytes = Some(text);
        (shape, duration, serde_json::json!({"kind": "table", "nodes": program.times.len()}))
    } else {
        let kind = kind.ok_or_else(|| usage("either --kind or --table is required"))?;
        let period = period.ok_or_else(|| usage("--period is required with --kind"))?;
        let peak = peak.ok_or_else(|| usage("--peak is required with --kind"))?;
        if peak < floor {
            return Err(usage(format!("--peak {peak} must not be below --floor {floor}")));
        }
        if !(cycles > 0.0) || !cycles.is_finite() {
            return Err(usage(format!("--cycles must be positive, got {cycles}")));
        }
        let shape = match kind {
            Kind::Sine => WaveformShape::Sine { period, floor, peak, phase },
            Kind::Square => WaveformShape::Square { period, floor, peak },
            Kind::Sawtooth => WaveformShape::Sawtooth { period, floor, peak },
        };
        shape.validate().map_err(|e| usage(e.to_string()))?;
        let duration = period * cycles;
        let name = match kind {
            Kind::Sine => "sine",
            Kind::Square => "square",
            Kind::Sawtooth => "sawtooth",
        };
        (
            shape,
            duration,
            serde_json::json!({
                "kind": name, "period": period, "peak": peak, "floor": floor,
                "phase": phase, "cycles": cycles,
            }),
        )
    };

    let cfg = SolverConfig {
        dt,
        method: method.into(),
        record_stride: stride_for(duration / dt),
        ..SolverConfig::default()
    };
    let traj = dynamics::simulate(&loaded.device, |t| shape.u_sq_at(t), duration, &cfg)
        .map_err(|e| Failure::Numeric(e.to_string()))?;

    manifest_params["waveform"] = description;
    manifest_params["duration"] = serde_json::json!(duration);
    manifest_params["record_stride"] = serde_json::json!(cfg.record_stride);
    let mut manifest = ManifestBuilder::new("simulate", loaded, manifest_params);
    if let Some(text) = table_bytes {
        manifest.input("table", text.as_bytes());
    }
    manifest.emit(out, &io::trajectory_csv(&traj))?;
    eprintln!(
        "absorption range [{:.6e}, {:.6e}] over {} steps",
        traj.min_absorption, traj.max_absorption, traj.steps
    );
    manifest.finish(out)
}

fn cmd_synthesize(
    loaded: &LoadedConfig,
    target_path: &Path,
    clamp: bool,
    replay: bool,
    dt: f64,
    out: &Path,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(target_path)
        .map_err(|e| usage(format!("cannot read target {}: {e}", target_path.display())))?;
    let target = io::parse_target_csv(&text).map_err(|e| usage(e.to_string()))?;
    let (program, clips) =
        synthesis::compile_target(&loaded.device, &target, clamp).map_err(|e| match e {
            SynthesisError::OutOfBandAt { .. } => Failure::Band(e.to_string()),
            other => usage(other.to_string()),
        })?;

    let mut manifest = ManifestBuilder::new(
        "synthesize",
        loaded,
        serde_json::json!({
            "clamp": clamp, "replay": replay, "dt": dt,
            "samples": program.times.len(), "clipped": clips.len(),
        }),
    );
    manifest.input("target", text.as_bytes());
    manifest.emit(out, &io::program_csv(&program))?;
    if !clips.is_empty() {
        eprintln!("clamped {} of {} samples into the reachable band", clips.len(), program.times.len());
        manifest.emit(&sibling(out, "clips.json"), &io::clips_json(&clips))?;
    }
    if replay {
        let span = program.times.last().copied().unwrap_or(0.0)
            - program.times.first().copied().unwrap_or(0.0);
        if !(span > 0.0) {
            return Err(usage("replay needs a target spanning a positive time range"));
        }
        let cfg = SolverConfig {
            dt,
            record_stride: stride_for(span / dt),
            ..SolverConfig::default()
        };
        let traj = dynamics::simulate(&loaded.device, |t| program.u_sq_at(t), span, &cfg)
            .map_err(|e| Failure::Numeric(e.to_string()))?;
        manifest.emit(&sibling(out, "replay.csv"), &io::trajectory_csv(&traj))?;
        eprintln!(
            "replay absorption range [{:.6e}, {:.6e}]",
            traj.min_absorption, traj.max_absorption
        );
    }
    manifest.finish(out)
}

fn cmd_metrics(loaded: &LoadedConfig, um_sq: f64, out: Option<&Path>) -> Result<(), Failure> {
    if !(um_sq > 0.0) || !um_sq.is_finite() {
        return Err(usage(format!("--um-sq must be positive, got {um_sq}")));
    }
    let metrics = analysis::modulation_metrics(&loaded.device, um_sq)
        .map_err(|e| Failure::Numeric(e.to_string()))?;
    let value = serde_json::to_value(&metrics)
        .map_err(|e| Failure::Numeric(format!("metrics serialization failed: {e}")))?;
    let rendered = serde_json::to_string_pretty(&value)
        .map_err(|e| Failure::Numeric(format!("metrics serialization failed: {e}")))?;
    println!("{rendered}");
    if let Some(path) = out {
        let mut manifest =
            ManifestBuilder::new("metrics", loaded, serde_json::json!({"um_sq": um_sq}));
        manifest.emit(path, &rendered)?;
        manifest.finish(path)?;
    }
    Ok(())
}
