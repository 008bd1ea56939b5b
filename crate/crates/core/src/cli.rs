//! File formats, configuration and the `simulate` / `analyze` / `spectrum`
//! commands.
//!
//! Exit codes: 0 success, 1 usage, 2 data or schema error, 3 analysis failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::signal::{Recording, Site, Trace};
use crate::synth::{simulate_scenario, GroundTruth, ScenarioConfig, SensorTransfer, SiteTemplates, SynthError};
use crate::vitals::{analyze_recording, chest_spectrum, AnalysisConfig, VitalsError, VitalsReport};

/// Largest allowed deviation of a time stamp from the uniform grid, seconds.
pub const TIME_TOLERANCE: f64 = 1e-6;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("row {row}, column `{column}`: {message}")]
    Schema { row: usize, column: String, message: String },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Vitals(#[from] VitalsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. }
            | CliError::Schema { .. }
            | CliError::Malformed(_)
            | CliError::Config(_)
            | CliError::Synth(_) => 2,
            CliError::Vitals(_) => 3,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Everything a run can be configured with. Unknown keys are rejected; every
/// section except `scenario` falls back to its defaults, and `scenario.seed`
/// has no default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub transfer: SensorTransfer,
    #[serde(default)]
    pub templates: SiteTemplates,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config, optionally forcing `scenario.seed`.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(seed), Some(scenario)) = (seed, value.get_mut("scenario").and_then(|s| s.as_object_mut())) {
            scenario.insert("seed".into(), seed.into());
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON of the effective configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Writes `time_s,<site>...` with one row per sample. Numbers use the
/// shortest representation that reads back to the same `f64`.
pub fn write_recording_to<W: Write>(recording: &Recording, out: W) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["time_s".to_string()];
    header.extend(recording.channels().iter().map(|c| c.site().to_string()));
    let wrap = |e: csv::Error| CliError::Malformed(e.to_string());
    w.write_record(&header).map_err(wrap)?;
    let channels = recording.channels();
    let mut row = Vec::with_capacity(channels.len() + 1);
    for i in 0..recording.len() {
        row.clear();
        row.push(channels[0].time_at(i).to_string());
        row.extend(channels.iter().map(|c| c.samples()[i].to_string()));
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn write_recording(recording: &Recording, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_recording_to(recording, BufWriter::new(file))
}

/// Parses a recording CSV. Rows are numbered from 1 for the header.
pub fn read_recording_from<R: Read>(input: R, label: &str) -> Result<Recording, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| CliError::Malformed(e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CliError::Malformed("empty file".into()));
    }
    if &header[0] != "time_s" {
        return Err(CliError::Schema {
            row: 1,
            column: header[0].to_string(),
            message: "first column must be `time_s`".into(),
        });
    }
    if header.len() < 2 {
        return Err(CliError::Malformed("no site columns".into()));
    }
    let mut sites = Vec::new();
    for name in header.iter().skip(1) {
        let site: Site = name.parse().map_err(|m: String| CliError::Schema {
            row: 1,
            column: name.to_string(),
            message: m,
        })?;
        if sites.contains(&site) {
            return Err(CliError::Schema {
                row: 1,
                column: name.to_string(),
                message: "duplicate site column".into(),
            });
        }
        sites.push(site);
    }

    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); sites.len()];
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| CliError::Schema {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(CliError::Schema {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| CliError::Schema {
                row,
                column: header[j].to_string(),
                message: format!("`{field}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(CliError::Schema {
                    row,
                    column: header[j].to_string(),
                    message: "value is not finite".into(),
                });
            }
            if j == 0 {
                times.push(value);
            } else {
                columns[j - 1].push(value);
            }
        }
    }
    if times.len() < 2 {
        return Err(CliError::Malformed(format!(
            "need at least two samples to infer the sample rate, found {}",
            times.len()
        )));
    }

    let n = times.len();
    let t0 = times[0];
    let dt = (times[n - 1] - t0) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(CliError::Schema {
            row: 3,
            column: "time_s".into(),
            message: "time must be strictly increasing".into(),
        });
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = t0 + i as f64 * dt;
        if (t - expected).abs() > TIME_TOLERANCE || (i > 0 && t <= times[i - 1]) {
            return Err(CliError::Schema {
                row: i + 2,
                column: "time_s".into(),
                message: format!("time {t} is off the uniform grid (expected {expected})"),
            });
        }
    }
    let raw_rate = 1.0 / dt;
    let rate = if (raw_rate - raw_rate.round()).abs() <= 1e-6 * raw_rate {
        raw_rate.round()
    } else {
        raw_rate
    };

    let channels = sites
        .into_iter()
        .zip(columns)
        .map(|(site, samples)| Trace::new(rate, t0, samples, site))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Malformed(e.to_string()))?;
    Recording::new(channels, label).map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn read_recording(path: &Path) -> Result<Recording, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_recording_from(io::BufReader::new(file), &label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_digest: String,
    pub seed: Option<u64>,
    pub tool_version: String,
}

/// A vitals report plus run metadata, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub report: VitalsReport,
    pub metadata: RunMetadata,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Malformed(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_report(report: &ReportFile, path: &Path) -> Result<(), CliError> {
    if !report.report.is_well_formed() {
        return Err(CliError::Malformed("report contains a negative or non-finite value".into()));
    }
    write_json(report, path)
}

/// Path of the ground-truth sidecar for a simulated recording.
pub fn truth_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".truth.json");
    PathBuf::from(s)
}

#[derive(Debug, Parser)]
#[command(name = "fibervitals", version, about = "Simulate and analyze fiber-sensor vital-sign recordings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording and its ground truth.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Overrides `scenario.seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Derive vitals from a recording.
    Analyze {
        input: PathBuf,
        /// Arterial path difference between ankle and wrist, metres.
        #[arg(long = "distance-m")]
        distance_m: Option<f64>,
        /// Treadmill speed, km/h.
        #[arg(long = "speed-kmh")]
        speed_kmh: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the power spectral density of one column.
    Spectrum {
        input: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Runs `simulate`; returns the ground truth that was written.
pub fn cmd_simulate(config: &Path, output: &Path, seed: Option<u64>) -> Result<GroundTruth, CliError> {
    let cfg = ConfigFile::load(config, seed)?;
    let scenario = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("a `scenario` section with an explicit `seed` is required".into()))?;
    let (recording, truth) = simulate_scenario(scenario, &cfg.templates, &cfg.transfer)?;
    write_recording(&recording, output)?;
    write_json(&truth, &truth_path(output))?;
    Ok(truth)
}

fn positive_flag(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Usage(format!("--{name} must be positive, got {x}"))),
        _ => Ok(v),
    }
}

/// Runs `analyze`; returns the report that was (optionally) written.
pub fn cmd_analyze(
    input: &Path,
    distance_m: Option<f64>,
    speed_kmh: Option<f64>,
    report_path: Option<&Path>,
    config: Option<&Path>,
) -> Result<ReportFile, CliError> {
    let distance = positive_flag("distance-m", distance_m)?;
    let speed = positive_flag("speed-kmh", speed_kmh)?.map(|v| v / 3.6);
    let cfg = match config {
        Some(p) => ConfigFile::load(p, None)?,
        None => ConfigFile::default(),
    };
    let recording = read_recording(input)?;
    if !recording.channels().iter().any(|c| c.site().is_pulse_site() || c.site() == Site::Chest) {
        return Err(CliError::Malformed("no chest, wrist or ankle column".into()));
    }
    let report = analyze_recording(&recording, &cfg.analysis, distance, speed)?;
    let file = ReportFile {
        report,
        metadata: RunMetadata {
            config_digest: cfg.digest(),
            seed: cfg.scenario.as_ref().map(|s| s.seed),
            tool_version: TOOL_VERSION.into(),
        },
    };
    if let Some(p) = report_path {
        write_report(&file, p)?;
    }
    Ok(file)
}

/// Runs `spectrum`: two-column CSV `frequency_Hz,psd`.
pub fn cmd_spectrum(input: &Path, column: &str, output: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let site: Site = column.parse().map_err(CliError::Usage)?;
    let cfg = match config {
        Some(p) => ConfigFile::load(p, None)?,
        None => ConfigFile::default(),
    };
    let recording = read_recording(input)?;
    let trace = recording
        .channel(site)
        .ok_or_else(|| CliError::Usage(format!("no column `{column}` in {}", input.display())))?;
    let spectrum = chest_spectrum(trace, &cfg.analysis.spectral).map_err(|e| CliError::Malformed(e.to_string()))?;
    let file = File::create(output).map_err(|e| CliError::io(output, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| CliError::Malformed(e.to_string());
    w.write_record(["frequency_Hz", "psd"]).map_err(wrap)?;
    for (f, p) in spectrum.frequencies().zip(&spectrum.power) {
        w.write_record([f.to_string(), p.to_string()]).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(output, e))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, output, seed } => cmd_simulate(&config, &output, seed).map(|truth| {
            println!("wrote {} ({} wrist beats)", output.display(), truth.channels[0].len());
        }),
        Command::Analyze {
            input,
            distance_m,
            speed_kmh,
            report,
            config,
        } => cmd_analyze(&input, distance_m, speed_kmh, report.as_deref(), config.as_deref()).map(|file| {
            println!("{}", file.report.summary());
            for w in &file.report.warnings {
                eprintln!("warning: {w}");
            }
        }),
        Command::Spectrum {
            input,
            column,
            output,
            config,
        } => cmd_spectrum(&input, &column, &output, config.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
