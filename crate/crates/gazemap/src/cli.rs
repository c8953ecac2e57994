//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input format error, 3 configuration error,
//! 4 internal invariant violation.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gazemap_core::pipeline::map_trial;
use gazemap_core::{FixationError, FrameTimeline};

use crate::config::{load_config, ConfigError, RunConfigFile};
use crate::gaze_log::{parse_gaze_stream, ParseReport};
use crate::mask_file::{parse_maskset_unchecked, MaskFileError, ViolationList};
use crate::meta::{load_meta, MetaError, VideoMeta};
use crate::report::{
    load_trial_report, metrics_csv, metrics_json, to_json, validate_files, validation_csv, NamedMetrics, ReportError,
    TrialReport, ValidationDoc,
};
use crate::scenario::{generate, preset, ScenarioError, ScenarioSpec, PRESETS};

#[derive(Debug, Parser)]
#[command(name = "gazemap", version, about = "Map eye-tracker gaze onto per-frame AOI masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Structured,
    Tabular,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map one trial and write its report.
    Map {
        #[arg(long)]
        gaze: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Video-to-gaze clock offset in microseconds, replacing `t0_us` from the metadata.
        #[arg(long, allow_negative_numbers = true)]
        t0_us: Option<i64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Export the metrics of one or more trial reports.
    Metrics {
        #[arg(long = "report", required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "tabular")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare system fixation locations with ground truth.
    Validate {
        /// A trial report or a list of located frames.
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value = "structured")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Generate a synthetic trial with its ground truth.
    Simulate {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        /// One of participant1, participant2, participant3.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Print statistics of input files.
    Inspect {
        #[arg(long)]
        gaze: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MaskFileError> for CliError {
    fn from(e: MaskFileError) -> Self {
        input(e)
    }
}

impl From<MetaError> for CliError {
    fn from(e: MetaError) -> Self {
        input(e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        input(e)
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        input(e)
    }
}

impl From<FixationError> for CliError {
    fn from(e: FixationError) -> Self {
        match e {
            FixationError::ResolutionMismatch { .. } => input(e),
            FixationError::Config(_) => CliError::Config(e.to_string()),
            FixationError::Overlap { .. } => CliError::Internal(e.to_string()),
        }
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| input(format!("stdout: {e}"))),
    }
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, CliError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_gaze(path: &Path) -> Result<(gazemap_core::GazeStream, ParseReport), CliError> {
    parse_gaze_stream(open(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_masks(path: &Path) -> Result<(gazemap_core::MaskSet, Vec<gazemap_core::Violation>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    parse_maskset_unchecked(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn warn_soft_errors(path: &Path, report: &ParseReport) {
    if let Some(first) = report.malformed.first() {
        eprintln!(
            "{}: skipped {} malformed record(s); first at {first}",
            path.display(),
            report.malformed.len()
        );
    }
}

/// Input paths and overrides of one `map` run.
#[derive(Debug, Clone, Copy)]
pub struct MapInputs<'a> {
    pub gaze: &'a Path,
    pub masks: &'a Path,
    pub meta: &'a Path,
    pub config: Option<&'a Path>,
    pub t0_us: Option<i64>,
}

/// Maps one trial, returning the serialized report.
pub fn map_files(inputs: MapInputs<'_>, quiet: bool) -> Result<String, CliError> {
    let MapInputs {
        gaze,
        masks,
        meta,
        config,
        t0_us,
    } = inputs;
    let config = match config {
        Some(path) => load_config(path)?,
        None => RunConfigFile::default(),
    };
    let mapping = config.mapping()?;
    let (stream, soft) = load_gaze(gaze)?;
    if !quiet {
        warn_soft_errors(gaze, &soft);
    }
    let (maskset, violations) = load_masks(masks)?;
    if !violations.is_empty() {
        return Err(input(format!(
            "{}: mask file invalid: {}",
            masks.display(),
            ViolationList(violations)
        )));
    }
    let mut timeline = load_meta(meta)?;
    if let Some(t0) = t0_us {
        timeline = FrameTimeline::new(timeline.fps, timeline.frame_count, t0, timeline.resolution)
            .map_err(|e| input(format!("--t0-us: {e}")))?;
    }
    let record = map_trial(&timeline, &stream.gaze_track(), &maskset, &mapping)?;
    let report = TrialReport::new(&config, VideoMeta::from_timeline(&timeline), &record);
    report.check().map_err(CliError::Internal)?;
    let dwell_total: i64 = report.metrics.dwell_ms.values().map(|m| m.0).sum();
    if dwell_total > report.metrics.trial_duration_ms.0 {
        return Err(CliError::Internal("dwell time exceeds the trial duration".into()));
    }
    if !quiet {
        eprintln!(
            "{} frames, {} fixations ({} on target), TFR {:.2}",
            timeline.frame_count,
            report.metrics.fixation_count,
            report.metrics.on_target_count,
            report.metrics.tfr_reported
        );
    }
    Ok(report.to_json())
}

fn trial_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn inspect(gaze: Option<&Path>, masks: Option<&Path>, meta: Option<&Path>) -> Result<String, CliError> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let mut violations_found = None;
    if let Some(path) = gaze {
        let (stream, soft) = load_gaze(path)?;
        let stats = stream.stats();
        let _ = writeln!(out, "gaze {}", path.display());
        let _ = writeln!(
            out,
            "  records {}  comments {}  malformed {}",
            soft.records,
            soft.comments,
            soft.malformed.len()
        );
        for (kind, n) in &stats.sample_counts {
            let _ = writeln!(out, "  {:<4} {n}", kind.as_str());
        }
        let _ = writeln!(out, "  invalid {}", stats.invalid_count);
        let _ = writeln!(out, "  gaps {}", stats.gap_count);
        let _ = writeln!(out, "  rate {:.2} Hz", stats.measured_rate_hz);
        let _ = writeln!(out, "  span {} ms", stream.duration_us() as f64 / 1000.0);
        for issue in soft.malformed.iter().take(5) {
            let _ = writeln!(out, "  malformed {issue}");
        }
    }
    if let Some(path) = masks {
        let (set, violations) = load_masks(path)?;
        let _ = writeln!(out, "masks {}", path.display());
        let _ = writeln!(out, "  resolution {}x{}", set.resolution.width, set.resolution.height);
        let _ = writeln!(
            out,
            "  classes {}",
            set.class_table.keys().cloned().collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(out, "  frames {}  instances {}", set.frames.len(), set.instance_count());
        let _ = writeln!(out, "  violations {}", violations.len());
        for v in &violations {
            let _ = writeln!(out, "    {v}");
        }
        if !violations.is_empty() {
            violations_found = Some(path.display().to_string());
        }
    }
    if let Some(path) = meta {
        let t = load_meta(path)?;
        let _ = writeln!(out, "meta {}", path.display());
        let _ = writeln!(out, "  fps {}  frames {}  t0 {} us", t.fps, t.frame_count, t.t0_us);
        let _ = writeln!(out, "  resolution {}x{}", t.resolution.width, t.resolution.height);
        let _ = writeln!(out, "  duration {} ms", t.trial_duration_us() as f64 / 1000.0);
    }
    if gaze.is_none() && masks.is_none() && meta.is_none() {
        return Err(input("inspect needs --gaze, --masks or --meta"));
    }
    match violations_found {
        Some(path) => {
            print!("{out}");
            Err(input(format!("{path}: mask file invalid")))
        }
        None => Ok(out),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Map {
            gaze,
            masks,
            meta,
            config,
            t0_us,
            out,
            quiet,
        } => {
            let inputs = MapInputs {
                gaze: &gaze,
                masks: &masks,
                meta: &meta,
                config: config.as_deref(),
                t0_us,
            };
            let report = map_files(inputs, quiet)?;
            write_output(out.as_deref(), &report)
        }
        Command::Metrics { reports, format, out } => {
            let mut trials = Vec::with_capacity(reports.len());
            for path in &reports {
                let report = load_trial_report(path)?;
                trials.push(NamedMetrics {
                    trial: trial_name(path),
                    metrics: report.metrics,
                });
            }
            let text = match format {
                Format::Structured => metrics_json(&trials),
                Format::Tabular => metrics_csv(
                    &trials
                        .iter()
                        .map(|t| (t.trial.clone(), t.metrics.to_metrics()))
                        .collect::<Vec<_>>(),
                ),
            };
            write_output(out.as_deref(), &text)
        }
        Command::Validate {
            system,
            truth,
            format,
            out,
            quiet,
        } => {
            let report = validate_files(&system, &truth)?;
            let text = match format {
                Format::Structured => to_json(&ValidationDoc::from(&report)),
                Format::Tabular => validation_csv(&report),
            };
            write_output(out.as_deref(), &text)?;
            if !quiet {
                let line = format!(
                    "accuracy {} ({}/{} frames)",
                    report.accuracy,
                    report.matches,
                    report.rows.len()
                );
                if out.is_some() {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
            Ok(())
        }
        Command::Simulate {
            spec,
            preset: name,
            out,
            quiet,
        } => {
            let spec = match (spec, name) {
                (Some(path), _) => ScenarioSpec::load(&path)?,
                (None, Some(name)) => preset(&name).ok_or_else(|| {
                    input(format!(
                        "unknown preset {name:?}; expected one of {}",
                        PRESETS.join(", ")
                    ))
                })?,
                (None, None) => return Err(input("simulate needs --spec or --preset")),
            };
            let scenario = generate(&spec)?;
            scenario
                .write_to(&out)
                .map_err(|e| input(format!("{}: {e}", out.display())))?;
            if !quiet {
                let m = &scenario.truth.metrics;
                eprintln!(
                    "wrote {} frames to {}: {} fixations ({} on target)",
                    spec.timeline.frame_count,
                    out.display(),
                    m.fixation_count,
                    m.on_target_count
                );
            }
            Ok(())
        }
        Command::Inspect { gaze, masks, meta } => {
            let text = inspect(gaze.as_deref(), masks.as_deref(), meta.as_deref())?;
            write_output(None, &text)
        }
    }
}

/// Parses arguments, runs the command and reports errors on stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazemap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
