//! Operator entry points: stimulus generation, calibration fitting, and
//! the end-to-end pipeline. The `electroar` binary is a thin wrapper
//! around [`run`].
//!
//! Exit status contract: 0 success, 1 domain error, 2 usage error.
//! In simulated-time mode `--seed` is mandatory — reproducibility is a
//! test surface, not an option. The output directory defaults to the
//! `ELECTROAR_OUT` environment variable, then `.`; flags override.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{
    classify_dynamic, classify_static, emit_report, report::format_sig6, AnalysisError,
    ConfusionMatrix, StimulationMap, TrialTiming,
};
use crate::grid::{FingerId, GridGeometry};
use crate::modulator::PulseEvent;
use crate::patterns::{
    bar_wireframes, generate_bar, generate_scroll, recording, BarOrientation, BarPattern,
    PatternError, PrismShape, PrismSpec, RecordingError, RecordingHeader,
    DEFAULT_BAR_AMPLITUDE, DEFAULT_BAR_THICKNESS, DEFAULT_SCROLL_AMPLITUDE,
};
use crate::pipeline::{derive_seed, expected_map, run_pipeline, PipelineConfig, PipelineError};
use crate::psychophysics::{
    fit, read_calibration_csv, read_model_record, write_k_trace, write_model_record,
    MagnitudeSample, PsychophysicsError, SigmoidModel, DEFAULT_DEADZONE_FRACTION,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Psychophysics(#[from] PsychophysicsError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "electroar",
    version,
    about = "Tactile-transfer pipeline simulator",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a stimulus recording (bar or prism scroll).
    Generate {
        #[command(subcommand)]
        stimulus: GenerateCommand,
    },
    /// Fit the sigmoid transfer function from a calibration CSV.
    Fit(FitArgs),
    /// Replay recordings through the link, scheduler, and classifier.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// A static bar held for a fixed number of ticks.
    Bar(BarArgs),
    /// A prism stick scrolled back and forth between index and thumb.
    Scroll(ScrollArgs),
}

fn parse_orientation(value: &str) -> Result<BarOrientation, String> {
    value
        .parse::<u32>()
        .ok()
        .and_then(BarOrientation::from_degrees)
        .ok_or_else(|| format!("`{value}` is not one of 0, 45, 90, 135"))
}

fn parse_shape(value: &str) -> Result<PrismShape, String> {
    PrismShape::from_label(value)
        .ok_or_else(|| format!("`{value}` is not one of circle, triangle, square, hexagon"))
}

#[derive(Debug, Args)]
pub struct BarArgs {
    /// Bar inclination in degrees: 0, 45, 90 or 135.
    #[arg(long, value_parser = parse_orientation)]
    pub deg: BarOrientation,
    /// Bar thickness in sensel units.
    #[arg(long, default_value_t = DEFAULT_BAR_THICKNESS)]
    pub thickness: f64,
    /// Pressure amplitude in raw counts.
    #[arg(long, default_value_t = DEFAULT_BAR_AMPLITUDE)]
    pub amplitude: u16,
    /// How many ticks the bar is held (one frame per tick).
    #[arg(long, default_value_t = 2_400)]
    pub ticks: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScrollArgs {
    /// Cross-section: circle, triangle, square or hexagon.
    #[arg(long, value_parser = parse_shape)]
    pub shape: PrismShape,
    #[arg(long, default_value_t = 120)]
    pub frames_per_cycle: usize,
    /// Back-and-forth repetitions.
    #[arg(long, default_value_t = 10)]
    pub cycles: u32,
    #[arg(long, default_value_t = DEFAULT_SCROLL_AMPLITUDE)]
    pub amplitude: u16,
    /// Ticks each scroll frame stays on the wire; the raw sequence is
    /// one frame per tick.
    #[arg(long, default_value_t = 20)]
    pub ticks_per_frame: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Calibration CSV with header `probability,reported`.
    #[arg(long)]
    pub input: PathBuf,
    /// Model record output: one line `a,b,k,residual`.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional `k_candidate,residual` scan trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunMode {
    /// Instantaneous ticks; seed mandatory.
    Simulated,
    /// Ticks paced at 120 Hz real time.
    WallClock,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Input recordings; each is one recognition trial.
    #[arg(long = "recording", required = true, num_args = 1..)]
    pub recordings: Vec<PathBuf>,
    /// Fitted model record file (`a,b,k,residual`).
    #[arg(long, conflicts_with = "model_params")]
    pub model: Option<PathBuf>,
    /// Inline model coefficients `a,b,k`.
    #[arg(long)]
    pub model_params: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = RunMode::Simulated)]
    pub mode: RunMode,
    /// Link loss probability in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub loss: f64,
    #[arg(long, default_value_t = 1)]
    pub latency_ticks: u64,
    #[arg(long, default_value_t = 0)]
    pub jitter_ticks: u64,
    /// Adjacent-swap reorder probability in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub reorder: f64,
    /// Observation window for static trials; dynamic trials always span
    /// the whole recording.
    #[arg(long)]
    pub window_ticks: Option<u64>,
    #[arg(long, env = "ELECTROAR_OUT")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEADZONE_FRACTION)]
    pub deadzone: f64,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { stimulus } => match stimulus {
            GenerateCommand::Bar(args) => cmd_generate_bar(&args),
            GenerateCommand::Scroll(args) => cmd_generate_scroll(&args),
        },
        Command::Fit(args) => cmd_fit(&args),
        Command::Pipeline(args) => cmd_pipeline(&args),
    }
}

fn cmd_generate_bar(args: &BarArgs) -> Result<(), CliError> {
    let pattern = BarPattern {
        orientation: args.deg,
        thickness_sensels: args.thickness,
        amplitude: args.amplitude,
    };
    let grid = generate_bar(&pattern, GridGeometry::sensor());
    let frames = bar_wireframes(&grid, FingerId::Index, args.ticks);
    let header = RecordingHeader::for_geometry(GridGeometry::sensor())
        .with_meta("kind", "bar")
        .with_meta("label", args.deg.label())
        .with_meta("amplitude", args.amplitude)
        .with_meta("thickness", args.thickness)
        .with_meta("ticks", args.ticks);
    let written = recording::record_to_path(&args.out, header, &frames)?;
    println!("wrote {written} frames to {}", args.out.display());
    Ok(())
}

fn cmd_generate_scroll(args: &ScrollArgs) -> Result<(), CliError> {
    let spec = PrismSpec::new(args.shape);
    let sequence = generate_scroll(&spec, args.frames_per_cycle, args.cycles, args.amplitude)?
        .with_ticks_per_frame(args.ticks_per_frame);
    let frames = crate::patterns::scroll_wireframes(&sequence);
    let header = RecordingHeader::for_geometry(GridGeometry::sensor())
        .with_meta("kind", "scroll")
        .with_meta("label", args.shape.label())
        .with_meta("cycles", args.cycles)
        .with_meta("frames_per_cycle", args.frames_per_cycle)
        .with_meta("ticks_per_frame", args.ticks_per_frame)
        .with_meta("amplitude", args.amplitude);
    let written = recording::record_to_path(&args.out, header, &frames)?;
    println!("wrote {written} frames to {}", args.out.display());
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let file = fs::File::open(&args.input)?;
    let rows = read_calibration_csv(BufReader::new(file))?;
    let samples: Vec<MagnitudeSample> = rows;
    let (model, report) = fit(&samples)?;
    let mut out = Vec::new();
    write_model_record(&mut out, &model, report.residual)?;
    fs::write(&args.out, out)?;
    if let Some(trace_path) = &args.trace {
        let mut trace = Vec::new();
        write_k_trace(&mut trace, &report)?;
        fs::write(trace_path, trace)?;
    }
    println!(
        "fitted a={} b={} k={} residual={}",
        model.a(),
        model.b(),
        model.k(),
        report.residual
    );
    for (level, mean) in &report.per_level_means {
        println!("level {level}: mean reported {mean}");
    }
    println!("model written to {}", args.out.display());
    Ok(())
}

/// Corpus kind inferred from recording metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrialKind {
    Bar,
    Scroll,
}

struct TrialOutcome {
    true_label: String,
    predicted: String,
    detail: String,
}

fn load_model(args: &PipelineArgs) -> Result<SigmoidModel, CliError> {
    match (&args.model, &args.model_params) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            Ok(read_model_record(&text)?.0)
        }
        (None, Some(params)) => {
            let fields: Vec<&str> = params.split(',').collect();
            if fields.len() != 3 {
                return Err(CliError::Usage(format!(
                    "--model-params needs `a,b,k`, got `{params}`"
                )));
            }
            let mut values = [0.0f64; 3];
            for (slot, field) in values.iter_mut().zip(&fields) {
                *slot = field.trim().parse().map_err(|e| {
                    CliError::Usage(format!("--model-params field `{field}`: {e}"))
                })?;
            }
            Ok(SigmoidModel::new(values[0], values[1], values[2])?)
        }
        _ => Err(CliError::Usage(
            "exactly one of --model or --model-params is required".into(),
        )),
    }
}

fn meta_parse<T: std::str::FromStr>(
    header: &RecordingHeader,
    key: &str,
) -> Result<Option<T>, CliError> {
    match header.meta(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            CliError::Invalid(format!("recording meta `{key}` has unusable value `{raw}`"))
        }),
    }
}

fn bar_templates(
    model: &SigmoidModel,
    deadzone: f64,
    amplitude: u16,
    thickness: f64,
) -> Result<Vec<(String, StimulationMap)>, CliError> {
    BarOrientation::ALL
        .iter()
        .map(|&orientation| {
            let pattern = BarPattern {
                orientation,
                thickness_sensels: thickness,
                amplitude,
            };
            let grid = generate_bar(&pattern, GridGeometry::sensor());
            let map = expected_map(&grid, model, deadzone, u16::MAX)
                .map_err(PipelineError::from)?;
            Ok((orientation.label(), map))
        })
        .collect()
}

fn scroll_signatures() -> Vec<(String, f64)> {
    PrismShape::ALL
        .iter()
        .map(|shape| (shape.label().to_string(), shape.expected_peaks_per_cycle()))
        .collect()
}

fn pulse_log_csv(events: &[PulseEvent]) -> String {
    let mut out = String::from("tick,finger,electrode,pulse_width_us\n");
    for event in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            event.tick,
            event.finger.code(),
            event.electrode_index,
            event.pulse_width_us
        ));
    }
    out
}

fn maps_csv(maps: &[(usize, FingerId, StimulationMap)]) -> String {
    let mut out = String::from("recording,finger,electrode,density_hz\n");
    for (recording_idx, finger, map) in maps {
        for (electrode, density) in map.densities.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                recording_idx,
                finger.code(),
                electrode,
                format_sig6(*density)
            ));
        }
    }
    out
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let seed = match (args.mode, args.seed) {
        (RunMode::Simulated, Some(seed)) => seed,
        (RunMode::Simulated, None) => {
            return Err(CliError::Usage(
                "--seed is mandatory in simulated-time mode".into(),
            ));
        }
        (RunMode::WallClock, seed) => seed.unwrap_or_else(rand::random),
    };
    let model = load_model(args)?;
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));

    let mut kind_seen: Option<TrialKind> = None;
    let mut outcomes: Vec<TrialOutcome> = Vec::new();
    let mut all_events: Vec<PulseEvent> = Vec::new();
    let mut all_maps: Vec<(usize, FingerId, StimulationMap)> = Vec::new();

    for (index, path) in args.recordings.iter().enumerate() {
        let (header, frames) = recording::replay_from_path(path)?;
        let kind = match header.meta("kind") {
            Some("bar") => TrialKind::Bar,
            Some("scroll") => TrialKind::Scroll,
            other => {
                return Err(CliError::Invalid(format!(
                    "{}: recording kind {:?} is not `bar` or `scroll`",
                    path.display(),
                    other
                )));
            }
        };
        if *kind_seen.get_or_insert(kind) != kind {
            return Err(CliError::Invalid(
                "recordings mix bar and scroll corpora; classify them separately".into(),
            ));
        }
        let true_label = header
            .meta("label")
            .ok_or_else(|| {
                CliError::Invalid(format!("{}: recording has no label meta", path.display()))
            })?
            .to_string();

        let trial_seed = derive_seed(seed, 100 + index as u64);
        let mut config = PipelineConfig::new(model, trial_seed);
        config.link.loss_probability = args.loss;
        config.link.latency_ticks = args.latency_ticks;
        config.link.jitter_ticks = args.jitter_ticks;
        config.link.reorder_probability = args.reorder;
        config.deadzone_fraction = args.deadzone;
        config.pace_realtime = args.mode == RunMode::WallClock;

        let outcome = match kind {
            TrialKind::Bar => {
                config.window_ticks = args.window_ticks.unwrap_or(2_400);
                let amplitude =
                    meta_parse(&header, "amplitude")?.unwrap_or(DEFAULT_BAR_AMPLITUDE);
                let thickness =
                    meta_parse(&header, "thickness")?.unwrap_or(DEFAULT_BAR_THICKNESS);
                let templates = bar_templates(&model, args.deadzone, amplitude, thickness)?;
                let run = run_pipeline(&frames, &config)?;
                let map = run
                    .finger_maps
                    .get(&FingerId::Index)
                    .ok_or_else(|| {
                        CliError::Invalid(format!(
                            "{}: bar recording carries no index-finger frames",
                            path.display()
                        ))
                    })?
                    .clone();
                let decision = classify_static(&map, &templates)?;
                for (finger, finger_map) in &run.finger_maps {
                    all_maps.push((index, *finger, finger_map.clone()));
                }
                all_events.extend(run.events);
                TrialOutcome {
                    detail: format!(
                        "distances [{}]",
                        decision
                            .distances
                            .iter()
                            .map(|d| format_sig6(*d))
                            .collect::<Vec<_>>()
                            .join(" ")
                    ),
                    true_label: true_label.clone(),
                    predicted: decision.label,
                }
            }
            TrialKind::Scroll => {
                let cycles: u32 = meta_parse(&header, "cycles")?.ok_or_else(|| {
                    CliError::Invalid(format!("{}: scroll recording lacks cycles meta", path.display()))
                })?;
                let ticks_per_frame: u64 =
                    meta_parse(&header, "ticks_per_frame")?.unwrap_or(1).max(1);
                let span = frames.iter().map(|f| f.tick).max().unwrap_or(0) + ticks_per_frame;
                config.window_ticks = span;
                config.block_ticks = Some(ticks_per_frame);
                let run = run_pipeline(&frames, &config)?;
                let series = run
                    .finger_series
                    .get(&FingerId::Index)
                    .ok_or_else(|| {
                        CliError::Invalid(format!(
                            "{}: scroll recording carries no index-finger frames",
                            path.display()
                        ))
                    })?
                    .clone();
                let decision = classify_dynamic(&series, cycles, &scroll_signatures())?;
                for (finger, finger_map) in &run.finger_maps {
                    all_maps.push((index, *finger, finger_map.clone()));
                }
                all_events.extend(run.events);
                TrialOutcome {
                    detail: format!("peaks/cycle {}", format_sig6(decision.peaks_per_cycle)),
                    true_label: true_label.clone(),
                    predicted: decision.label,
                }
            }
        };
        outcomes.push(outcome);
    }

    let labels: Vec<String> = match kind_seen.expect("at least one recording") {
        TrialKind::Bar => BarOrientation::ALL.iter().map(|o| o.label()).collect(),
        TrialKind::Scroll => PrismShape::ALL
            .iter()
            .map(|s| s.label().to_string())
            .collect(),
    };
    let pairs: Vec<(String, String)> = outcomes
        .iter()
        .map(|o| (o.true_label.clone(), o.predicted.clone()))
        .collect();
    let matrix = ConfusionMatrix::from_pairs(&labels, &pairs)?;

    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("pulse_log.csv"), pulse_log_csv(&all_events))?;
    fs::write(out_dir.join("maps.csv"), maps_csv(&all_maps))?;
    // Recognition durations are a human measurement with no simulator
    // analogue, so the timing table only carries supplied trial logs.
    emit_report(&matrix, &TrialTiming::empty(), &out_dir)?;

    for (path, outcome) in args.recordings.iter().zip(&outcomes) {
        let verdict = if outcome.true_label == outcome.predicted { "ok" } else { "MISS" };
        println!(
            "{}: true={} predicted={} [{verdict}] ({})",
            path.display(),
            outcome.true_label,
            outcome.predicted,
            outcome.detail
        );
    }
    println!(
        "accuracy {}/{} = {}",
        matrix.correct_trials(),
        matrix.total_trials(),
        format_sig6(matrix.overall_accuracy())
    );
    println!("reports written to {}", out_dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn orientation_and_shape_parsers() {
        assert_eq!(parse_orientation("45").unwrap(), BarOrientation::Deg45);
        assert!(parse_orientation("30").is_err());
        assert_eq!(parse_shape("hexagon").unwrap(), PrismShape::Hexagon);
        assert!(parse_shape("octagon").is_err());
    }

    #[test]
    fn model_params_parsing() {
        let args = PipelineArgs {
            recordings: vec![],
            model: None,
            model_params: Some("3,6,150".into()),
            seed: Some(1),
            mode: RunMode::Simulated,
            loss: 0.0,
            latency_ticks: 1,
            jitter_ticks: 0,
            reorder: 0.0,
            window_ticks: None,
            out_dir: None,
            deadzone: DEFAULT_DEADZONE_FRACTION,
        };
        let model = load_model(&args).unwrap();
        assert_eq!((model.a(), model.b(), model.k()), (3.0, 6.0, 150.0));
        let bad = PipelineArgs {
            model_params: Some("3,6".into()),
            ..args
        };
        assert!(matches!(load_model(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn usage_errors_exit_2_domain_errors_exit_1() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Invalid("x".into()).exit_code(), 1);
    }
}
