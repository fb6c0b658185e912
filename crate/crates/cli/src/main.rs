use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use mttsort::ga::{run_ga, GaSettings, SubScene};
use mttsort::io::{self, SequenceMeta};
use mttsort::metrics::{evaluate, predictions_from_results};
use mttsort::synth::{self, ScenarioSpec};
use mttsort::{load_preset, run_sequence, Error, TrackerConfig};

/// Multi-object tracking with appearance features and GA parameter search.
#[derive(Debug, Parser)]
#[command(name = "mttsort", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track a sequence and write per-frame results.
    #[command(group(ArgGroup::new("params").required(true).args(["config", "preset"])))]
    Track {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of config1..config7.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Optional `frame id left top width height` listing for visual overlays.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Score a results file against a sequence's ground truth.
    Evaluate {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Search tracker parameters with a genetic algorithm.
    Optimize {
        #[arg(long, num_args = 1.., required = true)]
        seqs: Vec<PathBuf>,
        #[arg(long)]
        ga_config: PathBuf,
        /// Values for parameters outside the search space (defaults otherwise).
        #[arg(long)]
        base_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Generate a synthetic sequence directory.
    #[command(group(ArgGroup::new("scenario").required(true).args(["preset", "spec"])))]
    Synth {
        /// One of clean, occlusion, lookalike, crowded.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPreset(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Data(Error::io(path, e)))
}

fn track(seq: &Path, config: Option<&Path>, preset: Option<&str>, out: &Path, overlay: Option<&Path>) -> Result<(), Failure> {
    let config = match (config, preset) {
        (Some(path), _) => TrackerConfig::load(path)?,
        (None, Some(name)) => load_preset(name)?,
        (None, None) => unreachable!("enforced by the argument group"),
    };
    let seq = io::load_sequence(seq)?;
    let results = run_sequence(&seq.detections, &config, seq.meta.frame_count)?;
    io::write_results(&results, out)?;
    if let Some(path) = overlay {
        write_file(path, &io::format_overlay(&results))?;
    }
    Ok(())
}

fn ground_truth(seq: &io::Sequence) -> Result<Vec<mttsort::LabeledBox>, Failure> {
    seq.ground_truth.clone().ok_or_else(|| {
        Failure::Data(Error::Schema {
            path: seq.dir.join(io::GROUND_TRUTH_FILE),
            reason: "ground truth file is missing".into(),
        })
    })
}

fn evaluate_cmd(seq: &Path, pred: &Path, report: Option<&Path>) -> Result<(), Failure> {
    let seq = io::load_sequence(seq)?;
    let gt = ground_truth(&seq)?;
    let results = io::load_results(pred)?;
    let text = evaluate(&gt, &predictions_from_results(&results))?.to_report_string();
    print!("{text}");
    if let Some(path) = report {
        write_file(path, &text)?;
    }
    Ok(())
}

fn optimize(
    seqs: &[PathBuf],
    ga_config: &Path,
    base_config: Option<&Path>,
    out: &Path,
    history: Option<&Path>,
) -> Result<(), Failure> {
    let settings = GaSettings::load(ga_config)?;
    let template = match base_config {
        Some(path) => TrackerConfig::load(path)?,
        None => TrackerConfig::default(),
    };
    let mut scenes = Vec::with_capacity(seqs.len());
    for dir in seqs {
        let seq = io::load_sequence(dir)?;
        scenes.push(SubScene {
            ground_truth: ground_truth(&seq)?,
            frame_count: seq.meta.frame_count,
            detections: seq.detections,
        });
    }
    let outcome = run_ga(&template, &settings.genes, &settings.ga, &scenes)?;

    let mut text = outcome.best.to_kv_string();
    text.push_str(&format!("# fitness = {:.6}\n", outcome.score));
    for line in outcome.history_table().lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    write_file(out, &text)?;
    if let Some(path) = history {
        write_file(path, &outcome.history_table())?;
    }
    println!("best fitness {:.6} after {} generations", outcome.score, outcome.history.len());
    Ok(())
}

fn synth_cmd(preset: Option<&str>, spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let (name, mut scenario) = match (preset, spec) {
        (Some(name), _) => {
            let scenario = synth::preset_scenario(name, 0).map_err(|e| match e {
                Error::Scenario(reason) => Failure::Usage(reason),
                e => Failure::from(e),
            })?;
            (name.to_string(), scenario)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Data(Error::io(path, e)))?;
            let stem = path.file_stem().map_or("synthetic".into(), |s| s.to_string_lossy().into_owned());
            (stem, ScenarioSpec::parse(&text, path)?)
        }
        (None, None) => unreachable!("enforced by the argument group"),
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let generated = synth::generate(&scenario)?;
    let meta = SequenceMeta {
        name,
        frame_count: scenario.frames,
        width: scenario.width.round() as u32,
        height: scenario.height.round() as u32,
        embedding_dim: scenario.embedding_dim,
    };
    io::write_sequence(out, &meta, &generated.detections, Some(&generated.ground_truth))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Track {
            seq,
            config,
            preset,
            out,
            overlay,
        } => track(&seq, config.as_deref(), preset.as_deref(), &out, overlay.as_deref()),
        Command::Evaluate { seq, pred, report } => evaluate_cmd(&seq, &pred, report.as_deref()),
        Command::Optimize {
            seqs,
            ga_config,
            base_config,
            out,
            history,
        } => optimize(&seqs, &ga_config, base_config.as_deref(), &out, history.as_deref()),
        Command::Synth { preset, spec, out, seed } => synth_cmd(preset.as_deref(), spec.as_deref(), &out, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
