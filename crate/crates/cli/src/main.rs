//! `demonsonar`: synthesize, analyze, train, predict, evaluate and sweep.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use demonsonar_core::demon::{CarrierBand, DemonConfig};
use demonsonar_core::features::FeatureConfig;
use demonsonar_core::nn::{CascadeConfig, TrainConfig};
use demonsonar_core::pipeline::AnalysisConfig;

pub const EXIT_CONTRACT: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "demonsonar", version, about = "DEMON analysis and cascaded vessel classification")]
#[command(args_override_self = true)]
struct Cli {
    /// PRNG seed for synthesis, splitting, initialization and shuffling
    #[arg(long, global = true, env = "DEMONSONAR_SEED", default_value_t = 0)]
    seed: u64,

    /// File of `key=value` lines supplying flag values; explicit flags win [default: none]
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic vessel dataset (WAV files + manifest.csv)
    Synth(SynthArgs),
    /// DEMON spectrum, DEMON-gram and salient features of one recording
    Analyze(AnalyzeArgs),
    /// Train the coarse/fine cascade on a manifest or feature table
    Train(TrainArgs),
    /// Classify a recording or every row of a feature table
    Predict(PredictArgs),
    /// Score a trained cascade and write confusion/metrics reports
    Evaluate(EvaluateArgs),
    /// Train one cascade per hidden width on a shared split and tabulate results
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of coarse classes (at most 5)
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Recordings per coarse class
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    /// Recording length in seconds
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Sample rate in Hz
    #[arg(long, default_value_t = 16_000.0)]
    sample_rate: f64,
    /// Signal-to-noise ratio in dB for every class
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
}

#[derive(Args, Debug, Clone)]
struct DemonArgs {
    /// Carrier band lower edge as a fraction of the sample rate
    #[arg(long, default_value_t = 0.1)]
    carrier_lo_frac: f64,
    /// Carrier band upper edge as a fraction of the sample rate
    #[arg(long, default_value_t = 0.45)]
    carrier_hi_frac: f64,
    /// Absolute carrier lower edge in Hz; overrides the fraction [default: unset]
    #[arg(long, requires = "carrier_hi_hz")]
    carrier_lo_hz: Option<f64>,
    /// Absolute carrier upper edge in Hz; overrides the fraction [default: unset]
    #[arg(long, requires = "carrier_lo_hz")]
    carrier_hi_hz: Option<f64>,
    /// Carrier bandpass length in taps (odd)
    #[arg(long, default_value_t = 129)]
    carrier_taps: usize,
    /// Envelope sample rate after decimation, Hz
    #[arg(long, default_value_t = 200.0)]
    envelope_rate: f64,
    /// Envelope spectrum frame length (power of two)
    #[arg(long, default_value_t = 1024)]
    frame_len: usize,
    /// Frame overlap fraction in [0, 1)
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// Highest line frequency analyzed, Hz
    #[arg(long, default_value_t = 100.0)]
    max_line: f64,
    /// Lower edge of the shaft-rate search band, Hz
    #[arg(long, default_value_t = 1.0)]
    shaft_min: f64,
    /// Upper edge of the shaft-rate search band, Hz
    #[arg(long, default_value_t = 15.0)]
    shaft_max: f64,
    /// Harmonics in the comb search
    #[arg(long, default_value_t = 5)]
    harmonics: usize,
    /// Smallest blade count considered
    #[arg(long, default_value_t = 2)]
    blade_min: usize,
    /// Largest blade count considered
    #[arg(long, default_value_t = 7)]
    blade_max: usize,
}

impl DemonArgs {
    fn analysis(&self) -> AnalysisConfig {
        let carrier = match (self.carrier_lo_hz, self.carrier_hi_hz) {
            (Some(lo), Some(hi)) => CarrierBand::Hz { lo, hi },
            _ => CarrierBand::Fraction {
                lo: self.carrier_lo_frac,
                hi: self.carrier_hi_frac,
            },
        };
        AnalysisConfig {
            demon: DemonConfig {
                carrier,
                carrier_taps: self.carrier_taps,
                envelope_rate_hz: self.envelope_rate,
                frame_len: self.frame_len,
                overlap_frac: self.overlap,
                max_line_hz: self.max_line,
            },
            features: FeatureConfig {
                shaft_min_hz: self.shaft_min,
                shaft_max_hz: self.shaft_max,
                n_harmonics: self.harmonics,
                blade_min: self.blade_min,
                blade_max: self.blade_max,
                ..FeatureConfig::default()
            },
        }
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Input WAV file
    wav: PathBuf,
    /// Output prefix for `_spectrum.csv`, `_gram.pgm` (+ `_gram.txt`) and `_features.csv`
    #[arg(long, value_name = "PREFIX")]
    out: PathBuf,
    /// DEMON-gram slice length in seconds (clipped to the recording length)
    #[arg(long, default_value_t = 10.0)]
    slice: f64,
    #[command(flatten)]
    demon: DemonArgs,
}

#[derive(Args, Debug, Clone)]
struct LearnArgs {
    /// Learning rate
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Training epochs
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Mini-batch size
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Hidden layer width
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Training share of each class in the stratified split
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Number of coarse classes
    #[arg(long, default_value_t = 5)]
    coarse_classes: usize,
    /// Number of fine classes inside the refined category
    #[arg(long, default_value_t = 10)]
    fine_classes: usize,
    /// Coarse class refined by the fine net, or `none`
    #[arg(long, default_value = "1")]
    refine: String,
}

impl LearnArgs {
    fn cascade(&self, seed: u64) -> Result<CascadeConfig, String> {
        let refine_category = match self.refine.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| format!("--refine expects a class index or 'none', got '{s}'"))?),
        };
        Ok(CascadeConfig {
            train: TrainConfig {
                learning_rate: self.lr,
                epochs: self.epochs,
                batch_size: self.batch,
                seed,
                hidden_width: self.hidden,
            },
            coarse_classes: self.coarse_classes,
            fine_classes: self.fine_classes,
            refine_category,
            split_ratio: self.split,
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Manifest CSV (audio) or feature CSV
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Output model file (JSON)
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Optional per-epoch history CSV [default: not written]
    #[arg(long, value_name = "PATH")]
    history: Option<PathBuf>,
    #[command(flatten)]
    learn: LearnArgs,
    #[command(flatten)]
    demon: DemonArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model file written by `train`
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// WAV recording, or a feature CSV (one prediction per row)
    input: PathBuf,
    #[command(flatten)]
    demon: DemonArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Model file written by `train`
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Manifest CSV (audio) or feature CSV
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Report prefix; writes `<prefix>_coarse_*` and `<prefix>_fine_*`
    #[arg(long, value_name = "PREFIX")]
    out: PathBuf,
    /// Score only the rows held out by `train` (same --seed and --split) [default: off]
    #[arg(long)]
    heldout: bool,
    #[command(flatten)]
    learn: LearnArgs,
    #[command(flatten)]
    demon: DemonArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Manifest CSV (audio) or feature CSV
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Output sweep table (CSV, one row per width)
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Hidden widths to compare
    #[arg(long, value_delimiter = ',', default_value = "12,16,20,28")]
    widths: Vec<usize>,
    #[command(flatten)]
    learn: LearnArgs,
    #[command(flatten)]
    demon: DemonArgs,
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::apply_config_file(Cli::command(), args) {
        Ok(a) => a,
        Err(config::ConfigError::Io(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_IO);
        }
        Err(config::ConfigError::Parse(msg)) => {
            eprintln!("error: config file: {msg}");
            return ExitCode::from(EXIT_CONTRACT);
        }
    };
    let cli = Cli::parse_from(args);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { EXIT_IO } else { EXIT_CONTRACT })
        }
    }
}
