//! `heartstate` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O or file
//! format error, 3 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heartstate::io::FormatError;
use heartstate::model::ModelError;
use heartstate::signal::SignalError;
use heartstate::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) | ModelError::Shape(_) => CliError::Usage(e.to_string()),
            ModelError::Format(f) => f.into(),
            ModelError::WeightShape { .. }
            | ModelError::WeightType { .. }
            | ModelError::NonFiniteWeight { .. } => CliError::Io(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "heartstate", version, about = "Pulse extraction from skin video with streaming state-space models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// key=value config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. --set oscillator=false
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi in Hz, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound {hi:?}"))?;
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(format!("band needs 0 <= lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    /// Files hold pulse waveforms; heart rates are estimated from them.
    Bvp,
    /// Files already hold heart rates in BPM.
    Hr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Sliding windows (see --window, --hop)
    Window,
    /// One estimate per whole file
    Video,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Whole-clip inference: writes the pulse CSV and prints the heart rate
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        video: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Heart-rate search band in Hz
        #[arg(long, value_parser = parse_band, default_value = "0.66,3.0")]
        band: (f64, f64),
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Reads FVID from stdin and writes one pulse sample per frame to stdout
    Stream {
        #[arg(long)]
        weights: PathBuf,
        /// Report rolling heart rate on stderr every N frames (0 disables)
        #[arg(long, default_value_t = 30)]
        stats_every: u64,
        #[arg(long, value_parser = parse_band, default_value = "0.66,3.0")]
        band: (f64, f64),
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generates a synthetic video and its ground-truth pulse
    Synth {
        #[arg(long)]
        hr: Option<f64>,
        /// Seconds
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gt_out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Heart-rate error metrics between predicted and reference files
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalKind::Bvp)]
        kind: EvalKind,
        #[arg(long, value_enum, default_value_t = EvalMode::Window)]
        mode: EvalMode,
        /// Window length in seconds
        #[arg(long, default_value_t = 10.0)]
        window: f64,
        /// Window hop in seconds
        #[arg(long, default_value_t = 1.0)]
        hop: f64,
        #[arg(long, value_parser = parse_band, default_value = "0.66,3.0")]
        band: (f64, f64),
    },
    /// Per-frame streaming latency, state size and model cost
    Bench {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Writes a weight file, randomly initialized or the filterbank oracle
    InitWeights {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Emit the hand-built band-pass filterbank instead of random weights
        #[arg(long)]
        oracle_filterbank: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Infer {
            weights,
            video,
            out,
            band,
            cfg,
        } => commands::infer(&weights, &video, &out, band, &cfg),
        Command::Stream {
            weights,
            stats_every,
            band,
            cfg,
        } => commands::stream(&weights, stats_every, band, &cfg),
        Command::Synth {
            hr,
            duration,
            fps,
            seed,
            noise_sigma,
            out,
            gt_out,
            cfg,
        } => commands::synth(
            commands::SynthFlags {
                hr,
                duration,
                fps,
                seed,
                noise_sigma,
            },
            &out,
            &gt_out,
            &cfg,
        ),
        Command::Eval {
            pred,
            gt,
            kind,
            mode,
            window,
            hop,
            band,
        } => commands::eval(&pred, &gt, kind, mode, window, hop, band),
        Command::Bench {
            weights,
            frames,
            warmup,
            cfg,
        } => commands::bench(&weights, frames, warmup, &cfg),
        Command::InitWeights {
            seed,
            out,
            oracle_filterbank,
            cfg,
        } => commands::init_weights(seed, &out, oracle_filterbank, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
