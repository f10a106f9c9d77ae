//! Command-line pipeline for the chord recognition toolkit.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::EXIT_USAGE;
use config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "chordrec",
    about = "Chord recognition: spectrogram front-end, convolutional acoustic model, CRF decoder",
    version
)]
struct Cli {
    /// TOML configuration file; omitted sections fall back to the standard
    /// hyperparameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic demo corpus (WAV, .lab, manifest).
    SynthCorpus {
        /// Corpus directory to create.
        #[arg(long)]
        output: PathBuf,
        /// Number of songs (overrides the config file).
        #[arg(long)]
        songs: Option<usize>,
    },
    /// Cache spectrograms and frame targets for every manifest song.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Work directory holding the cache.
        #[arg(long)]
        output: PathBuf,
    },
    /// Two-stage training: acoustic model, then the CRF on its features.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Work directory with the extraction cache; receives checkpoints
        /// and logs.
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated fold numbers held out from training entirely.
        #[arg(long, value_delimiter = ',')]
        folds: Vec<u32>,
    },
    /// Decode one audio file into chord segments.
    Predict {
        #[arg(long)]
        audio: PathBuf,
        /// Acoustic model checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// CRF checkpoint.
        #[arg(long)]
        crf: PathBuf,
        /// Output .lab path.
        #[arg(long)]
        output: PathBuf,
        /// Also write the frame-wise argmax decode to this .lab path.
        #[arg(long)]
        frame_argmax: Option<PathBuf>,
    },
    /// Score predictions against annotations (weighted chord symbol recall).
    Evaluate {
        /// Directory of predicted .lab files.
        #[arg(long)]
        predictions: PathBuf,
        /// Directory of reference .lab files.
        #[arg(long)]
        annotations: PathBuf,
        /// Optional CSV report path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit weight analyses for a trained acoustic checkpoint.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        /// Directory for CSV and image outputs.
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap treats --help/--version as errors that print to stdout
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let mut config = match PipelineConfig::load(cli.config.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    println!("# effective configuration\n{}", config.to_toml());

    let code = match &cli.command {
        Command::SynthCorpus { output, songs } => commands::cmd_synth_corpus(&config, output, *songs),
        Command::Extract { manifest, output } => commands::cmd_extract(&config, manifest, output),
        Command::Train {
            manifest,
            output,
            folds,
        } => commands::cmd_train(&config, manifest, output, folds),
        Command::Predict {
            audio,
            model,
            crf,
            output,
            frame_argmax,
        } => commands::cmd_predict(&config, audio, model, crf, output, frame_argmax.as_deref()),
        Command::Evaluate {
            predictions,
            annotations,
            output,
        } => commands::cmd_evaluate(&config, predictions, annotations, output.as_deref()),
        Command::Analyze { model, output } => commands::cmd_analyze(model, output),
    };
    ExitCode::from(code as u8)
}
