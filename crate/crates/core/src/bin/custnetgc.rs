use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use custnetgc::pipeline::{self, RunConfig, StageOutcome};
use custnetgc::synth::{write_dataset, SynthConfig};
use custnetgc::{Error, Result};

/// Voice-based PD/HC screening pipeline.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
#[derive(Parser)]
#[command(name = "custnetgc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replace outputs made with a different configuration.
    #[arg(long)]
    force: bool,
    /// Seed for the split, weight init, training and boosting.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Resample, fit to length and peak-normalize every manifest clip.
    Preprocess(Common),
    /// Render spectrogram, L-mHP and slope-plot images per clip.
    Featurize(Common),
    /// Train the CNN and the boosted trees.
    Train(Common),
    /// Write Grad-CAM overlays next to the given images.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Images to explain; defaults to every training-kind feature image.
        images: Vec<PathBuf>,
    },
    /// Score the held-out split and write the report.
    Evaluate(Common),
    /// Preprocess, featurize, train and evaluate in one go.
    Run(Common),
    /// Write a seeded synthetic two-class dataset with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        clips: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load(c: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(&c.config)?;
    Ok(match c.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn finish(stage: &str, o: StageOutcome) -> Result<()> {
    println!("{stage}: {} ok, {} failed -> {}", o.succeeded.len(), o.failures.len(), o.dir.display());
    if o.failures.is_empty() {
        return Ok(());
    }
    for f in &o.failures {
        eprintln!("  {}: {}", f.id, f.message);
    }
    Err(Error::Manifest(format!("{} input(s) failed", o.failures.len())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(c) => finish("preprocess", pipeline::cmd_preprocess(&load(&c)?, c.force)?),
        Command::Featurize(c) => finish("featurize", pipeline::cmd_featurize(&load(&c)?, c.force)?),
        Command::Train(c) => {
            let o = pipeline::cmd_train(&load(&c)?, c.force)?;
            println!(
                "train: {} training / {} validation clips -> {}",
                o.split.train.len(),
                o.split.validation.len(),
                o.dir.display()
            );
            Ok(())
        }
        Command::Explain { common, images } => {
            for p in pipeline::cmd_explain(&load(&common)?, &images, common.force)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Evaluate(c) => {
            let cfg = load(&c)?;
            let report = pipeline::cmd_evaluate(&cfg, c.force)?;
            print!("{}", report.text());
            println!("report written to {}", cfg.eval_dir().display());
            Ok(())
        }
        Command::Run(c) => {
            let report = pipeline::run_all(&load(&c)?, c.force)?;
            print!("{}", report.text());
            Ok(())
        }
        Command::Synth { out, clips, seed } => {
            let cfg = SynthConfig {
                n_clips: clips,
                seed,
                ..SynthConfig::default()
            };
            println!("{}", write_dataset(&out, &cfg)?.display());
            Ok(())
        }
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Only the output-directory override is read from the environment.
    env_logger::Builder::new().filter_level(log::LevelFilter::Info).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
