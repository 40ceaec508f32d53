use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyflow::config::{ExperimentConfig, Manifold, Overrides};
use polyflow::error::{AppError, Result};
use polyflow::formats::{read_json, write_json, ModelFile, TransformChainFile};
use polyflow::pipeline::{evaluate_checkpoint, run_experiment, Stages};
use polyflow_core::rounding::{round_model, RoundingOptions};

#[derive(Parser)]
#[command(name = "polyflow", version, about = "Sampling and normalizing flows on convex polytopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Round a model to its John polytope and write the transform chain.
    Round {
        /// Model JSON; the built-in example when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "transform_chain.json")]
        out: PathBuf,
    },
    /// Run the MCMC stage only.
    Sample(RunArgs),
    /// Sample and train flows, writing checkpoints.
    Train(RunArgs),
    /// Evaluate a saved flow checkpoint.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// The whole pipeline: round, sample, train, evaluate, emit.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON; the built-in mixture example when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out/<config name>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_manifold)]
    manifold: Option<Manifold>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `exact` or `hutchinson:N`.
    #[arg(long)]
    divergence: Option<String>,
    /// Model JSON replacing the config's model.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn parse_manifold(s: &str) -> std::result::Result<Manifold, String> {
    Manifold::parse(s).map_err(|e| e.to_string())
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf, PathBuf)> {
        let (mut cfg, base) = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (ExperimentConfig::from_json(&text)?, base)
            }
            None => (ExperimentConfig::example_mixture(), PathBuf::from(".")),
        };
        let cwd = std::env::current_dir().map_err(|e| AppError::io(".", e))?;
        let model = self.model.as_ref().map(|m| if m.is_absolute() { m.clone() } else { cwd.join(m) });
        Overrides {
            manifold: self.manifold,
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            step_size: self.step_size,
            seed: self.seed,
            divergence: self.divergence.clone(),
            model,
        }
        .apply(&mut cfg)?;
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
        Ok((cfg, base, out))
    }
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Round { model, out } => {
            let m = match model {
                Some(p) => read_json::<ModelFile>(&p)?.to_model()?,
                None => ModelFile::example().to_model()?,
            };
            let chain = round_model(&m, RoundingOptions::default())?;
            write_json(&out, &TransformChainFile::from_chain(&chain))?;
            println!("dimension: {}", chain.dim());
            println!("free variables: {}", chain.embedding.free_names.join(", "));
            println!("inscribed radius: {:.9}", chain.inscribed_radius());
            println!("wrote {}", out.display());
        }
        Command::Sample(args) => {
            let (cfg, base, out) = args.load()?;
            run_experiment(&cfg, &base, &out, Stages::Sample, &mut log)?;
        }
        Command::Train(args) => {
            let (cfg, base, out) = args.load()?;
            run_experiment(&cfg, &base, &out, Stages::Train, &mut log)?;
        }
        Command::Run(args) => {
            let (cfg, base, out) = args.load()?;
            let result = run_experiment(&cfg, &base, &out, Stages::Full, &mut log)?;
            println!("wrote {} files to {}", result.files.len(), out.display());
        }
        Command::Eval { run, checkpoint } => {
            let (cfg, base, out) = run.load()?;
            let m = evaluate_checkpoint(&cfg, &base, &checkpoint, run.step_size, &out, &mut log)?;
            println!("{}", serde_json::to_string_pretty(&polyflow::pipeline::MetricsJson::from(&m))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
