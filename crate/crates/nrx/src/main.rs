use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nrx::config::{Experiment, Scale};
use nrx::exec::ThreadExecutor;
use nrx::io::{Manifest, OutputDir};
use nrx::pipeline;

#[derive(Parser)]
#[command(name = "nrx", version, about = "Neural OFDM receiver training, transfer and BLER evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML) or a run manifest to replay.
    #[arg(long)]
    config: PathBuf,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `runs/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the source receiver.
    TrainSource(Common),
    /// Adapt `source.checkpoint` to every target with every technique.
    Adapt(Common),
    /// Evaluate `eval.checkpoint` on every target.
    Eval(Common),
    /// Full experiment: source, adaptation, benchmarks and evaluation.
    Sweep(Common),
    /// Evaluate the genie LMMSE receiver on every target.
    Baseline(Common),
    /// Print parameter counts per technique.
    Params {
        #[arg(long, value_enum, default_value = "full")]
        scale: ScaleArg,
        #[arg(long, default_value_t = 2)]
        bits_per_symbol: usize,
        #[arg(long, default_value_t = 2)]
        num_rx: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScaleArg {
    Toy,
    Desk,
    Full,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Toy => Scale::Toy,
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Full => Scale::Full,
        }
    }
}

/// Loads the config, applies overrides, runs `body` and writes the manifest.
fn with_output(verb: &str, c: &Common, body: impl FnOnce(&Experiment, &mut OutputDir) -> Result<()>) -> Result<()> {
    let mut exp = Experiment::load(&c.config)?;
    if let Some(seed) = c.seed {
        exp.seed = seed;
    }
    let root = c.out.clone().unwrap_or_else(|| Path::new("runs").join(&exp.name));
    let mut out = OutputDir::new(&root, Manifest::new(verb, &exp))?;
    body(&exp, &mut out)?;
    println!("{}", out.finish()?.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = ThreadExecutor::from_env();
    match &cli.command {
        Command::Params { scale, bits_per_symbol, num_rx } => {
            let scale = Scale::from(*scale);
            print!("{}", pipeline::format_param_table(scale, &pipeline::param_reports(scale, *bits_per_symbol, *num_rx)?));
            Ok(())
        }
        Command::TrainSource(c) => with_output("train-source", c, |exp, out| {
            if exp.source.checkpoint.is_some() {
                bail!("source.checkpoint is set; nothing to train");
            }
            pipeline::source_model(exp, out).map(drop)
        }),
        Command::Adapt(c) => with_output("adapt", c, |exp, out| {
            if exp.source.checkpoint.is_none() {
                bail!("adapt needs source.checkpoint in the config");
            }
            pipeline::preflight(exp)?;
            let source = pipeline::source_model(exp, out)?;
            for (i, t) in pipeline::build_targets(exp, out)?.iter().enumerate() {
                pipeline::adapt_target(exp, &source, t, &pipeline::target_dir(i, t), out)?;
            }
            Ok(())
        }),
        Command::Eval(c) => with_output("eval", c, |exp, out| {
            let path = exp.eval.checkpoint.clone().context("eval needs eval.checkpoint in the config")?;
            pipeline::eval_checkpoint(exp, &path, out, &exec)
        }),
        Command::Sweep(c) => with_output("sweep", c, |exp, out| pipeline::sweep(exp, out, &exec)),
        Command::Baseline(c) => with_output("baseline", c, |exp, out| {
            for (i, t) in pipeline::build_targets(exp, out)?.iter().enumerate() {
                pipeline::evaluate_genie(exp, t, &pipeline::target_dir(i, t), out, &exec)?;
            }
            Ok(())
        }),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
