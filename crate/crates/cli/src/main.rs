use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gzsl_cli::{
    cmd_eval, cmd_pool, cmd_report, cmd_run, cmd_split, cmd_synth, cmd_train, CliError,
    ExperimentConfig, Overrides,
};

#[derive(Parser)]
#[command(name = "gzsl", version, about = "Zero-shot and generalized zero-shot experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Single split seed; overrides `split.seeds` (and the synthetic seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Method name; overrides `method`.
    #[arg(long, global = true)]
    method: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Synth,
    /// Mean-pool and L1-normalize frame features per video.
    Pool { input: PathBuf, output: PathBuf },
    /// Write a class split.
    Split,
    /// Train a model and save it.
    Train,
    /// Evaluate a saved model.
    Eval {
        /// Model file; defaults to `<out>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and evaluate for every seed, then aggregate.
    Run,
    /// Summarize the reports of a run.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        method: cli.method.clone(),
    };
    let cfg = || ExperimentConfig::resolve(cli.config.as_deref(), &overrides);
    match &cli.command {
        Command::Synth => {
            let cfg = cfg()?;
            let mut spec = cfg.synthetic.clone().unwrap_or_default();
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let ds = cmd_synth(&spec, &cfg.out_dir)?;
            println!("wrote {} samples to {}", ds.labels().len(), cfg.out_dir.display());
        }
        Command::Pool { input, output } => {
            let n = cmd_pool(input, output)?;
            println!("pooled {n} videos into {}", output.display());
        }
        Command::Split => {
            let cfg = cfg()?;
            let split = cmd_split(&cfg, cli.seed)?;
            println!(
                "split seed {}: {} seen, {} unseen classes",
                split.seed,
                split.seen_classes.len(),
                split.unseen_classes.len()
            );
        }
        Command::Train => {
            let cfg = cfg()?;
            let file = cmd_train(&cfg, cli.seed)?;
            println!("trained {} into {}", file.method, cfg.out_dir.display());
        }
        Command::Eval { model } => {
            let cfg = cfg()?;
            let path = model.clone().unwrap_or_else(|| cfg.out_dir.join("model.json"));
            let report = cmd_eval(&cfg, &path, cli.seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Run => {
            let cfg = cfg()?;
            let summary = cmd_run(&cfg)?;
            println!("{} trials written to {}", summary.reports.len(), cfg.out_dir.display());
        }
        Command::Report => {
            let dir = cli.out.clone().unwrap_or_else(|| {
                cfg().map(|c| c.out_dir).unwrap_or_else(|_| PathBuf::from("out"))
            });
            print!("{}", cmd_report(&dir)?);
        }
    }
    Ok(())
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
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
