use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use typoemb_cli::{cmd_eval, cmd_extract, cmd_gen, cmd_pca, cmd_report, cmd_train, CliError, RunConfig};
use typoemb_core::model::Side;

/// Language embeddings from word-order denoising, and their typology evaluation.
#[derive(Parser, Debug)]
#[command(name = "typoemb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Total training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Language table to use: encoder or decoder.
    #[arg(long, global = true)]
    side: Option<String>,
    /// Number of spectral clusters.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Leave-one-out repeats.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Checkpoint to continue training from.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
    /// Feature table (wide synthetic CSV or long WALS export).
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    /// Genus label file.
    #[arg(long, global = true)]
    genera: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic language family.
    Gen,
    /// Train the denoising autoencoder on the corpus.
    Train,
    /// Write a language embedding table from the checkpoint.
    Extract,
    /// Feature prediction, baselines, clustering and PCA.
    Eval,
    /// Write the 2-D PCA projection of the embeddings.
    Pca,
    /// Print a summary of the evaluation report.
    Report,
}

fn config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = &cli.side {
        cfg.side = v.parse::<Side>()?;
    }
    if let Some(v) = cli.k {
        cfg.k = v;
    }
    if let Some(v) = cli.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = &cli.features {
        cfg.features = Some(v.clone());
    }
    if let Some(v) = &cli.genera {
        cfg.genera = Some(v.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config(&cli)?;
    match cli.command {
        Command::Gen => {
            let m = cmd_gen(&cfg, cli.force)?;
            println!("{} languages written to {}", m.languages.len(), cfg.out.display());
        }
        Command::Train => {
            let ckpt = cmd_train(&cfg, cli.resume.as_deref())?;
            let loss = ckpt.history.last().map_or(f64::NAN, |r| r.loss);
            println!(
                "trained {} epochs ({} steps), final loss {loss:.5}",
                ckpt.epochs_completed,
                ckpt.step()
            );
        }
        Command::Extract => println!("{}", cmd_extract(&cfg)?.display()),
        Command::Eval => {
            cmd_eval(&cfg)?;
            print!("{}", cmd_report(&cfg)?);
        }
        Command::Pca => println!("{}", cmd_pca(&cfg)?.display()),
        Command::Report => print!("{}", cmd_report(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
