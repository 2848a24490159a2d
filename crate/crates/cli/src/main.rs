use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scir_core::harness::data::{generate_from_config, truth_path};
use scir_core::harness::records::write_csv_file;
use scir_core::harness::{run_dpmix, run_lda, run_synthetic, run_theory_checks, ExperimentConfig, ExperimentKind, Truth};
use scir_core::models::Corpus;

/// Stochastic Cox-Ingersoll-Ross samplers for simplex-constrained posteriors.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparse and dense Dirichlet benchmark: SCIR vs SGRLD vs exact draws.
    Synthetic(Common),
    /// Online LDA perplexity traces.
    Lda(DataArgs),
    /// Dirichlet-process mixture log-predictive traces.
    Dpmix(DataArgs),
    /// Monte Carlo checks of the moment and MGF formulas.
    Theory(Common),
    /// Write a synthetic corpus and its generating parameters.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV (or corpus file for gen-data).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus file; a synthetic corpus is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
}

fn load_config(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path, Some(kind))
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::defaults(kind),
    };
    if cfg.kind != kind {
        bail!("config is for `{}` but `{}` was requested", cfg.kind, kind);
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_corpus(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<(Corpus, Option<Truth>)> {
    match data.or(cfg.input.as_deref()) {
        Some(path) => {
            let corpus = Corpus::read(path).with_context(|| format!("reading corpus {}", path.display()))?;
            let tp = truth_path(path);
            let truth = if tp.exists() { Some(Truth::read(&tp)?) } else { None };
            Ok((corpus, truth))
        }
        None => {
            let s = generate_from_config(&cfg.data)?;
            Ok((s.corpus, Some(s.truth)))
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synthetic(args) => {
            let cfg = load_config(ExperimentKind::Synthetic, &args)?;
            run_synthetic(&cfg)?.write(&cfg.output, cfg.iterations)?;
            eprintln!("wrote {}", cfg.output.display());
        }
        Command::Lda(args) => {
            let cfg = load_config(ExperimentKind::Lda, &args.common)?;
            let (corpus, truth) = load_corpus(&cfg, args.data.as_deref())?;
            let result = run_lda(&cfg, &corpus, truth.as_ref())?;
            write_csv_file(&cfg.output, &result.records())?;
            eprintln!("wrote {}", cfg.output.display());
        }
        Command::Dpmix(args) => {
            let cfg = load_config(ExperimentKind::Dpmix, &args.common)?;
            let (corpus, truth) = load_corpus(&cfg, args.data.as_deref())?;
            let result = run_dpmix(&cfg, &corpus, truth.as_ref())?;
            write_csv_file(&cfg.output, &result.records())?;
            eprintln!("wrote {}", cfg.output.display());
        }
        Command::Theory(args) => {
            let cfg = load_config(ExperimentKind::Theory, &args)?;
            let checks = run_theory_checks(&cfg)?;
            write_csv_file(&cfg.output, &checks)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            eprintln!("{} checks, {failed} failed; wrote {}", checks.len(), cfg.output.display());
            if failed > 0 {
                std::process::exit(1);
            }
        }
        Command::GenData(args) => {
            let mut cfg = load_config(ExperimentKind::GenData, &args)?;
            if args.out.is_none() {
                cfg.output = PathBuf::from("corpus.txt");
            }
            if let Some(seeds) = &args.seeds {
                cfg.data.seed = seeds[0];
            }
            generate_from_config(&cfg.data)?.write(&cfg.output)?;
            eprintln!(
                "wrote {} and {}",
                cfg.output.display(),
                truth_path(&cfg.output).display()
            );
        }
    }
    Ok(())
}
