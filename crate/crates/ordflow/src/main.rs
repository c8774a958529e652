//! Command-line front end for the order-flow pipeline.

use clap::{Parser, Subcommand};
use ordflow::pipeline::{self, Config, PipelineError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "ordflow",
    version,
    about = "Intraday order-flow transition analysis",
    long_about = "Segments tick-by-tick order events into intraday time zones, fits \
                  Markov transition matrices, and compares zones via stationary \
                  distributions, Jensen-Shannon distances, PCA and DBSCAN."
)]
struct Cli {
    /// JSON configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict ingestion to these tickers.
    #[arg(long, global = true, value_delimiter = ',')]
    tickers: Option<Vec<String>>,
    /// Restrict ingestion to one exchange.
    #[arg(long, global = true)]
    exchange: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse raw event CSVs into per-(ticker, day, zone) sequences.
    Ingest {
        /// Event CSV files (falls back to data.files from the config).
        files: Vec<PathBuf>,
    },
    /// Test each sequence for serial dependence.
    Gtest,
    /// Estimate one transition matrix per sequence.
    Estimate,
    /// Average estimates into per-(category, zone) matrices.
    Average,
    /// Solve each averaged matrix for its stationary distribution.
    Stationary,
    /// Compare zones by Jensen-Shannon distance.
    Jsd,
    /// Project the averaged matrices onto principal components.
    Embed,
    /// Cluster the embedded matrices with DBSCAN.
    Cluster,
    /// Generate a synthetic feed from seeded ground-truth chains.
    Simulate,
    /// Run every stage end to end.
    Replicate,
}

fn load_config(cli: &Cli) -> Result<Config, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.synth.seed = seed;
    }
    if let Some(tickers) = &cli.tickers {
        config.tickers = Some(tickers.clone());
    }
    if let Some(exchange) = &cli.exchange {
        config.exchange = Some(exchange.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let out = &cli.out;
    std::fs::create_dir_all(out)?;
    match &cli.command {
        Command::Ingest { files } => {
            let summary = pipeline::run_ingest(&config, out, files)?;
            println!(
                "ingested {} rows into {} sequences ({} malformed, {} filtered, {} dropped)",
                summary.totals.rows_read,
                summary.sequence_count,
                summary.totals.malformed,
                summary.totals.filtered_out,
                summary.dropped
            );
        }
        Command::Gtest => {
            let summary = pipeline::run_gtest(&config, out)?;
            let significant = summary
                .aggregates
                .iter()
                .filter(|a| a.significant)
                .count();
            println!(
                "tested {} sequences; {}/{} (ticker, zone) groups significant",
                summary.sequences.len(),
                significant,
                summary.aggregates.len()
            );
        }
        Command::Estimate => {
            let file = pipeline::run_estimate(&config, out)?;
            println!(
                "estimated {} matrices ({} sequences skipped)",
                file.estimates.len(),
                file.skipped.len()
            );
        }
        Command::Average => {
            let summary = pipeline::run_average(&config, out)?;
            println!("averaged {} (category, zone) matrices", summary.tpms.len());
        }
        Command::Stationary => {
            let summary = pipeline::run_stationary(&config, out)?;
            println!("solved {} stationary distributions", summary.rows.len());
        }
        Command::Jsd => {
            let summary = pipeline::run_jsd(&config, out)?;
            println!("compared zones in {} categories", summary.categories.len());
        }
        Command::Embed => {
            let summary = pipeline::run_embed(&config, out)?;
            for g in &summary.groups {
                let kept: f64 = g.gate.explained;
                println!(
                    "group {}: {} components explain {:.1}% (gate {})",
                    g.group,
                    g.scores.first().map_or(0, Vec::len),
                    kept * 100.0,
                    if g.gate.passed { "passed" } else { "failed" }
                );
            }
        }
        Command::Cluster => {
            let summary = pipeline::run_cluster(&config, out)?;
            println!(
                "clustered {} points into {} clusters ({} noise)",
                summary.rows.len(),
                summary.clusters,
                summary.noise
            );
        }
        Command::Simulate => {
            let summary = pipeline::run_simulate(&config, out)?;
            println!(
                "simulated {} events across {} files (seed {})",
                summary.events,
                summary.files.len(),
                summary.master_seed
            );
        }
        Command::Replicate => {
            let bundle = pipeline::run_pipeline(&config, out)?;
            println!(
                "pipeline finished: {} matrices, {} clusters, {} noise points",
                bundle.tpms.len(),
                bundle.clusters,
                bundle.noise
            );
            if let Some(worst) = bundle.worst_truth_error {
                println!("worst estimate-vs-truth cell error: {worst:.5}");
            }
            println!("artifacts in {}", bundle.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests exit 0; usage errors exit 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
