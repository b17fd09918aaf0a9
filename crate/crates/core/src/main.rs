//! Command-line front end for the Monte Carlo harness.
//!
//! `fig1 | fig2 | fig3` run the preset sweeps (detectability vs. K,
//! pathloss spread, and RIS elements); `run` executes an arbitrary
//! experiment described by a TOML config file. Results are CSV.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerics failure
//! above the tolerated per-drop failure rate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_noma::harness::{
    self, emit_csv, emit_drops_csv, run_experiment, CodebookKind, ExperimentConfig,
};
use ris_noma::Error;

#[derive(Parser)]
#[command(name = "ris-noma", about = "RIS-assisted code-domain NOMA link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output CSV path (presets derive one file per variant from it).
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo drops per sweep point override.
    #[arg(long)]
    drops: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write per-drop solver diagnostics to <out>_drops.csv.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Detected UEs vs. K = 2..16 at eps = 1, 4, 9 dB (one CSV each).
    Fig1(CommonArgs),
    /// Detected UEs vs. pathloss spread for NOMA and OMA codebooks.
    Fig2(CommonArgs),
    /// Detected UEs vs. RIS elements at P = -5 and 30 dBm.
    Fig3(CommonArgs),
    /// Run an experiment described by a TOML config file.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Experiment config (TOML matching the ExperimentConfig schema).
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::Parse(_) | Error::InvalidDimensions(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: Cli) -> ris_noma::Result<()> {
    let (common, jobs): (&CommonArgs, Vec<(ExperimentConfig, PathBuf)>) = match &cli.command {
        Command::Fig1(common) => {
            let jobs = [1.0, 4.0, 9.0]
                .iter()
                .map(|&eps| {
                    (
                        harness::fig1_config(eps),
                        with_suffix(&common.out, &format!("_eps{}dB", eps as i64)),
                    )
                })
                .collect();
            (common, jobs)
        }
        Command::Fig2(common) => (
            common,
            vec![
                (
                    harness::fig2_config(CodebookKind::Grassmannian),
                    with_suffix(&common.out, "_noma"),
                ),
                (
                    harness::fig2_config(CodebookKind::Oma),
                    with_suffix(&common.out, "_oma"),
                ),
            ],
        ),
        Command::Fig3(common) => (
            common,
            vec![
                (harness::fig3_config(-5.0), with_suffix(&common.out, "_pm5dBm")),
                (harness::fig3_config(30.0), with_suffix(&common.out, "_p30dBm")),
            ],
        ),
        Command::Run { common, config } => {
            let text = std::fs::read_to_string(config)?;
            let parsed: ExperimentConfig =
                toml::from_str(&text).map_err(|e| Error::Parse(format!("{e}")))?;
            (common, vec![(parsed, common.out.clone())])
        }
    };

    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }

    for (mut config, out) in jobs {
        if let Some(seed) = common.seed {
            config.master_seed = seed;
        }
        if let Some(drops) = common.drops {
            config.n_drops = drops;
        }
        config.collect_drop_diagnostics = common.verbose;
        config.validate()?;

        let summary = run_experiment(&config)?;
        emit_csv(&summary, &out)?;
        eprintln!(
            "wrote {} ({} points, {} of {} drops failed)",
            out.display(),
            summary.points.len(),
            summary.failed_drops,
            summary.total_drops
        );
        if common.verbose {
            let drops_path = with_suffix(&out, "_drops");
            emit_drops_csv(&summary, &drops_path)?;
            eprintln!("wrote {}", drops_path.display());
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}
