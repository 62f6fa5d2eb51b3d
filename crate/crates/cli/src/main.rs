//! `terrabench`: preprocess elevation tiles, enumerate optima, run and tune
//! optimisers, and emit plot data.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data error.
//! Summaries go to stdout as `key=value` pairs; messages go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use terrabench::pipeline::{
    cmd_optima, cmd_preprocess, cmd_report, cmd_run, cmd_tune, load_grid, BenchConfig, DataSource, PatchChoice,
    CACHE_ENV, FULL_DATASET_OPTIMA, FULL_DATASET_TOP_PROPORTION,
};
use terrabench::terrain::read_cache;
use terrabench::measures::fmt_measure as fmt;
use terrabench::Error;

#[derive(Parser)]
#[command(name = "terrabench", version, about = "Terrain-based global optimisation benchmark")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (cache file for `preprocess`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Runs executed at once; overrides the config.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Enable checks against the full Great Britain dataset.
    #[arg(long, global = true)]
    gate_full_dataset: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble ASCII tiles, slope the seabed and write a binary cache.
    Preprocess {
        /// Directory of `.asc` tiles; defaults to the config's data directory.
        #[arg(long)]
        asc_dir: Option<PathBuf>,
        /// Apply the shipped manual edits for the real dataset.
        #[arg(long)]
        patch: bool,
        /// Checksum manifest of the tiles.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Local optima, basins and band statistics.
    Optima {
        /// Binary cache to read instead of the config's data source.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run the configured algorithm instance.
    Run,
    /// Tune the configured algorithm.
    Tune,
    /// Plot data and charts from a `run` output directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        3
    } else {
        2
    }
}

fn usage(message: &str) -> Error {
    Error::Precondition(message.to_string())
}

fn load_config(cli: &Cli) -> terrabench::Result<BenchConfig> {
    let path = cli.config.as_ref().ok_or_else(|| usage("--config is required for this command"))?;
    let mut config = BenchConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(cli: &Cli, config: Option<&BenchConfig>) -> terrabench::Result<PathBuf> {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.out.clone()))
        .ok_or_else(|| usage("--out is required for this command"))
}

fn cache_override() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

fn grid_of(config: &BenchConfig) -> terrabench::Result<terrabench::terrain::ElevationGrid> {
    load_grid(&config.data, cache_override().as_deref())
}

fn preprocess(cli: &Cli, asc_dir: &Option<PathBuf>, patch: bool, manifest: &Option<PathBuf>) -> terrabench::Result<()> {
    let config = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
    let (dir, patch, manifest) = match (asc_dir, config.as_ref().map(|c| &c.data)) {
        (Some(d), _) => (d.clone(), PatchChoice::Shipped(patch), manifest.clone()),
        (
            None,
            Some(DataSource::Asc {
                dir,
                patch: p,
                manifest: m,
                ..
            }),
        ) => (
            dir.clone(),
            if patch { PatchChoice::Shipped(true) } else { p.clone() },
            manifest.clone().or_else(|| m.clone()),
        ),
        _ => return Err(usage("give --asc-dir or a config with an `asc` data source")),
    };
    let out = cli
        .out
        .clone()
        .or_else(cache_override)
        .ok_or_else(|| usage(&format!("--out or {CACHE_ENV} must name the cache file")))?;
    let stats = cmd_preprocess(&dir, &out, &patch, manifest.as_deref())?;
    println!("{stats} cache={}", out.display());
    Ok(())
}

fn optima(cli: &Cli, cache: &Option<PathBuf>) -> terrabench::Result<()> {
    let config = load_config(cli)?;
    let grid = match cache {
        Some(p) => read_cache(p)?,
        None => grid_of(&config)?,
    };
    let out = out_dir(cli, Some(&config))?;
    let schedule = config.schedule(&grid)?;
    let s = cmd_optima(&grid, &schedule, &out)?;
    println!(
        "optima={} points={} top_band_proportion={}",
        s.optima,
        s.points,
        fmt(s.top_band_proportion)
    );
    if cli.gate_full_dataset {
        println!(
            "reference_optima={FULL_DATASET_OPTIMA} optima_difference={} reference_top_band_proportion={FULL_DATASET_TOP_PROPORTION} top_band_ratio={}",
            s.optima as i64 - FULL_DATASET_OPTIMA as i64,
            fmt(s.top_band_proportion / FULL_DATASET_TOP_PROPORTION)
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> terrabench::Result<()> {
    let config = load_config(cli)?;
    let grid = grid_of(&config)?;
    let out = out_dir(cli, Some(&config))?;
    let report = cmd_run(&config, &grid, &out, config.jobs)?;
    println!("{}", terrabench::measures::MeasureReport::CSV_HEADER);
    println!("{}", report.to_csv_row());
    Ok(())
}

fn tune(cli: &Cli) -> terrabench::Result<()> {
    let config = load_config(cli)?;
    let grid = grid_of(&config)?;
    let out = out_dir(cli, Some(&config))?;
    let s = cmd_tune(&config, &grid, &out, config.jobs)?;
    let best = match s.best {
        Some((trial, gert)) => format!("best_trial={trial} best_gert={}", fmt(gert)),
        None => "best_trial=none best_gert=inf".to_string(),
    };
    println!("trials={} resumed={} pruned={} {best}", s.trials, s.resumed, s.pruned);
    Ok(())
}

fn report(cli: &Cli, results: &Path) -> terrabench::Result<()> {
    let out = out_dir(cli, None)?;
    for p in cmd_report(results, &out)? {
        println!("wrote={}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Preprocess {
            asc_dir,
            patch,
            manifest,
        } => preprocess(&cli, asc_dir, *patch, manifest),
        Command::Optima { cache } => optima(&cli, cache),
        Command::Run => run(&cli),
        Command::Tune => tune(&cli),
        Command::Report { results } => report(&cli, results),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("terrabench: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
