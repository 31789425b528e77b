use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dre_core::experiment::{compare, run, ExperimentConfig, Kind};
use dre_core::verify::Scale;
use std::path::PathBuf;
use std::process::ExitCode;

/// Seeded experiments for diffusions in a drifted Brownian potential.
///
/// Without a subcommand, runs the experiment described by `--config` (a
/// config or a manifest from an earlier run) or, with `--verify`, the
/// acceptance checks. Set DRE_WORKERS to cap the worker threads.
#[derive(Debug, Parser)]
#[command(name = "dre", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Experiment config or manifest (JSON).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Base seed; overrides the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Replica count; overrides the config.
    #[arg(long, value_name = "N")]
    replicas: Option<usize>,

    /// Run the acceptance checks instead of a config.
    #[arg(long, conflicts_with = "config")]
    verify: bool,

    /// Scale of `--verify`.
    #[arg(long, value_enum, default_value = "full", requires = "verify")]
    scale: ScaleArg,

    /// Criteria of `--verify`, comma separated (default all).
    #[arg(long, value_delimiter = ',', requires = "verify")]
    criteria: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ScaleArg {
    Smoke,
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Two-sample KS between columns of two CSV files, with ECDF points.
    Compare {
        file_a: PathBuf,
        column: String,
        file_b: PathBuf,
        /// Column of FILE_B, if it differs from COLUMN.
        #[arg(long)]
        column_b: Option<String>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Ok(w) = std::env::var("DRE_WORKERS") {
        let n: usize = w.parse().context("DRE_WORKERS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if let Some(Command::Compare { file_a, column, file_b, column_b, out }) = cli.command {
        let report = compare(&file_a, &column, &file_b, column_b.as_deref().unwrap_or(&column))?;
        let text = serde_json::to_string_pretty(&report)?;
        match out {
            Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
            None => println!("{text}"),
        }
        eprintln!("KS D = {:.4} (p = {:.3e}), n = {} vs {}", report.statistic, report.p_value, report.n_a, report.n_b);
        return Ok(ExitCode::SUCCESS);
    }
    let mut cfg = if cli.verify {
        let mut c = ExperimentConfig::new(Kind::Verify);
        c.scale = match cli.scale {
            ScaleArg::Smoke => Scale::Smoke,
            ScaleArg::Full => Scale::Full,
        };
        c.criteria = cli.criteria;
        c
    } else {
        let Some(path) = cli.config else { bail!("give --config PATH, --verify, or a subcommand") };
        ExperimentConfig::load(&path).with_context(|| format!("loading {}", path.display()))?
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(n) = cli.replicas {
        cfg.replicas = n;
    }
    let out = cli.out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("dre-out"));
    let manifest = run(&cfg, &out)?;
    for f in &manifest.outputs {
        log::info!("wrote {} ({} rows)", out.join(&f.file).display(), f.rows);
    }
    match manifest.failed_criteria {
        Some(ids) if !ids.is_empty() => {
            eprintln!("failed criteria: {ids:?}");
            Ok(ExitCode::from(2))
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}
