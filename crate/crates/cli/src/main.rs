mod config;
mod entry;
mod output;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{LoadedConfig, MarketConfig, TrainingBlock};
use output::{resolve_dir, OutputDir, OUT_ENV};

/// Platforms competing by adopting generative models: equilibria, dynamics,
/// welfare and entrant training.
#[derive(Parser)]
#[command(name = "modelmarket", version, after_help = format!("The output directory defaults to ${OUT_ENV}, then ./out."))]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for start profiles and training; overrides the config.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 uses every core).
    #[arg(long, global = true, value_name = "INT", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run best-response dynamics on one instance.
    Run,
    /// Repeat runs over a sweep of model pools, platform counts or populations.
    Sweep,
    /// Train an entrant and report the market before and after entry.
    Entry,
    /// Re-derive the expectation records of the fixtures.
    VerifyFixtures {
        /// Verify the fixtures in this directory instead of the builtin set.
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
        /// Restrict to these fixtures.
        #[arg(long = "name", value_name = "NAME")]
        names: Vec<String>,
        /// Treat documented conflicts as failures too.
        #[arg(long)]
        strict: bool,
    },
    /// List the builtin fixtures.
    ListFixtures,
}

fn load(cli: &Cli, required: bool) -> Result<LoadedConfig> {
    match &cli.config {
        Some(path) => Ok(LoadedConfig::from_path(path)?),
        None if required => anyhow::bail!("this command needs --config PATH"),
        None => Ok(LoadedConfig::empty()),
    }
}

fn out_dir(cli: &Cli, cfg: &LoadedConfig) -> Result<OutputDir> {
    let dir = resolve_dir(cli.out.as_deref(), cfg.config.output.dir.as_deref());
    OutputDir::create(dir, &cfg.config.output.prefix)
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run => {
            let cfg = load(cli, true)?;
            let seed = cli.seed.or(cfg.config.seed).unwrap_or(0);
            let out = out_dir(cli, &cfg)?;
            let s = run::cmd_run(&cfg, seed, &out)?;
            let welfare = s.welfare.map(output::fmt9).unwrap_or_else(|| "undefined".into());
            println!(
                "{}: {:?} after {} steps, welfare {welfare}, optimum {}, {} pure equilibria",
                s.instance,
                s.outcome,
                s.steps,
                output::fmt9(s.social_optimum),
                s.pne_count.map(|c| c.to_string()).unwrap_or_else(|| "?".into())
            );
            println!("wrote {}", out.path("summary.json").display());
        }
        Command::Sweep => {
            let cfg = load(cli, true)?;
            let seed = cli.seed.or(cfg.config.seed).unwrap_or(0);
            let out = out_dir(cli, &cfg)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs)
                .build()
                .context("building the worker pool")?;
            let cells = pool.install(|| run::cmd_sweep(&cfg, seed, &out))?;
            for s in &cells {
                println!(
                    "value {} rep {}: {:?}, welfare {}",
                    s.sweep_value.as_deref().unwrap_or(""),
                    s.repetition.unwrap_or(0),
                    s.outcome,
                    s.welfare.map(output::fmt9).unwrap_or_else(|| "undefined".into())
                );
            }
            println!("wrote {}", out.path("sweep_long.csv").display());
        }
        Command::Entry => {
            let mut cfg = load(cli, false)?;
            cfg.config.training.get_or_insert_with(|| TrainingBlock {
                market: MarketConfig::default(),
                methods: vec![config::Method::Resampling, config::Method::Direct],
                settings: None,
            });
            let out = out_dir(cli, &cfg)?;
            let summary = entry::cmd_entry(&cfg, cli.seed.or(cfg.config.seed), &out)?;
            for m in &summary.methods {
                println!(
                    "{}: F {} -> {}, scores {:?}, adopted in a PNE: {}",
                    m.method,
                    output::fmt9(m.initial_objective),
                    output::fmt9(m.final_objective),
                    m.final_scores,
                    m.entrant_adopted_in_pne
                );
            }
            println!("wrote {}", out.path("entry_summary.json").display());
        }
        Command::VerifyFixtures { dir, names, strict } => {
            let report = verify::verify(dir.as_deref(), names)?;
            print!("{}", report.render());
            if let Some(out) = &cli.out {
                let out = OutputDir::create(out.clone(), "")?;
                out.write_json("verify_report.json", &report.outcomes)?;
            }
            if report.unexpected > 0 || (*strict && report.known > 0) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::ListFixtures => print!("{}", verify::list()?),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
