use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use devlab_harness::commands::{self, TeachOptions};
use devlab_harness::{ExperimentConfig, RunContext};

#[derive(Parser)]
#[command(name = "devlab", version, about = "Developmental networks and post-selection audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct Teach {
    /// Hidden neurons (default: one per transition).
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long, default_value_t = 2)]
    epochs: usize,
    /// Teach in a shuffled order derived from this seed.
    #[arg(long)]
    shuffle: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset as CSV.
    GenData(Common),
    /// Partition, train the grid, select, summarize and audit.
    Audit(Common),
    /// n-fold cross-validation of the first architecture.
    Crossval(Common),
    /// Teach a finite automaton to a DN and verify equivalence.
    TeachFa {
        /// Machine description file.
        machine: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        teach: Teach,
    },
    /// Teach a Turing machine's control to a DN and run a tape.
    RunTm {
        machine: PathBuf,
        /// Input tape, one character per symbol.
        #[arg(long, default_value = "")]
        tape: String,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        teach: Teach,
    },
    /// Per-epoch errors of one DN against the luckiest backprop network.
    Compare(Common),
    /// Re-render a report from a saved error table.
    Report {
        /// `error_table.csv` written by `audit`.
        table: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn setup(common: &Common) -> Result<(Option<ExperimentConfig>, RunContext)> {
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = common
        .config
        .as_deref()
        .map(ExperimentConfig::load)
        .transpose()?;
    let seed = common
        .seed
        .or(cfg.as_ref().map(|c| c.seed))
        .unwrap_or(0);
    let mut ctx = RunContext::new(&common.out, seed);
    if let Some(dir) = common.config.as_ref().and_then(|p| p.parent()) {
        ctx.base_dir = dir.to_path_buf();
    }
    Ok((cfg, ctx))
}

fn need(cfg: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    cfg.context("this command needs --config")
}

fn teach_opts(t: &Teach) -> TeachOptions {
    TeachOptions {
        capacity: t.capacity,
        epochs: t.epochs,
        shuffle: t.shuffle,
    }
}

fn run(cli: Cli) -> Result<()> {
    let files = match cli.command {
        Command::GenData(c) => {
            let (cfg, ctx) = setup(&c)?;
            commands::gen_data(&need(cfg)?, &ctx)?
        }
        Command::Audit(c) => {
            let (cfg, ctx) = setup(&c)?;
            let out = commands::audit(&need(cfg)?, &ctx)?;
            print!("{}", out.report);
            out.files
        }
        Command::Crossval(c) => {
            let (cfg, ctx) = setup(&c)?;
            commands::crossval(&need(cfg)?, &ctx)?
        }
        Command::TeachFa {
            machine,
            common,
            teach,
        } => {
            let (_, ctx) = setup(&common)?;
            let out = commands::teach_fa_cmd(&machine, &teach_opts(&teach), &ctx)?;
            print!("{}", out.report);
            out.files
        }
        Command::RunTm {
            machine,
            tape,
            budget,
            common,
            teach,
        } => {
            let (_, ctx) = setup(&common)?;
            let out = commands::run_tm_cmd(&machine, &tape, budget, &teach_opts(&teach), &ctx)?;
            println!("symbolic: {}\ndn:       {}", out.symbolic_tape, out.dn_tape);
            out.files
        }
        Command::Compare(c) => {
            let (cfg, ctx) = setup(&c)?;
            commands::compare(&need(cfg)?, &ctx)?.files
        }
        Command::Report { table, common } => {
            let (_, ctx) = setup(&common)?;
            let (files, text) = commands::report_cmd(&table, &ctx)?;
            print!("{text}");
            files
        }
    };
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
