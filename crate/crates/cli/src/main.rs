use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use disttest_cli::acceptance::{run_suite, write_suite_report, Thresholds};
use disttest_cli::batch::{read_seeds_file, run_batch, thread_cap, ExperimentConfig};
use disttest_cli::commands::{
    CollisionRateArgs, GenAdversarialArgs, LearnArgs, LpFeasibleArgs, Prepared, TolerantTestArgs,
};
use disttest_cli::record::write_report;

#[derive(Parser)]
#[command(name = "disttest", version, about = "Seeded experiments for tolerant distribution testing")]
struct Cli {
    /// Seed for a single run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// File of seeds, one run per seed.
    #[arg(long, global = true, conflicts_with = "seed")]
    seeds_file: Option<PathBuf>,
    /// Runs per seed.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Report destination (CSV). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML experiment config; replaces the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Tolerant test of a property from samples.
    TolerantTest(TolerantTestArgs),
    /// Feasibility of a polyhedron file.
    LpFeasible(LpFeasibleArgs),
    /// Build and verify a yes/no pair for the lower-bound construction.
    GenAdversarial(GenAdversarialArgs),
    /// Probability that m samples hit both sides of some pair.
    CollisionRate(CollisionRateArgs),
    /// Learn a distribution of unknown support size.
    Learn(LearnArgs),
    /// Run the acceptance suite.
    Accept(AcceptArgs),
}

#[derive(clap::Args)]
struct AcceptArgs {
    /// Thresholds file; the shipped one is used otherwise.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Skip the second pass that checks determinism.
    #[arg(long)]
    skip_determinism: bool,
}

fn open_out(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn accept(cli: &Cli, args: &AcceptArgs) -> anyhow::Result<bool> {
    let th = match &args.thresholds {
        Some(p) => {
            Thresholds::from_toml_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?
        }
        None => Thresholds::shipped(),
    };
    let seed = match (&cli.seed, &cli.seeds_file) {
        (Some(s), _) => *s,
        (None, Some(f)) => read_seeds_file(f)?[0],
        (None, None) => th.seed,
    };
    let results = run_suite(&th, seed, !args.skip_determinism, &mut |r| eprintln!("{}", r.line()))?;
    let passed = results.iter().filter(|r| r.passed()).count();
    eprintln!("{passed}/{} criteria passed (seed {seed})", results.len());
    if let Some(p) = &cli.out {
        let mut out = open_out(Some(p))?;
        write_suite_report(&mut out, &results)?;
        out.flush()?;
    }
    Ok(passed == results.len())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let config = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let (prepared, config_seeds, config_repeats, config_out) = match (&cli.command, config) {
        (Some(Command::Accept(a)), None) => return accept(&cli, a),
        (Some(_), Some(_)) => bail!("--config replaces the subcommand; give one or the other"),
        (None, None) => bail!("a subcommand or --config is required"),
        (None, Some(cfg)) => (cfg.prepare()?, Some(cfg.seeds.clone()), Some(cfg.repeats), cfg.output_path.clone()),
        (Some(c), None) => {
            let p = match c {
                Command::TolerantTest(a) => Prepared::tolerant_test(a.clone())?,
                Command::LpFeasible(a) => Prepared::lp_feasible(a.clone())?,
                Command::GenAdversarial(a) => Prepared::gen_adversarial(a.clone())?,
                Command::CollisionRate(a) => Prepared::collision_rate(a.clone())?,
                Command::Learn(a) => Prepared::learn(a.clone())?,
                Command::Accept(_) => unreachable!(),
            };
            (p, None, None, None)
        }
    };
    let seeds = match (&cli.seed, &cli.seeds_file, config_seeds) {
        (Some(s), _, _) => vec![*s],
        (None, Some(f), _) => read_seeds_file(f)?,
        (None, None, Some(s)) => s,
        (None, None, None) => vec![0],
    };
    let repeats = cli.repeats.or(config_repeats).unwrap_or(1);
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let records = run_batch(&prepared, &seeds, repeats, thread_cap()?)?;
    for r in &records {
        if let Some(e) = &r.error {
            log::error!("seed {} repeat {}: {e}", r.seed, r.repeat);
        }
    }
    let out_path = cli.out.clone().or(config_out);
    if out_path.is_none() && matches!(prepared, Prepared::LpFeasible { .. }) {
        for r in &records {
            println!("{}", r.outcome.map_or_else(|| "error".to_string(), |o| o.to_string()));
        }
    } else {
        let mut out = open_out(out_path.as_ref())?;
        write_report(&mut out, &records)?;
        out.flush()?;
    }
    Ok(records.iter().all(|r| r.error.is_none()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
