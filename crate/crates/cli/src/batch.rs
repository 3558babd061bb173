//! Seeded batch execution.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use disttest_core::derive_seed;
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::commands::Prepared;
use crate::record::RunRecord;

/// Subcommands that can be driven from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    TolerantTest,
    LpFeasible,
    GenAdversarial,
    CollisionRate,
    Learn,
}

/// A batch description, read from TOML.
///
/// ```toml
/// subcommand = "learn"
/// seeds = [1, 2, 3]
/// repeats = 1
/// output_path = "learn.csv"
///
/// [params]
/// dist = "support32.json"
/// delta = 0.5
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: CommandKind,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        if cfg.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        if cfg.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Loads the referenced inputs. Unknown parameter keys are rejected here.
    pub fn prepare(&self) -> anyhow::Result<Prepared> {
        let params = toml::Value::Table(self.params.clone());
        let bad = |e: toml::de::Error| anyhow::anyhow!("invalid params for {:?}: {e}", self.subcommand);
        match self.subcommand {
            CommandKind::TolerantTest => Prepared::tolerant_test(params.try_into().map_err(bad)?),
            CommandKind::LpFeasible => Prepared::lp_feasible(params.try_into().map_err(bad)?),
            CommandKind::GenAdversarial => Prepared::gen_adversarial(params.try_into().map_err(bad)?),
            CommandKind::CollisionRate => Prepared::collision_rate(params.try_into().map_err(bad)?),
            CommandKind::Learn => Prepared::learn(params.try_into().map_err(bad)?),
        }
    }
}

/// Reads whitespace- or comma-separated 64-bit seeds; `#` starts a comment.
pub fn read_seeds_file(path: &Path) -> anyhow::Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading seeds {}", path.display()))?;
    let seeds = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().with_context(|| format!("bad seed {t:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if seeds.is_empty() {
        bail!("{} contains no seeds", path.display());
    }
    Ok(seeds)
}

/// Worker count from `DISTTEST_THREADS`, if set.
pub fn thread_cap() -> anyhow::Result<Option<usize>> {
    match std::env::var("DISTTEST_THREADS") {
        Ok(v) => {
            let k: usize = v.trim().parse().with_context(|| format!("DISTTEST_THREADS={v:?} is not a count"))?;
            if k == 0 {
                bail!("DISTTEST_THREADS must be at least 1");
            }
            Ok(Some(k))
        }
        Err(_) => Ok(None),
    }
}

pub fn params_digest(cmd: &Prepared) -> String {
    let mut h = Sha256::new();
    h.update(cmd.name().as_bytes());
    h.update(cmd.canonical_params().as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Seed used for the `repeat`-th run of `seed`.
pub fn run_seed(seed: u64, repeat: usize) -> u64 {
    if repeat == 0 {
        seed
    } else {
        derive_seed(seed, repeat as u64)
    }
}

/// Runs `cmd` once per (seed, repeat). Rows come back in (seed, repeat)
/// order whatever the completion order. Run errors are recorded in-row.
pub fn run_batch(
    cmd: &Prepared,
    seeds: &[u64],
    repeats: usize,
    threads: Option<usize>,
) -> anyhow::Result<Vec<RunRecord>> {
    let digest = params_digest(cmd);
    let jobs: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| (0..repeats).map(move |r| (s, r))).collect();
    let many = jobs.len() > 1;
    let work = || {
        jobs.par_iter()
            .map(|&(seed, repeat)| {
                let tag = many.then(|| format!("s{seed}-r{repeat}"));
                let start = Instant::now();
                let out = cmd.run(run_seed(seed, repeat), tag.as_deref());
                let wall_ms = start.elapsed().as_millis() as u64;
                let mut rec = RunRecord {
                    seed,
                    repeat,
                    command: cmd.name().to_string(),
                    params_digest: digest.clone(),
                    outcome: None,
                    success: false,
                    metric: None,
                    samples_used: 0,
                    aux: None,
                    wall_ms,
                    error: None,
                };
                match out {
                    Ok(o) => {
                        rec.outcome = Some(o.outcome);
                        rec.success = o.success;
                        rec.metric = o.metric;
                        rec.samples_used = o.samples_used;
                        rec.aux = o.aux;
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                }
                rec
            })
            .collect::<Vec<_>>()
    };
    Ok(match threads {
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build()?.install(work),
        None => work(),
    })
}
