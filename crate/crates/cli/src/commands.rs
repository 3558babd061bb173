//! Subcommand arguments and single-run execution.
//!
//! Every argument struct doubles as the `params` table of a batch config, so
//! the flag names and the config keys are the same (with `-` written as `_`).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use disttest_core::adversarial::{
    build_pairing, collision_rate, collision_union_bound, verify_adversarial, AdversarialPair, AdversarialReport,
    Construction,
};
use disttest_core::learner::{learn_adaptive, learn_known_support, LearnOutcome, LearnerConstants};
use disttest_core::linprop::{
    is_feasible, linear_property_oracle, uniformity_polyhedron, LinearProperty, LinearPropertyOracle, Polyhedron,
    SolverOptions,
};
use disttest_core::sampling::rng_from_seed;
use disttest_core::tester::{derive_params, tolerant_test_amplified, TesterConstants, TesterParams, Verdict};
use disttest_core::{l1_distance, Distribution, NonConcentrationParams, SamplingOracle};
use serde::{Deserialize, Serialize};

use crate::record::Outcome;

fn one() -> usize {
    1
}

fn uniform_property() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerantTestArgs {
    /// Distribution file to sample from.
    #[arg(long)]
    pub dist: PathBuf,
    /// `uniform` or `lp:<polyhedron file>`.
    #[arg(long, default_value = "uniform")]
    #[serde(default = "uniform_property")]
    pub property: String,
    /// Sample complexity of the non-tolerant tester being lifted.
    #[arg(long)]
    pub lambda: u64,
    #[arg(long)]
    pub gamma1: f64,
    #[arg(long)]
    pub gamma2: f64,
    /// Majority vote over this many (odd) runs.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub repeats: usize,
    /// Radius of the uniformity property.
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub eps: f64,
    /// Verdict counted as a success in batch summaries.
    #[arg(long, value_enum, default_value_t = Expect::Accept)]
    #[serde(default)]
    pub expect: Expect,
    #[command(flatten)]
    #[serde(default)]
    pub constants: TesterConstantArgs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    #[default]
    Accept,
    Reject,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TesterConstantArgs {
    #[arg(long, default_value_t = 10.0)]
    pub c_star: f64,
    #[arg(long, default_value_t = 4.0)]
    pub c_w: f64,
    #[arg(long, default_value_t = 4.0)]
    pub c_z: f64,
}

impl Default for TesterConstantArgs {
    fn default() -> Self {
        let c = TesterConstants::default();
        TesterConstantArgs { c_star: c.c_star, c_w: c.c_w, c_z: c.c_z }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpFeasibleArgs {
    /// Polyhedron file.
    #[arg(long)]
    pub lp: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenAdversarialArgs {
    /// Yes-instance distribution file.
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub out_yes: PathBuf,
    #[arg(long)]
    pub out_no: PathBuf,
    /// Per-check verification report (CSV).
    #[arg(long)]
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Apply a uniformly random relabeling to the generated pair.
    #[arg(long)]
    #[serde(default)]
    pub permute: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LabelInvariant,
    General,
}

impl From<Mode> for Construction {
    fn from(m: Mode) -> Self {
        match m {
            Mode::LabelInvariant => Construction::LabelInvariant,
            Mode::General => Construction::General,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionRateArgs {
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long)]
    pub beta: f64,
    /// Draws per trial.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    #[serde(default = "thousand")]
    pub trials: usize,
    /// Pair `L` at random instead of in sorted order.
    #[arg(long)]
    #[serde(default)]
    pub random_pairing: bool,
}

fn thousand() -> usize {
    1000
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnArgs {
    /// Distribution to learn; also used to score the result.
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub eta: f64,
    #[arg(long)]
    pub delta: f64,
    /// Use the known-support learner with this support size.
    #[arg(long)]
    #[serde(default)]
    pub known_s: Option<usize>,
    #[arg(long, default_value_t = 8.0)]
    #[serde(default = "default_c_l")]
    pub c_l: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "default_c_t")]
    pub c_t: f64,
}

fn default_c_l() -> f64 {
    LearnerConstants::default().c_l
}

fn default_c_t() -> f64 {
    LearnerConstants::default().c_t
}

/// A subcommand with its inputs already loaded and validated.
#[derive(Debug, Clone)]
pub enum Prepared {
    TolerantTest { args: TolerantTestArgs, dist: Distribution, params: TesterParams, oracle: LinearPropertyOracle },
    LpFeasible { poly: Polyhedron },
    GenAdversarial { args: GenAdversarialArgs, dist: Distribution, params: NonConcentrationParams },
    CollisionRate { args: CollisionRateArgs, dist: Distribution },
    Learn { args: LearnArgs, dist: Distribution },
}

fn load_dist(path: &Path) -> anyhow::Result<Distribution> {
    Distribution::load(path).with_context(|| format!("reading distribution {}", path.display()))
}

fn load_poly(path: &Path) -> anyhow::Result<Polyhedron> {
    Polyhedron::load(path).with_context(|| format!("reading polyhedron {}", path.display()))
}

impl Prepared {
    pub fn tolerant_test(args: TolerantTestArgs) -> anyhow::Result<Self> {
        let dist = load_dist(&args.dist)?;
        let n = dist.n();
        let constants =
            TesterConstants { c_star: args.constants.c_star, c_w: args.constants.c_w, c_z: args.constants.c_z };
        let params = derive_params(args.lambda, args.gamma1, args.gamma2, n, &constants)?;
        if args.repeats.is_multiple_of(2) {
            bail!("--repeats must be odd, got {}", args.repeats);
        }
        let prop = match args.property.as_str() {
            "uniform" => uniformity_polyhedron(n, args.eps)?,
            other => match other.strip_prefix("lp:") {
                Some(file) => LinearProperty::new(load_poly(Path::new(file))?, n)?,
                None => bail!("unknown property {other:?}; expected `uniform` or `lp:<file>`"),
            },
        };
        Ok(Prepared::TolerantTest { oracle: linear_property_oracle(prop), args, dist, params })
    }

    pub fn lp_feasible(args: LpFeasibleArgs) -> anyhow::Result<Self> {
        Ok(Prepared::LpFeasible { poly: load_poly(&args.lp)? })
    }

    pub fn gen_adversarial(args: GenAdversarialArgs) -> anyhow::Result<Self> {
        let dist = load_dist(&args.dist)?;
        let params = NonConcentrationParams::new(args.alpha, args.beta)?;
        Ok(Prepared::GenAdversarial { args, dist, params })
    }

    pub fn collision_rate(args: CollisionRateArgs) -> anyhow::Result<Self> {
        let dist = load_dist(&args.dist)?;
        Ok(Prepared::CollisionRate { args, dist })
    }

    pub fn learn(args: LearnArgs) -> anyhow::Result<Self> {
        let dist = load_dist(&args.dist)?;
        Ok(Prepared::Learn { args, dist })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Prepared::TolerantTest { .. } => "tolerant-test",
            Prepared::LpFeasible { .. } => "lp-feasible",
            Prepared::GenAdversarial { .. } => "gen-adversarial",
            Prepared::CollisionRate { .. } => "collision-rate",
            Prepared::Learn { .. } => "learn",
        }
    }

    /// Arguments as canonical JSON, the input of the parameter digest.
    pub fn canonical_params(&self) -> String {
        let value = match self {
            Prepared::TolerantTest { args, .. } => serde_json::to_value(args),
            Prepared::LpFeasible { poly } => Ok(serde_json::json!({ "lp_digest": poly.digest() })),
            Prepared::GenAdversarial { args, .. } => serde_json::to_value(args),
            Prepared::CollisionRate { args, .. } => serde_json::to_value(args),
            Prepared::Learn { args, .. } => serde_json::to_value(args),
        };
        value.expect("arguments serialize").to_string()
    }

    /// Executes one run. `tag` distinguishes output files when a batch
    /// contains several runs.
    pub fn run(&self, seed: u64, tag: Option<&str>) -> disttest_core::Result<RunOutput> {
        match self {
            Prepared::TolerantTest { args, dist, params, oracle } => {
                let n = dist.n();
                let mut sampler = SamplingOracle::new(dist, seed);
                let (verdict, runs) = tolerant_test_amplified(&mut sampler, oracle, params, n, args.repeats)?;
                let accepts = runs.iter().filter(|r| r.verdict == Verdict::Accept).count();
                let expected = match args.expect {
                    Expect::Accept => Verdict::Accept,
                    Expect::Reject => Verdict::Reject,
                };
                Ok(RunOutput {
                    outcome: Outcome::Verdict(verdict),
                    success: verdict == expected,
                    metric: Some(accepts as f64 / runs.len() as f64),
                    samples_used: sampler.draws_used(),
                    aux: Some(runs[0].estimate.h().len() as u64),
                })
            }
            Prepared::LpFeasible { poly } => {
                let feasible = is_feasible(poly, &SolverOptions::default())?;
                Ok(RunOutput {
                    outcome: Outcome::Feasible(feasible),
                    success: feasible,
                    metric: None,
                    samples_used: 0,
                    aux: None,
                })
            }
            Prepared::GenAdversarial { args, dist, params } => {
                let mut rng = rng_from_seed(seed);
                let mut pair = AdversarialPair::generate(dist, *params, args.mode.into(), &mut rng)?;
                if args.permute {
                    pair = pair.permuted(&mut rng)?.0;
                }
                let report = verify_adversarial(&pair);
                pair.d_yes.save(tagged(&args.out_yes, tag))?;
                pair.d_no.save(tagged(&args.out_no, tag))?;
                if let Some(path) = &args.report {
                    write_adversarial_report(&tagged(path, tag), &report)?;
                }
                Ok(RunOutput {
                    outcome: Outcome::Check(report.passed()),
                    success: report.passed(),
                    metric: Some(report.max_conservation_residual),
                    samples_used: 0,
                    aux: Some(report.support_size as u64),
                })
            }
            Prepared::CollisionRate { args, dist } => {
                let mut rng = rng_from_seed(seed);
                let pairing = if args.random_pairing {
                    build_pairing(dist, args.beta, Some(&mut rng))?
                } else {
                    build_pairing(dist, args.beta, None)?
                };
                let rate = collision_rate(dist, &pairing, args.m, args.trials, &mut rng)?;
                let bound = collision_union_bound(dist, &pairing, args.m).min(1.0);
                let radius = 3.0 * (bound * (1.0 - bound) / args.trials as f64).sqrt();
                let within = rate <= bound + radius;
                Ok(RunOutput {
                    outcome: Outcome::Check(within),
                    success: within,
                    metric: Some(rate),
                    samples_used: (args.m * args.trials) as u64,
                    aux: Some(args.m as u64),
                })
            }
            Prepared::Learn { args, dist } => {
                let mut sampler = SamplingOracle::new(dist, seed);
                let (learned, guess) = match args.known_s {
                    Some(s) => (Some(learn_known_support(&mut sampler, s, args.delta, args.c_l)?), s as u64),
                    None => {
                        let constants = LearnerConstants { c_l: args.c_l, c_t: args.c_t };
                        let r = learn_adaptive(&mut sampler, args.eta, args.delta, dist.n(), &constants)?;
                        let learned = match r.outcome {
                            LearnOutcome::Learned(d) => Some(d),
                            LearnOutcome::Failure => None,
                        };
                        (learned, r.final_guess)
                    }
                };
                let distance = learned.as_ref().map(|d| l1_distance(d, dist)).transpose()?;
                Ok(RunOutput {
                    outcome: Outcome::Learned(learned.is_some()),
                    success: distance.is_some_and(|l1| l1 <= args.eta + args.delta),
                    metric: distance,
                    samples_used: sampler.draws_used(),
                    aux: Some(guess),
                })
            }
        }
    }
}

/// Result of one run before timing and bookkeeping are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub success: bool,
    pub metric: Option<f64>,
    pub samples_used: u64,
    pub aux: Option<u64>,
}

/// `out.json` with tag `s3-r0` becomes `out.s3-r0.json`.
fn tagged(path: &Path, tag: Option<&str>) -> PathBuf {
    let Some(tag) = tag else {
        return path.to_path_buf();
    };
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn write_adversarial_report(path: &Path, r: &AdversarialReport) -> disttest_core::Result<()> {
    let f = crate::record::fmt_f64;
    let rows = [
        ("conservation", f(r.max_conservation_residual), f(disttest_core::distribution::MASS_SLACK), r.conservation_ok),
        ("zero_pattern", r.zero_pattern_failures.len().to_string(), "0".into(), r.zero_pattern_failures.is_empty()),
        ("pair_mass", f(r.max_pair_mass), f(r.pair_mass_bound), r.pair_mass_ok),
        ("off_l_agreement", r.off_l_mismatches.len().to_string(), "0".into(), r.off_l_mismatches.is_empty()),
        ("support", r.support_size.to_string(), r.support_limit.to_string(), r.support_ok),
        ("pairing", String::new(), String::new(), r.pairing_ok),
    ];
    let mut out = String::from("check,value,limit,ok\n");
    for (check, value, limit, ok) in rows {
        out.push_str(&format!("{check},{value},{limit},{ok}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagging_inserts_before_extension() {
        assert_eq!(tagged(Path::new("a/out.json"), Some("s1-r0")), PathBuf::from("a/out.s1-r0.json"));
        assert_eq!(tagged(Path::new("out"), Some("x")), PathBuf::from("out.x"));
        assert_eq!(tagged(Path::new("out.json"), None), PathBuf::from("out.json"));
    }
}
