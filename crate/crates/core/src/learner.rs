//! Learning distributions that concentrate on few elements.
//!
//! [`learn_known_support`] is the plain empirical learner for a known support
//! size. [`learn_adaptive`] doubles a support-size guess and stops as soon as
//! [`tol_identity_test`] confirms the current hypothesis.

use serde::{Deserialize, Serialize};

use crate::chernoff::ceil_tol;
use crate::distribution::Distribution;
use crate::error::{param, Error, Result};
use crate::sampling::SamplingOracle;
use crate::tester::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConstants {
    /// Multiplier in the learning sample size `c_L·s/δ²`.
    pub c_l: f64,
    /// Multiplier in the identity-test sample size.
    pub c_t: f64,
}

impl Default for LearnerConstants {
    fn default() -> Self {
        LearnerConstants { c_l: 8.0, c_t: 0.5 }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 2.0) {
        return param(format!("delta must lie in (0, 2], got {delta}"));
    }
    Ok(())
}

/// Draws `⌈c_L(s + 5)/δ²⌉` samples and returns their empirical distribution.
pub fn learn_known_support(oracle: &mut SamplingOracle, s: usize, delta: f64, c_l: f64) -> Result<Distribution> {
    if s == 0 {
        return param("support size must be at least 1");
    }
    check_delta(delta)?;
    if !(c_l > 0.0) {
        return param(format!("c_L must be positive, got {c_l}"));
    }
    let m = ceil_tol(c_l * (s as f64 + 5.0) / (delta * delta));
    Distribution::from_counts(&oracle.draw_counts(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityTestParams {
    eps1: f64,
    eps2: f64,
    kappa: f64,
}

impl IdentityTestParams {
    pub fn new(eps1: f64, eps2: f64, kappa: f64) -> Result<Self> {
        if !(eps1 >= 0.0 && eps1 < eps2 && eps2 <= 2.0) {
            return param(format!("need 0 <= eps1 < eps2 <= 2, got {eps1}, {eps2}"));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return param(format!("kappa must lie in (0, 1), got {kappa}"));
        }
        Ok(IdentityTestParams { eps1, eps2, kappa })
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Acceptance threshold on the empirical distance.
    pub fn threshold(&self) -> f64 {
        (self.eps1 + self.eps2) / 2.0
    }
}

/// `⌈c_T(s + 1 + ln(1/κ))/Δ²⌉` with `Δ = (ε2 − ε1)/4`.
pub fn identity_test_sample_size(support: usize, p: &IdentityTestParams, c_t: f64) -> u64 {
    let gap = (p.eps2 - p.eps1) / 4.0;
    ceil_tol(c_t * (support as f64 + 1.0 + (1.0 / p.kappa).ln()) / (gap * gap)).max(1)
}

/// Plug-in L1 statistic on the contracted domain: `Supp(d_k)` plus one bucket
/// for everything else.
pub fn contracted_l1(counts: &[u64], d_k: &Distribution) -> f64 {
    let m: u64 = counts.iter().sum();
    let m = m as f64;
    let mut inside = 0.0;
    let mut rest = 0u64;
    for (x, &c) in counts.iter().enumerate() {
        let p = d_k.mass(x);
        if p > 0.0 {
            inside += (c as f64 / m - p).abs();
        } else {
            rest += c;
        }
    }
    inside + rest as f64 / m
}

/// Accepts when the sampled distribution looks `ε1`-close to `d_k`, rejects
/// when it looks `ε2`-far.
pub fn tol_identity_test(
    oracle: &mut SamplingOracle,
    d_k: &Distribution,
    p: &IdentityTestParams,
    c_t: f64,
) -> Result<Verdict> {
    if d_k.n() != oracle.n() {
        return Err(Error::Dimension { left: d_k.n(), right: oracle.n() });
    }
    if !(c_t > 0.0) {
        return param(format!("c_T must be positive, got {c_t}"));
    }
    let m = identity_test_sample_size(d_k.support_size(), p, c_t);
    let counts = oracle.draw_counts(m);
    Ok(if contracted_l1(&counts, d_k) <= p.threshold() { Verdict::Accept } else { Verdict::Reject })
}

/// Confidence assigned to the `k`-th identity test (`k ≥ 1`).
pub fn kappa_schedule(k: u32) -> f64 {
    1.0 / (100.0 * f64::from(k) * f64::from(k))
}

/// `Σ_k 1/(100k²) = π²/600`, the total failure budget of all identity tests.
pub fn kappa_budget() -> f64 {
    std::f64::consts::PI * std::f64::consts::PI / 600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnOutcome {
    Learned(Distribution),
    Failure,
}

impl LearnOutcome {
    pub fn is_learned(&self) -> bool {
        matches!(self, LearnOutcome::Learned(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnIteration {
    pub k: u32,
    pub guess: u64,
    pub learn_draws: u64,
    pub test_draws: u64,
    pub kappa: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub outcome: LearnOutcome,
    pub total_samples: u64,
    /// Last support-size guess tried.
    pub final_guess: u64,
    pub iterations: Vec<LearnIteration>,
}

/// Doubling learner. Guesses `s = 1, 2, 4, …`, learns `D_s` from
/// `⌈c_L·s/δ²⌉` draws, and returns it once the identity test with
/// `(η + δ/2, η + δ, 1/(100k²))` accepts. Gives up once `s > 2n`.
pub fn learn_adaptive(
    oracle: &mut SamplingOracle,
    eta: f64,
    delta: f64,
    n: usize,
    constants: &LearnerConstants,
) -> Result<LearnResult> {
    if !(0.0..2.0).contains(&eta) {
        return param(format!("eta must lie in [0, 2), got {eta}"));
    }
    check_delta(delta)?;
    if oracle.n() != n {
        return Err(Error::Dimension { left: oracle.n(), right: n });
    }
    if !(constants.c_l > 0.0 && constants.c_t > 0.0) {
        return param("learner constants must be positive");
    }
    assert!(kappa_budget() < 0.1, "identity-test failure budget exceeds 1/10");

    let eps1 = eta + delta / 2.0;
    let eps2 = (eta + delta).min(2.0);
    let mut iterations = Vec::new();
    let mut total = 0u64;
    let mut s = 1u64;
    let mut k = 1u32;
    let limit = 2 * n as u64;
    let mut last = s;
    while s <= limit {
        last = s;
        let m = ceil_tol(constants.c_l * s as f64 / (delta * delta)).max(1);
        let d_s = Distribution::from_counts(&oracle.draw_counts(m))?;
        let p = IdentityTestParams::new(eps1.min(eps2 - f64::EPSILON), eps2, kappa_schedule(k))?;
        let before = oracle.draws_used();
        let verdict = tol_identity_test(oracle, &d_s, &p, constants.c_t)?;
        let test_draws = oracle.draws_used() - before;
        total += m + test_draws;
        iterations.push(LearnIteration { k, guess: s, learn_draws: m, test_draws, kappa: p.kappa, verdict });
        if verdict == Verdict::Accept {
            return Ok(LearnResult {
                outcome: LearnOutcome::Learned(d_s),
                total_samples: total,
                final_guess: s,
                iterations,
            });
        }
        s *= 2;
        k += 1;
    }
    Ok(LearnResult { outcome: LearnOutcome::Failure, total_samples: total, final_guess: last, iterations })
}
