//! Tolerant tester for label-invariant properties.
//!
//! Draws `W` samples to find the candidate heavy elements `S`, draws `Z`
//! more to estimate their masses, pads `S` with `q²` unseen elements to form
//! `H`, spreads the remaining mass evenly over `Ω∖H` to obtain `D~`, and then
//! asks a [`PropertyOracle`] whether some member of the property is close to
//! `D~` on `H` and light off `H`.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::chernoff::ceil_tol;
use crate::distribution::Distribution;
use crate::error::{param, Error, Result};
use crate::linprop::FEASIBILITY_TOL;
use crate::sampling::SamplingOracle;

/// Hidden constants of the sample-size formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TesterConstants {
    pub c_star: f64,
    pub c_w: f64,
    pub c_z: f64,
}

impl Default for TesterConstants {
    fn default() -> Self {
        TesterConstants { c_star: 10.0, c_w: 4.0, c_z: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesterParams {
    pub q: u64,
    /// `γ1`.
    pub zeta: f64,
    /// `γ2 − γ1`.
    pub eta: f64,
    /// `η/64`.
    pub eta_prime: f64,
    /// Step-1 sample count.
    pub w: u64,
    /// Step-2 sample count.
    pub z_size: u64,
    /// `26η′ + ζ`.
    pub bound: f64,
}

impl TesterParams {
    pub fn q_squared(&self) -> u64 {
        self.q * self.q
    }

    /// Draws consumed by one run.
    pub fn samples_per_run(&self) -> u64 {
        self.w + self.z_size
    }
}

/// Sample sizes for a `(γ1, γ2 + ε)` tester given the non-tolerant
/// complexity `Λ`.
pub fn derive_params(
    lambda: u64,
    gamma1: f64,
    gamma2: f64,
    n: usize,
    constants: &TesterConstants,
) -> Result<TesterParams> {
    if lambda == 0 {
        return param("lambda must be at least 1");
    }
    if !(gamma1 >= 0.0 && gamma1 < gamma2 && gamma2 <= 2.0) {
        return param(format!("need 0 <= gamma1 < gamma2 <= 2, got {gamma1}, {gamma2}"));
    }
    if !(constants.c_star > 0.0 && constants.c_w > 0.0 && constants.c_z > 0.0) {
        return param("tester constants must be positive");
    }
    let q = ceil_tol(lambda as f64 / constants.c_star).max(1);
    let zeta = gamma1;
    let eta = gamma2 - gamma1;
    let eta_prime = eta / 64.0;
    let q2 = (q * q) as f64;
    let w = ceil_tol(constants.c_w * q2 * ((q + 2) as f64).ln() / eta_prime).max(q * q);
    let z_size = ceil_tol(constants.c_z * w as f64 * ((w + 2) as f64).ln() / (eta_prime * eta_prime)).max(w);
    if n <= 4 * (q * q) as usize {
        warn!("domain size {n} does not exceed 4q^2 = {}; estimation will refuse to run", 4 * q * q);
    }
    Ok(TesterParams { q, zeta, eta, eta_prime, w, z_size, bound: 26.0 * eta_prime + zeta })
}

/// Output of the estimation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct HighEstimate {
    h: Vec<usize>,
    s: Vec<usize>,
    d_tilde: Distribution,
    low_mass: f64,
    samples_used: u64,
    padding_short: bool,
}

impl HighEstimate {
    /// Assembles an estimate from explicit parts. `h` must be duplicate-free
    /// and inside the domain of `d_tilde`; `s ⊆ h`.
    pub fn from_parts(h: Vec<usize>, s: Vec<usize>, d_tilde: Distribution) -> Result<Self> {
        let n = d_tilde.n();
        let mut in_h = vec![false; n];
        for &x in &h {
            if x >= n || std::mem::replace(&mut in_h[x], true) {
                return Err(Error::Index(format!("H element {x} invalid for domain {n}")));
            }
        }
        if let Some(&x) = s.iter().find(|&&x| x >= n || !in_h[x]) {
            return Err(Error::Structure(format!("S element {x} not in H")));
        }
        let low_mass = (0..n).filter(|&x| !in_h[x]).map(|x| d_tilde.mass(x)).sum();
        Ok(HighEstimate { h, s, d_tilde, low_mass, samples_used: 0, padding_short: false })
    }

    /// `H`, ascending.
    pub fn h(&self) -> &[usize] {
        &self.h
    }

    /// Distinct elements seen in the first sample batch, ascending.
    pub fn s(&self) -> &[usize] {
        &self.s
    }

    pub fn d_tilde(&self) -> &Distribution {
        &self.d_tilde
    }

    /// `D~(Ω∖H)`.
    pub fn low_mass(&self) -> f64 {
        self.low_mass
    }

    pub fn samples_used(&self) -> u64 {
        self.samples_used
    }

    /// True when fewer than `q²` unused elements were available for padding.
    pub fn padding_short(&self) -> bool {
        self.padding_short
    }

    pub fn n(&self) -> usize {
        self.d_tilde.n()
    }

    pub fn h_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for &x in &self.h {
            mask[x] = true;
        }
        mask
    }
}

/// Decides whether some member `D1` of a property satisfies
/// `Σ_{x∈H}|D1(x) − D~(x)| + |D1(Ω∖H) − D~(Ω∖H)| ≤ bound` and
/// `High_{1/q²}(D1) ⊆ H`.
pub trait PropertyOracle: Send + Sync {
    fn exists_close_member(&self, est: &HighEstimate, q: u64, bound: f64) -> Result<bool>;
}

impl<F> PropertyOracle for F
where
    F: Fn(&HighEstimate, u64, f64) -> Result<bool> + Send + Sync,
{
    fn exists_close_member(&self, est: &HighEstimate, q: u64, bound: f64) -> Result<bool> {
        self(est, q, bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        })
    }
}

/// Steps 1–4: sample, pick `H`, build `D~`.
pub fn estimate_high_part(oracle: &mut SamplingOracle, params: &TesterParams, n: usize) -> Result<HighEstimate> {
    if oracle.n() != n {
        return Err(Error::Dimension { left: oracle.n(), right: n });
    }
    let q2 = params.q_squared();
    if (n as u64) <= 4 * q2 {
        return Err(Error::Precondition(format!(
            "domain size n = {n} must exceed 4q^2 = {} (q = {})",
            4 * q2,
            params.q
        )));
    }
    let start = oracle.draws_used();
    let first = oracle.draw_counts(params.w);
    let second = oracle.draw_counts(params.z_size);

    let s: Vec<usize> = (0..n).filter(|&x| first[x] > 0).collect();
    let mut in_h = vec![false; n];
    for &x in &s {
        in_h[x] = true;
    }
    let mut padded = 0u64;
    for x in 0..n {
        if padded == q2 {
            break;
        }
        if !in_h[x] && second[x] == 0 {
            in_h[x] = true;
            padded += 1;
        }
    }
    let padding_short = padded < q2;
    if padding_short {
        warn!("only {padded} of q^2 = {q2} unused elements available for padding H");
    }
    let h: Vec<usize> = (0..n).filter(|&x| in_h[x]).collect();

    let z = params.z_size as f64;
    let mut pmf = vec![0.0; n];
    let mut high_mass = 0.0;
    for &x in &h {
        pmf[x] = second[x] as f64 / z;
        high_mass += pmf[x];
    }
    let outside = n - h.len();
    let residual = (1.0 - high_mass).max(0.0);
    if outside > 0 {
        let each = residual / outside as f64;
        for (x, p) in pmf.iter_mut().enumerate() {
            if !in_h[x] {
                *p = each;
            }
        }
    }
    let d_tilde = Distribution::new(pmf)?;
    let low_mass = if outside > 0 { residual } else { 0.0 };
    Ok(HighEstimate { h, s, d_tilde, low_mass, samples_used: oracle.draws_used() - start, padding_short })
}

/// Left side of Condition (A).
pub fn closeness_on_h(d1: &Distribution, est: &HighEstimate) -> Result<f64> {
    if d1.n() != est.n() {
        return Err(Error::Dimension { left: d1.n(), right: est.n() });
    }
    let d = est.d_tilde();
    let mask = est.h_mask();
    let on_h: f64 = est.h.iter().map(|&x| (d1.mass(x) - d.mass(x)).abs()).sum();
    let d1_low: f64 = (0..d1.n()).filter(|&x| !mask[x]).map(|x| d1.mass(x)).sum();
    Ok(on_h + (d1_low - est.low_mass).abs())
}

/// Conditions (A) and (B) for an explicit candidate `d1`.
pub fn check_conditions(d1: &Distribution, est: &HighEstimate, q: u64, bound: f64) -> Result<bool> {
    let lhs = closeness_on_h(d1, est)?;
    let cap = 1.0 / (q as f64 * q as f64);
    let mask = est.h_mask();
    let light_off_h = (0..d1.n()).filter(|&x| !mask[x]).all(|x| d1.mass(x) < cap);
    Ok(lhs <= bound + FEASIBILITY_TOL && light_off_h)
}

/// One complete run: estimate, then a single oracle query.
#[derive(Debug, Clone)]
pub struct TestRun {
    pub verdict: Verdict,
    pub estimate: HighEstimate,
    pub samples_used: u64,
}

pub fn run_tolerant_test(
    oracle: &mut SamplingOracle,
    prop: &dyn PropertyOracle,
    params: &TesterParams,
    n: usize,
) -> Result<TestRun> {
    let estimate = estimate_high_part(oracle, params, n)?;
    let verdict =
        if prop.exists_close_member(&estimate, params.q, params.bound)? { Verdict::Accept } else { Verdict::Reject };
    let samples_used = estimate.samples_used;
    Ok(TestRun { verdict, estimate, samples_used })
}

pub fn tolerant_test(
    oracle: &mut SamplingOracle,
    prop: &dyn PropertyOracle,
    params: &TesterParams,
    n: usize,
) -> Result<Verdict> {
    Ok(run_tolerant_test(oracle, prop, params, n)?.verdict)
}

/// Majority vote over an odd number of independent runs on the same oracle.
pub fn tolerant_test_amplified(
    oracle: &mut SamplingOracle,
    prop: &dyn PropertyOracle,
    params: &TesterParams,
    n: usize,
    repeats: usize,
) -> Result<(Verdict, Vec<TestRun>)> {
    if repeats == 0 || repeats.is_multiple_of(2) {
        return param(format!("repeats must be odd, got {repeats}"));
    }
    let runs = (0..repeats).map(|_| run_tolerant_test(oracle, prop, params, n)).collect::<Result<Vec<_>>>()?;
    let accepts = runs.iter().filter(|r| r.verdict == Verdict::Accept).count();
    let verdict = if 2 * accepts > repeats { Verdict::Accept } else { Verdict::Reject };
    Ok((verdict, runs))
}
