//! Explicit probability mass functions over the domain `[n] = {0, .., n-1}`
//! and the distance / mass-profile queries the testers are built on.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Absolute tolerance on `Σ pmf = 1`.
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Slack used when comparing accumulated masses against thresholds such as
/// the non-concentration mass `α`.
pub const MASS_SLACK: f64 = 1e-12;

/// A probability mass function over `[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionFile", into = "DistributionFile")]
pub struct Distribution {
    pmf: Vec<f64>,
}

/// On-disk layout: `{"n": 4, "pmf": [0.25, 0.25, 0.25, 0.25]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionFile {
    n: usize,
    pmf: Vec<f64>,
}

impl TryFrom<DistributionFile> for Distribution {
    type Error = Error;

    fn try_from(file: DistributionFile) -> Result<Self> {
        if file.n != file.pmf.len() {
            return Err(Error::InvalidDistribution(format!(
                "field n = {} but pmf has {} entries",
                file.n,
                file.pmf.len()
            )));
        }
        Distribution::new(file.pmf)
    }
}

impl From<Distribution> for DistributionFile {
    fn from(d: Distribution) -> Self {
        DistributionFile { n: d.pmf.len(), pmf: d.pmf }
    }
}

impl Distribution {
    /// Validates and wraps a pmf.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidDistribution("domain size must be at least 1".into()));
        }
        for (i, &p) in pmf.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!("entry {i} = {p} is not a probability")));
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, expected 1")));
        }
        Ok(Distribution { pmf })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return param("uniform distribution needs n >= 1");
        }
        Ok(Distribution { pmf: vec![1.0 / n as f64; n] })
    }

    /// Uniform over the listed indices, zero elsewhere.
    pub fn uniform_on(n: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return param("support must be nonempty");
        }
        let mut pmf = vec![0.0; n];
        let mass = 1.0 / support.len() as f64;
        for &i in support {
            if i >= n {
                return Err(Error::Index(format!("{i} outside domain of size {n}")));
            }
            if pmf[i] != 0.0 {
                return param(format!("index {i} listed twice"));
            }
            pmf[i] = mass;
        }
        Distribution::new(pmf)
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::Index(format!("{at} outside domain of size {n}")));
        }
        let mut pmf = vec![0.0; n];
        pmf[at] = 1.0;
        Ok(Distribution { pmf })
    }

    /// Normalized histogram. Fails if every count is zero.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return param("cannot normalize an empty sample");
        }
        let total = total as f64;
        Distribution::new(counts.iter().map(|&c| c as f64 / total).collect())
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return param("weights must be finite, non-negative and not all zero");
        }
        Distribution::new(weights.iter().map(|w| w / total).collect())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.pmf.len()
    }

    #[inline]
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.pmf[i]
    }

    /// `D(S)`.
    pub fn mass_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.pmf[i]).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.pmf[i] > 0.0).collect()
    }

    pub fn support_size(&self) -> usize {
        self.pmf.iter().filter(|&&p| p > 0.0).count()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// Bounds for (α, β)-non-concentration: every set of `⌊βn⌋` elements
/// carries mass at least `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonConcentrationParams {
    alpha: f64,
    beta: f64,
}

impl NonConcentrationParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= beta && beta < 0.5) {
            return param(format!("need 0 < alpha <= beta < 1/2, got alpha = {alpha}, beta = {beta}"));
        }
        Ok(NonConcentrationParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `⌊βn⌋`.
    pub fn set_size(&self, n: usize) -> usize {
        floor_fraction(self.beta, n)
    }
}

/// `⌊fraction · n⌋`, robust to representation error (0.3 · 10 is 2.9999…).
pub(crate) fn floor_fraction(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.floor() as usize
    }
}

fn check_same_domain(d1: &Distribution, d2: &Distribution) -> Result<()> {
    if d1.n() != d2.n() {
        return Err(Error::Dimension { left: d1.n(), right: d2.n() });
    }
    Ok(())
}

/// `‖d1 − d2‖₁`.
pub fn l1_distance(d1: &Distribution, d2: &Distribution) -> Result<f64> {
    check_same_domain(d1, d2)?;
    Ok(d1.pmf.iter().zip(&d2.pmf).map(|(a, b)| (a - b).abs()).sum())
}

/// `High_κ(D) = {x : D(x) ≥ κ}`, ascending.
pub fn high_set(d: &Distribution, kappa: f64) -> Result<Vec<usize>> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return param(format!("kappa must lie in (0, 1), got {kappa}"));
    }
    Ok((0..d.n()).filter(|&i| d.pmf[i] >= kappa).collect())
}

/// Indices ordered by non-increasing mass, ties broken by smaller index.
pub fn mass_order(d: &Distribution) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.n()).collect();
    idx.sort_by(|&a, &b| d.pmf[b].total_cmp(&d.pmf[a]).then(a.cmp(&b)));
    idx
}

/// The `t` heaviest indices, heaviest first.
pub fn top_elements(d: &Distribution, t: usize) -> Result<Vec<usize>> {
    if t > d.n() {
        return param(format!("t = {t} exceeds domain size {}", d.n()));
    }
    let mut order = mass_order(d);
    order.truncate(t);
    Ok(order)
}

fn sorted_desc(p: &[f64]) -> Vec<f64> {
    let mut v = p.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Minimum of `Σ |d1(i) − d2(σ(i))|` over permutations σ. The identity
/// pairing of the two non-increasing rearrangements attains it.
pub fn sorted_l1_distance(d1: &Distribution, d2: &Distribution) -> Result<f64> {
    check_same_domain(d1, d2)?;
    let (a, b) = (sorted_desc(&d1.pmf), sorted_desc(&d2.pmf));
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum())
}

/// Mass of the `k` lightest elements, i.e. the minimum of `D(S)` over `|S| = k`.
pub fn smallest_mass(d: &Distribution, k: usize) -> f64 {
    let mut v = d.pmf.clone();
    v.sort_by(|a, b| a.total_cmp(b));
    v.iter().take(k).sum()
}

/// Whether every set of `⌊βn⌋` elements has mass at least `α`.
pub fn is_non_concentrated(d: &Distribution, p: &NonConcentrationParams) -> Result<bool> {
    let k = p.set_size(d.n());
    if k == 0 {
        return param(format!("beta * n rounds down to 0 (beta = {}, n = {})", p.beta, d.n()));
    }
    Ok(smallest_mass(d, k) + MASS_SLACK >= p.alpha)
}

/// Empirical distribution `D'(x) = #x / |samples|`.
pub fn empirical_distribution(samples: &[usize], n: usize) -> Result<Distribution> {
    if samples.is_empty() {
        return param("empirical distribution of an empty sample");
    }
    let mut counts = vec![0u64; n];
    for &s in samples {
        if s >= n {
            return Err(Error::Index(format!("sample {s} outside domain of size {n}")));
        }
        counts[s] += 1;
    }
    Distribution::from_counts(&counts)
}

/// Total order on masses used when a deterministic ascending order is needed.
pub(crate) fn ascending_by_mass(d: &Distribution) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.n()).collect();
    idx.sort_by(|&a, &b| match d.pmf[a].total_cmp(&d.pmf[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}
