//! Lower-bound instance generators.
//!
//! Both constructions take the `2⌊βn⌋` lightest elements `L` of a yes-instance,
//! pair them up, and move each pair's mass onto a single member. The
//! label-invariant construction uses a random pairing and always merges onto
//! the first member; the general construction pairs in sorted order and flips a
//! mass-weighted coin per pair.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::distribution::{ascending_by_mass, smallest_mass, Distribution, NonConcentrationParams, MASS_SLACK};
use crate::error::{param, Error, Result};
use crate::sampling::{Rng, SamplingOracle};

/// A perfect matching on the low-mass set `L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    n: usize,
    l: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl Pairing {
    /// Validates that the pairs are disjoint and inside `[n]`.
    pub fn new(n: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &(x, y) in &pairs {
            for z in [x, y] {
                if z >= n {
                    return Err(Error::Index(format!("pair element {z} outside domain of size {n}")));
                }
                if std::mem::replace(&mut seen[z], true) {
                    return Err(Error::Structure(format!("element {z} appears in two pairs")));
                }
            }
        }
        let mut l: Vec<usize> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
        l.sort_unstable();
        Ok(Pairing { n, l, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `L`, ascending.
    pub fn l(&self) -> &[usize] {
        &self.l
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `pair_of[x]` is the index of the pair containing `x`.
    pub fn pair_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.n];
        for (i, &(x, y)) in self.pairs.iter().enumerate() {
            idx[x] = Some(i);
            idx[y] = Some(i);
        }
        idx
    }

    fn check_domain(&self, d: &Distribution) -> Result<()> {
        if d.n() != self.n {
            return Err(Error::Structure(format!(
                "pairing is over {} elements but distribution has {}",
                self.n,
                d.n()
            )));
        }
        Ok(())
    }
}

/// `L` is the `2⌊βn⌋` lightest elements (ties by index). With an `rng` the
/// pairs are a uniformly random matching on `L`; without one, consecutive
/// elements in ascending-mass order are paired.
pub fn build_pairing(d_yes: &Distribution, beta: f64, rng: Option<&mut Rng>) -> Result<Pairing> {
    if !(beta > 0.0 && beta < 0.5) {
        return param(format!("beta must lie in (0, 1/2), got {beta}"));
    }
    let n = d_yes.n();
    let k = crate::distribution::floor_fraction(beta, n);
    if k == 0 {
        return param(format!("beta * n = {} leaves no pairs (n = {n})", beta * n as f64));
    }
    let mut l: Vec<usize> = ascending_by_mass(d_yes).into_iter().take(2 * k).collect();
    if let Some(rng) = rng {
        l.shuffle(rng);
    }
    let pairs = l.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    Pairing::new(n, pairs)
}

/// Moves each pair's mass onto its first element.
pub fn dno_label_invariant(d_yes: &Distribution, pairing: &Pairing) -> Result<Distribution> {
    pairing.check_domain(d_yes)?;
    let mut pmf = d_yes.pmf().to_vec();
    for &(x, y) in pairing.pairs() {
        pmf[x] = d_yes.mass(x) + d_yes.mass(y);
        pmf[y] = 0.0;
    }
    Distribution::new(pmf)
}

/// Moves each pair's mass onto `x` with probability `p_x/(p_x + p_y)` and onto
/// `y` otherwise, independently per pair. Zero-mass pairs stay on `x`.
pub fn dno_general(d_yes: &Distribution, pairing: &Pairing, rng: &mut Rng) -> Result<Distribution> {
    pairing.check_domain(d_yes)?;
    let mut pmf = d_yes.pmf().to_vec();
    for &(x, y) in pairing.pairs() {
        let (px, py) = (d_yes.mass(x), d_yes.mass(y));
        let total = px + py;
        let coin = rng.random::<f64>();
        let to_x = total <= 0.0 || coin < px / total;
        let (keep, drop) = if to_x { (x, y) } else { (y, x) };
        pmf[keep] = total;
        pmf[drop] = 0.0;
    }
    Distribution::new(pmf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    LabelInvariant,
    General,
}

impl std::str::FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label-invariant" => Ok(Construction::LabelInvariant),
            "general" => Ok(Construction::General),
            other => param(format!("unknown construction {other:?}")),
        }
    }
}

impl std::fmt::Display for Construction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Construction::LabelInvariant => "label-invariant",
            Construction::General => "general",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPair {
    pub d_yes: Distribution,
    pub d_no: Distribution,
    pub pairing: Pairing,
    pub params: NonConcentrationParams,
}

impl AdversarialPair {
    /// Builds a yes/no pair with the requested construction.
    pub fn generate(
        d_yes: &Distribution,
        params: NonConcentrationParams,
        construction: Construction,
        rng: &mut Rng,
    ) -> Result<Self> {
        let (pairing, d_no) = match construction {
            Construction::LabelInvariant => {
                let pairing = build_pairing(d_yes, params.beta(), Some(rng))?;
                let d_no = dno_label_invariant(d_yes, &pairing)?;
                (pairing, d_no)
            }
            Construction::General => {
                let pairing = build_pairing(d_yes, params.beta(), None)?;
                let d_no = dno_general(d_yes, &pairing, rng)?;
                (pairing, d_no)
            }
        };
        Ok(AdversarialPair { d_yes: d_yes.clone(), d_no, pairing, params })
    }

    /// Applies a uniformly random relabeling of the domain to both
    /// distributions and the pairing. Returns the permutation used
    /// (`new = perm[old]`).
    pub fn permuted(&self, rng: &mut Rng) -> Result<(AdversarialPair, Vec<usize>)> {
        let n = self.d_yes.n();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Ok((self.relabeled(&perm)?, perm))
    }

    /// Relabels element `x` as `perm[x]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<AdversarialPair> {
        let n = self.d_yes.n();
        if perm.len() != n {
            return Err(Error::Dimension { left: perm.len(), right: n });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Structure("relabeling is not a permutation".into()));
            }
        }
        let apply = |d: &Distribution| {
            let mut pmf = vec![0.0; n];
            for (x, &p) in perm.iter().enumerate() {
                pmf[p] = d.mass(x);
            }
            Distribution::new(pmf)
        };
        let pairs = self.pairing.pairs().iter().map(|&(x, y)| (perm[x], perm[y])).collect();
        Ok(AdversarialPair {
            d_yes: apply(&self.d_yes)?,
            d_no: apply(&self.d_no)?,
            pairing: Pairing::new(n, pairs)?,
            params: self.params,
        })
    }
}

/// `(1−2α)/((1−2β)n)`: the largest mass an element of `L` can carry when
/// the yes-instance is `(α, β)`-non-concentrated.
pub fn low_element_bound(params: &NonConcentrationParams, n: usize) -> f64 {
    (1.0 - 2.0 * params.alpha()) / ((1.0 - 2.0 * params.beta()) * n as f64)
}

/// Outcome of [`verify_adversarial`]. Failures are recorded, never thrown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    /// `|d_no(x)+d_no(y) − d_yes(x)−d_yes(y)|` per pair.
    pub conservation_residuals: Vec<f64>,
    pub max_conservation_residual: f64,
    pub conservation_ok: bool,
    /// Pairs where the zero pattern is wrong: a positive-mass pair must have
    /// exactly one zero side, a zero-mass pair two.
    pub zero_pattern_failures: Vec<usize>,
    pub pair_mass_bound: f64,
    pub max_pair_mass: f64,
    pub pair_mass_ok: bool,
    pub off_l_mismatches: Vec<usize>,
    pub support_size: usize,
    pub support_limit: usize,
    pub support_ok: bool,
    pub pairing_ok: bool,
}

impl AdversarialReport {
    pub fn passed(&self) -> bool {
        self.conservation_ok
            && self.zero_pattern_failures.is_empty()
            && self.pair_mass_ok
            && self.off_l_mismatches.is_empty()
            && self.support_ok
            && self.pairing_ok
    }
}

pub fn verify_adversarial(pair: &AdversarialPair) -> AdversarialReport {
    let n = pair.d_yes.n();
    let (yes, no) = (&pair.d_yes, &pair.d_no);
    let k = pair.params.set_size(n);
    let pairing_ok = no.n() == n
        && pair.pairing.n() == n
        && pair.pairing.pairs().len() == k
        && Pairing::new(n, pair.pairing.pairs().to_vec()).is_ok();
    let pair_mass_bound = 2.0 * low_element_bound(&pair.params, n);
    let support_limit = n.saturating_sub(k);
    if no.n() != n || pair.pairing.n() != n {
        return AdversarialReport {
            conservation_residuals: Vec::new(),
            max_conservation_residual: f64::INFINITY,
            conservation_ok: false,
            zero_pattern_failures: Vec::new(),
            pair_mass_bound,
            max_pair_mass: f64::INFINITY,
            pair_mass_ok: false,
            off_l_mismatches: Vec::new(),
            support_size: no.support_size(),
            support_limit,
            support_ok: false,
            pairing_ok: false,
        };
    }

    let mut residuals = Vec::with_capacity(k);
    let mut zero_failures = Vec::new();
    let mut max_pair_mass = 0.0f64;
    for (i, &(x, y)) in pair.pairing.pairs().iter().enumerate() {
        let no_sum = no.mass(x) + no.mass(y);
        residuals.push((no_sum - (yes.mass(x) + yes.mass(y))).abs());
        let zeros = usize::from(no.mass(x) == 0.0) + usize::from(no.mass(y) == 0.0);
        let expected = if no_sum > 0.0 { 1 } else { 2 };
        if zeros != expected {
            zero_failures.push(i);
        }
        max_pair_mass = max_pair_mass.max(no_sum);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);

    let in_l = {
        let mut mask = vec![false; n];
        for &x in pair.pairing.l() {
            mask[x] = true;
        }
        mask
    };
    let off_l_mismatches = (0..n).filter(|&x| !in_l[x] && yes.mass(x) != no.mass(x)).collect();
    let support_size = no.support_size();

    AdversarialReport {
        conservation_ok: max_residual <= MASS_SLACK,
        max_conservation_residual: max_residual,
        conservation_residuals: residuals,
        zero_pattern_failures: zero_failures,
        pair_mass_ok: max_pair_mass <= pair_mass_bound + MASS_SLACK,
        pair_mass_bound,
        max_pair_mass,
        off_l_mismatches,
        support_ok: support_size <= support_limit,
        support_size,
        support_limit,
        pairing_ok,
    }
}

/// Fraction of trials in which some two of `m` i.i.d. draws from `d` fall in
/// the same pair (identical draws inside `L` included).
pub fn collision_rate(d: &Distribution, pairing: &Pairing, m: usize, trials: usize, rng: &mut Rng) -> Result<f64> {
    if m < 2 || trials == 0 {
        return param(format!("need m >= 2 and trials >= 1, got m = {m}, trials = {trials}"));
    }
    pairing.check_domain(d)?;
    let pair_of = pairing.pair_index();
    let mut oracle = SamplingOracle::new(d, rng.random());
    let mut hit = vec![usize::MAX; pairing.pairs().len()];
    let mut collisions = 0usize;
    for t in 0..trials {
        let collided = (0..m).any(|_| match pair_of[oracle.draw()] {
            Some(p) => std::mem::replace(&mut hit[p], t) == t,
            None => false,
        });
        if collided {
            collisions += 1;
        }
    }
    Ok(collisions as f64 / trials as f64)
}

/// Largest total mass `d` places on a single pair.
pub fn max_pair_mass(d: &Distribution, pairing: &Pairing) -> f64 {
    pairing.pairs().iter().map(|&(x, y)| d.mass(x) + d.mass(y)).fold(0.0, f64::max)
}

/// Union bound `m²·p_max/2` on the same-pair collision probability.
pub fn collision_union_bound(d: &Distribution, pairing: &Pairing, m: usize) -> f64 {
    (m * m) as f64 * max_pair_mass(d, pairing) / 2.0
}

/// A random `(α, β)`-non-concentrated distribution: a mixture
/// `(1−t)·U + t·R` of the uniform distribution and a random pmf `R`, with
/// `t` drawn below the largest value keeping every `⌊βn⌋`-set at mass `≥ α`.
/// When `⌊βn⌋/n = α` only the uniform distribution qualifies.
pub fn random_non_concentrated(n: usize, params: &NonConcentrationParams, rng: &mut Rng) -> Result<Distribution> {
    let k = params.set_size(n);
    if k == 0 {
        return param(format!("beta * n rounds down to 0 (n = {n})"));
    }
    let share = k as f64 / n as f64;
    if share + MASS_SLACK < params.alpha() {
        return param(format!(
            "no distribution on {n} elements is non-concentrated: {k}/{n} < alpha = {}",
            params.alpha()
        ));
    }
    let weights: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let r = Distribution::from_weights(&weights)?;
    let s_r = smallest_mass(&r, k);
    let t_max = if s_r >= params.alpha() { 1.0 } else { ((share - params.alpha()) / (share - s_r)).clamp(0.0, 1.0) };
    // keep a small margin so rounding never pushes the result below α
    let t = t_max * rng.random::<f64>() * (1.0 - 1e-9);
    let pmf = (0..n).map(|x| (1.0 - t) / n as f64 + t * r.mass(x)).collect();
    Distribution::new(pmf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::is_non_concentrated;
    use crate::sampling::rng_from_seed;

    #[test]
    fn pairing_sizes() {
        let u = Distribution::uniform(10).unwrap();
        let p = build_pairing(&u, 0.2, None).unwrap();
        assert_eq!(p.l(), &[0, 1, 2, 3]);
        assert_eq!(p.pairs().len(), 2);
        let inc = Distribution::from_weights(&(1..=10).map(f64::from).collect::<Vec<_>>()).unwrap();
        let p = build_pairing(&inc, 0.3, Some(&mut rng_from_seed(4))).unwrap();
        assert_eq!(p.l(), &[0, 1, 2, 3, 4, 5]);
        assert!(build_pairing(&u, 0.05, None).is_err());
        assert!(build_pairing(&u, 0.5, None).is_err());
    }

    #[test]
    fn label_invariant_example() {
        let u = Distribution::uniform(4).unwrap();
        let p = Pairing::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let d_no = dno_label_invariant(&u, &p).unwrap();
        assert_eq!(d_no.pmf(), &[0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn label_invariant_support_count() {
        let u = Distribution::uniform(100).unwrap();
        let params = NonConcentrationParams::new(0.25, 0.25).unwrap();
        let pair = AdversarialPair::generate(&u, params, Construction::LabelInvariant, &mut rng_from_seed(1)).unwrap();
        assert_eq!(pair.d_no.support_size(), 75);
        let total: f64 = pair.d_no.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_coin() {
        let d = Distribution::new(vec![0.3, 0.0, 0.7]).unwrap();
        let p = Pairing::new(3, vec![(0, 1)]).unwrap();
        for seed in 0..20 {
            let d_no = dno_general(&d, &p, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(d_no.mass(0), 0.3);
            assert_eq!(d_no.mass(1), 0.0);
        }
        let zero = Distribution::new(vec![0.0, 0.0, 1.0]).unwrap();
        let d_no = dno_general(&zero, &p, &mut rng_from_seed(0)).unwrap();
        assert_eq!(d_no.pmf(), zero.pmf());
    }

    #[test]
    fn verify_uniform_example() {
        let u = Distribution::uniform(100).unwrap();
        let params = NonConcentrationParams::new(0.2, 0.2).unwrap();
        let pair = AdversarialPair::generate(&u, params, Construction::LabelInvariant, &mut rng_from_seed(7)).unwrap();
        let report = verify_adversarial(&pair);
        assert!(report.passed(), "{report:?}");
        let recomputed = 2.0 * 0.6 / (0.6 * 100.0);
        assert!((report.pair_mass_bound - recomputed).abs() < 1e-15);
        assert!((recomputed - 0.02f64).abs() < 1e-15);
        assert_eq!(report.max_conservation_residual, 0.0);
    }

    #[test]
    fn corrupted_pair_is_reported() {
        let u = Distribution::uniform(100).unwrap();
        let params = NonConcentrationParams::new(0.2, 0.2).unwrap();
        let mut pair = AdversarialPair::generate(&u, params, Construction::General, &mut rng_from_seed(7)).unwrap();
        let (x, y) = pair.pairing.pairs()[0];
        let mut pmf = pair.d_no.pmf().to_vec();
        pmf[x] = 0.01;
        pmf[y] = 0.01;
        pair.d_no = Distribution::new(pmf).unwrap();
        let report = verify_adversarial(&pair);
        assert!(!report.passed());
        assert_eq!(report.zero_pattern_failures, vec![0]);
    }

    #[test]
    fn concentrated_yes_is_reported_not_thrown() {
        let d = Distribution::from_weights(&(1..=20).map(|i| f64::from(i * i)).collect::<Vec<_>>()).unwrap();
        let params = NonConcentrationParams::new(0.2, 0.2).unwrap();
        let pair = AdversarialPair::generate(&d, params, Construction::General, &mut rng_from_seed(2)).unwrap();
        let report = verify_adversarial(&pair);
        assert!(report.conservation_ok);
        assert!(report.pair_mass_ok);
        // two empty elements push six of the eight members of L up to 1/8
        let wild = Distribution::uniform_on(10, &[2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let params = NonConcentrationParams::new(0.45, 0.45).unwrap();
        let pair =
            AdversarialPair::generate(&wild, params, Construction::LabelInvariant, &mut rng_from_seed(2)).unwrap();
        assert!(!verify_adversarial(&pair).pair_mass_ok);
    }

    #[test]
    fn collision_extremes() {
        let p = Pairing::new(6, vec![(0, 1), (2, 3)]).unwrap();
        let inside = Distribution::point_mass(6, 2).unwrap();
        let off = Distribution::uniform_on(6, &[4, 5]).unwrap();
        let mut rng = rng_from_seed(3);
        assert_eq!(collision_rate(&inside, &p, 2, 50, &mut rng).unwrap(), 1.0);
        assert_eq!(collision_rate(&off, &p, 2, 50, &mut rng).unwrap(), 0.0);
        assert!(collision_rate(&off, &p, 1, 50, &mut rng).is_err());
    }

    #[test]
    fn generated_yes_instances_are_non_concentrated() {
        let mut rng = rng_from_seed(5);
        let params = NonConcentrationParams::new(0.1, 0.3).unwrap();
        for _ in 0..50 {
            let d = random_non_concentrated(40, &params, &mut rng).unwrap();
            assert!(is_non_concentrated(&d, &params).unwrap());
        }
        let tight = NonConcentrationParams::new(0.2, 0.2).unwrap();
        let d = random_non_concentrated(100, &tight, &mut rng).unwrap();
        assert_eq!(d, Distribution::uniform(100).unwrap());
    }

    #[test]
    fn relabeling_preserves_report() {
        let mut rng = rng_from_seed(9);
        let params = NonConcentrationParams::new(0.1, 0.25).unwrap();
        let d = random_non_concentrated(40, &params, &mut rng).unwrap();
        let pair = AdversarialPair::generate(&d, params, Construction::General, &mut rng).unwrap();
        let (moved, perm) = pair.permuted(&mut rng).unwrap();
        assert!(verify_adversarial(&moved).passed());
        for x in 0..40 {
            assert_eq!(moved.d_no.mass(perm[x]), pair.d_no.mass(x));
        }
    }
}
