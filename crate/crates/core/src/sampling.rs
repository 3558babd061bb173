//! Seeded sample access to a (possibly hidden) distribution.

use std::fmt;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution as _};

use crate::distribution::Distribution;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed (splitmix64 finalizer over `base ⊕ stream`).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type DrawFn = Box<dyn FnMut(&mut Rng) -> usize + Send>;

enum Source {
    Explicit { dist: Distribution, alias: WeightedAliasIndex<f64>, last_positive: usize },
    Opaque { n: usize, draw: DrawFn },
}

/// Source of i.i.d. draws. Counts every draw it hands out.
pub struct SamplingOracle {
    source: Source,
    rng: Rng,
    seed: u64,
    draws: u64,
}

impl fmt::Debug for SamplingOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Explicit { .. } => "explicit",
            Source::Opaque { .. } => "opaque",
        };
        f.debug_struct("SamplingOracle")
            .field("source", &kind)
            .field("n", &self.n())
            .field("seed", &self.seed)
            .field("draws", &self.draws)
            .finish()
    }
}

impl SamplingOracle {
    pub fn new(dist: &Distribution, seed: u64) -> Self {
        let alias =
            WeightedAliasIndex::new(dist.pmf().to_vec()).expect("a validated distribution has positive total weight");
        let last_positive = (0..dist.n())
            .rev()
            .find(|&i| dist.mass(i) > 0.0)
            .expect("a validated distribution has positive mass somewhere");
        SamplingOracle {
            source: Source::Explicit { dist: dist.clone(), alias, last_positive },
            rng: rng_from_seed(seed),
            seed,
            draws: 0,
        }
    }

    /// Wraps an arbitrary draw procedure over `[n]`.
    pub fn from_fn(n: usize, seed: u64, draw: impl FnMut(&mut Rng) -> usize + Send + 'static) -> Self {
        SamplingOracle { source: Source::Opaque { n, draw: Box::new(draw) }, rng: rng_from_seed(seed), seed, draws: 0 }
    }

    pub fn n(&self) -> usize {
        match &self.source {
            Source::Explicit { dist, .. } => dist.n(),
            Source::Opaque { n, .. } => *n,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total draws consumed so far.
    pub fn draws_used(&self) -> u64 {
        self.draws
    }

    /// The underlying distribution, when the source is explicit.
    pub fn distribution(&self) -> Option<&Distribution> {
        match &self.source {
            Source::Explicit { dist, .. } => Some(dist),
            Source::Opaque { .. } => None,
        }
    }

    pub fn draw(&mut self) -> usize {
        self.draws += 1;
        match &mut self.source {
            Source::Explicit { alias, .. } => alias.sample(&mut self.rng),
            Source::Opaque { n, draw } => {
                let x = draw(&mut self.rng);
                assert!(x < *n, "opaque source produced index {x} outside domain of size {n}");
                x
            }
        }
    }

    /// `m` draws in order.
    pub fn draw_samples(&mut self, m: usize) -> Vec<usize> {
        (0..m).map(|_| self.draw()).collect()
    }

    /// Occurrence counts of `m` draws. For explicit sources with `m` large
    /// relative to the domain this samples the multinomial directly via
    /// conditional binomials, which has the same law as drawing one by one.
    pub fn draw_counts(&mut self, m: u64) -> Vec<u64> {
        let n = self.n();
        let mut counts = vec![0u64; n];
        let direct = match &self.source {
            Source::Explicit { .. } => m <= 4 * n as u64,
            Source::Opaque { .. } => true,
        };
        if direct {
            for _ in 0..m {
                counts[self.draw()] += 1;
            }
            return counts;
        }
        let Source::Explicit { dist, last_positive, .. } = &self.source else { unreachable!() };
        let mut remaining = m;
        let mut rest_mass = 1.0f64;
        for i in 0..=*last_positive {
            if remaining == 0 {
                break;
            }
            let p = dist.mass(i);
            if p <= 0.0 {
                continue;
            }
            let c = if i == *last_positive || p >= rest_mass {
                remaining
            } else {
                let ratio = (p / rest_mass).clamp(0.0, 1.0);
                Binomial::new(remaining, ratio).expect("binomial parameters are in range").sample(&mut self.rng)
            };
            counts[i] = c;
            remaining -= c;
            rest_mass -= p;
        }
        self.draws += m;
        counts
    }

    /// A uniform `f64` in `[0, 1)` from the oracle's own stream; used by
    /// constructions that need private coins tied to the same seed.
    pub fn coin(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Free-standing convenience matching the oracle method.
pub fn draw_samples(oracle: &mut SamplingOracle, m: usize) -> Vec<usize> {
    oracle.draw_samples(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_draws_is_empty() {
        let d = Distribution::uniform(4).unwrap();
        let mut o = SamplingOracle::new(&d, 1);
        assert!(o.draw_samples(0).is_empty());
        assert_eq!(o.draws_used(), 0);
    }

    #[test]
    fn point_mass_repeats_its_index() {
        let d = Distribution::point_mass(6, 4).unwrap();
        let mut o = SamplingOracle::new(&d, 9);
        assert_eq!(o.draw_samples(5), vec![4; 5]);
        let counts = o.draw_counts(1_000_000);
        assert_eq!(counts[4], 1_000_000);
        assert_eq!(o.draws_used(), 1_000_005);
    }

    #[test]
    fn same_seed_same_sequence() {
        let d = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let a = SamplingOracle::new(&d, 77).draw_samples(200);
        let b = SamplingOracle::new(&d, 77).draw_samples(200);
        assert_eq!(a, b);
        let c = SamplingOracle::new(&d, 78).draw_samples(200);
        assert_ne!(a, c);
        assert!(a.iter().all(|&x| x < 4));
    }

    #[test]
    fn uniform_frequencies_within_chernoff_radius() {
        // m = 1e5, radius 0.02: additive bound gives 2·exp(-2·0.02²·1e5) ≈ 2e-35.
        let d = Distribution::uniform(4).unwrap();
        let mut o = SamplingOracle::new(&d, 2024);
        let samples = o.draw_samples(100_000);
        let mut counts = [0usize; 4];
        for s in samples {
            counts[s] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() <= 0.02);
        }
    }

    #[test]
    fn multinomial_counts_match_law() {
        let d = Distribution::new(vec![0.5, 0.0, 0.25, 0.125, 0.125]).unwrap();
        let mut o = SamplingOracle::new(&d, 3);
        let m = 10_000_000u64;
        let counts = o.draw_counts(m);
        assert_eq!(counts.iter().sum::<u64>(), m);
        assert_eq!(counts[1], 0);
        for i in 0..5 {
            // 6σ with σ ≤ sqrt(m/4)
            let expected = d.mass(i) * m as f64;
            assert!((counts[i] as f64 - expected).abs() < 6.0 * (m as f64 / 4.0).sqrt());
        }
    }

    #[test]
    fn opaque_source_counts_draws() {
        let mut o = SamplingOracle::from_fn(3, 5, |rng| rng.random_range(0..3));
        let counts = o.draw_counts(30);
        assert_eq!(counts.iter().sum::<u64>(), 30);
        assert_eq!(o.draws_used(), 30);
        assert!(o.distribution().is_none());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }
}
