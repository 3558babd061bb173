//! Testing and learning discrete distributions from samples.
//!
//! - [`distribution`]: pmfs over `[n]`, L1 distances, non-concentration.
//! - [`sampling`]: seeded sample oracles.
//! - [`tester`]: the tolerant tester built on a property oracle.
//! - [`linprop`]: linear properties and an LP-backed property oracle.
//! - [`adversarial`]: yes/no instance pairs used in lower bounds.
//! - [`learner`]: support-size-adaptive learning.

pub mod adversarial;
pub mod chernoff;
pub mod distribution;
pub mod error;
pub mod learner;
pub mod linprop;
pub mod sampling;
pub mod tester;

pub use distribution::{
    empirical_distribution, high_set, is_non_concentrated, l1_distance, sorted_l1_distance, top_elements, Distribution,
    NonConcentrationParams,
};
pub use error::{Error, Result};
pub use sampling::{derive_seed, rng_from_seed, SamplingOracle};
pub use tester::{HighEstimate, PropertyOracle, TesterConstants, TesterParams, Verdict};
