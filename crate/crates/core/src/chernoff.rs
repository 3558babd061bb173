//! Chernoff-type tail bounds and the sample sizes they imply.

use crate::error::{param, Result};

/// `⌈x⌉`, ignoring representation noise just above an integer.
pub(crate) fn ceil_tol(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Least `m` for which the additive bound `exp(−2(δm)²/m)` on the empirical
/// mean deviating by `δ` is at most `κ`: `m = ⌈ln(1/κ) / (2δ²)⌉`.
pub fn sample_size_additive(delta: f64, kappa: f64) -> Result<u64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return param(format!("delta must be positive, got {delta}"));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return param(format!("kappa must lie in (0, 1), got {kappa}"));
    }
    Ok(ceil_tol((1.0 / kappa).ln() / (2.0 * delta * delta)).max(1))
}

/// `P(|X − μ| ≥ δμ) ≤ 2·exp(−μδ²/3)` for sums of independent `[0,1]` variables, `0 ≤ δ ≤ 1`.
pub fn multiplicative_tail_bound(mu: f64, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) || mu < 0.0 {
        return param(format!("need mu >= 0 and 0 <= delta <= 1, got mu = {mu}, delta = {delta}"));
    }
    Ok(2.0 * (-mu * delta * delta / 3.0).exp())
}

/// `P(X ≥ μ_h + t) ≤ exp(−2t²/n)` (and symmetrically for the lower tail).
pub fn additive_tail_bound(n: u64, t: f64) -> Result<f64> {
    if n == 0 || !(t > 0.0) {
        return param(format!("need n >= 1 and t > 0, got n = {n}, t = {t}"));
    }
    Ok((-2.0 * t * t / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_from_seed;
    use rand::Rng;

    #[test]
    fn additive_sample_sizes() {
        assert_eq!(sample_size_additive(0.1, (-2.0f64).exp()).unwrap(), 100);
        assert_eq!(sample_size_additive(0.5, 0.5).unwrap(), 2);
        // ln(100) / 0.005 = 921.03…
        let expected = (100f64.ln() / (2.0 * 0.05 * 0.05)).ceil() as u64;
        assert_eq!(expected, 922);
        assert_eq!(sample_size_additive(0.05, 0.01).unwrap(), 922);
    }

    #[test]
    fn additive_sample_size_errors() {
        assert!(sample_size_additive(0.0, 0.1).is_err());
        assert!(sample_size_additive(-1.0, 0.1).is_err());
        assert!(sample_size_additive(0.1, 0.0).is_err());
        assert!(sample_size_additive(0.1, 1.0).is_err());
    }

    #[test]
    fn multiplicative_bound_covers_bernoulli_sums() {
        let bound = multiplicative_tail_bound(300.0, 0.1).unwrap();
        assert!((bound - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let mut rng = rng_from_seed(11);
        let trials = 10_000;
        let mut hits = 0;
        for _ in 0..trials {
            let x = (0..1000).filter(|_| rng.random::<f64>() < 0.3).count() as f64;
            if (x - 300.0).abs() >= 30.0 {
                hits += 1;
            }
        }
        assert!((hits as f64 / trials as f64) <= bound);
    }
}
