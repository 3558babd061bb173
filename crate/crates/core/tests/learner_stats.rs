use disttest_core::learner::*;
use disttest_core::*;
use proptest::prelude::*;

fn uniform_prefix(n: usize, s: usize) -> Distribution {
    Distribution::uniform_on(n, &(0..s).collect::<Vec<_>>()).unwrap()
}

#[test]
fn known_support_learner_succeeds() {
    let d = uniform_prefix(10_000, 16);
    let ok = (0..100)
        .filter(|&seed| {
            let learned = learn_known_support(&mut SamplingOracle::new(&d, seed), 16, 0.5, 8.0).unwrap();
            l1_distance(&learned, &d).unwrap() <= 0.5
        })
        .count();
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn known_support_learner_with_leaked_mass() {
    // D(S) = 1 − η/2 on |S| = 8, the rest spread thinly.
    let (n, eta) = (1000, 0.4);
    let pmf: Vec<f64> =
        (0..n).map(|i| if i < 8 { (1.0 - eta / 2.0) / 8.0 } else { (eta / 2.0) / (n - 8) as f64 }).collect();
    let d = Distribution::new(pmf).unwrap();
    let ok = (0..100)
        .filter(|&seed| {
            let learned = learn_known_support(&mut SamplingOracle::new(&d, seed), 8, 0.5, 8.0).unwrap();
            l1_distance(&learned, &d).unwrap() <= eta + 0.5
        })
        .count();
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn identity_test_calibration() {
    let n = 50;
    let kappa = 0.05;
    let d_k = Distribution::from_weights(
        &(1..=10).map(f64::from).chain(std::iter::repeat_n(0.0, n - 10)).collect::<Vec<_>>(),
    )
    .unwrap();
    // move half of the mass out of the support: distance exactly 1
    let far = Distribution::new(
        (0..n)
            .map(|x| {
                if x < 10 {
                    d_k.mass(x) / 2.0
                } else if x < 20 {
                    0.05
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .unwrap();
    assert!((l1_distance(&d_k, &far).unwrap() - 1.0).abs() < 1e-12);
    let p = IdentityTestParams::new(0.1, 0.5, kappa).unwrap();
    let c = LearnerConstants::default();
    let accepts = (0..200)
        .filter(|&seed| {
            tol_identity_test(&mut SamplingOracle::new(&d_k, seed), &d_k, &p, c.c_t).unwrap() == Verdict::Accept
        })
        .count();
    let rejects = (0..200)
        .filter(|&seed| {
            tol_identity_test(&mut SamplingOracle::new(&far, seed), &d_k, &p, c.c_t).unwrap() == Verdict::Reject
        })
        .count();
    assert!(accepts as f64 >= 200.0 * (1.0 - kappa), "{accepts}");
    assert!(rejects as f64 >= 200.0 * (1.0 - kappa), "{rejects}");
}

/// All count vectors of `parts` non-negative entries summing to `m`.
fn compositions(m: u64, parts: usize, visit: &mut dyn FnMut(&[u64])) {
    fn rec(left: u64, slot: usize, cur: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            visit(cur);
            return;
        }
        for c in 0..=left {
            cur[slot] = c;
            rec(left - c, slot + 1, cur, visit);
        }
    }
    rec(m, 0, &mut vec![0; parts], visit);
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Exact acceptance probability on the contracted domain: enumerate every
/// multinomial outcome and sum the mass of those with statistic at most the
/// threshold.
fn exact_acceptance(truth: &[f64], d_k: &[f64], m: u64, threshold: f64) -> f64 {
    let lf: Vec<f64> = (0..=m).map(ln_factorial).collect();
    let mut total = 0.0;
    compositions(m, truth.len(), &mut |c| {
        let stat: f64 = c.iter().zip(d_k).map(|(&ci, &p)| (ci as f64 / m as f64 - p).abs()).sum();
        if stat <= threshold {
            let ln_p: f64 = lf[m as usize]
                + c.iter()
                    .zip(truth)
                    .map(|(&ci, &p)| if ci == 0 { 0.0 } else { ci as f64 * p.ln() - lf[ci as usize] })
                    .sum::<f64>();
            total += ln_p.exp();
        }
    });
    total
}

#[test]
fn identity_test_matches_exact_acceptance_probability() {
    // support of size 3 plus the contracted bucket
    let n = 12;
    let mut k = vec![0.0; n];
    k[..3].copy_from_slice(&[0.37, 0.29, 0.34]);
    let d_k = Distribution::new(k).unwrap();
    let p = IdentityTestParams::new(0.2, 1.0, 0.3).unwrap();
    let c_t = 0.5;
    let m = identity_test_sample_size(3, &p, c_t);
    assert!(m < 150, "m = {m}");
    for truth in [[0.30, 0.25, 0.25, 0.20], [0.28, 0.22, 0.22, 0.28], [0.37, 0.29, 0.34, 0.0], [0.2, 0.2, 0.2, 0.4]] {
        // spread the contracted bucket's mass over the nine outside elements
        let mut pmf = truth[..3].to_vec();
        pmf.extend(std::iter::repeat_n(truth[3] / 9.0, 9));
        let d = Distribution::new(pmf).unwrap();
        let exact = exact_acceptance(&truth, &[0.37, 0.29, 0.34, 0.0], m, p.threshold());
        let runs = 1000;
        let accepted = (0..runs)
            .filter(|&seed| {
                tol_identity_test(&mut SamplingOracle::new(&d, seed), &d_k, &p, c_t).unwrap() == Verdict::Accept
            })
            .count();
        let rate = accepted as f64 / runs as f64;
        let radius = 3.0 * (exact * (1.0 - exact) / runs as f64).sqrt() + 1e-3;
        assert!((rate - exact).abs() <= radius, "truth {truth:?}: empirical {rate}, exact {exact}");
    }
}

proptest! {
    #[test]
    fn identity_sample_size_is_monotone(s in 1usize..500, ds in 0usize..50, k1 in 0.001f64..0.9, shrink in 0.0f64..1.0) {
        let p = IdentityTestParams::new(0.1, 0.5, k1).unwrap();
        let tighter = IdentityTestParams::new(0.1, 0.5, (k1 * shrink).max(1e-9)).unwrap();
        prop_assert!(identity_test_sample_size(s + ds, &p, 0.5) >= identity_test_sample_size(s, &p, 0.5));
        prop_assert!(identity_test_sample_size(s, &tighter, 0.5) >= identity_test_sample_size(s, &p, 0.5));
    }
}

#[test]
fn adaptive_learner_on_point_mass() {
    let d = Distribution::point_mass(1000, 3).unwrap();
    let at_one = (0..100)
        .filter(|&seed| {
            let r = learn_adaptive(&mut SamplingOracle::new(&d, seed), 0.0, 0.5, 1000, &LearnerConstants::default())
                .unwrap();
            r.final_guess == 1 && r.outcome == LearnOutcome::Learned(d.clone())
        })
        .count();
    assert!(at_one >= 95, "{at_one}/100");
}

#[test]
fn adaptive_learner_on_small_support() {
    let (n, s) = (100_000, 32);
    let d = uniform_prefix(n, s);
    let c = LearnerConstants::default();
    let mut successes = 0;
    let mut small_guess = 0;
    let mut samples = 0u64;
    for seed in 0..30 {
        let mut o = SamplingOracle::new(&d, seed);
        let r = learn_adaptive(&mut o, 0.0, 0.5, n, &c).unwrap();
        assert_eq!(r.total_samples, o.draws_used());
        let guesses: Vec<u64> = r.iterations.iter().map(|i| i.guess).collect();
        assert!(guesses.iter().enumerate().all(|(k, &g)| g == 1 << k));
        samples += r.total_samples;
        if let LearnOutcome::Learned(learned) = &r.outcome {
            if l1_distance(learned, &d).unwrap() <= 0.5 {
                successes += 1;
                small_guess += usize::from(r.final_guess <= 16 * s as u64);
            }
        }
    }
    assert!(successes >= 20, "{successes}/30");
    assert!(small_guess as f64 >= 0.9 * successes as f64);
    let mean = samples as f64 / 30.0;
    assert!(mean <= 20.0 * c.c_l * s as f64 / 0.25, "mean samples {mean}");
}

#[test]
fn adaptive_learner_terminates_on_full_support() {
    let n = 64;
    let d = Distribution::uniform(n).unwrap();
    let learned = (0..30)
        .filter(|&seed| {
            let r =
                learn_adaptive(&mut SamplingOracle::new(&d, seed), 1.9, 0.1, n, &LearnerConstants::default()).unwrap();
            r.outcome.is_learned()
        })
        .count();
    assert!(learned >= 20, "{learned}/30");
}
