use disttest_core::adversarial::*;
use disttest_core::sampling::rng_from_seed;
use disttest_core::*;
use proptest::prelude::*;

#[test]
fn low_set_elements_are_light() {
    let mut rng = rng_from_seed(50);
    let params = NonConcentrationParams::new(0.1, 0.3).unwrap();
    let n = 50;
    let bound = low_element_bound(&params, n);
    for _ in 0..100 {
        let d = random_non_concentrated(n, &params, &mut rng).unwrap();
        assert!(is_non_concentrated(&d, &params).unwrap());
        let pairing = build_pairing(&d, params.beta(), Some(&mut rng)).unwrap();
        assert_eq!(pairing.l().len(), 30);
        for &x in pairing.l() {
            assert!(d.mass(x) <= bound + 1e-12, "mass {} above {bound}", d.mass(x));
        }
    }
}

fn params_strategy() -> impl Strategy<Value = (usize, f64, f64, u64)> {
    (10usize..80, 0.05f64..0.45, 0.0f64..1.0, any::<u64>()).prop_map(|(n, beta, frac, seed)| {
        let k = (beta * n as f64).floor() as usize;
        // keep α at or below ⌊βn⌋/n so that yes-instances exist
        let alpha = (frac * k as f64 / n as f64).max(1e-3).min(beta);
        (n, alpha, beta, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn constructions_satisfy_invariants((n, alpha, beta, seed) in params_strategy()) {
        let params = NonConcentrationParams::new(alpha, beta).unwrap();
        prop_assume!(params.set_size(n) >= 1);
        let mut rng = rng_from_seed(seed);
        let d_yes = random_non_concentrated(n, &params, &mut rng).unwrap();
        for c in [Construction::LabelInvariant, Construction::General] {
            let pair = AdversarialPair::generate(&d_yes, params, c, &mut rng).unwrap();
            let report = verify_adversarial(&pair);
            prop_assert!(report.passed(), "{c}: {report:?}");
            prop_assert!(pair.d_no.support_size() <= n - params.set_size(n));
            prop_assert!(!is_non_concentrated(&pair.d_no, &params).unwrap());
        }
    }

    #[test]
    fn general_construction_varies_only_within_pairs(seed in any::<u64>(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let params = NonConcentrationParams::new(0.1, 0.25).unwrap();
        let d_yes = random_non_concentrated(40, &params, &mut rng_from_seed(seed)).unwrap();
        let pairing = build_pairing(&d_yes, params.beta(), None).unwrap();
        let a = dno_general(&d_yes, &pairing, &mut rng_from_seed(s1)).unwrap();
        prop_assert_eq!(&a, &dno_general(&d_yes, &pairing, &mut rng_from_seed(s1)).unwrap());
        let b = dno_general(&d_yes, &pairing, &mut rng_from_seed(s2)).unwrap();
        for x in (0..40).filter(|x| !pairing.l().contains(x)) {
            prop_assert_eq!(a.mass(x), b.mass(x));
        }
        for &(x, y) in pairing.pairs() {
            prop_assert_eq!(a.mass(x) + a.mass(y), b.mass(x) + b.mass(y));
        }
    }
}

#[test]
fn fair_coin_on_equal_pairs() {
    let d = Distribution::uniform(10).unwrap();
    let pairing = Pairing::new(10, vec![(0, 1)]).unwrap();
    let mut rng = rng_from_seed(8);
    let builds = 10_000;
    let on_x = (0..builds).filter(|_| dno_general(&d, &pairing, &mut rng).unwrap().mass(0) > 0.0).count();
    assert!((on_x as f64 / builds as f64 - 0.5).abs() <= 0.02);
}

/// Per pair: fraction of in-pair single draws that land on `x_i`, and the
/// number of in-pair draws.
fn conditional_frequencies(draw: &mut dyn FnMut() -> usize, pairing: &Pairing, trials: usize) -> Vec<(f64, usize)> {
    let idx = pairing.pair_index();
    let mut hits = vec![(0usize, 0usize); pairing.pairs().len()];
    for _ in 0..trials {
        let s = draw();
        if let Some(p) = idx[s] {
            hits[p].1 += 1;
            if s == pairing.pairs()[p].0 {
                hits[p].0 += 1;
            }
        }
    }
    hits.into_iter().map(|(x, t)| (x as f64 / t as f64, t)).collect()
}

#[test]
fn single_draw_conditional_law() {
    let n = 20;
    let params = NonConcentrationParams::new(0.2, 0.25).unwrap();
    let mut rng = rng_from_seed(20);
    let d_yes = random_non_concentrated(n, &params, &mut rng).unwrap();
    let pairing = build_pairing(&d_yes, params.beta(), None).unwrap();
    let trials = 100_000;
    let mut no_rng = rng_from_seed(21);
    let mut no_draw = || {
        let d_no = dno_general(&d_yes, &pairing, &mut no_rng).unwrap();
        SamplingOracle::new(&d_no, rand::Rng::random(&mut no_rng)).draw()
    };
    let under_no = conditional_frequencies(&mut no_draw, &pairing, trials);
    let mut yes_oracle = SamplingOracle::new(&d_yes, 22);
    let under_yes = conditional_frequencies(&mut || yes_oracle.draw(), &pairing, trials);
    for (i, &(x, y)) in pairing.pairs().iter().enumerate() {
        let target = d_yes.mass(x) / (d_yes.mass(x) + d_yes.mass(y));
        assert!((under_no[i].0 - target).abs() <= 0.02, "pair {i}: {:?} vs {target}", under_no[i]);
        assert!((under_yes[i].0 - target).abs() <= 0.02, "pair {i}: {:?} vs {target}", under_yes[i]);
    }
}

#[test]
fn collisions_stay_in_the_birthday_regime() {
    let n = 10_000;
    let d = Distribution::uniform(n).unwrap();
    let params = NonConcentrationParams::new(0.25, 0.25).unwrap();
    let mut rng = rng_from_seed(1);
    let pair = AdversarialPair::generate(&d, params, Construction::LabelInvariant, &mut rng).unwrap();
    let m = ((n as f64).sqrt() / 4.0).floor() as usize;
    assert_eq!(m, 25);
    let trials = 1000;
    let bound = collision_union_bound(&d, &pair.pairing, m);
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    let yes_rate = collision_rate(&d, &pair.pairing, m, trials, &mut rng).unwrap();
    assert!(yes_rate <= bound + 3.0 * sigma, "{yes_rate} > {bound} + 3·{sigma}");

    // collision indicator under a fresh no-instance per trial
    let mut no_hits = 0;
    for _ in 0..trials {
        let d_no = dno_general(&d, &pair.pairing, &mut rng).unwrap();
        no_hits += (collision_rate(&d_no, &pair.pairing, m, 1, &mut rng).unwrap() > 0.0) as usize;
    }
    let no_rate = no_hits as f64 / trials as f64;
    assert!((yes_rate - no_rate).abs() <= 0.1, "yes {yes_rate}, no {no_rate}");
}
