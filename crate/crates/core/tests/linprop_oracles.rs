use std::collections::BTreeSet;

use disttest_core::linprop::*;
use disttest_core::sampling::rng_from_seed;
use disttest_core::tester::check_conditions;
use disttest_core::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Rank of a dense matrix by Gaussian elimination with partial pivoting.
fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())) else {
            break;
        };
        if m[p][c].abs() < 1e-10 {
            continue;
        }
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / m[r][c];
                for k in c..cols {
                    m[i][k] -= f * m[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

/// Some solution of the full-row-rank system `A x = b` (least-norm, via
/// `x = Aᵀ (A Aᵀ)⁻¹ b`).
fn least_norm(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = a.len();
    let n = a[0].len();
    let mut g: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| (0..n).map(|t| a[i][t] * a[j][t]).sum()).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| g[i][c].abs().total_cmp(&g[j][c].abs())).unwrap();
        g.swap(c, p);
        for i in 0..k {
            if i != c {
                let f = g[i][c] / g[c][c];
                for t in c..=k {
                    g[i][t] -= f * g[c][t];
                }
            }
        }
    }
    let y: Vec<f64> = (0..k).map(|i| g[i][k] / g[i][i]).collect();
    (0..n).map(|t| (0..k).map(|i| a[i][t] * y[i]).sum()).collect()
}

/// A non-empty polyhedron contains a minimal face `{x : A_I x = b_I}` with
/// `I` independent and `|I| = rank(A)`; enumerate all such `I`.
fn vertex_enumeration_feasible(a: &[Vec<f64>], b: &[f64], tol: f64) -> bool {
    let m = a.len();
    if m == 0 {
        return true;
    }
    let r = rank(a);
    if r == 0 {
        return b.iter().all(|&v| v >= -tol);
    }
    let ok = |x: &[f64]| (0..m).all(|i| a[i].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b[i] + tol);
    (0u32..1 << m).filter(|s| s.count_ones() as usize == r).any(|s| {
        let idx: Vec<usize> = (0..m).filter(|&i| s >> i & 1 == 1).collect();
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| a[i].clone()).collect();
        if rank(&sub) < r {
            return false;
        }
        let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        ok(&least_norm(&sub, &rhs))
    })
}

#[test]
fn lp_feasible_matches_vertex_enumeration() {
    let mut rng = rng_from_seed(2024);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..50 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=8);
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let poly = Polyhedron::new(m, n, a.concat(), b.clone(), BTreeSet::new()).unwrap();
        let expected = vertex_enumeration_feasible(&a, &b, 1e-9);
        assert_eq!(is_feasible(&poly, &SolverOptions::default()).unwrap(), expected, "{a:?} {b:?}");
        if let Some(x) = find_feasible_point(&poly, &SolverOptions::default()).unwrap() {
            assert!(poly.max_violation(&x) <= 1e-8);
        }
        if expected {
            feasible += 1
        } else {
            infeasible += 1
        }
    }
    assert!(feasible > 5 && infeasible > 5, "{feasible} / {infeasible}");
}

#[test]
fn uniformity_polyhedron_classifies_points() {
    let prop = uniformity_polyhedron(4, 0.1).unwrap();
    assert!(prop.contains(&Distribution::uniform(4).unwrap()).unwrap());
    assert!(!prop.contains(&Distribution::point_mass(4, 0).unwrap()).unwrap());
    // direct distance of the point mass to uniform is 0.75 + 3 · 0.25
    let direct: f64 = [1.0f64, 0.0, 0.0, 0.0].iter().map(|p| (p - 0.25).abs()).sum();
    assert!((direct - 1.5).abs() < 1e-15);
}

/// Random estimate over `[n]`: random `H`, random masses on `H`, residual
/// spread evenly over the rest.
fn random_estimate(rng: &mut impl Rng, n: usize, full_h: bool) -> HighEstimate {
    let mut elems: Vec<usize> = (0..n).collect();
    elems.shuffle(rng);
    let h_len = if full_h { n } else { rng.random_range(0..=n) };
    let mut h: Vec<usize> = elems[..h_len].to_vec();
    h.sort_unstable();
    let h_share: f64 = match h_len {
        0 => 0.0,
        _ if h_len == n => 1.0,
        _ => rng.random_range(0.0..1.0),
    };
    let w: Vec<f64> = h.iter().map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = w.iter().sum();
    let mut pmf = vec![0.0; n];
    for (&x, wx) in h.iter().zip(&w) {
        pmf[x] = h_share * wx / total;
    }
    let rest = n - h_len;
    for x in 0..n {
        if !h.contains(&x) {
            pmf[x] = (1.0 - h_share) / rest as f64;
        }
    }
    let d = Distribution::new(pmf).unwrap();
    HighEstimate::from_parts(h.clone(), h, d).unwrap()
}

#[test]
fn exact_uniformity_oracle_matches_direct_conditions() {
    let mut rng = rng_from_seed(99);
    let mut agree_true = 0;
    for trial in 0..50 {
        let n = rng.random_range(2..=10);
        let prop = linear_property_oracle(uniformity_polyhedron(n, 0.0).unwrap());
        let est = random_estimate(&mut rng, n, trial % 2 == 0);
        // q² > n makes every element of the uniform pmf heavy
        let q = (n as f64).sqrt().floor() as u64 + 1;
        let bound = rng.random_range(0.0..1.5);
        let u = Distribution::uniform(n).unwrap();
        let direct = check_conditions(&u, &est, q, bound).unwrap();
        assert_eq!(prop.exists_close_member(&est, q, bound).unwrap(), direct, "trial {trial}");
        agree_true += usize::from(direct);
        // q = 1 leaves only Condition (A)
        let direct = check_conditions(&u, &est, 1, bound).unwrap();
        assert_eq!(prop.exists_close_member(&est, 1, bound).unwrap(), direct, "trial {trial}, q = 1");
    }
    assert!(agree_true > 0);
}

fn instance_strategy() -> impl Strategy<Value = (u64, f64, f64)> {
    (any::<u64>(), 0.0f64..0.6, 0.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasibility_is_monotone_in_bound((seed, eps, b1) in instance_strategy(), extra in 0.0f64..1.0) {
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(3..=8);
        let prop = uniformity_polyhedron(n, eps).unwrap();
        let est = random_estimate(&mut rng, n, false);
        let q = rng.random_range(1..=3);
        let at = |b: f64| lp_feasible(&build_feasibility_lp(&prop, est.h(), est.d_tilde(), q, b).unwrap()).unwrap();
        if at(b1) {
            prop_assert!(at(b1 + extra));
        }
    }

    #[test]
    fn column_relabeling_preserves_feasibility((seed, eps, bound) in instance_strategy()) {
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(3..=8);
        let prop = uniformity_polyhedron(n, eps).unwrap();
        let est = random_estimate(&mut rng, n, false);
        let q = rng.random_range(1..=3);
        let inst = build_feasibility_lp(&prop, est.h(), est.d_tilde(), q, bound).unwrap();
        let opts = SolverOptions::default();
        let answer = lp_feasible(&inst).unwrap();
        prop_assert_eq!(is_feasible(&inst.natural_order().unwrap(), &opts).unwrap(), answer);
        let mut shuffled = est.h().to_vec();
        shuffled.shuffle(&mut rng);
        let other = build_feasibility_lp(&prop, &shuffled, est.d_tilde(), q, bound).unwrap();
        prop_assert_eq!(lp_feasible(&other).unwrap(), answer);
        prop_assert_eq!(inst.var_count(), 2 * n + est.h().len() + 1);
        if let Some(point) = find_feasible_point(inst.polyhedron(), &opts).unwrap() {
            let pmf = inst.pmf_of(&point);
            prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn strict_relaxation_only_matters_at_the_edge((seed, eps, bound) in instance_strategy()) {
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(3..=8);
        let prop = uniformity_polyhedron(n, eps).unwrap();
        let est = random_estimate(&mut rng, n, false);
        let q = rng.random_range(1..=3);
        let margin = 1e-6;
        let solve = |b: f64, strict_eps: f64| {
            let inst = build_feasibility_lp(&prop, est.h(), est.d_tilde(), q, b).unwrap();
            let opts = SolverOptions { strict_eps, ..SolverOptions::default() };
            is_feasible(inst.polyhedron(), &opts).unwrap()
        };
        let below = solve((bound - margin).max(0.0), 0.0);
        let above = solve(bound + margin, 0.0);
        if below == above {
            prop_assert_eq!(solve(bound, STRICT_EPS), below);
            prop_assert_eq!(solve(bound, 0.0), below);
        }
    }
}

#[test]
fn lp_files_round_trip() {
    let prop = uniformity_polyhedron(3, 0.2).unwrap();
    let text = prop.polyhedron().to_json_string();
    let back = Polyhedron::from_json_str(&text).unwrap();
    assert_eq!(&back, prop.polyhedron());
    assert_eq!(back.digest(), prop.polyhedron().digest());
}
