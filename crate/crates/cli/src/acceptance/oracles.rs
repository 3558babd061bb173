//! Brute-force reference computations the acceptance criteria compare against.

use disttest_core::Distribution;

/// Heap's algorithm; calls `visit` on every permutation of `0..n`.
fn for_each_permutation(n: usize, visit: &mut dyn FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            visit(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// `min_σ Σ |a(i) − b(σ(i))|` over all `n!` permutations.
pub fn exhaustive_sorted_distance(a: &Distribution, b: &Distribution) -> f64 {
    let mut best = f64::INFINITY;
    for_each_permutation(a.n(), &mut |sigma| {
        let d: f64 = (0..a.n()).map(|i| (a.mass(i) - b.mass(sigma[i])).abs()).sum();
        best = best.min(d);
    });
    best
}

/// Every `k`-subset carries mass `≥ alpha` (same 1e-12 slack as the library).
pub fn subset_non_concentrated(d: &Distribution, alpha: f64, k: usize) -> bool {
    let n = d.n();
    assert!(n < 32);
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .all(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| d.mass(i)).sum::<f64>() + 1e-12 >= alpha)
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m = rows.to_vec();
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

/// A point of `{x : A x = b}` for full-row-rank `A`: `x = Aᵀ(AAᵀ)⁻¹b`.
fn least_norm(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let (k, n) = (a.len(), a[0].len());
    let mut g: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| (0..n).map(|t| a[i][t] * a[j][t]).sum()).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| g[i][c].abs().total_cmp(&g[j][c].abs())).expect("non-empty");
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

/// Feasibility of `Ax ≤ b` by enumerating candidate minimal faces: every
/// non-empty polyhedron contains a set `{A_I x = b_I}` with `I` independent
/// and `|I| = rank A`.
pub fn vertex_enumeration_feasible(a: &[Vec<f64>], b: &[f64], tol: f64) -> bool {
    let m = a.len();
    if m == 0 {
        return true;
    }
    assert!(m < 32);
    let r = rank(a);
    if r == 0 {
        return b.iter().all(|&v| v >= -tol);
    }
    let satisfied = |x: &[f64]| (0..m).all(|i| a[i].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b[i] + tol);
    (0u32..1 << m).filter(|s| s.count_ones() as usize == r).any(|s| {
        let idx: Vec<usize> = (0..m).filter(|&i| s >> i & 1 == 1).collect();
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| a[i].clone()).collect();
        if rank(&sub) < r {
            return false;
        }
        let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        satisfied(&least_norm(&sub, &rhs))
    })
}
