//! Linear properties: distributions expressible as the projection of a
//! polyhedron onto its first `n` coordinates, and the linearized feasibility
//! system that decides the tester's closeness question for them.

pub mod polyhedron;
pub mod solver;

use crate::distribution::Distribution;
use crate::error::{param, Error, Result};
use crate::tester::{HighEstimate, PropertyOracle};

pub use polyhedron::Polyhedron;
pub use solver::{find_feasible_point, is_feasible, SolverOptions, FEASIBILITY_TOL, STRICT_EPS};

/// Default cap on auxiliary dimensions: `N ≤ 10 n`.
pub const DEFAULT_COLUMN_CAP: usize = 10;

/// A property `{π_n(z) : Az ≤ b}`, always intersected with the probability
/// simplex on the first `n` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProperty {
    poly: Polyhedron,
    n: usize,
}

impl LinearProperty {
    pub fn new(poly: Polyhedron, n: usize) -> Result<Self> {
        Self::with_column_cap(poly, n, DEFAULT_COLUMN_CAP)
    }

    /// As `new`, rejecting systems with more than `cap · n` columns.
    pub fn with_column_cap(mut poly: Polyhedron, n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return param("projection dimension must be at least 1");
        }
        if n > poly.cols() {
            return Err(Error::Structure(format!("projection dimension {n} exceeds column count {}", poly.cols())));
        }
        if poly.cols() > cap * n {
            return param(format!("{} columns exceeds the cap of {cap} x n = {}", poly.cols(), cap * n));
        }
        let ones: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
        let neg: Vec<(usize, f64)> = (0..n).map(|i| (i, -1.0)).collect();
        poly.push_sparse_row(&ones, 1.0, false);
        poly.push_sparse_row(&neg, -1.0, false);
        Ok(LinearProperty { poly, n })
    }

    /// The full system, simplex rows included.
    pub fn polyhedron(&self) -> &Polyhedron {
        &self.poly
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether `d` lies in the property (some lift of it satisfies the system).
    pub fn contains(&self, d: &Distribution) -> Result<bool> {
        if d.n() != self.n {
            return Err(Error::Dimension { left: d.n(), right: self.n });
        }
        let mut p = self.poly.clone();
        for (i, &v) in d.pmf().iter().enumerate() {
            p.push_sparse_row(&[(i, 1.0)], v, false);
            p.push_sparse_row(&[(i, -1.0)], -v, false);
        }
        is_feasible(&p, &SolverOptions::default())
    }
}

/// Distributions within L1 distance `eps` of uniform over `[n]`, lifted to
/// `2n` variables where `z_{n+i}` bounds `|z_i − 1/n|`.
pub fn uniformity_polyhedron(n: usize, eps: f64) -> Result<LinearProperty> {
    if n == 0 {
        return param("n must be at least 1");
    }
    if !(0.0..=2.0).contains(&eps) {
        return param(format!("eps must lie in [0, 2], got {eps}"));
    }
    let u = 1.0 / n as f64;
    let mut p = Polyhedron::unconstrained(2 * n);
    let slacks: Vec<(usize, f64)> = (0..n).map(|i| (n + i, 1.0)).collect();
    p.push_sparse_row(&slacks, eps, false);
    for i in 0..2 * n {
        p.push_sparse_row(&[(i, -1.0)], 0.0, false);
    }
    for i in 0..n {
        p.push_sparse_row(&[(i, 1.0), (n + i, -1.0)], u, false);
        p.push_sparse_row(&[(i, -1.0), (n + i, -1.0)], -u, false);
    }
    LinearProperty::new(p, n)
}

/// The assembled closeness system. Columns are laid out as: the `|H|`
/// coordinates of `H` (in the order given), the remaining pmf coordinates in
/// ascending order, the property's auxiliary coordinates, then `|H| + 1`
/// slack coordinates.
#[derive(Debug, Clone)]
pub struct FeasibilityInstance {
    poly: Polyhedron,
    var_count: usize,
    /// Column holding the pmf coordinate of each domain element.
    column_of: Vec<usize>,
    h_len: usize,
}

impl FeasibilityInstance {
    pub fn polyhedron(&self) -> &Polyhedron {
        &self.poly
    }

    /// `N + |H| + 1`.
    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn column_of(&self, x: usize) -> usize {
        self.column_of[x]
    }

    pub fn h_len(&self) -> usize {
        self.h_len
    }

    /// The same system with pmf coordinates moved back to their natural
    /// positions (domain element `x` in column `x`).
    pub fn natural_order(&self) -> Result<Polyhedron> {
        let mut new_of_old: Vec<usize> = (0..self.poly.cols()).collect();
        for (x, &col) in self.column_of.iter().enumerate() {
            new_of_old[col] = x;
        }
        self.poly.permute_columns(&new_of_old)
    }

    /// Reads the pmf part of a solution point back in domain order.
    pub fn pmf_of(&self, point: &[f64]) -> Vec<f64> {
        self.column_of.iter().map(|&c| point[c]).collect()
    }
}

/// Linearizes "some `D1` in the property has `Σ_{x∈H}|D1(x) − D~(x)| +
/// |D1(Ω∖H) − D~(Ω∖H)| ≤ bound` and `D1(x) < 1/q²` off `H`".
pub fn build_feasibility_lp(
    prop: &LinearProperty,
    h: &[usize],
    d_tilde: &Distribution,
    q: u64,
    bound: f64,
) -> Result<FeasibilityInstance> {
    let n = prop.n;
    if d_tilde.n() != n {
        return Err(Error::Dimension { left: d_tilde.n(), right: n });
    }
    if q == 0 {
        return param("q must be at least 1");
    }
    if !(bound >= 0.0 && bound.is_finite()) {
        return param(format!("bound must be finite and non-negative, got {bound}"));
    }
    let mut in_h = vec![false; n];
    for &x in h {
        if x >= n {
            return Err(Error::Index(format!("H element {x} outside domain of size {n}")));
        }
        if std::mem::replace(&mut in_h[x], true) {
            return Err(Error::Index(format!("H element {x} listed twice")));
        }
    }

    // H first, then the rest of the pmf coordinates
    let mut column_of = vec![0usize; n];
    for (pos, &x) in h.iter().enumerate() {
        column_of[x] = pos;
    }
    let rest: Vec<usize> = (0..n).filter(|&x| !in_h[x]).collect();
    for (k, &x) in rest.iter().enumerate() {
        column_of[x] = h.len() + k;
    }
    let big_n = prop.poly.cols();
    let mut new_of_old: Vec<usize> = (0..big_n).collect();
    new_of_old[..n].copy_from_slice(&column_of);
    let mut poly = prop.poly.permute_columns(&new_of_old)?.with_extra_columns(h.len() + 1);

    let slack = |i: usize| big_n + i;
    let tail = big_n + h.len();

    let budget: Vec<(usize, f64)> = (0..=h.len()).map(|i| (slack(i), 1.0)).collect();
    poly.push_sparse_row(&budget, bound, false);
    for i in 0..=h.len() {
        poly.push_sparse_row(&[(slack(i), -1.0)], 0.0, false);
    }
    for (pos, &x) in h.iter().enumerate() {
        let a = d_tilde.mass(x);
        poly.push_sparse_row(&[(pos, 1.0), (slack(pos), -1.0)], a, false);
        poly.push_sparse_row(&[(pos, -1.0), (slack(pos), -1.0)], -a, false);
    }
    let tail_mass: f64 = rest.iter().map(|&x| d_tilde.mass(x)).sum();
    let mut up: Vec<(usize, f64)> = rest.iter().map(|&x| (column_of[x], 1.0)).collect();
    up.push((tail, -1.0));
    poly.push_sparse_row(&up, tail_mass, false);
    let mut down: Vec<(usize, f64)> = rest.iter().map(|&x| (column_of[x], -1.0)).collect();
    down.push((tail, -1.0));
    poly.push_sparse_row(&down, -tail_mass, false);
    let cap = 1.0 / (q as f64 * q as f64);
    for &x in &rest {
        poly.push_sparse_row(&[(column_of[x], 1.0)], cap, true);
    }

    Ok(FeasibilityInstance { var_count: poly.cols(), poly, column_of, h_len: h.len() })
}

pub fn lp_feasible(inst: &FeasibilityInstance) -> Result<bool> {
    is_feasible(&inst.poly, &SolverOptions::default())
}

/// Answers the tester's closeness question for a linear property by one
/// feasibility solve.
#[derive(Debug, Clone)]
pub struct LinearPropertyOracle {
    prop: LinearProperty,
}

pub fn linear_property_oracle(prop: LinearProperty) -> LinearPropertyOracle {
    LinearPropertyOracle { prop }
}

impl LinearPropertyOracle {
    pub fn property(&self) -> &LinearProperty {
        &self.prop
    }
}

impl PropertyOracle for LinearPropertyOracle {
    fn exists_close_member(&self, est: &HighEstimate, q: u64, bound: f64) -> Result<bool> {
        let inst = build_feasibility_lp(&self.prop, est.h(), est.d_tilde(), q, bound)?;
        lp_feasible(&inst)
    }
}
