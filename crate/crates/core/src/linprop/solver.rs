//! Feasibility of `Ax ≤ b` over free variables.
//!
//! A presolve pass turns singleton rows into variable bounds, substitutes
//! fixed variables, drops redundant rows and fixes the variables of forcing
//! rows. What remains goes to a bounded-variable phase-1 simplex on a dense
//! tableau that minimizes the total violation carried by artificial columns.
//! Pricing is Dantzig's rule until a run of degenerate pivots is seen, after
//! which Bland's rule is used for the rest of the solve.

use crate::error::{Error, Result};
use crate::linprop::polyhedron::Polyhedron;

/// Constraint-satisfaction tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Margin by which strict rows are tightened.
pub const STRICT_EPS: f64 = 1e-12;
pub const ITERATION_CAP: usize = 1_000_000;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub strict_eps: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: FEASIBILITY_TOL, strict_eps: STRICT_EPS, max_iterations: ITERATION_CAP }
    }
}

/// Outcome of a phase-1 solve.
#[derive(Debug, Clone)]
pub struct Phase1Report {
    /// A point attaining the minimum total violation found.
    pub point: Vec<f64>,
    /// Minimum total violation (0 means feasible).
    pub violation: f64,
    pub feasible: bool,
    pub pivots: usize,
}

pub fn is_feasible(poly: &Polyhedron, opts: &SolverOptions) -> Result<bool> {
    Ok(find_feasible_point(poly, opts)?.is_some())
}

/// A witness point when the system is feasible within `opts.tol`.
pub fn find_feasible_point(poly: &Polyhedron, opts: &SolverOptions) -> Result<Option<Vec<f64>>> {
    let report = solve(poly, opts)?;
    Ok(report.feasible.then_some(report.point))
}

pub fn solve(poly: &Polyhedron, opts: &SolverOptions) -> Result<Phase1Report> {
    let mut pre = Presolve::new(poly, opts);
    if !pre.run() {
        return Ok(Phase1Report { point: pre.point_guess(), violation: f64::INFINITY, feasible: false, pivots: 0 });
    }
    let reduced = pre.reduced();
    let mut point = pre.point_guess();
    if reduced.rows.is_empty() {
        return Ok(Phase1Report { point, violation: 0.0, feasible: true, pivots: 0 });
    }
    let mut tab = Tableau::new(&reduced);
    let pivots =
        tab.run(opts.max_iterations).map_err(|iterations| Error::Solver { iterations, digest: poly.digest() })?;
    let violation = tab.objective();
    for (k, &col) in reduced.vars.iter().enumerate() {
        point[col] = tab.value(k);
    }
    Ok(Phase1Report { point, violation, feasible: violation <= opts.tol, pivots })
}

struct SparseRow {
    coefs: Vec<(usize, f64)>,
    rhs: f64,
    active: bool,
}

struct Presolve {
    rows: Vec<SparseRow>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    fixed: Vec<Option<f64>>,
    tol: f64,
}

/// The system left after presolve, over the surviving variables.
struct Reduced {
    /// Original column of each surviving variable.
    vars: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Presolve {
    fn new(poly: &Polyhedron, opts: &SolverOptions) -> Self {
        let rows = (0..poly.rows())
            .map(|i| {
                let coefs = poly.row(i).iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect();
                let mut rhs = poly.rhs()[i];
                if poly.is_strict(i) {
                    rhs -= opts.strict_eps;
                }
                SparseRow { coefs, rhs, active: true }
            })
            .collect();
        let n = poly.cols();
        Presolve {
            rows,
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
            fixed: vec![None; n],
            tol: opts.tol,
        }
    }

    /// Returns false when infeasibility is detected.
    fn run(&mut self) -> bool {
        loop {
            let mut changed = false;
            for r in 0..self.rows.len() {
                if !self.rows[r].active {
                    continue;
                }
                match self.reduce_row(r) {
                    RowAction::Infeasible => return false,
                    RowAction::Changed => changed = true,
                    RowAction::Kept => {}
                }
            }
            for j in 0..self.lo.len() {
                if self.fixed[j].is_some() {
                    continue;
                }
                let (lo, hi) = (self.lo[j], self.hi[j]);
                if lo > hi + self.tol {
                    return false;
                }
                if hi - lo <= 1e-12 {
                    self.fixed[j] = Some(0.5 * (lo + hi));
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn reduce_row(&mut self, r: usize) -> RowAction {
        let fixed = &self.fixed;
        let row = &mut self.rows[r];
        let before = row.coefs.len();
        let mut shift = 0.0;
        row.coefs.retain(|&(j, a)| match fixed[j] {
            Some(v) => {
                shift += a * v;
                false
            }
            None => true,
        });
        row.rhs -= shift;
        let mut changed = row.coefs.len() != before;

        match row.coefs.len() {
            0 => {
                row.active = false;
                return if row.rhs >= -self.tol { RowAction::Changed } else { RowAction::Infeasible };
            }
            1 => {
                let (j, a) = row.coefs[0];
                let bound = row.rhs / a;
                if a > 0.0 {
                    self.hi[j] = self.hi[j].min(bound);
                } else {
                    self.lo[j] = self.lo[j].max(bound);
                }
                row.active = false;
                return RowAction::Changed;
            }
            _ => {}
        }

        let (mut min_act, mut max_act) = (0.0f64, 0.0f64);
        for &(j, a) in &row.coefs {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            if a > 0.0 {
                min_act += a * lo;
                max_act += a * hi;
            } else {
                min_act += a * hi;
                max_act += a * lo;
            }
        }
        if min_act > row.rhs + self.tol {
            return RowAction::Infeasible;
        }
        if max_act <= row.rhs {
            row.active = false;
            return RowAction::Changed;
        }
        if min_act.is_finite() && min_act >= row.rhs - 1e-12 {
            // forcing row: only the minimizing corner satisfies it
            for &(j, a) in &row.coefs {
                let v = if a > 0.0 { self.lo[j] } else { self.hi[j] };
                self.fixed[j] = Some(v);
            }
            row.active = false;
            changed = true;
        }
        if changed {
            RowAction::Changed
        } else {
            RowAction::Kept
        }
    }

    fn reduced(&self) -> Reduced {
        let mut index = vec![usize::MAX; self.lo.len()];
        let mut vars = Vec::new();
        for (j, f) in self.fixed.iter().enumerate() {
            if f.is_none() {
                index[j] = vars.len();
                vars.push(j);
            }
        }
        let rows = self
            .rows
            .iter()
            .filter(|r| r.active)
            .map(|r| {
                let mut shift = 0.0;
                let coefs = r
                    .coefs
                    .iter()
                    .filter_map(|&(j, a)| match self.fixed[j] {
                        Some(v) => {
                            shift += a * v;
                            None
                        }
                        None => Some((index[j], a)),
                    })
                    .collect();
                (coefs, r.rhs - shift)
            })
            .collect();
        Reduced {
            lo: vars.iter().map(|&j| self.lo[j]).collect(),
            hi: vars.iter().map(|&j| self.hi[j]).collect(),
            vars,
            rows,
        }
    }

    /// Fixed values where known, otherwise a point inside the bounds.
    fn point_guess(&self) -> Vec<f64> {
        (0..self.lo.len()).map(|j| self.fixed[j].unwrap_or_else(|| resting_value(self.lo[j], self.hi[j]))).collect()
    }
}

enum RowAction {
    Infeasible,
    Changed,
    Kept,
}

fn resting_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

/// Dense bounded-variable tableau for `min Σ t` subject to `Ax + s − t = b`.
struct Tableau {
    m: usize,
    ncols: usize,
    /// `B⁻¹ [A | I | −E]`, row-major `m × ncols`.
    t: Vec<f64>,
    /// Reduced costs.
    d: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    kind: Vec<Kind>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Values of basic variables, by row.
    beta: Vec<f64>,
    /// Values of nonbasic variables, by column.
    x: Vec<f64>,
    bland: bool,
}

impl Tableau {
    fn new(red: &Reduced) -> Self {
        let m = red.rows.len();
        let k = red.vars.len();
        let mut x: Vec<f64> = (0..k).map(|j| resting_value(red.lo[j], red.hi[j])).collect();
        let residual: Vec<f64> =
            red.rows.iter().map(|(coefs, rhs)| rhs - coefs.iter().map(|&(j, a)| a * x[j]).sum::<f64>()).collect();
        let n_art = residual.iter().filter(|&&r| r < 0.0).count();
        let ncols = k + m + n_art;

        let mut lo = red.lo.clone();
        let mut hi = red.hi.clone();
        let mut kind = vec![Kind::Structural; k];
        lo.extend(std::iter::repeat_n(0.0, m + n_art));
        hi.extend(std::iter::repeat_n(f64::INFINITY, m + n_art));
        kind.extend(std::iter::repeat_n(Kind::Slack, m));
        kind.extend(std::iter::repeat_n(Kind::Artificial, n_art));
        x.extend(std::iter::repeat_n(0.0, m + n_art));

        let mut t = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        let mut d = vec![0.0; ncols];
        let mut next_art = k + m;
        for (i, (coefs, _)) in red.rows.iter().enumerate() {
            let row = &mut t[i * ncols..(i + 1) * ncols];
            if residual[i] >= 0.0 {
                for &(j, a) in coefs {
                    row[j] += a;
                }
                row[k + i] = 1.0;
                basis[i] = k + i;
                beta[i] = residual[i];
            } else {
                // t_i = −b_i + a_i·x + s_i
                for &(j, a) in coefs {
                    row[j] -= a;
                }
                row[k + i] = -1.0;
                row[next_art] = 1.0;
                basis[i] = next_art;
                beta[i] = -residual[i];
                next_art += 1;
                // d = c − c_B·T; c_B = 1 on this row
                for (dj, &tij) in d.iter_mut().zip(row.iter()) {
                    *dj -= tij;
                }
            }
        }
        for i in 0..m {
            if kind[basis[i]] == Kind::Artificial {
                d[basis[i]] = 0.0;
            }
        }
        let mut is_basic = vec![false; ncols];
        for &b in &basis {
            is_basic[b] = true;
        }
        Tableau { m, ncols, t, d, lo, hi, kind, basis, is_basic, beta, x, bland: false }
    }

    fn objective(&self) -> f64 {
        let basic: f64 =
            (0..self.m).filter(|&i| self.kind[self.basis[i]] == Kind::Artificial).map(|i| self.beta[i].max(0.0)).sum();
        let nonbasic: f64 =
            (0..self.ncols).filter(|&j| !self.is_basic[j] && self.kind[j] == Kind::Artificial).map(|j| self.x[j]).sum();
        basic + nonbasic
    }

    fn value(&self, col: usize) -> f64 {
        if self.is_basic[col] {
            let r = self.basis.iter().position(|&b| b == col).expect("basic column has a row");
            self.beta[r]
        } else {
            self.x[col]
        }
    }

    /// Entering column and direction (+1 increase, −1 decrease).
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.is_basic[j] {
                continue;
            }
            let dj = self.d[j];
            let (lo, hi, xj) = (self.lo[j], self.hi[j], self.x[j]);
            let dir = if dj < -COST_TOL && xj < hi {
                1.0
            } else if dj > COST_TOL && xj > lo {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| dj.abs() > score) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Runs to optimality; returns pivot count, or the cap as error.
    fn run(&mut self, cap: usize) -> std::result::Result<usize, usize> {
        let mut iterations = 0;
        let mut degenerate = 0;
        while let Some((j, dir)) = self.choose_entering() {
            if iterations >= cap {
                return Err(iterations);
            }
            iterations += 1;
            let step = self.step(j, dir);
            match step {
                Some(theta) if theta <= 1e-14 => {
                    degenerate += 1;
                    if degenerate >= DEGENERATE_STREAK {
                        self.bland = true;
                    }
                }
                Some(_) => degenerate = 0,
                None => {
                    // unbounded descent cannot happen for a non-negative objective;
                    // drop the column from pricing
                    self.d[j] = 0.0;
                }
            }
        }
        Ok(iterations)
    }

    /// Moves column `j` in direction `dir`. Returns the step length, or None
    /// when no bound limits the move.
    fn step(&mut self, j: usize, dir: f64) -> Option<f64> {
        let nc = self.ncols;
        let mut theta = self.hi[j] - self.lo[j];
        let mut leave: Option<(usize, f64, f64)> = None; // (row, |pivot|, bound)
        for i in 0..self.m {
            let tij = self.t[i * nc + j];
            if tij.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * tij; // change of basic per unit step
            let b = self.basis[i];
            let (limit, bound) = if rate < 0.0 {
                if !self.lo[b].is_finite() {
                    continue;
                }
                (((self.beta[i] - self.lo[b]) / -rate).max(0.0), self.lo[b])
            } else {
                if !self.hi[b].is_finite() {
                    continue;
                }
                (((self.hi[b] - self.beta[i]) / rate).max(0.0), self.hi[b])
            };
            let better = match leave {
                None => limit < theta,
                Some((r, piv, _)) => {
                    if limit < theta - 1e-12 {
                        true
                    } else if limit <= theta + 1e-12 {
                        if self.bland {
                            b < self.basis[r]
                        } else {
                            tij.abs() > piv
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                theta = theta.min(limit);
                leave = Some((i, tij.abs(), bound));
            }
        }
        if !theta.is_finite() {
            return None;
        }
        for i in 0..self.m {
            let tij = self.t[i * nc + j];
            if tij != 0.0 {
                self.beta[i] -= dir * theta * tij;
            }
        }
        let entering_value = self.x[j] + dir * theta;
        match leave {
            None => {
                // bound flip
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            }
            Some((r, _, bound)) => {
                let out = self.basis[r];
                self.is_basic[out] = false;
                self.x[out] = bound;
                if self.kind[out] == Kind::Artificial {
                    // never re-enters
                    self.hi[out] = 0.0;
                    self.x[out] = 0.0;
                }
                self.basis[r] = j;
                self.is_basic[j] = true;
                self.beta[r] = entering_value;
                self.pivot(r, j);
            }
        }
        Some(theta)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + j];
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                if pv != 0.0 {
                    *v -= f * pv;
                    if v.abs() < 1e-14 {
                        *v = 0.0;
                    }
                }
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (dv, &pv) in self.d.iter_mut().zip(&pivot_row) {
                *dv -= f * pv;
            }
            self.d[j] = 0.0;
        }
    }
}
