use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// `{x ∈ R^N : Ax ≤ b}`, with some rows optionally strict (`a·x < b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyhedronFile", into = "PolyhedronFile")]
pub struct Polyhedron {
    rows: usize,
    cols: usize,
    /// Row-major, `rows × cols`.
    a: Vec<f64>,
    b: Vec<f64>,
    strict_rows: BTreeSet<usize>,
}

/// `A` may be given flat (row-major) or as a list of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyhedronFile {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "A")]
    a: MatrixRepr,
    b: Vec<f64>,
    #[serde(default)]
    strict_rows: Vec<usize>,
}

impl TryFrom<PolyhedronFile> for Polyhedron {
    type Error = Error;

    fn try_from(f: PolyhedronFile) -> Result<Self> {
        let a = match f.a {
            MatrixRepr::Flat(v) => v,
            MatrixRepr::Nested(rows) => {
                if rows.iter().any(|r| r.len() != f.n) {
                    return Err(Error::Structure(format!("every row of A must have N = {} entries", f.n)));
                }
                rows.into_iter().flatten().collect()
            }
        };
        Polyhedron::new(f.m, f.n, a, f.b, f.strict_rows.into_iter().collect())
    }
}

impl From<Polyhedron> for PolyhedronFile {
    fn from(p: Polyhedron) -> Self {
        PolyhedronFile {
            m: p.rows,
            n: p.cols,
            a: MatrixRepr::Flat(p.a),
            b: p.b,
            strict_rows: p.strict_rows.into_iter().collect(),
        }
    }
}

impl Polyhedron {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>, strict_rows: BTreeSet<usize>) -> Result<Self> {
        if a.len() != rows * cols {
            return Err(Error::Structure(format!("A has {} entries, expected {rows} x {cols}", a.len())));
        }
        if b.len() != rows {
            return Err(Error::Structure(format!("b has {} entries, expected {rows}", b.len())));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Structure("A and b must be finite".into()));
        }
        if let Some(&r) = strict_rows.iter().find(|&&r| r >= rows) {
            return Err(Error::Structure(format!("strict row {r} out of range")));
        }
        Ok(Polyhedron { rows, cols, a, b, strict_rows })
    }

    /// No rows: all of `R^cols`.
    pub fn unconstrained(cols: usize) -> Self {
        Polyhedron { rows: 0, cols, a: Vec::new(), b: Vec::new(), strict_rows: BTreeSet::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn strict_rows(&self) -> &BTreeSet<usize> {
        &self.strict_rows
    }

    pub fn is_strict(&self, i: usize) -> bool {
        self.strict_rows.contains(&i)
    }

    /// Appends `coeffs · x ≤ rhs` given as `(column, coefficient)` pairs.
    pub fn push_sparse_row(&mut self, coeffs: &[(usize, f64)], rhs: f64, strict: bool) {
        let start = self.a.len();
        self.a.resize(start + self.cols, 0.0);
        for &(j, v) in coeffs {
            assert!(j < self.cols, "column {j} out of range");
            self.a[start + j] += v;
        }
        self.b.push(rhs);
        if strict {
            self.strict_rows.insert(self.rows);
        }
        self.rows += 1;
    }

    pub fn push_row(&mut self, coeffs: &[f64], rhs: f64, strict: bool) {
        assert_eq!(coeffs.len(), self.cols);
        self.a.extend_from_slice(coeffs);
        self.b.push(rhs);
        if strict {
            self.strict_rows.insert(self.rows);
        }
        self.rows += 1;
    }

    /// Adds `extra` all-zero columns on the right.
    pub fn with_extra_columns(&self, extra: usize) -> Polyhedron {
        let cols = self.cols + extra;
        let mut a = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            a.extend_from_slice(self.row(i));
            a.extend(std::iter::repeat_n(0.0, extra));
        }
        Polyhedron { rows: self.rows, cols, a, b: self.b.clone(), strict_rows: self.strict_rows.clone() }
    }

    /// Relabels variables: old column `j` becomes column `new_of_old[j]`.
    pub fn permute_columns(&self, new_of_old: &[usize]) -> Result<Polyhedron> {
        if new_of_old.len() != self.cols {
            return Err(Error::Structure("permutation length differs from column count".into()));
        }
        let mut seen = vec![false; self.cols];
        for &j in new_of_old {
            if j >= self.cols || std::mem::replace(&mut seen[j], true) {
                return Err(Error::Structure("not a permutation".into()));
            }
        }
        let mut a = vec![0.0; self.a.len()];
        for i in 0..self.rows {
            let row = self.row(i);
            for (old, &new) in new_of_old.iter().enumerate() {
                a[i * self.cols + new] = row[old];
            }
        }
        Ok(Polyhedron { rows: self.rows, cols: self.cols, a, b: self.b.clone(), strict_rows: self.strict_rows.clone() })
    }

    /// Largest violation `a·x − b` over rows (strict rows count equality as violated by 0).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x) - self.b[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Membership within `tol`; strict rows additionally require `a·x < b + tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        (0..self.rows).all(|i| {
            let lhs = dot(self.row(i), x);
            if self.is_strict(i) {
                lhs < self.b[i] + tol
            } else {
                lhs <= self.b[i] + tol
            }
        })
    }

    /// Short content hash, used to identify instances in solver errors.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        for v in self.a.iter().chain(&self.b) {
            h.update(v.to_bits().to_le_bytes());
        }
        for r in &self.strict_rows {
            h.update((*r as u64).to_le_bytes());
        }
        h.finalize().iter().take(8).map(|byte| format!("{byte:02x}")).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("polyhedron serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Polyhedron::new(1, 2, vec![1.0], vec![0.0], BTreeSet::new()).is_err());
        assert!(Polyhedron::new(1, 1, vec![1.0], vec![0.0, 1.0], BTreeSet::new()).is_err());
        assert!(Polyhedron::new(1, 1, vec![f64::INFINITY], vec![0.0], BTreeSet::new()).is_err());
        assert!(Polyhedron::new(1, 1, vec![1.0], vec![0.0], [1].into()).is_err());
        assert!(Polyhedron::new(1, 1, vec![1.0], vec![0.0], [0].into()).is_ok());
    }

    #[test]
    fn file_formats() {
        let flat = r#"{"M": 2, "N": 2, "A": [1, 0, 0, 1], "b": [1, 2], "strict_rows": [1]}"#;
        let nested = r#"{"M": 2, "N": 2, "A": [[1, 0], [0, 1]], "b": [1, 2], "strict_rows": [1]}"#;
        let p = Polyhedron::from_json_str(flat).unwrap();
        assert_eq!(p, Polyhedron::from_json_str(nested).unwrap());
        assert!(p.is_strict(1));
        assert_eq!(Polyhedron::from_json_str(&p.to_json_string()).unwrap(), p);
        assert!(Polyhedron::from_json_str(r#"{"M": 1, "N": 2, "A": [[1]], "b": [1]}"#).is_err());
    }

    #[test]
    fn permutation_moves_columns() {
        let mut p = Polyhedron::unconstrained(3);
        p.push_row(&[1.0, 2.0, 3.0], 4.0, false);
        let q = p.permute_columns(&[2, 0, 1]).unwrap();
        assert_eq!(q.row(0), &[2.0, 3.0, 1.0]);
        assert!(p.permute_columns(&[0, 0, 1]).is_err());
        assert_ne!(p.digest(), q.digest());
    }
}
