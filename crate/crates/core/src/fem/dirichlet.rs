use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;

/// Prescribed nodal values, sorted by node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    entries: Vec<(usize, f64)>,
}

impl Constraints {
    pub fn none() -> Self {
        Constraints::default()
    }

    /// Collect `(node, value)` pairs. Repeating a node with the same value is
    /// allowed; different values are a conflict.
    pub fn new(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (node, value) in pairs {
            if let Some(&prev) = map.get(&node) {
                if prev != value {
                    return Err(Error::ConstraintConflict {
                        node,
                        first: prev,
                        second: value,
                    });
                }
            }
            map.insert(node, value);
        }
        Ok(Constraints {
            entries: map.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &(i, _) in &self.entries {
            m[i] = true;
        }
        m
    }

    /// Dense vector holding the prescribed values and zero elsewhere.
    pub fn lift(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(i, g) in &self.entries {
            v[i] = g;
        }
        v
    }

    /// Overwrite constrained entries of `x` with their prescribed values.
    pub fn impose(&self, x: &mut [f64]) {
        for &(i, g) in &self.entries {
            x[i] = g;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Constraints,
}

impl LinearSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, constraints: Constraints) -> Self {
        LinearSystem {
            matrix,
            rhs,
            constraints,
        }
    }

    /// `rhs - A x` on unconstrained rows, zero on constrained rows. Uses the
    /// matrix as stored, so call it on an eliminated system.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.matrix.mul_vec(x);
        let mut r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        for (i, _) in self.constraints.iter() {
            r[i] = 0.0;
        }
        r
    }
}

/// Symmetric elimination of the Dirichlet constraints: constrained rows and
/// columns are zeroed with a unit diagonal, the right-hand side carries the
/// prescribed values and the column contributions move to the free rows.
/// The sparsity pattern is preserved (eliminated entries become explicit
/// zeros).
pub fn apply_dirichlet(system: LinearSystem) -> Result<LinearSystem> {
    let LinearSystem {
        mut matrix,
        mut rhs,
        constraints,
    } = system;
    let n = matrix.n;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch(format!("rhs has {} entries, matrix is {n}x{n}", rhs.len())));
    }
    if let Some((i, _)) = constraints.iter().find(|&(i, _)| i >= n) {
        return Err(Error::InvalidArgument(format!("constrained node {i} out of range {n}")));
    }
    if constraints.is_empty() {
        return Ok(LinearSystem {
            matrix,
            rhs,
            constraints,
        });
    }
    let mask = constraints.mask(n);
    let lift = constraints.lift(n);
    for i in 0..n {
        let range = matrix.row_ptr[i]..matrix.row_ptr[i + 1];
        if mask[i] {
            for k in range {
                matrix.values[k] = if matrix.col_idx[k] == i { 1.0 } else { 0.0 };
            }
            rhs[i] = lift[i];
        } else {
            for k in range {
                let j = matrix.col_idx[k];
                if mask[j] {
                    rhs[i] -= matrix.values[k] * lift[j];
                    matrix.values[k] = 0.0;
                }
            }
        }
    }
    // a constrained node missing its diagonal in the pattern
    for (i, _) in constraints.iter() {
        if matrix.position(i, i).is_none() {
            let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|r| matrix.row(r).collect()).collect();
            for (c, _) in constraints.iter() {
                if !rows[c].iter().any(|e| e.0 == c) {
                    rows[c].push((c, 1.0));
                    rows[c].sort_unstable_by_key(|e| e.0);
                }
            }
            matrix = CsrMatrix::from_rows(rows, matrix.symmetric);
            break;
        }
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        constraints,
    })
}
