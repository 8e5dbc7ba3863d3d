use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Matching eigenvectors, normalized so that `x^T S x = 1`.
    pub vectors: Vec<DVector<f64>>,
    /// Whether the mass matrix needed a diagonal shift to factor.
    pub regularized: bool,
}

/// Lowest `m` eigenpairs of the symmetric-definite pencil `A x = lambda S x`.
///
/// Reduces to a standard symmetric problem through the Cholesky factor of
/// `S`. If `S` does not factor, retries once with `1e-12 * trace(S) / dim`
/// added to its diagonal and reports it through `regularized`. Each
/// eigenvector's first component exceeding `1e-10` of its max norm is made
/// positive.
pub fn solve_dense_generalized_eig(a: &DMatrix<f64>, s: &DMatrix<f64>, m: usize) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil shapes {:?} and {:?}",
            a.shape(),
            s.shape()
        )));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!("requested {m} eigenpairs of a {n}x{n} pencil")));
    }
    let (chol, regularized) = match s.clone().cholesky() {
        Some(c) => (c, false),
        None => {
            let shift = 1e-12 * s.trace() / n.max(1) as f64;
            let shifted = s + DMatrix::identity(n, n) * shift;
            let c = shifted
                .cholesky()
                .ok_or_else(|| Error::Decomposition("mass matrix is not positive definite".into()))?;
            (c, true)
        }
    };
    let l = chol.l();
    // C = L^-1 A L^-T
    let la = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Decomposition("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::Decomposition("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(m);
    let mut vectors = Vec::with_capacity(m);
    for &k in order.iter().take(m) {
        let y = eig.eigenvectors.column(k).into_owned();
        let mut x = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Decomposition("singular Cholesky factor".into()))?;
        fix_sign(&mut x);
        values.push(eig.eigenvalues[k]);
        vectors.push(x);
    }
    Ok(GeneralizedEigen {
        values,
        vectors,
        regularized,
    })
}

fn fix_sign(x: &mut DVector<f64>) {
    let scale = x.amax();
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-10 * scale) {
        if *first < 0.0 {
            x.neg_mut();
        }
    }
}
