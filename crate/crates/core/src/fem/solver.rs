//! Direct SPD solver: reverse Cuthill-McKee ordering followed by an envelope
//! (skyline) Cholesky factorization.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fem::sparse::{norm2, CsrMatrix};

/// Pivots below this fraction of the original diagonal are treated as a
/// loss of positive definiteness.
const PIVOT_TOLERANCE: f64 = 1e-14;

/// Relative residual required of [`solve_spd`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Reverse Cuthill-McKee permutation (`perm[new] = old`) of the nonzero
/// off-diagonal graph of `a`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).filter(|&(j, v)| j != i && v != 0.0).map(|(j, _)| j).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    let bfs_levels = |start: usize, visited: &[bool]| -> Vec<Vec<usize>> {
        let mut seen = visited.to_vec();
        seen[start] = true;
        let mut levels = vec![vec![start]];
        loop {
            let mut next = Vec::new();
            for &u in levels.last().unwrap() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    };

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let mut depth = bfs_levels(start, &visited).len();
        for _ in 0..4 {
            let levels = bfs_levels(start, &visited);
            let cand = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&i| (degree[i], i))
                .unwrap();
            let d = bfs_levels(cand, &visited).len();
            if d > depth {
                depth = d;
                start = cand;
            } else {
                break;
            }
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        let mut nbrs = Vec::new();
        while let Some(u) = queue.pop_front() {
            order.push(u);
            nbrs.clear();
            nbrs.extend(adj[u].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (c, v) in a.row(old) {
                if v != 0.0 {
                    let j = inv[c];
                    if j < i && j < first[i] {
                        first[i] = j;
                    }
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0usize);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut l = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for old in 0..n {
            let i = inv[old];
            for (c, v) in a.row(old) {
                let j = inv[c];
                if j <= i && v != 0.0 {
                    l[start[i] + j - first[i]] = v;
                }
                if j == i {
                    diag[i] = v;
                }
            }
        }
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = l[si + j - fi];
                let ri = &l[si + k0 - fi..si + j - fi];
                let rj = &l[start[j] + k0 - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                l[si + j - fi] = s / l[start[j + 1] - 1];
            }
            let row = &l[si..si + i - fi];
            let d = l[si + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > PIVOT_TOLERANCE * diag[i].abs()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    row: perm[i],
                    pivot: d,
                });
            }
            l[si + i - fi] = d.sqrt();
        }
        Ok(SpdFactor {
            n,
            perm,
            inv,
            first,
            start,
            l,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let row = &self.l[si..si + i - fi];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.l[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] /= self.l[si + i - fi];
            let xi = y[i];
            if xi != 0.0 {
                for (k, &lik) in self.l[si..si + i - fi].iter().enumerate() {
                    y[fi + k] -= lik * xi;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (old, &new) in self.inv.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve with `steps` rounds of iterative refinement against `a`; returns
    /// the solution and its relative residual.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64], steps: usize) -> (Vec<f64>, f64) {
        let bnorm = norm2(b);
        let mut x = self.solve(b);
        if bnorm == 0.0 {
            return (x, 0.0);
        }
        let mut rel = relative_residual(a, &x, b, bnorm);
        for _ in 0..steps {
            if rel <= RESIDUAL_TOLERANCE * 1e-3 {
                break;
            }
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = self.solve(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let cand_rel = relative_residual(a, &cand, b, bnorm);
            if cand_rel < rel {
                x = cand;
                rel = cand_rel;
            } else {
                break;
            }
        }
        (x, rel)
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
    r / bnorm
}

/// Solve `A x = b` for symmetric positive definite `A`; fails unless the
/// relative residual reaches [`RESIDUAL_TOLERANCE`].
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n {
        return Err(Error::DimensionMismatch(format!("rhs has {} entries, matrix is {}", b.len(), a.n)));
    }
    let f = SpdFactor::new(a)?;
    let (x, rel) = f.solve_refined(a, b, 3);
    if !(rel <= RESIDUAL_TOLERANCE) {
        return Err(Error::SolverFailure { residual: rel });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble_stiffness;
    use crate::fem::dirichlet::{apply_dirichlet, Constraints, LinearSystem};
    use crate::geometry::build_fine_mesh;
    use proptest::prelude::*;

    #[test]
    fn identity_and_diagonal() {
        let b = vec![3.0, -1.0, 2.0];
        assert_eq!(solve_spd(&CsrMatrix::identity(3), &b).unwrap(), b);
        let d = CsrMatrix::from_diagonal(&[2.0, 4.0]);
        let x = solve_spd(&d, &[2.0, 4.0]).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn indefinite_is_rejected() {
        let d = CsrMatrix::from_diagonal(&[2.0, -1.0]);
        assert!(matches!(solve_spd(&d, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { row: 1, .. })));
    }

    #[test]
    fn manufactured_xy_is_discrete_harmonic() {
        let m = build_fine_mesh(9, 7, 1.0, 1.0).unwrap();
        let k = assemble_stiffness(&m, &vec![1.0; m.n_triangles()]).unwrap();
        let exact: Vec<f64> = m.nodes.iter().map(|p| p[0] * p[1]).collect();
        let c = Constraints::new((0..m.n_nodes()).filter(|&n| m.is_boundary_node(n)).map(|n| (n, exact[n]))).unwrap();
        let sys = apply_dirichlet(LinearSystem::new(k, vec![0.0; m.n_nodes()], c)).unwrap();
        let x = solve_spd(&sys.matrix, &sys.rhs).unwrap();
        for (a, b) in x.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let m = build_fine_mesh(6, 3, 1.0, 1.0).unwrap();
        let k = assemble_stiffness(&m, &vec![1.0; m.n_triangles()]).unwrap();
        let mut p = reverse_cuthill_mckee(&k);
        p.sort_unstable();
        assert_eq!(p, (0..m.n_nodes()).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn random_spd_systems(seed in proptest::collection::vec(-1.0f64..1.0, 36), rhs in proptest::collection::vec(-5.0f64..5.0, 6)) {
            // B^T B + I is SPD
            let n = 6;
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let mut s = if i == j { 1.0 } else { 0.0 };
                    for k in 0..n {
                        s += seed[k * n + i] * seed[k * n + j];
                    }
                    t.push((i, j, s));
                }
            }
            let a = CsrMatrix::from_triplets(n, &t, true).unwrap();
            let x = solve_spd(&a, &rhs).unwrap();
            let ax = a.mul_vec(&x);
            for (l, r) in ax.iter().zip(&rhs) {
                prop_assert!((l - r).abs() < 1e-9);
            }
        }
    }
}
