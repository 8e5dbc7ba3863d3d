//! Offline multiscale stage: snapshot spaces of local harmonic extensions,
//! local spectral problems, partition-of-unity bases, pipe bases and the
//! stacked projection operators.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{solve_dense_generalized_eig, Assembler, CsrMatrix, SparseVector, SpdFactor};
use crate::geometry::{CoarseGrid, Mesh, Neighborhood, NeighborhoodMap};
use crate::materials::MaterialField;

/// Assembly on the cells of one neighborhood, in its local node order.
#[derive(Debug, Clone)]
pub struct LocalDomain<'a> {
    pub neighborhood: &'a Neighborhood,
    pub assembler: Assembler,
}

impl<'a> LocalDomain<'a> {
    pub fn new(mesh: &Mesh, nb: &'a Neighborhood) -> Result<Self> {
        let assembler = Assembler::on_cells(mesh, &nb.triangles, nb.n_nodes(), |n| nb.local_index(mesh, n))?;
        Ok(LocalDomain {
            neighborhood: nb,
            assembler,
        })
    }

    pub fn n(&self) -> usize {
        self.neighborhood.n_nodes()
    }

    /// Largest coefficient over the neighborhood's cells.
    fn coefficient_scale(&self, coeff: &[f64]) -> f64 {
        self.neighborhood
            .triangles
            .iter()
            .map(|&t| coeff[t])
            .fold(0.0, f64::max)
    }

    /// Stiffness and mass weighted by `coeff / max(coeff)`. The scaling
    /// leaves harmonic extensions and generalized eigenpairs unchanged.
    pub fn normalized_operators(&self, coeff: &[f64]) -> Result<(CsrMatrix, CsrMatrix)> {
        let scale = self.coefficient_scale(coeff);
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coefficient vanishes on neighborhood {}",
                self.neighborhood.vertex
            )));
        }
        Ok((
            self.assembler.stiffness(coeff).scaled(1.0 / scale),
            self.assembler.mass(coeff).scaled(1.0 / scale),
        ))
    }

    fn local_of(&self, mesh: &Mesh, nodes: &[usize]) -> Vec<usize> {
        nodes
            .iter()
            .map(|&n| self.neighborhood.local_index(mesh, n).expect("node of neighborhood"))
            .collect()
    }
}

/// Harmonic extensions of the discrete deltas at the boundary nodes of a
/// neighborhood. Vectors are dense in the local node order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSpace {
    pub omega: usize,
    /// Local index of the boundary node each snapshot is attached to.
    pub boundary: Vec<usize>,
    pub snapshots: Vec<Vec<f64>>,
}

impl SnapshotSpace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Largest `|K phi|` over interior rows and snapshots.
    pub fn harmonicity_residual(&self, stiffness: &CsrMatrix, interior: &[usize]) -> f64 {
        let mut worst: f64 = 0.0;
        for s in &self.snapshots {
            let ks = stiffness.mul_vec(s);
            for &i in interior {
                worst = worst.max(ks[i].abs());
            }
        }
        worst
    }
}

/// Snapshot space on `nb` for the per-cell coefficient `coeff` (indexed by
/// global cell id).
pub fn compute_snapshots(mesh: &Mesh, nb: &Neighborhood, coeff: &[f64]) -> Result<SnapshotSpace> {
    let local = LocalDomain::new(mesh, nb)?;
    let (k, _) = local.normalized_operators(coeff)?;
    snapshots_with(&local, mesh, &k)
}

fn snapshots_with(local: &LocalDomain, mesh: &Mesh, k: &CsrMatrix) -> Result<SnapshotSpace> {
    let nb = local.neighborhood;
    if nb.interior.is_empty() {
        return Err(Error::InvalidArgument(format!("neighborhood {} has no interior node", nb.vertex)));
    }
    let interior = local.local_of(mesh, &nb.interior);
    let boundary = local.local_of(mesh, &nb.boundary);
    let mut slot = vec![usize::MAX; local.n()];
    for (k, &i) in interior.iter().enumerate() {
        slot[i] = k;
    }
    let factor = SpdFactor::new(&k.submatrix(&interior))?;
    let mut snapshots = Vec::with_capacity(boundary.len());
    for &b in &boundary {
        let mut rhs = vec![0.0; interior.len()];
        for (c, v) in k.row(b) {
            if slot[c] != usize::MAX {
                rhs[slot[c]] = -v;
            }
        }
        let xi = factor.solve(&rhs);
        let mut s = vec![0.0; local.n()];
        s[b] = 1.0;
        for (k, &i) in interior.iter().enumerate() {
            s[i] = xi[k];
        }
        snapshots.push(s);
    }
    Ok(SnapshotSpace {
        omega: nb.vertex,
        boundary,
        snapshots,
    })
}

/// Lowest eigenpairs of the snapshot-projected spectral problem, lifted
/// back to local nodal vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub regularized: bool,
}

pub fn solve_spectral(
    mesh: &Mesh,
    nb: &Neighborhood,
    snapshots: &SnapshotSpace,
    coeff: &[f64],
    m: usize,
) -> Result<SpectralBasis> {
    let local = LocalDomain::new(mesh, nb)?;
    let (k, s) = local.normalized_operators(coeff)?;
    spectral_with(snapshots, &k, &s, m)
}

fn spectral_with(snapshots: &SnapshotSpace, k: &CsrMatrix, s: &CsrMatrix, m: usize) -> Result<SpectralBasis> {
    let j = snapshots.len();
    if m > j {
        return Err(Error::InvalidArgument(format!(
            "neighborhood {} has {j} snapshots, {m} bases requested",
            snapshots.omega
        )));
    }
    let n = k.n;
    let phi = DMatrix::from_fn(n, j, |r, c| snapshots.snapshots[c][r]);
    let mut kphi = DMatrix::zeros(n, j);
    let mut sphi = DMatrix::zeros(n, j);
    for c in 0..j {
        let col = &snapshots.snapshots[c];
        let kc = k.mul_vec(col);
        let sc = s.mul_vec(col);
        for r in 0..n {
            kphi[(r, c)] = kc[r];
            sphi[(r, c)] = sc[r];
        }
    }
    let a_red = phi.transpose() * kphi;
    let s_red = phi.transpose() * sphi;
    let a_red = (&a_red + a_red.transpose()) * 0.5;
    let s_red = (&s_red + s_red.transpose()) * 0.5;
    let eig = solve_dense_generalized_eig(&a_red, &s_red, m)?;
    let vectors = eig
        .vectors
        .iter()
        .map(|x| (&phi * x).iter().copied().collect())
        .collect();
    Ok(SpectralBasis {
        values: eig.values,
        vectors,
        regularized: eig.regularized,
    })
}

/// Coarse bilinear hat functions sampled at the fine nodes of each
/// neighborhood (local node order).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    pub values: Vec<Vec<f64>>,
}

pub fn build_pou(mesh: &Mesh, coarse: &CoarseGrid, neighborhoods: &NeighborhoodMap) -> PartitionOfUnity {
    let values = neighborhoods
        .iter()
        .map(|nb| {
            let (ic, jc) = coarse.vertex_ij(nb.vertex);
            let (ci, cj) = (ic * coarse.rx, jc * coarse.ry);
            nb.nodes
                .iter()
                .map(|&n| {
                    let (i, j) = mesh.node_ij(n);
                    let wx = 1.0 - i.abs_diff(ci) as f64 / coarse.rx as f64;
                    let wy = 1.0 - j.abs_diff(cj) as f64 / coarse.ry as f64;
                    wx.max(0.0) * wy.max(0.0)
                })
                .collect()
        })
        .collect();
    PartitionOfUnity { values }
}

impl PartitionOfUnity {
    /// Sum of all hat functions at every fine node.
    pub fn sum(&self, mesh: &Mesh, neighborhoods: &NeighborhoodMap) -> Vec<f64> {
        let mut total = vec![0.0; mesh.n_nodes()];
        for (nb, chi) in neighborhoods.iter().zip(&self.values) {
            for (&n, &c) in nb.nodes.iter().zip(chi) {
                total[n] += c;
            }
        }
        total
    }
}

/// `psi * chi` as a global sparse vector; entries are kept wherever `chi`
/// is nonzero.
pub fn build_offline_basis(nb: &Neighborhood, psi: &[f64], chi: &[f64]) -> SparseVector {
    let mut idx = Vec::new();
    let mut val = Vec::new();
    for ((&n, &p), &c) in nb.nodes.iter().zip(psi).zip(chi) {
        if c != 0.0 {
            idx.push(n);
            val.push(p * c);
        }
    }
    SparseVector::new(idx, val)
}

/// Local solution of the pipe problem (zero on the neighborhood boundary,
/// `t_pipe` at its pipe nodes) before multiplication by the hat function.
pub fn solve_pipe_problem(mesh: &Mesh, nb: &Neighborhood, coeff: &[f64], t_pipe: f64) -> Result<Vec<f64>> {
    let local = LocalDomain::new(mesh, nb)?;
    let (k, _) = local.normalized_operators(coeff)?;
    pipe_with(&local, mesh, &k, t_pipe)
}

fn pipe_with(local: &LocalDomain, mesh: &Mesh, k: &CsrMatrix, t_pipe: f64) -> Result<Vec<f64>> {
    let nb = local.neighborhood;
    if !nb.has_pipe() {
        return Err(Error::InvalidArgument(format!("neighborhood {} contains no pipe", nb.vertex)));
    }
    let n = local.n();
    let mut value = vec![None; n];
    for l in local.local_of(mesh, &nb.boundary) {
        value[l] = Some(0.0);
    }
    // a pipe on the neighborhood boundary keeps its temperature
    for l in local.local_of(mesh, &nb.pipe_nodes) {
        value[l] = Some(t_pipe);
    }
    let free: Vec<usize> = (0..n).filter(|&l| value[l].is_none()).collect();
    let mut x: Vec<f64> = value.iter().map(|v| v.unwrap_or(0.0)).collect();
    if free.is_empty() {
        return Ok(x);
    }
    let mut rhs = vec![0.0; free.len()];
    for (r, &i) in free.iter().enumerate() {
        for (c, v) in k.row(i) {
            if let Some(g) = value[c] {
                rhs[r] -= v * g;
            }
        }
    }
    let factor = SpdFactor::new(&k.submatrix(&free))?;
    let xf = factor.solve(&rhs);
    for (r, &i) in free.iter().enumerate() {
        x[i] = xf[r];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Spectral basis with its rank in the neighborhood.
    Offline(usize),
    Pipe,
    /// Online basis of the given generation (1-based within an event).
    Online(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub omega: usize,
    pub kind: BasisKind,
    pub vector: SparseVector,
}

impl Basis {
    pub fn label(&self) -> String {
        match self.kind {
            BasisKind::Offline(j) => format!("offline basis {j} of neighborhood {}", self.omega),
            BasisKind::Pipe => format!("pipe basis of neighborhood {}", self.omega),
            BasisKind::Online(l) => format!("online basis (generation {l}) of neighborhood {}", self.omega),
        }
    }
}

/// Ordered basis list of one field; the rows of its projection matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldSpace {
    pub bases: Vec<Basis>,
}

impl FieldSpace {
    /// Every fine nodal basis vector: the full fine space.
    pub fn identity(n: usize) -> Self {
        FieldSpace {
            bases: (0..n)
                .map(|i| Basis {
                    omega: i,
                    kind: BasisKind::Offline(0),
                    vector: SparseVector::unit(i),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn count(&self, pred: impl Fn(BasisKind) -> bool) -> usize {
        self.bases.iter().filter(|b| pred(b.kind)).count()
    }

    pub fn n_online(&self) -> usize {
        self.count(|k| matches!(k, BasisKind::Online(_)))
    }

    pub fn clear_online(&mut self) {
        self.bases.retain(|b| !matches!(b.kind, BasisKind::Online(_)));
    }

    pub fn projection(&self, n_fine: usize) -> Projection {
        Projection {
            n_fine,
            rows: self.bases.iter().map(|b| b.vector.clone()).collect(),
        }
    }
}

/// Row-stacked basis vectors `R`; `R^T c` maps coarse coefficients to fine
/// nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub n_fine: usize,
    pub rows: Vec<SparseVector>,
}

impl Projection {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `R^T c`.
    pub fn prolong(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_fine];
        for (row, &ck) in self.rows.iter().zip(c) {
            if ck != 0.0 {
                for (i, v) in row.iter() {
                    out[i] += v * ck;
                }
            }
        }
        out
    }

    /// `R v`.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.dot(v)).collect()
    }

    /// Dense `R R^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        let dense: Vec<Vec<f64>> = self.rows.iter().map(|r| r.to_dense(self.n_fine)).collect();
        DMatrix::from_fn(n, n, |a, b| self.rows[a].dot(&dense[b]))
    }
}

/// Offline bases for every neighborhood, computed once for `m_max` and
/// truncated to smaller counts on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineBases {
    pub n_fine: usize,
    pub m_max: usize,
    pub temperature: Vec<Vec<SparseVector>>,
    pub pressure: Vec<Vec<SparseVector>>,
    /// `(neighborhood, basis)` for each neighborhood containing pipe nodes.
    pub pipe: Vec<(usize, SparseVector)>,
    pub temperature_eigenvalues: Vec<Vec<f64>>,
    pub pressure_eigenvalues: Vec<Vec<f64>>,
    /// Spectral problems whose mass matrix needed a diagonal shift.
    pub regularized: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleSpace {
    pub n_fine: usize,
    pub offline: usize,
    pub temperature: FieldSpace,
    pub pressure: FieldSpace,
}

impl MultiscaleSpace {
    /// Full fine space for both fields.
    pub fn full(n_fine: usize) -> Self {
        MultiscaleSpace {
            n_fine,
            offline: 0,
            temperature: FieldSpace::identity(n_fine),
            pressure: FieldSpace::identity(n_fine),
        }
    }
}

struct LocalBases {
    t_vectors: Vec<SparseVector>,
    t_values: Vec<f64>,
    p_vectors: Vec<SparseVector>,
    p_values: Vec<f64>,
    pipe: Option<SparseVector>,
    regularized: usize,
}

/// Offline stage over all neighborhoods: `m_max` spectral bases per field
/// from liquid-phase coefficients, plus a pipe basis wherever pipe nodes
/// fall inside a neighborhood.
pub fn build_offline(
    mesh: &Mesh,
    coarse: &CoarseGrid,
    neighborhoods: &NeighborhoodMap,
    materials: &MaterialField,
    pipe_temperature: f64,
    m_max: usize,
) -> Result<OfflineBases> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("at least one offline basis is required".into()));
    }
    let pou = build_pou(mesh, coarse, neighborhoods);
    let k_plus = materials.liquid_conductivity();
    let mobility = materials.liquid_mobility();
    let locals: Vec<LocalBases> = neighborhoods
        .neighborhoods
        .par_iter()
        .zip(pou.values.par_iter())
        .map(|(nb, chi)| -> Result<LocalBases> {
            let local = LocalDomain::new(mesh, nb)?;
            let mut regularized = 0;
            let mut field = |coeff: &[f64]| -> Result<(Vec<SparseVector>, Vec<f64>)> {
                let (k, s) = local.normalized_operators(coeff)?;
                let snaps = snapshots_with(&local, mesh, &k)?;
                let spec = spectral_with(&snaps, &k, &s, m_max)?;
                regularized += spec.regularized as usize;
                let vecs = spec.vectors.iter().map(|psi| build_offline_basis(nb, psi, chi)).collect();
                Ok((vecs, spec.values))
            };
            let (t_vectors, t_values) = field(&k_plus)?;
            let (p_vectors, p_values) = field(&mobility)?;
            let pipe = if nb.has_pipe() {
                let (k, _) = local.normalized_operators(&k_plus)?;
                let psi = pipe_with(&local, mesh, &k, pipe_temperature)?;
                Some(build_offline_basis(nb, &psi, chi))
            } else {
                None
            };
            Ok(LocalBases {
                t_vectors,
                t_values,
                p_vectors,
                p_values,
                pipe,
                regularized,
            })
        })
        .collect::<Result<_>>()?;
    let mut out = OfflineBases {
        n_fine: mesh.n_nodes(),
        m_max,
        temperature: Vec::with_capacity(locals.len()),
        pressure: Vec::with_capacity(locals.len()),
        pipe: Vec::new(),
        temperature_eigenvalues: Vec::with_capacity(locals.len()),
        pressure_eigenvalues: Vec::with_capacity(locals.len()),
        regularized: 0,
    };
    for (omega, l) in locals.into_iter().enumerate() {
        out.temperature.push(l.t_vectors);
        out.pressure.push(l.p_vectors);
        out.temperature_eigenvalues.push(l.t_values);
        out.pressure_eigenvalues.push(l.p_values);
        if let Some(p) = l.pipe {
            out.pipe.push((omega, p));
        }
        out.regularized += l.regularized;
    }
    Ok(out)
}

impl OfflineBases {
    pub fn n_neighborhoods(&self) -> usize {
        self.temperature.len()
    }

    /// Multiscale space with the first `m` spectral bases per neighborhood,
    /// ordered by neighborhood, then rank, then the pipe bases.
    pub fn space(&self, m: usize) -> Result<MultiscaleSpace> {
        if m == 0 || m > self.m_max {
            return Err(Error::InvalidArgument(format!(
                "offline basis count {m} outside 1..={}",
                self.m_max
            )));
        }
        let field = |sets: &[Vec<SparseVector>]| -> FieldSpace {
            let mut bases = Vec::with_capacity(sets.len() * m);
            for (omega, set) in sets.iter().enumerate() {
                for (j, v) in set.iter().take(m).enumerate() {
                    bases.push(Basis {
                        omega,
                        kind: BasisKind::Offline(j),
                        vector: v.clone(),
                    });
                }
            }
            FieldSpace { bases }
        };
        let mut temperature = field(&self.temperature);
        temperature.bases.extend(self.pipe.iter().map(|(omega, v)| Basis {
            omega: *omega,
            kind: BasisKind::Pipe,
            vector: v.clone(),
        }));
        Ok(MultiscaleSpace {
            n_fine: self.n_fine,
            offline: m,
            temperature,
            pressure: field(&self.pressure),
        })
    }
}

/// `(R_T, R_p)` of a multiscale space.
pub fn assemble_projection(space: &MultiscaleSpace) -> (Projection, Projection) {
    (
        space.temperature.projection(space.n_fine),
        space.pressure.projection(space.n_fine),
    )
}
