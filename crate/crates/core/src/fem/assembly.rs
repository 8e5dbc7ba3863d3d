//! P1 assembly on a fixed set of triangles.
//!
//! Coefficients are piecewise constant per cell (one-point quadrature at the
//! centroid); local stiffness and mass matrices use the exact P1 formulas.

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::geometry::{Mesh, TriangleGeometry};

/// Precomputed sparsity pattern and scatter slots for repeated assembly over
/// the same triangles. Works for the whole mesh or any subset of cells with a
/// local node numbering.
#[derive(Debug, Clone)]
pub struct Assembler {
    n: usize,
    /// Global ids of the assembled cells, used to index coefficient fields.
    cells: Vec<usize>,
    /// Local node ids of each assembled cell.
    local: Vec<[usize; 3]>,
    geometry: Vec<TriangleGeometry>,
    pattern: CsrMatrix,
    slots: Vec<[usize; 9]>,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let cells: Vec<usize> = (0..mesh.n_triangles()).collect();
        Self::on_cells(mesh, &cells, mesh.n_nodes(), Some)
    }

    /// Assembler over `cells` with `node_map` sending global node ids to local
    /// ids in `0..n`.
    pub fn on_cells(
        mesh: &Mesh,
        cells: &[usize],
        n: usize,
        node_map: impl Fn(usize) -> Option<usize>,
    ) -> Result<Self> {
        let mut local = Vec::with_capacity(cells.len());
        let mut geometry = Vec::with_capacity(cells.len());
        for &t in cells {
            geometry.push(mesh.geometry(t)?);
            let tri = mesh.triangles[t];
            let mut l = [0usize; 3];
            for k in 0..3 {
                l[k] = node_map(tri[k]).filter(|&i| i < n).ok_or_else(|| {
                    Error::DimensionMismatch(format!("node {} of cell {t} has no local index", tri[k]))
                })?;
            }
            local.push(l);
        }
        let mut triplets = Vec::with_capacity(9 * local.len());
        for tri in &local {
            for &a in tri {
                for &b in tri {
                    triplets.push((a, b, 0.0));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(n, &triplets, true)?;
        let slots = local
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for (a, &ra) in tri.iter().enumerate() {
                    for (b, &rb) in tri.iter().enumerate() {
                        s[3 * a + b] = pattern.position(ra, rb).expect("pattern entry");
                    }
                }
                s
            })
            .collect();
        Ok(Assembler {
            n,
            cells: cells.to_vec(),
            local,
            geometry,
            pattern,
            slots,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn geometry(&self) -> &[TriangleGeometry] {
        &self.geometry
    }

    /// `sum_cells stiff[c] * K_c + mass[c] * M_c`, coefficients indexed by
    /// global cell id. Either field may be omitted.
    pub fn weighted(&self, stiff: Option<&[f64]>, mass: Option<&[f64]>) -> CsrMatrix {
        let mut m = self.pattern.clone();
        for (k, slots) in self.slots.iter().enumerate() {
            let cell = self.cells[k];
            let g = &self.geometry[k];
            let ks = stiff.map_or(0.0, |s| s[cell]);
            let ms = mass.map_or(0.0, |s| s[cell]);
            for a in 0..3 {
                for b in 0..3 {
                    let mut v = 0.0;
                    if ks != 0.0 {
                        v += ks * g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
                    }
                    if ms != 0.0 {
                        v += ms * g.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    }
                    m.values[slots[3 * a + b]] += v;
                }
            }
        }
        m
    }

    pub fn stiffness(&self, coeff: &[f64]) -> CsrMatrix {
        self.weighted(Some(coeff), None)
    }

    pub fn mass(&self, coeff: &[f64]) -> CsrMatrix {
        self.weighted(None, Some(coeff))
    }

    /// Load vector of a piecewise-constant source: `f[c] * area / 3` per node.
    pub fn load(&self, source: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, tri) in self.local.iter().enumerate() {
            let v = source[self.cells[k]] * self.geometry[k].area / 3.0;
            for &a in tri {
                out[a] += v;
            }
        }
        out
    }

    /// `sum_c capacity[c] (u_c . grad T_old) * area / 3` per node, with the
    /// gradient of the local P1 interpolant of `t_old` (indexed by local node).
    pub fn convection(&self, capacity: &[f64], velocity: &[[f64; 2]], t_old: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, tri) in self.local.iter().enumerate() {
            let cell = self.cells[k];
            let u = velocity[cell];
            if u[0] == 0.0 && u[1] == 0.0 {
                continue;
            }
            let g = &self.geometry[k];
            let mut grad = [0.0; 2];
            for (a, &n) in tri.iter().enumerate() {
                grad[0] += g.grad[a][0] * t_old[n];
                grad[1] += g.grad[a][1] * t_old[n];
            }
            let v = capacity[cell] * (u[0] * grad[0] + u[1] * grad[1]) * g.area / 3.0;
            for &a in tri {
                out[a] += v;
            }
        }
        out
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("{name} has {got} entries, mesh needs {want}")));
    }
    Ok(())
}

pub fn assemble_stiffness(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix> {
    check_len("coefficient", coeff.len(), mesh.n_triangles())?;
    Ok(Assembler::new(mesh)?.stiffness(coeff))
}

pub fn assemble_weighted_mass(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix> {
    check_len("coefficient", coeff.len(), mesh.n_triangles())?;
    Ok(Assembler::new(mesh)?.mass(coeff))
}

pub fn assemble_convection_rhs(
    mesh: &Mesh,
    capacity: &[f64],
    velocity: &[[f64; 2]],
    t_old: &[f64],
) -> Result<Vec<f64>> {
    check_len("capacity", capacity.len(), mesh.n_triangles())?;
    check_len("velocity", velocity.len(), mesh.n_triangles())?;
    check_len("temperature", t_old.len(), mesh.n_nodes())?;
    Ok(Assembler::new(mesh)?.convection(capacity, velocity, t_old))
}
