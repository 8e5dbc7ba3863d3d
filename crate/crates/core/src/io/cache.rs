//! Binary cache of the offline stage.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "FROSTMSB"
//! version  u32
//! setup    32 bytes SHA-256 of the mesh, coarse grid, layers, pipes and T_p
//! m_max    u64
//! n_c      u64      neighborhoods
//! n_p      u64      pipe bases
//! n_fine   u64
//! regularized u64
//! temperature, then pressure: for each neighborhood
//!     count u64, eigenvalues f64 x count, then count vectors
//! pipe bases: n_p x (owner u64, vector)
//! trailer  32 bytes SHA-256 of everything above
//! ```
//!
//! A vector is `nnz u64, indices u64 x nnz, values f64 x nnz`.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::SparseVector;
use crate::geometry::{CoarseGrid, Mesh, PipeLayout};
use crate::materials::MaterialField;
use crate::offline::OfflineBases;

pub const MAGIC: &[u8; 8] = b"FROSTMSB";
pub const VERSION: u32 = 1;

/// Digest of everything the offline bases depend on.
pub fn setup_checksum(
    mesh: &Mesh,
    coarse: &CoarseGrid,
    materials: &MaterialField,
    pipes: &PipeLayout,
    pipe_temperature: f64,
) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in [mesh.nx, mesh.ny, coarse.nx, coarse.ny] {
        h.update((v as u64).to_le_bytes());
    }
    for v in [mesh.lx, mesh.ly, pipe_temperature] {
        h.update(v.to_le_bytes());
    }
    h.update((materials.cell_layer.len() as u64).to_le_bytes());
    for &l in &materials.cell_layer {
        h.update((l as u32).to_le_bytes());
    }
    for l in &materials.layers {
        h.update(l.k_plus.to_le_bytes());
        h.update(l.mobility.to_le_bytes());
    }
    for nodes in &pipes.pipe_nodes {
        h.update((nodes.len() as u64).to_le_bytes());
        for &n in nodes {
            h.update((n as u64).to_le_bytes());
        }
    }
    h.finalize().into()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn vector(&mut self, v: &SparseVector) {
        self.u64(v.indices.len());
        for &i in &v.indices {
            self.u64(i);
        }
        self.f64s(&v.values);
    }
}

pub fn save_basis_cache(path: &Path, bases: &OfflineBases, checksum: &[u8; 32]) -> Result<()> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    w.0.extend_from_slice(checksum);
    for v in [
        bases.m_max,
        bases.n_neighborhoods(),
        bases.pipe.len(),
        bases.n_fine,
        bases.regularized,
    ] {
        w.u64(v);
    }
    for (sets, values) in [
        (&bases.temperature, &bases.temperature_eigenvalues),
        (&bases.pressure, &bases.pressure_eigenvalues),
    ] {
        for (set, vals) in sets.iter().zip(values) {
            w.u64(set.len());
            w.f64s(vals);
            for v in set {
                w.vector(v);
            }
        }
    }
    for (owner, v) in &bases.pipe {
        w.u64(*owner);
        w.vector(v);
    }
    let digest: [u8; 32] = Sha256::digest(&w.0).into();
    w.0.extend_from_slice(&digest);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, &w.0).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::Corrupt("basis cache ends early".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<usize> {
        let b = self.take(8)?;
        let v = u64::from_le_bytes(b.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Corrupt("basis cache count overflows".into()))
    }
    /// A count that must fit in the remaining bytes at `unit` bytes each.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        if n.saturating_mul(unit) > self.data.len() - self.pos {
            return Err(Error::Corrupt("basis cache ends early".into()));
        }
        Ok(n)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n * 8)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn vector(&mut self, n_fine: usize) -> Result<SparseVector> {
        let nnz = self.count(16)?;
        let mut indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let i = self.u64()?;
            if i >= n_fine {
                return Err(Error::Corrupt(format!("basis index {i} outside {n_fine} nodes")));
            }
            indices.push(i);
        }
        Ok(SparseVector {
            indices,
            values: self.f64s(nnz)?,
        })
    }
}

/// Load a cache written by [`save_basis_cache`], rejecting it unless its
/// setup checksum equals `checksum`.
pub fn load_basis_cache(path: &Path, checksum: &[u8; 32]) -> Result<OfflineBases> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.len() < MAGIC.len() + 4 || &data[..8] != MAGIC {
        return Err(Error::CacheInvalid(format!("{} is not a basis cache", path.display())));
    }
    let version = u32::from_le_bytes(data[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::CacheInvalid(format!(
            "cache version {version}, this build reads version {VERSION}"
        )));
    }
    if data.len() < 12 + 32 + 32 {
        return Err(Error::Corrupt("basis cache ends early".into()));
    }
    let (body, trailer) = data.split_at(data.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(Error::Corrupt(format!("{}: content digest mismatch", path.display())));
    }
    if &body[12..44] != checksum {
        return Err(Error::CacheInvalid(
            "cache was built for a different mesh, coarse grid, material layout or pipe setup".into(),
        ));
    }
    let mut r = Reader { data: body, pos: 44 };
    let m_max = r.u64()?;
    let n_c = r.u64()?;
    let n_p = r.u64()?;
    let n_fine = r.u64()?;
    let regularized = r.u64()?;
    let mut fields = Vec::new();
    for _ in 0..2 {
        let mut sets = Vec::with_capacity(n_c.min(body.len()));
        let mut values = Vec::with_capacity(n_c.min(body.len()));
        for _ in 0..n_c {
            let m = r.count(8)?;
            values.push(r.f64s(m)?);
            sets.push((0..m).map(|_| r.vector(n_fine)).collect::<Result<Vec<_>>>()?);
        }
        fields.push((sets, values));
    }
    let mut pipe = Vec::with_capacity(n_p.min(body.len()));
    for _ in 0..n_p {
        let owner = r.u64()?;
        if owner >= n_c {
            return Err(Error::Corrupt(format!("pipe basis owner {owner} outside {n_c} neighborhoods")));
        }
        pipe.push((owner, r.vector(n_fine)?));
    }
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes in basis cache".into()));
    }
    let (pressure, pressure_eigenvalues) = fields.pop().expect("two fields");
    let (temperature, temperature_eigenvalues) = fields.pop().expect("two fields");
    Ok(OfflineBases {
        n_fine,
        m_max,
        temperature,
        pressure,
        pipe,
        temperature_eigenvalues,
        pressure_eigenvalues,
        regularized,
    })
}
