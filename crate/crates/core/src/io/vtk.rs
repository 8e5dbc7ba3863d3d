//! Legacy ASCII VTK unstructured grid.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::materials::MaterialField;

/// Points, triangles, nodal `temperature` and `pressure`, and per-cell
/// `layer` (1-based) and `frozen` (0/1).
pub fn write_fields_vtk(
    path: &Path,
    mesh: &Mesh,
    materials: &MaterialField,
    temperature: &[f64],
    pressure: &[f64],
    title: &str,
) -> Result<()> {
    let n = mesh.n_nodes();
    if temperature.len() != n || pressure.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "fields of length {} and {} on a mesh with {n} nodes",
            temperature.len(),
            pressure.len()
        )));
    }
    let frozen = materials.frozen_mask(mesh, temperature);
    let mut w = super::create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.lines().next().unwrap_or("frostms"))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {n} double")?;
        for p in &mesh.nodes {
            writeln!(w, "{:e} {:e} 0", p[0], p[1])?;
        }
        let nt = mesh.n_triangles();
        writeln!(w, "CELLS {nt} {}", 4 * nt)?;
        for t in &mesh.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        for (name, f) in [("temperature", temperature), ("pressure", pressure)] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in f {
                writeln!(w, "{v:e}")?;
            }
        }
        writeln!(w, "CELL_DATA {nt}")?;
        writeln!(w, "SCALARS layer int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &l in &materials.cell_layer {
            writeln!(w, "{}", l + 1)?;
        }
        writeln!(w, "SCALARS frozen int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &f in &frozen {
            writeln!(w, "{}", u8::from(f))?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
