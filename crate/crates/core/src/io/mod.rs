//! File formats: VTK snapshots, CSV error tables, the offline basis cache
//! and binary trajectories.

pub mod cache;
pub mod table;
pub mod trajectory;
pub mod vtk;

pub use cache::{load_basis_cache, save_basis_cache, setup_checksum};
pub use table::{read_error_csv, read_series_csv, write_error_csv, write_series_csv, TableRow};
pub use trajectory::{read_trajectory, read_trajectory_meta, write_trajectory, write_trajectory_with};
pub use vtk::write_fields_vtk;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}
