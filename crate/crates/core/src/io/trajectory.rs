//! Trajectories as raw little-endian f64 arrays with a text sidecar.
//!
//! `<path>` holds all temperature rows (one row per layer) followed by all
//! pressure rows. `<path>.meta` reads
//!
//! ```text
//! format frostms-trajectory 1
//! layers 81
//! nodes 14641
//! ```
//!
//! Further `key value` lines carry run metadata such as `offline 4`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fine::Trajectory;

const FORMAT: &str = "frostms-trajectory 1";

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory_with(path, traj, &[])
}

/// Like [`write_trajectory`] with extra sidecar entries.
pub fn write_trajectory_with(path: &Path, traj: &Trajectory, extra: &[(&str, String)]) -> Result<()> {
    let (layers, nodes) = (traj.n_layers(), traj.n_nodes());
    if traj.pressure.len() != layers
        || traj.temperature.iter().chain(&traj.pressure).any(|r| r.len() != nodes)
    {
        return Err(Error::DimensionMismatch("trajectory rows differ in length".into()));
    }
    let mut w = super::create(path)?;
    let mut go = || -> std::io::Result<()> {
        for row in traj.temperature.iter().chain(&traj.pressure) {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    let mut text = format!("format {FORMAT}\nlayers {layers}\nnodes {nodes}\n");
    for (k, v) in extra {
        if k.contains(char::is_whitespace) || v.contains('\n') || ["format", "layers", "nodes"].contains(k) {
            return Err(Error::InvalidArgument(format!("bad sidecar entry `{k}`")));
        }
        text.push_str(&format!("{k} {v}\n"));
    }
    std::fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

/// Sidecar entries of a trajectory file.
pub fn read_trajectory_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let meta = meta_path(path);
    let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let entries: BTreeMap<String, String> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let (k, v) = line.trim().split_once(' ').unwrap_or((line.trim(), ""));
            (k.to_string(), v.trim().to_string())
        })
        .collect();
    if entries.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(Error::Corrupt(format!("{}: not a trajectory sidecar", meta.display())));
    }
    Ok(entries)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let entries = read_trajectory_meta(path)?;
    let dim = |k: &str| entries.get(k).and_then(|v| v.parse::<usize>().ok());
    let (layers, nodes) = match (dim("layers"), dim("nodes")) {
        (Some(l), Some(n)) => (l, n),
        _ => {
            return Err(Error::Corrupt(format!(
                "{}: missing layers or nodes",
                meta_path(path).display()
            )))
        }
    };
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if Some(data.len()) != layers.checked_mul(nodes).and_then(|c| c.checked_mul(16)) {
        return Err(Error::Corrupt(format!(
            "{}: {} bytes, expected {layers} x {nodes} x 2 doubles",
            path.display(),
            data.len()
        )));
    }
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut rows = values.chunks(nodes.max(1)).map(<[f64]>::to_vec);
    let temperature = if nodes == 0 { vec![Vec::new(); layers] } else { rows.by_ref().take(layers).collect() };
    let pressure = if nodes == 0 { vec![Vec::new(); layers] } else { rows.collect() };
    Ok(Trajectory { temperature, pressure })
}
