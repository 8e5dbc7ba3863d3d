//! Run orchestration behind the command line: fine runs, the basis cache,
//! multiscale runs, comparisons and sweeps, with their files in one output
//! directory.

use std::path::{Path, PathBuf};

use crate::analysis::{build_error_table, trajectory_errors, ErrorReport, NormOperators};
use crate::config::{Setup, SimulationConfig};
use crate::error::{Error, Result};
use crate::fine::{run_fine_with, SystemState, Trajectory};
use crate::io::{
    load_basis_cache, read_trajectory, read_trajectory_meta, save_basis_cache, setup_checksum, write_error_csv,
    write_fields_vtk, write_series_csv, write_trajectory, write_trajectory_with,
};
use crate::offline::{build_offline, OfflineBases};
use crate::online::{EnrichmentSchedule, MultiscaleRun, MultiscaleSolver};

/// Offline bases computed per neighborhood when the cache is built; smaller
/// counts are prefixes.
pub const DEFAULT_MAX_OFFLINE: usize = 8;

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub dir: PathBuf,
}

impl OutputLayout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputLayout { dir: dir.into() }
    }

    pub fn fine_trajectory(&self) -> PathBuf {
        self.dir.join("fine.bin")
    }

    pub fn basis_cache(&self) -> PathBuf {
        self.dir.join("bases.cache")
    }

    pub fn ms_trajectory(&self, offline: usize, online: usize) -> PathBuf {
        self.dir.join(format!("ms_m{offline}_l{online}.bin"))
    }

    pub fn error_table(&self) -> PathBuf {
        self.dir.join("errors.csv")
    }

    pub fn error_series(&self) -> PathBuf {
        self.dir.join("errors_series.csv")
    }

    pub fn snapshot(&self, prefix: &str, layer: usize) -> PathBuf {
        self.dir.join(format!("{prefix}_{layer:03}.vtk"))
    }
}

fn write_snapshot(setup: &Setup, out: &OutputLayout, prefix: &str, state: &SystemState) -> Result<()> {
    let m = &setup.model;
    write_fields_vtk(
        &out.snapshot(prefix, state.layer),
        &m.mesh,
        &m.materials,
        &state.temperature,
        &state.pressure,
        &format!("{prefix} layer {}", state.layer),
    )
}

/// Fine run; writes the trajectory and the configured VTK snapshots.
pub fn run_fine_to_disk(config: &SimulationConfig, setup: &Setup, out: &OutputLayout) -> Result<Trajectory> {
    let traj = run_fine_with(&setup.model, |state| {
        if config.output.snapshot_layers.contains(&state.layer) {
            write_snapshot(setup, out, "fine", state)?;
        }
        Ok(())
    })?;
    write_trajectory(&out.fine_trajectory(), &traj)?;
    Ok(traj)
}

fn checksum(setup: &Setup) -> [u8; 32] {
    let m = &setup.model;
    setup_checksum(&m.mesh, &setup.coarse, &m.materials, &m.pipes, m.bc.pipe_temperature)
}

/// Compute the offline stage and store it in the cache.
pub fn build_bases(setup: &Setup, out: &OutputLayout, m_max: usize) -> Result<OfflineBases> {
    let m = &setup.model;
    let bases = build_offline(
        &m.mesh,
        &setup.coarse,
        &setup.neighborhoods,
        &m.materials,
        m.bc.pipe_temperature,
        m_max,
    )?;
    save_basis_cache(&out.basis_cache(), &bases, &checksum(setup))?;
    Ok(bases)
}

/// Cached bases when the cache matches this setup and holds at least
/// `m_needed` bases per neighborhood; otherwise rebuild and overwrite it.
pub fn load_or_build_bases(setup: &Setup, out: &OutputLayout, m_needed: usize) -> Result<OfflineBases> {
    let path = out.basis_cache();
    if path.exists() {
        match load_basis_cache(&path, &checksum(setup)) {
            Ok(b) if b.m_max >= m_needed => return Ok(b),
            Ok(_) | Err(Error::CacheInvalid(_)) => {}
            Err(e) => return Err(e),
        }
    }
    build_bases(setup, out, m_needed.max(DEFAULT_MAX_OFFLINE))
}

pub fn schedule_for(config: &SimulationConfig, online: usize, period: usize) -> Result<EnrichmentSchedule> {
    EnrichmentSchedule::new(period, online, config.multiscale.accumulate_online)
}

/// Multiscale run; writes its trajectory (with run metadata) and snapshots.
pub fn run_ms_to_disk(
    config: &SimulationConfig,
    setup: &Setup,
    out: &OutputLayout,
    bases: &OfflineBases,
    offline: usize,
    schedule: EnrichmentSchedule,
) -> Result<MultiscaleRun> {
    let solver = MultiscaleSolver::new(&setup.model, &setup.coarse, &setup.neighborhoods);
    let prefix = format!("ms_m{offline}_l{}", schedule.iterations);
    let run = solver.run_with(bases.space(offline)?, schedule, |state| {
        if config.output.snapshot_layers.contains(&state.layer) {
            write_snapshot(setup, out, &prefix, state)?;
        }
        Ok(())
    })?;
    write_trajectory_with(
        &out.ms_trajectory(offline, schedule.iterations),
        &run.trajectory,
        &[
            ("offline", offline.to_string()),
            ("online", schedule.iterations.to_string()),
            ("period", schedule.period.to_string()),
            ("dof_c", run.final_temperature_dofs.to_string()),
            ("dof_c_pressure", run.final_pressure_dofs.to_string()),
        ],
    )?;
    Ok(run)
}

/// Error reports of stored multiscale trajectories against a stored fine
/// one. Pre-enrichment errors are not stored on disk and stay empty.
pub fn compare_files(setup: &Setup, fine: &Path, runs: &[PathBuf]) -> Result<Vec<ErrorReport>> {
    let norms = NormOperators::new(&setup.model.mesh)?;
    let fine = read_trajectory(fine)?;
    runs.iter()
        .map(|p| {
            let meta = read_trajectory_meta(p)?;
            let get = |k: &str| -> Result<usize> {
                meta.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Corrupt(format!("{}: sidecar lacks `{k}`", p.display())))
            };
            let series = trajectory_errors(&norms, &fine, &read_trajectory(p)?)?;
            Ok(ErrorReport {
                offline: get("offline")?,
                online: get("online")?,
                period: get("period")?,
                dof_c: get("dof_c")?,
                final_errors: series.last().copied().unwrap_or_default(),
                series,
                pre_enrichment: Vec::new(),
            })
        })
        .collect()
}

pub fn write_reports(out: &OutputLayout, reports: &[ErrorReport]) -> Result<()> {
    write_error_csv(&out.error_table(), reports)?;
    write_series_csv(&out.error_series(), reports)
}

/// Fine run, offline stage and every `(offline, online)` combination in
/// one go; writes all trajectories, the cache and both CSV files.
pub fn sweep(
    config: &SimulationConfig,
    setup: &Setup,
    out: &OutputLayout,
    offline: &[usize],
    online: &[usize],
    mut progress: impl FnMut(&str),
) -> Result<Vec<ErrorReport>> {
    if offline.is_empty() || online.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one offline and one online count".into()));
    }
    let fine = run_fine_to_disk(config, setup, out)?;
    progress("fine run done");
    let m_max = offline.iter().copied().max().unwrap_or(1);
    let bases = load_or_build_bases(setup, out, m_max)?;
    progress("offline bases ready");
    let mut runs = Vec::new();
    for &m in offline {
        for &l in online {
            let schedule = schedule_for(config, l, config.multiscale.period)?;
            runs.push(run_ms_to_disk(config, setup, out, &bases, m, schedule)?);
            progress(&format!("multiscale run M = {m}, online = {l} done"));
        }
    }
    let reports = build_error_table(&setup.model.mesh, &fine, &runs.iter().collect::<Vec<_>>())?;
    write_reports(out, &reports)?;
    Ok(reports)
}
