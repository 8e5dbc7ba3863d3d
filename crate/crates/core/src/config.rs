//! Simulation configuration: a line-based `key = value` file with
//! `[section]` headers.
//!
//! ```text
//! # comment
//! [geometry]
//! nx = 120
//! pipe_centers = 1.2 2.4; 2.27 2.4
//! stripes = 0.0 3; 1.75 2      # y_start layer, layers numbered from 1
//!
//! [layer.1]
//! k_plus = 1.37
//! ```
//!
//! Sections: `geometry`, `phase`, `layer.N`, `time`, `boundary`,
//! `multiscale`, `output`. Every key is optional; an empty file yields the
//! reference ground-freezing setup. `FROSTMS_OUTPUT_DIR` overrides
//! `output.dir`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fine::{BoundaryConditions, Model, SchemeOptions, TimeConfig};
use crate::geometry::{
    build_coarse_grid, build_fine_mesh, build_neighborhoods, default_pipe_centers, locate_pipe_nodes, CoarseGrid,
    LayerStripes, NeighborhoodMap, Point, Side,
};
use crate::materials::{default_layers, LayerProperties, MaterialField, PhaseParams};

pub const OUTPUT_DIR_ENV: &str = "FROSTMS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub coarse_nx: usize,
    pub coarse_ny: usize,
    /// Pipe capture radius; `None` means one fine-cell diagonal.
    pub pipe_radius: Option<f64>,
    pub pipe_centers: Vec<Point>,
    pub stripes: LayerStripes,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            nx: 120,
            ny: 120,
            lx: 12.0,
            ly: 6.0,
            coarse_nx: 24,
            coarse_ny: 12,
            pipe_radius: None,
            pipe_centers: default_pipe_centers(),
            stripes: LayerStripes::default_layers(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiscaleConfig {
    /// Offline bases per neighborhood.
    pub offline: usize,
    /// Online iterations per enrichment event.
    pub online: usize,
    /// Enrich on every `period`-th layer.
    pub period: usize,
    pub accumulate_online: bool,
}

impl Default for MultiscaleConfig {
    fn default() -> Self {
        MultiscaleConfig {
            offline: 4,
            online: 1,
            period: 5,
            accumulate_online: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Layers written as VTK snapshots.
    pub snapshot_layers: Vec<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
            snapshot_layers: vec![0, 80],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub geometry: GeometryConfig,
    pub layers: Vec<LayerProperties>,
    pub phase: PhaseParams,
    pub t_max_days: f64,
    pub n_steps: usize,
    /// Test case the pressure data came from, if not given side by side.
    pub test: Option<u32>,
    pub bc: BoundaryConditions,
    pub scheme: SchemeOptions,
    pub multiscale: MultiscaleConfig,
    pub output: OutputConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            geometry: GeometryConfig::default(),
            layers: default_layers(),
            phase: PhaseParams::default(),
            t_max_days: 25.0,
            n_steps: 80,
            test: Some(1),
            bc: BoundaryConditions::test_case(1).expect("test 1 exists"),
            scheme: SchemeOptions::default(),
            multiscale: MultiscaleConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Mesh, coarse grid, neighborhoods and fine model built from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: Model,
    pub coarse: CoarseGrid,
    pub neighborhoods: NeighborhoodMap,
}

impl SimulationConfig {
    /// Reference setup with the pressure data of test 1 or 2.
    pub fn for_test(test: u32) -> Result<Self> {
        let mut c = SimulationConfig::default();
        c.set_test(test)?;
        Ok(c)
    }

    pub fn set_test(&mut self, test: u32) -> Result<()> {
        self.bc.pressure = BoundaryConditions::test_case(test)?.pressure;
        self.test = Some(test);
        Ok(())
    }

    pub fn time(&self) -> Result<TimeConfig> {
        TimeConfig::from_days(self.t_max_days, self.n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.nx == 0 || g.ny == 0 || !(g.lx > 0.0) || !(g.ly > 0.0) {
            return Err(Error::Config("mesh dimensions must be positive".into()));
        }
        if g.coarse_nx == 0 || g.coarse_ny == 0 || g.nx % g.coarse_nx != 0 || g.ny % g.coarse_ny != 0 {
            return Err(key_error(
                "geometry.coarse_nx",
                format!(
                    "coarse grid {}x{} does not nest in fine grid {}x{}",
                    g.coarse_nx, g.coarse_ny, g.nx, g.ny
                ),
            ));
        }
        if self.layers.is_empty() {
            return Err(Error::Config("at least one layer is required".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate().map_err(|e| key_error(&format!("layer.{}", i + 1), e.to_string()))?;
        }
        g.stripes.validate(self.layers.len())?;
        self.phase.validate()?;
        self.time()?;
        if self.multiscale.period == 0 {
            return Err(key_error("multiscale.period", "must be at least 1".into()));
        }
        if self.multiscale.offline == 0 {
            return Err(key_error("multiscale.offline", "must be at least 1".into()));
        }
        if !self.scheme.convection_sign.is_finite() {
            return Err(key_error("multiscale.convection_sign", "must be finite".into()));
        }
        Ok(())
    }

    /// Validate and build the fine model and the coarse structures.
    pub fn build(&self) -> Result<Setup> {
        self.validate()?;
        let g = &self.geometry;
        let mesh = build_fine_mesh(g.nx, g.ny, g.lx, g.ly)?;
        let coarse = build_coarse_grid(&mesh, g.coarse_nx, g.coarse_ny)?;
        let mut neighborhoods = build_neighborhoods(&mesh, &coarse)?;
        let radius = g.pipe_radius.unwrap_or_else(|| mesh.hx().hypot(mesh.hy()));
        let pipes = if g.pipe_centers.is_empty() {
            crate::geometry::PipeLayout::empty()
        } else {
            locate_pipe_nodes(&mesh, &g.pipe_centers, radius)?
        };
        neighborhoods.attach_pipes(&mesh, &pipes);
        let materials = MaterialField {
            cell_layer: g.stripes.rasterize(&mesh),
            layers: self.layers.clone(),
            phase: self.phase,
        };
        let model = Model::new(mesh, materials, pipes, self.bc.clone(), self.time()?, self.scheme)?;
        Ok(Setup {
            model,
            coarse,
            neighborhoods,
        })
    }

    /// Output directory after applying the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }
}

fn key_error(key: &str, reason: String) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        reason,
    }
}

pub fn parse_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<SimulationConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", lineno + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if entries.insert(key.clone(), (lineno + 1, v.trim().to_string())).is_some() {
            return Err(key_error(&key, "given more than once".into()));
        }
    }

    let mut c = SimulationConfig::default();
    let mut explicit_pressure = Vec::new();
    let mut layer_entries: BTreeMap<usize, Vec<(String, String)>> = BTreeMap::new();
    for (key, (_, value)) in &entries {
        let v = value.as_str();
        match key.as_str() {
            "geometry.nx" => c.geometry.nx = parse(key, v)?,
            "geometry.ny" => c.geometry.ny = parse(key, v)?,
            "geometry.lx" => c.geometry.lx = parse(key, v)?,
            "geometry.ly" => c.geometry.ly = parse(key, v)?,
            "geometry.coarse_nx" => c.geometry.coarse_nx = parse(key, v)?,
            "geometry.coarse_ny" => c.geometry.coarse_ny = parse(key, v)?,
            "geometry.pipe_radius" => c.geometry.pipe_radius = Some(parse(key, v)?),
            "geometry.pipe_centers" => {
                c.geometry.pipe_centers = parse_pairs(key, v)?.into_iter().map(|(x, y)| [x, y]).collect()
            }
            "geometry.stripes" => {
                let mut stripes = Vec::new();
                for (y, l) in parse_pairs(key, v)? {
                    if l < 1.0 || l.fract() != 0.0 {
                        return Err(key_error(key, format!("layer number {l} must be a positive integer")));
                    }
                    stripes.push((y, l as usize - 1));
                }
                c.geometry.stripes = LayerStripes { stripes };
            }
            "phase.t_star" => c.phase.t_star = parse(key, v)?,
            "phase.delta" => c.phase.delta = parse(key, v)?,
            "phase.epsilon" => {
                let e: f64 = parse(key, v)?;
                if !(e > 0.0 && e <= 1.0) {
                    return Err(key_error(key, format!("must satisfy 0 < epsilon <= 1, got {e}")));
                }
                c.phase.epsilon = e;
            }
            "time.t_max_days" => c.t_max_days = parse(key, v)?,
            "time.n_steps" => c.n_steps = parse(key, v)?,
            "boundary.test" => {
                let t: u32 = parse(key, v)?;
                c.set_test(t).map_err(|e| key_error(key, e.to_string()))?;
            }
            "boundary.pressure_left" => explicit_pressure.push((Side::Left, parse(key, v)?)),
            "boundary.pressure_right" => explicit_pressure.push((Side::Right, parse(key, v)?)),
            "boundary.pressure_bottom" => explicit_pressure.push((Side::Bottom, parse(key, v)?)),
            "boundary.pressure_top" => explicit_pressure.push((Side::Top, parse(key, v)?)),
            "boundary.pipe_temperature" => c.bc.pipe_temperature = parse(key, v)?,
            "boundary.initial_temperature" => c.bc.initial_temperature = parse(key, v)?,
            "multiscale.offline" => c.multiscale.offline = parse(key, v)?,
            "multiscale.online" => c.multiscale.online = parse(key, v)?,
            "multiscale.period" => c.multiscale.period = parse(key, v)?,
            "multiscale.accumulate_online" => c.multiscale.accumulate_online = parse_bool(key, v)?,
            "multiscale.convection_sign" => c.scheme.convection_sign = parse(key, v)?,
            "multiscale.use_lagged_pressure" => c.scheme.use_lagged_pressure = parse_bool(key, v)?,
            "output.dir" => c.output.dir = PathBuf::from(v),
            "output.snapshot_layers" => {
                c.output.snapshot_layers = v
                    .split(|ch: char| ch == ',' || ch.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            other => {
                let layer = other
                    .strip_prefix("layer.")
                    .and_then(|rest| rest.split_once('.'))
                    .and_then(|(n, field)| n.parse::<usize>().ok().filter(|&n| n >= 1).map(|n| (n, field)));
                match layer {
                    Some((n, field)) => layer_entries.entry(n).or_default().push((field.to_string(), v.to_string())),
                    None => return Err(key_error(other, "unknown key".into())),
                }
            }
        }
    }
    if !explicit_pressure.is_empty() {
        c.bc.pressure = explicit_pressure;
        c.test = None;
    }
    for (n, fields) in layer_entries {
        if n > c.layers.len() + 1 {
            return Err(key_error(&format!("layer.{n}"), "layers must be numbered consecutively from 1".into()));
        }
        if n == c.layers.len() + 1 {
            c.layers.push(c.layers[n - 2]);
        }
        let layer = &mut c.layers[n - 1];
        for (field, v) in fields {
            let key = format!("layer.{n}.{field}");
            let slot = match field.as_str() {
                "k_plus" => &mut layer.k_plus,
                "k_minus" => &mut layer.k_minus,
                "c_rho_plus" => &mut layer.c_rho_plus,
                "c_rho_minus" => &mut layer.c_rho_minus,
                "rho_l" => &mut layer.rho_l,
                "mobility" => &mut layer.mobility,
                _ => return Err(key_error(&key, "unknown key".into())),
            };
            *slot = parse(&key, &v)?;
        }
    }
    c.validate()?;
    Ok(c)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| key_error(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>())))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(key_error(key, format!("expected true or false, got `{v}`"))),
    }
}

/// `a b; c d; ...` pairs of numbers.
fn parse_pairs(key: &str, v: &str) -> Result<Vec<(f64, f64)>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let nums: Vec<&str> = pair.split_whitespace().collect();
            if nums.len() != 2 {
                return Err(key_error(key, format!("expected two numbers, got `{pair}`")));
            }
            Ok((parse(key, nums[0])?, parse(key, nums[1])?))
        })
        .collect()
}
