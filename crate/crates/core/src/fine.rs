//! Fine-grid reference solver: per time layer a pressure solve with the
//! fictitious-domain mobility, then a linearized implicit temperature solve.

use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, solve_spd, Assembler, Constraints, CsrMatrix, LinearSystem};
use crate::geometry::{Mesh, PipeLayout, Side, TriangleGeometry};
use crate::materials::{CellCoefficients, MaterialField};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    /// Simulated duration in seconds.
    pub t_max: f64,
    pub n_steps: usize,
}

impl TimeConfig {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {t_max}")));
        }
        Ok(TimeConfig { t_max, n_steps })
    }

    pub fn from_days(days: f64, n_steps: usize) -> Result<Self> {
        Self::new(days * SECONDS_PER_DAY, n_steps)
    }

    /// Step length; `t_max` itself when there are no steps.
    pub fn tau(&self) -> f64 {
        self.t_max / self.n_steps.max(1) as f64
    }

    pub fn time_of(&self, layer: usize) -> f64 {
        layer as f64 * self.tau()
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_max: 25.0 * SECONDS_PER_DAY,
            n_steps: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    /// Sides with prescribed pressure; the rest are no-flow.
    pub pressure: Vec<(Side, f64)>,
    pub pipe_temperature: f64,
    pub initial_temperature: f64,
}

impl BoundaryConditions {
    /// Test 1 drives the flow from left (p = 1) to right (p = 0), test 2 from
    /// top (p = 1) to bottom (p = 0).
    pub fn test_case(test: u32) -> Result<Self> {
        let pressure = match test {
            1 => vec![(Side::Left, 1.0), (Side::Right, 0.0)],
            2 => vec![(Side::Top, 1.0), (Side::Bottom, 0.0)],
            _ => return Err(Error::Config(format!("unknown test case {test}, expected 1 or 2"))),
        };
        Ok(BoundaryConditions {
            pressure,
            pipe_temperature: -30.0,
            initial_temperature: 2.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    /// Velocity is `convection_sign * mobility * grad p`; Darcy's law gives -1.
    pub convection_sign: f64,
    /// Build the convection velocity from the previous layer's pressure
    /// instead of the one just computed.
    pub use_lagged_pressure: bool,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            convection_sign: -1.0,
            use_lagged_pressure: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub layer: usize,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Per-cell Darcy velocity of this layer.
    pub velocity: Vec<[f64; 2]>,
}

/// Nodal temperature and pressure of every recorded layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub temperature: Vec<Vec<f64>>,
    pub pressure: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn push(&mut self, state: &SystemState) {
        self.temperature.push(state.temperature.clone());
        self.pressure.push(state.pressure.clone());
    }

    pub fn n_layers(&self) -> usize {
        self.temperature.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.temperature.first().map_or(0, Vec::len)
    }
}

/// Everything a time step needs: mesh, materials, pipes, boundary data and
/// the cached assembly pattern.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Mesh,
    pub materials: MaterialField,
    pub pipes: PipeLayout,
    pub bc: BoundaryConditions,
    pub time: TimeConfig,
    pub options: SchemeOptions,
    assembler: Assembler,
    pressure_constraints: Constraints,
    temperature_constraints: Constraints,
}

impl Model {
    pub fn new(
        mesh: Mesh,
        materials: MaterialField,
        pipes: PipeLayout,
        bc: BoundaryConditions,
        time: TimeConfig,
        options: SchemeOptions,
    ) -> Result<Self> {
        if materials.cell_layer.len() != mesh.n_triangles() {
            return Err(Error::DimensionMismatch(format!(
                "material raster has {} cells, mesh has {}",
                materials.cell_layer.len(),
                mesh.n_triangles()
            )));
        }
        if let Some(&l) = materials.cell_layer.iter().find(|&&l| l >= materials.layers.len()) {
            return Err(Error::Config(format!("cell layer id {l} has no layer properties")));
        }
        materials.phase.validate()?;
        if let Some(n) = pipes.all_nodes().find(|&n| n >= mesh.n_nodes()) {
            return Err(Error::DimensionMismatch(format!("pipe node {n} outside the mesh")));
        }
        let assembler = Assembler::new(&mesh)?;
        let pressure_constraints = Constraints::new(
            bc.pressure
                .iter()
                .flat_map(|&(side, v)| mesh.boundary.side(side).iter().map(move |&n| (n, v))),
        )?;
        let temperature_constraints = Constraints::new(pipes.all_nodes().map(|n| (n, bc.pipe_temperature)))?;
        Ok(Model {
            mesh,
            materials,
            pipes,
            bc,
            time,
            options,
            assembler,
            pressure_constraints,
            temperature_constraints,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn geometry(&self) -> &[TriangleGeometry] {
        self.assembler.geometry()
    }

    pub fn pressure_constraints(&self) -> &Constraints {
        &self.pressure_constraints
    }

    pub fn temperature_constraints(&self) -> &Constraints {
        &self.temperature_constraints
    }

    pub fn coefficients(&self, temperature: &[f64]) -> CellCoefficients {
        self.materials.evaluate(&self.mesh, temperature)
    }

    /// Mobility-weighted stiffness with zero source and the pressure
    /// Dirichlet data, before elimination.
    pub fn pressure_system(&self, coeffs: &CellCoefficients) -> LinearSystem {
        LinearSystem::new(
            self.assembler.stiffness(&coeffs.mobility),
            vec![0.0; self.n_nodes()],
            self.pressure_constraints.clone(),
        )
    }

    /// Per-cell `convection_sign * mobility * grad p`.
    pub fn velocity(&self, coeffs: &CellCoefficients, pressure: &[f64]) -> Vec<[f64; 2]> {
        let s = self.options.convection_sign;
        self.mesh
            .cell_gradients(self.geometry(), pressure)
            .into_iter()
            .zip(&coeffs.mobility)
            .map(|(g, &m)| [s * m * g[0], s * m * g[1]])
            .collect()
    }

    /// `S/tau + K` with capacity and conductivity of the old layer; the
    /// right-hand side carries `S T_old / tau` minus the explicit convection.
    pub fn temperature_system(
        &self,
        coeffs: &CellCoefficients,
        t_old: &[f64],
        velocity: &[[f64; 2]],
    ) -> LinearSystem {
        let tau = self.time.tau();
        let scaled: Vec<f64> = coeffs.capacity.iter().map(|c| c / tau).collect();
        let matrix = self.assembler.weighted(Some(&coeffs.conductivity), Some(&scaled));
        let mass = self.assembler.mass(&scaled);
        let mut rhs = mass.mul_vec(t_old);
        let conv = self.assembler.convection(&coeffs.capacity, velocity, t_old);
        for (r, c) in rhs.iter_mut().zip(conv) {
            *r -= c;
        }
        LinearSystem::new(matrix, rhs, self.temperature_constraints.clone())
    }

    /// Pressure of a layer whose coefficients are `coeffs`.
    pub fn solve_pressure(&self, coeffs: &CellCoefficients) -> Result<Vec<f64>> {
        if coeffs.mobility.iter().all(|&m| m == 0.0) {
            // impermeable medium: no flow, pressure only defined by its data
            return Ok(self.pressure_constraints.lift(self.n_nodes()));
        }
        solve_constrained(self.pressure_system(coeffs))
    }

    pub fn initial_state(&self) -> Result<SystemState> {
        let temperature = vec![self.bc.initial_temperature; self.n_nodes()];
        let coeffs = self.coefficients(&temperature);
        let pressure = self.solve_pressure(&coeffs).map_err(|e| e.at_layer(0))?;
        let velocity = self.velocity(&coeffs, &pressure);
        Ok(SystemState {
            layer: 0,
            temperature,
            pressure,
            velocity,
        })
    }

    /// Pressure of the next layer from the mobility at the current temperature.
    pub fn pressure_step(&self, state: &SystemState) -> Result<Vec<f64>> {
        self.solve_pressure(&self.coefficients(&state.temperature))
    }

    /// Temperature of the next layer, convecting with the velocity built from
    /// `pressure` and the current mobility.
    pub fn temperature_step(&self, state: &SystemState, pressure: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.coefficients(&state.temperature);
        let velocity = self.velocity(&coeffs, pressure);
        solve_constrained(self.temperature_system(&coeffs, &state.temperature, &velocity))
    }

    /// One full layer: pressure, velocity, temperature.
    pub fn step(&self, state: &SystemState) -> Result<SystemState> {
        let layer = state.layer + 1;
        let coeffs = self.coefficients(&state.temperature);
        let pressure = self.solve_pressure(&coeffs).map_err(|e| e.at_layer(layer))?;
        let driving = if self.options.use_lagged_pressure {
            &state.pressure
        } else {
            &pressure
        };
        let velocity = self.velocity(&coeffs, driving);
        let temperature = solve_constrained(self.temperature_system(&coeffs, &state.temperature, &velocity))
            .map_err(|e| e.at_layer(layer))?;
        Ok(SystemState {
            layer,
            temperature,
            pressure,
            velocity,
        })
    }
}

/// Eliminate the constraints, solve, and write the prescribed values back
/// exactly.
pub fn solve_constrained(system: LinearSystem) -> Result<Vec<f64>> {
    let sys = apply_dirichlet(system)?;
    let mut x = solve_spd(&sys.matrix, &sys.rhs)?;
    sys.constraints.impose(&mut x);
    Ok(x)
}

/// Run every layer, calling `observe` on each state including the initial
/// one.
pub fn run_fine_with(model: &Model, mut observe: impl FnMut(&SystemState) -> Result<()>) -> Result<Trajectory> {
    let mut state = model.initial_state()?;
    let mut traj = Trajectory::default();
    traj.push(&state);
    observe(&state)?;
    for _ in 0..model.time.n_steps {
        state = model.step(&state)?;
        traj.push(&state);
        observe(&state)?;
    }
    Ok(traj)
}

pub fn run_fine(model: &Model) -> Result<Trajectory> {
    run_fine_with(model, |_| Ok(()))
}

/// Unit mass matrix of the mesh, used by norms and projections.
pub fn unit_mass(model: &Model) -> CsrMatrix {
    model.assembler.mass(&vec![1.0; model.mesh.n_triangles()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_fine_mesh, locate_pipe_nodes, LayerStripes};
    use crate::materials::{default_layers, LayerProperties, PhaseParams};

    fn model(nx: usize, ny: usize, lx: f64, ly: f64, layers: Vec<LayerProperties>, pipes: &[[f64; 2]], test: u32) -> Model {
        let mesh = build_fine_mesh(nx, ny, lx, ly).unwrap();
        let materials = MaterialField {
            cell_layer: LayerStripes::uniform(0).rasterize(&mesh),
            layers,
            phase: PhaseParams::default(),
        };
        let pipes = if pipes.is_empty() {
            PipeLayout::empty()
        } else {
            locate_pipe_nodes(&mesh, pipes, 0.5 * mesh.hx().min(mesh.hy())).unwrap()
        };
        Model::new(
            mesh,
            materials,
            pipes,
            BoundaryConditions::test_case(test).unwrap(),
            TimeConfig::from_days(1.0, 4).unwrap(),
            SchemeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn linear_pressure_profile() {
        let m = model(12, 6, 3.0, 1.5, default_layers(), &[], 1);
        let p = m.initial_state().unwrap().pressure;
        for (q, v) in m.mesh.nodes.iter().zip(&p) {
            assert!((v - (1.0 - q[0] / 3.0)).abs() < 1e-9);
        }
        // fully frozen: uniform epsilon factor cancels
        let mut frozen = m.clone();
        frozen.bc.initial_temperature = -5.0;
        let pf = frozen.initial_state().unwrap().pressure;
        for (a, b) in p.iter().zip(&pf) {
            assert!((a - b).abs() < 1e-9);
        }
        let m2 = model(6, 12, 1.5, 3.0, default_layers(), &[], 2);
        let p2 = m2.initial_state().unwrap().pressure;
        for (q, v) in m2.mesh.nodes.iter().zip(&p2) {
            assert!((v - q[1] / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let mut m = model(8, 4, 2.0, 1.0, default_layers(), &[], 1);
        m.bc.initial_temperature = 3.0;
        let s = m.initial_state().unwrap();
        let next = m.step(&s).unwrap();
        assert!(next.temperature.iter().all(|t| (t - 3.0).abs() < 1e-10));
    }

    #[test]
    fn pipe_at_initial_temperature_changes_nothing() {
        let mut m = model(8, 8, 2.0, 2.0, default_layers(), &[[1.0, 1.0]], 1);
        m.bc.pipe_temperature = m.bc.initial_temperature;
        let m = Model::new(m.mesh, m.materials, m.pipes, m.bc, m.time, m.options).unwrap();
        let s = m.initial_state().unwrap();
        let t = m.temperature_step(&s, &s.pressure).unwrap();
        assert!(t.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn zero_steps_keeps_initial_condition() {
        let mut m = model(4, 2, 2.0, 1.0, default_layers(), &[], 1);
        m.time.n_steps = 0;
        let traj = run_fine(&m).unwrap();
        assert_eq!(traj.n_layers(), 1);
        assert!(traj.temperature[0].iter().all(|&t| t == 2.0));
    }

    #[test]
    fn impermeable_medium_decouples_tests() {
        let mut layers = default_layers();
        for l in &mut layers {
            l.mobility = 0.0;
        }
        let a = model(10, 10, 2.0, 2.0, layers.clone(), &[[1.0, 1.0]], 1);
        let b = model(10, 10, 2.0, 2.0, layers, &[[1.0, 1.0]], 2);
        let ta = run_fine(&a).unwrap();
        let tb = run_fine(&b).unwrap();
        assert_eq!(ta.temperature, tb.temperature);
        assert_ne!(ta.pressure, tb.pressure);
    }

    #[test]
    fn cooling_stays_within_bounds() {
        let m = model(16, 16, 2.0, 2.0, default_layers(), &[[1.0, 1.0]], 1);
        let traj = run_fine(&m).unwrap();
        assert_eq!(traj.n_layers(), 5);
        let last = traj.temperature.last().unwrap();
        assert!(last.iter().any(|&t| t < 0.0));
        let pipe = m.pipes.pipe_nodes[0][0];
        assert_eq!(last[pipe], -30.0);
    }

    #[test]
    fn bad_test_case() {
        assert!(BoundaryConditions::test_case(3).is_err());
        assert!(TimeConfig::from_days(0.0, 3).is_err());
        assert_eq!(TimeConfig::from_days(25.0, 80).unwrap().t_max, 2.16e6);
    }
}
