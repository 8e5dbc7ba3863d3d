//! Coarse projected solves and residual-driven online enrichment.
//!
//! Dirichlet data enters through a lift: the multiscale solution is
//! `g + R^T c` where `g` carries the prescribed values and the basis rows are
//! masked at constrained nodes, so prescribed values hold exactly and the
//! coarse matrix is the Galerkin projection of the free block.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, dot, CsrMatrix, LinearSystem, SparseVector, SpdFactor};
use crate::fine::{Model, SystemState, Trajectory};
use crate::geometry::{CoarseGrid, Mesh, Neighborhood, NeighborhoodMap};
use crate::offline::{build_pou, Basis, BasisKind, FieldSpace, MultiscaleSpace, PartitionOfUnity};

/// Relative residual accepted from a coarse solve.
const COARSE_RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Local residuals below this fraction of the right-hand side norm produce
/// no online basis.
pub const ONLINE_SKIP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnrichmentSchedule {
    /// Enrich on layers that are multiples of `period`.
    pub period: usize,
    /// Online iterations per enrichment event.
    pub iterations: usize,
    /// Keep online bases of earlier events instead of replacing them.
    pub accumulate: bool,
}

impl EnrichmentSchedule {
    pub fn new(period: usize, iterations: usize, accumulate: bool) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidArgument("enrichment period must be at least 1".into()));
        }
        Ok(EnrichmentSchedule {
            period,
            iterations,
            accumulate,
        })
    }

    /// No online enrichment at all.
    pub fn offline_only() -> Self {
        EnrichmentSchedule {
            period: 1,
            iterations: 0,
            accumulate: false,
        }
    }

    pub fn is_event(&self, layer: usize) -> bool {
        self.iterations > 0 && layer > 0 && layer % self.period == 0
    }
}

/// `R A R^T` for sparse rows `R` and a square fine matrix `A`.
pub fn galerkin(rows: &[SparseVector], a: &CsrMatrix) -> CsrMatrix {
    let n_fine = a.n;
    let nc = rows.len();
    // transpose of R: for each fine node the (row, value) pairs touching it
    let mut count = vec![0usize; n_fine + 1];
    for r in rows {
        for &i in &r.indices {
            count[i + 1] += 1;
        }
    }
    for i in 0..n_fine {
        count[i + 1] += count[i];
    }
    let ptr = count.clone();
    let mut fill = count;
    let mut t_row = vec![0usize; ptr[n_fine]];
    let mut t_val = vec![0.0; ptr[n_fine]];
    for (k, r) in rows.iter().enumerate() {
        for (i, v) in r.iter() {
            t_row[fill[i]] = k;
            t_val[fill[i]] = v;
            fill[i] += 1;
        }
    }
    let out: Vec<Vec<(usize, f64)>> = rows
        .par_iter()
        .map_init(
            || (vec![0.0; n_fine], vec![false; n_fine], vec![0.0; nc], vec![false; nc]),
            |(y, y_set, acc, acc_set), row| {
                let mut touched = Vec::new();
                for (i, v) in row.iter() {
                    for (j, aij) in a.row(i) {
                        if !y_set[j] {
                            y_set[j] = true;
                            touched.push(j);
                        }
                        y[j] += aij * v;
                    }
                }
                let mut cols = Vec::new();
                for &j in &touched {
                    let yj = y[j];
                    y[j] = 0.0;
                    y_set[j] = false;
                    if yj == 0.0 {
                        continue;
                    }
                    for p in ptr[j]..ptr[j + 1] {
                        let b = t_row[p];
                        if !acc_set[b] {
                            acc_set[b] = true;
                            cols.push(b);
                        }
                        acc[b] += yj * t_val[p];
                    }
                }
                cols.sort_unstable();
                cols.iter()
                    .map(|&b| {
                        let v = acc[b];
                        acc[b] = 0.0;
                        acc_set[b] = false;
                        (b, v)
                    })
                    .collect()
            },
        )
        .collect();
    CsrMatrix::from_rows(out, a.symmetric)
}

/// Solution of one projected system.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSolution {
    /// Basis indices (into the field space) that took part in the solve.
    pub active: Vec<usize>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// `g + R^T c` on the fine grid.
    pub fine: Vec<f64>,
}

/// Galerkin projection of `system` (matrix and load before Dirichlet
/// elimination) onto `space`, solved and reconstructed on the fine grid.
pub fn project_and_solve_coarse(space: &FieldSpace, system: &LinearSystem) -> Result<CoarseSolution> {
    let n = system.matrix.n;
    let mask = system.constraints.mask(n);
    let lift = system.constraints.lift(n);
    let mut active = Vec::new();
    let mut rows = Vec::new();
    for (k, b) in space.bases.iter().enumerate() {
        let r = b.vector.masked(&mask);
        if r.values.iter().any(|&v| v != 0.0) {
            active.push(k);
            rows.push(r);
        }
    }
    let ag = system.matrix.mul_vec(&lift);
    let free_rhs: Vec<f64> = system.rhs.iter().zip(&ag).map(|(b, a)| b - a).collect();
    let matrix = galerkin(&rows, &system.matrix);
    let rhs: Vec<f64> = rows.iter().map(|r| r.dot(&free_rhs)).collect();
    let coefficients = if rows.is_empty() {
        Vec::new()
    } else {
        let factor = SpdFactor::new(&matrix).map_err(|e| match e {
            Error::NotPositiveDefinite { row, .. } => Error::RankDeficient {
                basis: active[row],
                label: space.bases[active[row]].label(),
            },
            other => other,
        })?;
        let (c, rel) = factor.solve_refined(&matrix, &rhs, 2);
        if !(rel <= COARSE_RESIDUAL_TOLERANCE) {
            return Err(Error::SolverFailure { residual: rel });
        }
        c
    };
    let mut fine = lift;
    for (r, &c) in rows.iter().zip(&coefficients) {
        for (i, v) in r.iter() {
            fine[i] += v * c;
        }
    }
    Ok(CoarseSolution {
        active,
        matrix,
        rhs,
        coefficients,
        fine,
    })
}

/// `b - A x` on unconstrained nodes, zero on constrained ones, for a system
/// before elimination.
pub fn global_residual(system: &LinearSystem, x: &[f64]) -> Vec<f64> {
    let ax = system.matrix.mul_vec(x);
    let mut r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    for (i, _) in system.constraints.iter() {
        r[i] = 0.0;
    }
    r
}

/// Nodes carrying online unknowns on `nb`: every node except the cut
/// boundary and the constrained nodes.
pub fn online_support(mesh: &Mesh, nb: &Neighborhood, constrained: &[bool]) -> Vec<usize> {
    nb.nodes
        .iter()
        .copied()
        .filter(|&n| !constrained[n] && !nb.is_cut_node(mesh, n))
        .collect()
}

/// The global residual restricted to `support`.
pub fn local_residual(residual: &[f64], support: &[usize]) -> Vec<f64> {
    support.iter().map(|&n| residual[n]).collect()
}

/// Factorized local operator of one neighborhood for online solves.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    pub omega: usize,
    pub support: Vec<usize>,
    factor: SpdFactor,
}

impl LocalOperator {
    pub fn new(mesh: &Mesh, nb: &Neighborhood, matrix: &CsrMatrix, constrained: &[bool]) -> Result<Option<Self>> {
        let support = online_support(mesh, nb, constrained);
        if support.is_empty() {
            return Ok(None);
        }
        let factor = SpdFactor::new(&matrix.submatrix(&support)).map_err(|e| e.at_neighborhood(nb.vertex))?;
        Ok(Some(LocalOperator {
            omega: nb.vertex,
            support,
            factor,
        }))
    }

    /// Local correction `Phi` (indexed like `support`) for `residual`.
    pub fn solve(&self, residual: &[f64]) -> Vec<f64> {
        self.factor.solve(&local_residual(residual, &self.support))
    }
}

/// Online basis `Phi * chi` of one neighborhood, or `None` when the local
/// residual is below `skip` in Euclidean norm.
pub fn solve_online_basis(
    mesh: &Mesh,
    nb: &Neighborhood,
    chi: &[f64],
    op: &LocalOperator,
    residual: &[f64],
    skip: f64,
) -> Option<SparseVector> {
    let local = local_residual(residual, &op.support);
    if dot(&local, &local).sqrt() <= skip {
        return None;
    }
    let phi = op.factor.solve(&local);
    let mut idx = Vec::with_capacity(phi.len());
    let mut val = Vec::with_capacity(phi.len());
    for (&n, &p) in op.support.iter().zip(&phi) {
        let c = chi[nb.local_index(mesh, n).expect("support node in neighborhood")];
        if c != 0.0 {
            idx.push(n);
            val.push(p * c);
        }
    }
    let v = SparseVector::new(idx, val);
    v.values.iter().any(|&x| x != 0.0).then_some(v)
}

/// Append one generation of online bases, in neighborhood order.
pub fn enrich(space: &mut FieldSpace, generation: usize, bases: Vec<(usize, SparseVector)>) {
    space.bases.extend(bases.into_iter().map(|(omega, vector)| Basis {
        omega,
        kind: BasisKind::Online(generation),
        vector,
    }));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorm {
    /// `|r| / |b|` over unconstrained nodes.
    pub l2: f64,
    /// `sqrt(r^T A^-1 r / b^T A^-1 b)`: relative energy-norm distance to the
    /// fine solution of the same layer system.
    pub dual: f64,
}

/// Everything recorded at one enrichment event.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentRecord {
    pub layer: usize,
    pub pre_temperature: Vec<f64>,
    pub pre_pressure: Vec<f64>,
    /// Residual before each online iteration and after the last one.
    pub temperature_residuals: Vec<ResidualNorm>,
    pub pressure_residuals: Vec<ResidualNorm>,
    pub temperature_added: Vec<usize>,
    pub pressure_added: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleRun {
    pub trajectory: Trajectory,
    pub events: Vec<EnrichmentRecord>,
    /// Coarse dimensions used for each computed layer (index 0 is the
    /// initial pressure solve).
    pub temperature_dofs: Vec<usize>,
    pub pressure_dofs: Vec<usize>,
    pub offline: usize,
    pub schedule: EnrichmentSchedule,
    /// Temperature space size after the final layer (`R_T` rows).
    pub final_temperature_dofs: usize,
    pub final_pressure_dofs: usize,
}

impl MultiscaleRun {
    pub fn event(&self, layer: usize) -> Option<&EnrichmentRecord> {
        self.events.iter().find(|e| e.layer == layer)
    }
}

/// Energy-dual norms against the fine factorization of one layer system.
struct DualNorm {
    system: LinearSystem,
    factor: SpdFactor,
    b_free: Vec<f64>,
    b_l2: f64,
    b_dual: f64,
}

impl DualNorm {
    fn new(system: &LinearSystem) -> Result<Self> {
        let elim = apply_dirichlet(system.clone())?;
        let factor = SpdFactor::new(&elim.matrix)?;
        let n = system.matrix.n;
        let b_free = global_residual(system, &system.constraints.lift(n));
        let z = factor.solve(&b_free);
        let b_dual = dot(&b_free, &z).max(0.0).sqrt();
        let b_l2 = dot(&b_free, &b_free).sqrt();
        Ok(DualNorm {
            system: system.clone(),
            factor,
            b_free,
            b_l2,
            b_dual,
        })
    }

    fn norm(&self, x: &[f64]) -> (Vec<f64>, ResidualNorm) {
        let r = global_residual(&self.system, x);
        let z = self.factor.solve(&r);
        let l2 = dot(&r, &r).sqrt();
        let dual = dot(&r, &z).max(0.0).sqrt();
        let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
        (
            r,
            ResidualNorm {
                l2: rel(l2, self.b_l2),
                dual: rel(dual, self.b_dual),
            },
        )
    }

    fn skip_threshold(&self) -> f64 {
        ONLINE_SKIP_TOLERANCE * dot(&self.b_free, &self.b_free).sqrt()
    }
}

/// Multiscale time stepping over a fine model.
pub struct MultiscaleSolver<'a> {
    pub model: &'a Model,
    pub neighborhoods: &'a NeighborhoodMap,
    pub pou: PartitionOfUnity,
}

impl<'a> MultiscaleSolver<'a> {
    pub fn new(model: &'a Model, coarse: &CoarseGrid, neighborhoods: &'a NeighborhoodMap) -> Self {
        MultiscaleSolver {
            model,
            neighborhoods,
            pou: build_pou(&model.mesh, coarse, neighborhoods),
        }
    }

    /// One generation of online bases for `system` at the multiscale
    /// solution `x`.
    fn online_generation(
        &self,
        ops: &[Option<LocalOperator>],
        residual: &[f64],
        skip: f64,
    ) -> Vec<(usize, SparseVector)> {
        let mesh = &self.model.mesh;
        ops.par_iter()
            .filter_map(|op| {
                let op = op.as_ref()?;
                let nb = &self.neighborhoods.neighborhoods[op.omega];
                solve_online_basis(mesh, nb, &self.pou.values[op.omega], op, residual, skip).map(|v| (op.omega, v))
            })
            .collect()
    }

    fn local_operators(&self, system: &LinearSystem) -> Result<Vec<Option<LocalOperator>>> {
        let mask = system.constraints.mask(system.matrix.n);
        let mesh = &self.model.mesh;
        self.neighborhoods
            .neighborhoods
            .par_iter()
            .map(|nb| LocalOperator::new(mesh, nb, &system.matrix, &mask))
            .collect()
    }

    pub fn run(&self, space: MultiscaleSpace, schedule: EnrichmentSchedule) -> Result<MultiscaleRun> {
        self.run_with(space, schedule, |_| Ok(()))
    }

    pub fn run_with(
        &self,
        mut space: MultiscaleSpace,
        schedule: EnrichmentSchedule,
        mut observe: impl FnMut(&SystemState) -> Result<()>,
    ) -> Result<MultiscaleRun> {
        let model = self.model;
        if space.n_fine != model.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "multiscale space built for {} nodes, mesh has {}",
                space.n_fine,
                model.n_nodes()
            )));
        }
        let offline = space.offline;
        let t0 = vec![model.bc.initial_temperature; model.n_nodes()];
        let coeffs = model.coefficients(&t0);
        let p0 = project_and_solve_coarse(&space.pressure, &model.pressure_system(&coeffs)).map_err(|e| e.at_layer(0))?;
        let mut state = SystemState {
            layer: 0,
            velocity: model.velocity(&coeffs, &p0.fine),
            temperature: t0,
            pressure: p0.fine,
        };
        let mut run = MultiscaleRun {
            trajectory: Trajectory::default(),
            events: Vec::new(),
            temperature_dofs: vec![space.temperature.len()],
            pressure_dofs: vec![p0.active.len()],
            offline,
            schedule,
            final_temperature_dofs: 0,
            final_pressure_dofs: 0,
        };
        run.trajectory.push(&state);
        observe(&state)?;
        for n in 0..model.time.n_steps {
            let layer = n + 1;
            let event = schedule.is_event(layer);
            if event && !schedule.accumulate {
                space.temperature.clear_online();
                space.pressure.clear_online();
            }
            let next = self
                .layer(&mut space, &state, layer, event, schedule.iterations, &mut run)
                .map_err(|e| e.at_layer(layer))?;
            run.temperature_dofs.push(space.temperature.len());
            run.pressure_dofs.push(space.pressure.len());
            state = next;
            run.trajectory.push(&state);
            observe(&state)?;
        }
        run.final_temperature_dofs = space.temperature.len();
        run.final_pressure_dofs = space.pressure.len();
        Ok(run)
    }

    fn layer(
        &self,
        space: &mut MultiscaleSpace,
        state: &SystemState,
        layer: usize,
        event: bool,
        iterations: usize,
        run: &mut MultiscaleRun,
    ) -> Result<SystemState> {
        let model = self.model;
        let coeffs = model.coefficients(&state.temperature);
        let psys = model.pressure_system(&coeffs);
        let mut p = project_and_solve_coarse(&space.pressure, &psys)?.fine;
        let driving = if model.options.use_lagged_pressure {
            state.pressure.clone()
        } else {
            p.clone()
        };
        let velocity = model.velocity(&coeffs, &driving);
        // the temperature system keeps this velocity through the event
        let tsys = model.temperature_system(&coeffs, &state.temperature, &velocity);
        let mut t = project_and_solve_coarse(&space.temperature, &tsys)?.fine;

        if event {
            let mut record = EnrichmentRecord {
                layer,
                pre_temperature: t.clone(),
                pre_pressure: p.clone(),
                temperature_residuals: Vec::with_capacity(iterations + 1),
                pressure_residuals: Vec::with_capacity(iterations + 1),
                temperature_added: Vec::with_capacity(iterations),
                pressure_added: Vec::with_capacity(iterations),
            };
            let t_norm = DualNorm::new(&tsys)?;
            let p_norm = DualNorm::new(&psys)?;
            let t_ops = self.local_operators(&tsys)?;
            let p_ops = self.local_operators(&psys)?;
            for l in 1..=iterations {
                let (rt, nt) = t_norm.norm(&t);
                let (rp, np) = p_norm.norm(&p);
                record.temperature_residuals.push(nt);
                record.pressure_residuals.push(np);
                let new_t = self.online_generation(&t_ops, &rt, t_norm.skip_threshold());
                let new_p = self.online_generation(&p_ops, &rp, p_norm.skip_threshold());
                record.temperature_added.push(new_t.len());
                record.pressure_added.push(new_p.len());
                enrich(&mut space.temperature, l, new_t);
                enrich(&mut space.pressure, l, new_p);
                p = project_and_solve_coarse(&space.pressure, &psys)?.fine;
                t = project_and_solve_coarse(&space.temperature, &tsys)?.fine;
            }
            record.temperature_residuals.push(t_norm.norm(&t).1);
            record.pressure_residuals.push(p_norm.norm(&p).1);
            run.events.push(record);
        }
        let velocity = model.velocity(&coeffs, &p);
        Ok(SystemState {
            layer,
            temperature: t,
            pressure: p,
            velocity,
        })
    }
}

/// Run the multiscale scheme for `space` under `schedule`.
pub fn run_multiscale(
    model: &Model,
    coarse: &CoarseGrid,
    neighborhoods: &NeighborhoodMap,
    space: MultiscaleSpace,
    schedule: EnrichmentSchedule,
) -> Result<MultiscaleRun> {
    MultiscaleSolver::new(model, coarse, neighborhoods).run(space, schedule)
}
