//! Relative error norms between fine and multiscale trajectories.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::{Assembler, CsrMatrix};
use crate::fine::Trajectory;
use crate::geometry::Mesh;
use crate::materials::MaterialField;
use crate::online::MultiscaleRun;

/// Unit-coefficient mass and stiffness matrices of a mesh.
#[derive(Debug, Clone)]
pub struct NormOperators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
}

impl NormOperators {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let a = Assembler::new(mesh)?;
        let ones = vec![1.0; mesh.n_triangles()];
        Ok(NormOperators {
            mass: a.mass(&ones),
            stiffness: a.stiffness(&ones),
        })
    }

    fn relative(m: &CsrMatrix, reference: &[f64], other: &[f64], what: &'static str) -> Result<f64> {
        if reference.len() != m.n || other.len() != m.n {
            return Err(Error::DimensionMismatch(format!(
                "fields of length {} and {} on a mesh with {} nodes",
                reference.len(),
                other.len(),
                m.n
            )));
        }
        let den = m.bilinear(reference, reference);
        if !(den > 0.0) {
            return Err(Error::UndefinedNorm(what));
        }
        let e: Vec<f64> = reference.iter().zip(other).map(|(a, b)| a - b).collect();
        Ok(100.0 * (m.bilinear(&e, &e).max(0.0) / den).sqrt())
    }

    /// `100 * |u_f - u_ms|_L2 / |u_f|_L2`.
    pub fn relative_l2(&self, u_f: &[f64], u_ms: &[f64]) -> Result<f64> {
        Self::relative(&self.mass, u_f, u_ms, "L2 norm")
    }

    /// `100 * |grad(u_f - u_ms)|_L2 / |grad u_f|_L2`.
    pub fn relative_h1(&self, u_f: &[f64], u_ms: &[f64]) -> Result<f64> {
        Self::relative(&self.stiffness, u_f, u_ms, "H1 seminorm")
    }

    pub fn layer_errors(&self, t_f: &[f64], t_ms: &[f64], p_f: &[f64], p_ms: &[f64]) -> Result<LayerErrors> {
        Ok(LayerErrors {
            l2_t: self.relative_l2(t_f, t_ms)?,
            h1_t: self.relative_h1(t_f, t_ms)?,
            l2_p: self.relative_l2(p_f, p_ms)?,
            h1_p: self.relative_h1(p_f, p_ms)?,
        })
    }
}

pub fn relative_l2(mesh: &Mesh, u_f: &[f64], u_ms: &[f64]) -> Result<f64> {
    NormOperators::new(mesh)?.relative_l2(u_f, u_ms)
}

pub fn relative_h1(mesh: &Mesh, u_f: &[f64], u_ms: &[f64]) -> Result<f64> {
    NormOperators::new(mesh)?.relative_h1(u_f, u_ms)
}

/// Relative errors (percent) of both fields at one layer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LayerErrors {
    pub l2_t: f64,
    pub h1_t: f64,
    pub l2_p: f64,
    pub h1_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub offline: usize,
    pub online: usize,
    pub period: usize,
    /// Temperature coarse dimension at the final layer.
    pub dof_c: usize,
    pub final_errors: LayerErrors,
    /// Errors of layers `1..=n_steps` (index 0 is layer 1; the initial
    /// temperature is constant so its H1 error is undefined).
    pub series: Vec<LayerErrors>,
    /// `(layer, errors before enrichment)` at every enrichment event.
    pub pre_enrichment: Vec<(usize, LayerErrors)>,
}

impl ErrorReport {
    pub fn at_layer(&self, layer: usize) -> Option<&LayerErrors> {
        layer.checked_sub(1).and_then(|i| self.series.get(i))
    }
}

fn check_grids(fine: &Trajectory, other: &Trajectory) -> Result<()> {
    if fine.n_layers() != other.n_layers() || fine.n_nodes() != other.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "trajectories differ: {} layers x {} nodes vs {} layers x {} nodes",
            fine.n_layers(),
            fine.n_nodes(),
            other.n_layers(),
            other.n_nodes()
        )));
    }
    Ok(())
}

/// Error series of a plain trajectory against the fine one.
pub fn trajectory_errors(norms: &NormOperators, fine: &Trajectory, other: &Trajectory) -> Result<Vec<LayerErrors>> {
    check_grids(fine, other)?;
    (1..fine.n_layers())
        .map(|n| {
            norms.layer_errors(
                &fine.temperature[n],
                &other.temperature[n],
                &fine.pressure[n],
                &other.pressure[n],
            )
        })
        .collect()
}

pub fn compare_run(norms: &NormOperators, fine: &Trajectory, run: &MultiscaleRun) -> Result<ErrorReport> {
    let series = trajectory_errors(norms, fine, &run.trajectory)?;
    let final_errors = series.last().copied().unwrap_or_default();
    let pre_enrichment = run
        .events
        .iter()
        .map(|e| {
            norms
                .layer_errors(
                    &fine.temperature[e.layer],
                    &e.pre_temperature,
                    &fine.pressure[e.layer],
                    &e.pre_pressure,
                )
                .map(|err| (e.layer, err))
        })
        .collect::<Result<_>>()?;
    Ok(ErrorReport {
        offline: run.offline,
        online: run.schedule.iterations,
        period: run.schedule.period,
        dof_c: run.final_temperature_dofs,
        final_errors,
        series,
        pre_enrichment,
    })
}

/// One report per multiscale run, in the given order.
pub fn build_error_table(mesh: &Mesh, fine: &Trajectory, runs: &[&MultiscaleRun]) -> Result<Vec<ErrorReport>> {
    let norms = NormOperators::new(mesh)?;
    runs.iter().map(|r| compare_run(&norms, fine, r)).collect()
}

/// Reports grouped into a table: one row per offline count, one column
/// group per online count.
pub fn format_table(reports: &[ErrorReport]) -> String {
    let mut offline: Vec<usize> = reports.iter().map(|r| r.offline).collect();
    offline.sort_unstable();
    offline.dedup();
    let mut online: Vec<usize> = reports.iter().map(|r| r.online).collect();
    online.sort_unstable();
    online.dedup();
    let mut out = String::new();
    for (field, pick) in [
        ("Temperature", (|e: &LayerErrors| (e.l2_t, e.h1_t)) as fn(&LayerErrors) -> (f64, f64)),
        ("Pressure", |e: &LayerErrors| (e.l2_p, e.h1_p)),
    ] {
        let _ = writeln!(out, "{field}: relative L2 / H1 errors (%) at the final layer");
        let _ = write!(out, "{:>4}", "M");
        for &l in &online {
            let head = if l == 0 { "offline".to_string() } else { format!("{l} online") };
            let _ = write!(out, " | {head:^26}");
        }
        let _ = writeln!(out);
        for &m in &offline {
            let _ = write!(out, "{m:>4}");
            for &l in &online {
                match reports.iter().find(|r| r.offline == m && r.online == l) {
                    Some(r) => {
                        let (a, b) = pick(&r.final_errors);
                        let _ = write!(out, " | {:>6} {:>9.3} {:>9.3}", r.dof_c, a, b);
                    }
                    None => {
                        let _ = write!(out, " | {:>26}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }
    out
}

/// Total area of cells whose centroid temperature is at or below the phase
/// change temperature.
pub fn frozen_area(mesh: &Mesh, materials: &MaterialField, temperature: &[f64]) -> f64 {
    materials
        .frozen_mask(mesh, temperature)
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(t, _)| mesh.signed_area(t))
        .fold(0.0, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_fine_mesh;
    use approx::assert_relative_eq;

    fn unit() -> (Mesh, NormOperators) {
        let m = build_fine_mesh(16, 16, 1.0, 1.0).unwrap();
        let n = NormOperators::new(&m).unwrap();
        (m, n)
    }

    #[test]
    fn l2_examples() {
        let (m, n) = unit();
        let x: Vec<f64> = m.nodes.iter().map(|p| p[0]).collect();
        assert_eq!(n.relative_l2(&x, &x).unwrap(), 0.0);
        assert_relative_eq!(n.relative_l2(&x, &vec![0.0; x.len()]).unwrap(), 100.0, epsilon = 1e-12);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
        assert_relative_eq!(n.relative_l2(&x, &shifted).unwrap(), 10.0 / (1.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert!(matches!(n.relative_l2(&vec![0.0; x.len()], &x), Err(Error::UndefinedNorm(_))));
    }

    #[test]
    fn h1_examples() {
        let (m, n) = unit();
        let x: Vec<f64> = m.nodes.iter().map(|p| p[0]).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
        assert!(n.relative_h1(&x, &shifted).unwrap() < 1e-6);
        assert_relative_eq!(n.relative_h1(&x, &vec![0.0; x.len()]).unwrap(), 100.0, epsilon = 1e-10);
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(n.relative_h1(&x, &doubled).unwrap(), 100.0, epsilon = 1e-10);
        assert!(n.relative_h1(&vec![1.0; x.len()], &x).is_err());
    }

    #[test]
    fn mass_norm_matches_elementwise_quadrature() {
        let (m, n) = unit();
        let u: Vec<f64> = m.nodes.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        let v: Vec<f64> = m.nodes.iter().map(|p| p[0] * p[1]).collect();
        // exact P1 quadrature of e^2 on each triangle: area/6 (sum e_i^2 + sum_{i<j} e_i e_j)
        let e: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let quad = |f: &[f64]| -> f64 {
            (0..m.n_triangles())
                .map(|t| {
                    let [a, b, c] = m.triangles[t];
                    let (x, y, z) = (f[a], f[b], f[c]);
                    m.signed_area(t) / 6.0 * (x * x + y * y + z * z + x * y + y * z + x * z)
                })
                .sum()
        };
        let direct = 100.0 * (quad(&e) / quad(&u)).sqrt();
        assert_relative_eq!(n.relative_l2(&u, &v).unwrap(), direct, max_relative = 1e-10);
        // swapping arguments only changes the denominator
        let swapped = n.relative_l2(&v, &u).unwrap();
        assert!(swapped >= 0.0);
        assert_relative_eq!(swapped * (quad(&v)).sqrt(), direct * quad(&u).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn self_comparison_is_zero() {
        let (m, n) = unit();
        let t: Vec<f64> = m.nodes.iter().map(|p| p[0] - 2.0 * p[1]).collect();
        let traj = Trajectory {
            temperature: vec![vec![1.0; t.len()], t.clone()],
            pressure: vec![t.clone(), t.clone()],
        };
        let errs = trajectory_errors(&n, &traj, &traj).unwrap();
        assert_eq!(errs, vec![LayerErrors::default()]);
        let short = Trajectory {
            temperature: vec![t.clone()],
            pressure: vec![t],
        };
        assert!(trajectory_errors(&n, &traj, &short).is_err());
    }

    #[test]
    fn table_layout() {
        let rep = |m, l, e| ErrorReport {
            offline: m,
            online: l,
            period: 5,
            dof_c: 100 * m + l,
            final_errors: LayerErrors {
                l2_t: e,
                h1_t: e,
                l2_p: e,
                h1_p: e,
            },
            series: Vec::new(),
            pre_enrichment: Vec::new(),
        };
        let s = format_table(&[rep(2, 0, 8.2221), rep(2, 1, 5.4839), rep(4, 0, 1.0)]);
        assert!(s.contains("8.222") && s.contains("5.484"));
        assert_eq!(s.lines().filter(|l| l.starts_with("   2")).count(), 2);
    }

    proptest::proptest! {
        #[test]
        fn relative_errors_are_scale_invariant(
            seed in proptest::collection::vec(-1.0f64..1.0, 25),
            noise in proptest::collection::vec(-0.1f64..0.1, 25),
            scale in 0.01f64..100.0,
        ) {
            let m = build_fine_mesh(4, 4, 1.0, 1.0).unwrap();
            let n = NormOperators::new(&m).unwrap();
            let u: Vec<f64> = seed.iter().map(|v| v + 2.0).collect();
            let w: Vec<f64> = u.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let su: Vec<f64> = u.iter().map(|v| v * scale).collect();
            let sw: Vec<f64> = w.iter().map(|v| v * scale).collect();
            let (l2, sl2) = (n.relative_l2(&u, &w).unwrap(), n.relative_l2(&su, &sw).unwrap());
            proptest::prop_assert!((l2 - sl2).abs() <= 1e-9 * l2.max(1.0));
            proptest::prop_assert!(l2 >= 0.0);
            if let (Ok(h1), Ok(sh1)) = (n.relative_h1(&u, &w), n.relative_h1(&su, &sw)) {
                proptest::prop_assert!((h1 - sh1).abs() <= 1e-9 * h1.max(1.0));
            }
        }
    }
}
