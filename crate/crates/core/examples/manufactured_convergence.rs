//! Heat equation with a known solution on refined grids; the L2 error
//! drops by about four per refinement.
//!
//! Usage: cargo run --release --example manufactured_convergence

use std::f64::consts::PI;

use frostms::fem::{Assembler, Constraints, LinearSystem};
use frostms::fine::solve_constrained;
use frostms::geometry::build_fine_mesh;

fn exact(p: [f64; 2], t: f64) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin() * (-t).exp()
}

fn l2_error(n: usize, t_end: f64) -> frostms::Result<f64> {
    let mesh = build_fine_mesh(n, n, 1.0, 1.0)?;
    let a = Assembler::new(&mesh)?;
    let ones = vec![1.0; mesh.n_triangles()];
    let h = 1.0 / n as f64;
    let steps = (t_end / (h * h)).round() as usize;
    let tau = t_end / steps as f64;
    let mass = a.mass(&ones);
    let matrix = a.weighted(Some(&ones), Some(&vec![1.0 / tau; ones.len()]));
    let boundary = Constraints::new((0..mesh.n_nodes()).filter(|&i| mesh.is_boundary_node(i)).map(|i| (i, 0.0)))?;
    let mut u: Vec<f64> = mesh.nodes.iter().map(|&p| exact(p, 0.0)).collect();
    for k in 1..=steps {
        let t = k as f64 * tau;
        let f: Vec<f64> = mesh.nodes.iter().map(|&p| (2.0 * PI * PI - 1.0) * exact(p, t)).collect();
        let rhs: Vec<f64> = mass
            .mul_vec(&u)
            .iter()
            .zip(mass.mul_vec(&f))
            .map(|(a, b)| a / tau + b)
            .collect();
        u = solve_constrained(LinearSystem::new(matrix.clone(), rhs, boundary.clone()))?;
    }
    let mut err2 = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        for (p, q) in [(0, 1), (1, 2), (2, 0)] {
            let (a, b) = (mesh.nodes[tri[p]], mesh.nodes[tri[q]]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let e = (u[tri[p]] + u[tri[q]]) / 2.0 - exact(mid, t_end);
            err2 += area / 3.0 * e * e;
        }
    }
    Ok(err2.sqrt())
}

fn main() -> frostms::Result<()> {
    let mut prev: Option<f64> = None;
    for n in [10, 20, 40, 80] {
        let e = l2_error(n, 0.1)?;
        match prev {
            Some(p) => println!("n = {n:3}: L2 error {e:.4e}, ratio {:.3}", p / e),
            None => println!("n = {n:3}: L2 error {e:.4e}"),
        }
        prev = Some(e);
    }
    Ok(())
}
