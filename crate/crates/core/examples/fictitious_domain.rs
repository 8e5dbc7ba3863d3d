//! Darcy flow around a frozen disc: the flux through the disc shrinks
//! linearly with the frozen mobility factor.
//!
//! Usage: cargo run --release --example fictitious_domain

use frostms::config::SimulationConfig;
use frostms::geometry::LayerStripes;

fn disc_flux(epsilon: f64, frozen: bool) -> frostms::Result<f64> {
    let mut c = SimulationConfig::for_test(1)?;
    c.geometry.pipe_centers.clear();
    c.geometry.stripes = LayerStripes::uniform(0);
    c.phase.epsilon = epsilon;
    let setup = c.build()?;
    let m = &setup.model;
    let inside: Vec<f64> = m
        .mesh
        .nodes
        .iter()
        .map(|p| if (p[0] - 6.0).hypot(p[1] - 3.0) < 1.0 { -10.0 } else { 2.0 })
        .collect();
    let disc = m.materials.frozen_mask(&m.mesh, &inside);
    let field = if frozen { inside } else { vec![2.0; m.n_nodes()] };
    let coeffs = m.coefficients(&field);
    let p = m.solve_pressure(&coeffs)?;
    let u = m.velocity(&coeffs, &p);
    Ok((0..m.mesh.n_triangles())
        .filter(|&t| disc[t])
        .map(|t| m.mesh.signed_area(t) * u[t][0])
        .sum::<f64>()
        .abs())
}

fn main() -> frostms::Result<()> {
    let open = disc_flux(1e-3, false)?;
    println!("unfrozen disc flux {open:.4e}");
    for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let f = disc_flux(eps, true)?;
        println!("eps {eps:.0e}: flux {f:.4e}, flux / (eps * unfrozen) = {:.4}", f / (eps * open));
    }
    Ok(())
}
