//! Offline stage on the reference setup: spectral bases per neighborhood,
//! pipe bases and the coarse dimension for each offline count.
//!
//! Usage: cargo run --release --example offline_bases [-- <max offline>]

use std::time::Instant;

use frostms::config::SimulationConfig;
use frostms::offline::build_offline;

fn main() -> frostms::Result<()> {
    let m_max = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let setup = SimulationConfig::default().build()?;
    let model = &setup.model;
    let start = Instant::now();
    let bases = build_offline(
        &model.mesh,
        &setup.coarse,
        &setup.neighborhoods,
        &model.materials,
        model.bc.pipe_temperature,
        m_max,
    )?;
    println!(
        "{} neighborhoods, {} pipe bases, {} regularized eigenproblems, {:.1} s",
        bases.n_neighborhoods(),
        bases.pipe.len(),
        bases.regularized,
        start.elapsed().as_secs_f64()
    );

    for (name, values) in [
        ("temperature", &bases.temperature_eigenvalues),
        ("pressure", &bases.pressure_eigenvalues),
    ] {
        println!("{name} eigenvalues, first neighborhoods:");
        for (i, v) in values.iter().enumerate().take(3) {
            let shown: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
            println!("  omega {i:3}: {}", shown.join(" "));
        }
    }

    println!("M   DOF_c(T)  DOF_c(p)");
    for m in 1..=m_max {
        let space = bases.space(m)?;
        println!("{m:<3} {:8}  {:8}", space.temperature.len(), space.pressure.len());
    }
    Ok(())
}
