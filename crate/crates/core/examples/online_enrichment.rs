//! Residual-driven online enrichment: per-event residual norms and the
//! number of online bases added.
//!
//! Usage: cargo run --release --example online_enrichment [-- <offline> <online> <period> <n_steps>]

use frostms::config::SimulationConfig;
use frostms::offline::build_offline;
use frostms::online::{EnrichmentSchedule, MultiscaleSolver};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> frostms::Result<()> {
    let (m, l, period) = (arg(1, 4), arg(2, 2), arg(3, 5));
    let config = SimulationConfig {
        n_steps: arg(4, 20),
        ..Default::default()
    };
    let setup = config.build()?;
    let model = &setup.model;
    let bases = build_offline(&model.mesh, &setup.coarse, &setup.neighborhoods, &model.materials, model.bc.pipe_temperature, m)?;
    let solver = MultiscaleSolver::new(model, &setup.coarse, &setup.neighborhoods);
    let run = solver.run(bases.space(m)?, EnrichmentSchedule::new(period, l, config.multiscale.accumulate_online)?)?;

    for e in &run.events {
        println!("layer {}", e.layer);
        for (field, res, added) in [
            ("T", &e.temperature_residuals, &e.temperature_added),
            ("p", &e.pressure_residuals, &e.pressure_added),
        ] {
            let dual: Vec<String> = res.iter().map(|r| format!("{:.3e}", r.dual)).collect();
            let l2: Vec<String> = res.iter().map(|r| format!("{:.3e}", r.l2)).collect();
            println!("  {field}: dual residual {}, l2 residual {}, added {added:?}", dual.join(" -> "), l2.join(" -> "));
        }
    }
    println!(
        "final DOF_c: {} (temperature), {} (pressure)",
        run.final_temperature_dofs, run.final_pressure_dofs
    );
    Ok(())
}
