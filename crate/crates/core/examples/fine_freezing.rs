//! Fine-grid freezing run on the reference setup.
//!
//! Usage: cargo run --release --example fine_freezing [-- <test> <n_steps>]

use std::time::Instant;

use frostms::analysis::frozen_area;
use frostms::config::SimulationConfig;
use frostms::fine::run_fine_with;

fn main() -> frostms::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let test = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut config = SimulationConfig::for_test(test)?;
    if let Some(n) = args.get(2).and_then(|s| s.parse().ok()) {
        config.n_steps = n;
    }
    let setup = config.build()?;
    let model = &setup.model;
    println!(
        "test {test}: {} nodes, {} triangles, {} pipe nodes, tau = {:.0} s",
        model.mesh.n_nodes(),
        model.mesh.n_triangles(),
        model.pipes.n_nodes(),
        model.time.tau()
    );
    let start = Instant::now();
    run_fine_with(model, |state| {
        let area = frozen_area(&model.mesh, &model.materials, &state.temperature);
        let (lo, hi) = state
            .temperature
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        if state.layer % 10 == 0 || state.layer == model.time.n_steps {
            println!(
                "layer {:3}: frozen area {:7.4} m^2, T in [{lo:.4}, {hi:.6}], p in [{:.3}, {:.3}]",
                state.layer,
                area,
                state.pressure.iter().cloned().fold(f64::INFINITY, f64::min),
                state.pressure.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
        }
        Ok(())
    })?;
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
