//! Multiscale error table against the fine solution.
//!
//! Usage: cargo run --release --example error_sweep [-- <test> <offline list> <online list>]
//! e.g. `error_sweep 1 2,4,6,8 0,1,2`

use std::time::Instant;

use frostms::analysis::{build_error_table, format_table};
use frostms::config::SimulationConfig;
use frostms::fine::run_fine;
use frostms::offline::build_offline;
use frostms::online::{EnrichmentSchedule, MultiscaleSolver};

fn list(arg: Option<&String>, default: &[usize]) -> Vec<usize> {
    arg.map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_else(|| default.to_vec())
}

fn main() -> frostms::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let test = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let offline = list(args.get(2), &[2, 4, 6, 8]);
    let online = list(args.get(3), &[0, 1, 2]);
    let config = SimulationConfig::for_test(test)?;
    let setup = config.build()?;
    let model = &setup.model;

    let start = Instant::now();
    let fine = run_fine(model)?;
    println!("fine run: {:.1} s", start.elapsed().as_secs_f64());

    let start = Instant::now();
    let m_max = offline.iter().copied().max().unwrap_or(1);
    let bases = build_offline(
        &model.mesh,
        &setup.coarse,
        &setup.neighborhoods,
        &model.materials,
        model.bc.pipe_temperature,
        m_max,
    )?;
    println!("offline bases (M <= {m_max}): {:.1} s", start.elapsed().as_secs_f64());

    let solver = MultiscaleSolver::new(model, &setup.coarse, &setup.neighborhoods);
    let mut runs = Vec::new();
    for &m in &offline {
        for &l in &online {
            let start = Instant::now();
            let schedule = EnrichmentSchedule::new(config.multiscale.period, l, config.multiscale.accumulate_online)?;
            let run = solver.run(bases.space(m)?, schedule)?;
            println!("M = {m}, online = {l}: {:.1} s", start.elapsed().as_secs_f64());
            runs.push(run);
        }
    }
    let reports = build_error_table(&model.mesh, &fine, &runs.iter().collect::<Vec<_>>())?;
    println!("\ntest {test}\n{}", format_table(&reports));
    Ok(())
}
