use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use frostms::analysis::format_table;
use frostms::app::{self, OutputLayout, DEFAULT_MAX_OFFLINE};
use frostms::config::{parse_config, SimulationConfig};

#[derive(Parser)]
#[command(name = "frostms", version, about = "Ground freezing simulations on fine and multiscale spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file; the reference setup when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config and the environment).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pressure boundary test case (1 or 2), overriding the config.
    #[arg(long)]
    test: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-grid run; stores fine.bin and VTK snapshots.
    RunFine(Common),
    /// Offline stage; stores bases.cache.
    BuildBases {
        #[command(flatten)]
        common: Common,
        /// Bases per neighborhood to compute.
        #[arg(long, default_value_t = DEFAULT_MAX_OFFLINE)]
        max_offline: usize,
    },
    /// Multiscale run with offline and online bases.
    RunMs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        offline: Option<usize>,
        #[arg(long)]
        online: Option<usize>,
        #[arg(long)]
        period: Option<usize>,
    },
    /// Error table of stored multiscale runs against the stored fine run.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Multiscale trajectories; every ms_*.bin in the output directory when omitted.
        #[arg(long = "ms")]
        runs: Vec<PathBuf>,
    },
    /// Fine run, offline stage and the full (offline x online) error matrix.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 6, 8])]
        offline: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2])]
        online: Vec<usize>,
    },
}

fn load(common: &Common) -> frostms::Result<(SimulationConfig, OutputLayout)> {
    let mut config = match &common.config {
        Some(p) => parse_config(p)?,
        None => SimulationConfig::default(),
    };
    if let Some(t) = common.test {
        config.set_test(t)?;
    }
    let dir = common.out.clone().unwrap_or_else(|| config.output_dir());
    Ok((config, OutputLayout::new(dir)))
}

fn run(cli: Cli) -> frostms::Result<()> {
    let start = Instant::now();
    match cli.command {
        Command::RunFine(common) => {
            let (config, out) = load(&common)?;
            let setup = config.build()?;
            let traj = app::run_fine_to_disk(&config, &setup, &out)?;
            println!(
                "fine run: {} layers x {} nodes -> {}",
                traj.n_layers(),
                traj.n_nodes(),
                out.fine_trajectory().display()
            );
        }
        Command::BuildBases { common, max_offline } => {
            let (config, out) = load(&common)?;
            let setup = config.build()?;
            let bases = app::build_bases(&setup, &out, max_offline)?;
            println!(
                "{} neighborhoods x {} bases per field, {} pipe bases, {} regularized -> {}",
                bases.n_neighborhoods(),
                bases.m_max,
                bases.pipe.len(),
                bases.regularized,
                out.basis_cache().display()
            );
        }
        Command::RunMs {
            common,
            offline,
            online,
            period,
        } => {
            let (config, out) = load(&common)?;
            let setup = config.build()?;
            let m = offline.unwrap_or(config.multiscale.offline);
            let schedule = app::schedule_for(
                &config,
                online.unwrap_or(config.multiscale.online),
                period.unwrap_or(config.multiscale.period),
            )?;
            let bases = app::load_or_build_bases(&setup, &out, m)?;
            let run = app::run_ms_to_disk(&config, &setup, &out, &bases, m, schedule)?;
            println!(
                "multiscale run: M = {m}, online = {}, period = {}, DOF_c = {} (temperature) / {} (pressure), {} enrichment events -> {}",
                schedule.iterations,
                schedule.period,
                run.final_temperature_dofs,
                run.final_pressure_dofs,
                run.events.len(),
                out.ms_trajectory(m, schedule.iterations).display()
            );
        }
        Command::Compare { common, mut runs } => {
            let (config, out) = load(&common)?;
            let setup = config.build()?;
            if runs.is_empty() {
                let entries = std::fs::read_dir(&out.dir).map_err(|e| frostms::Error::Io {
                    path: out.dir.clone(),
                    source: e,
                })?;
                runs = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| {
                        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                        name.starts_with("ms_") && name.ends_with(".bin")
                    })
                    .collect();
                runs.sort();
            }
            if runs.is_empty() {
                return Err(frostms::Error::InvalidArgument(format!(
                    "no multiscale trajectories in {}",
                    out.dir.display()
                )));
            }
            let reports = app::compare_files(&setup, &out.fine_trajectory(), &runs)?;
            app::write_reports(&out, &reports)?;
            print!("{}", format_table(&reports));
            println!("-> {}", out.error_table().display());
        }
        Command::Sweep {
            common,
            offline,
            online,
        } => {
            let (config, out) = load(&common)?;
            let setup = config.build()?;
            let reports = app::sweep(&config, &setup, &out, &offline, &online, |msg| {
                eprintln!("[{:6.1} s] {msg}", start.elapsed().as_secs_f64())
            })?;
            if let Some(t) = config.test {
                println!("test {t}");
            }
            print!("{}", format_table(&reports));
            println!("-> {}", out.error_table().display());
        }
    }
    eprintln!("done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}
