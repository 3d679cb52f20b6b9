use clap::{Parser, Subcommand};
use optswitch_cli::{oracle_table, run, RunConfig, RunOptions, RNG_KEY_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "optswitch",
    version,
    about = "Regression Monte Carlo for optimal switching problems"
)]
struct Cli {
    /// Worker threads for the parallel sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with an error if a market, fleet, ordering or audit invariant fails.
    #[arg(long, global = true)]
    assert_invariants: bool,
    /// Default RNG key (64 hex digits) for configs without `rng_key`.
    #[arg(long, env = RNG_KEY_ENV, global = true, hide_env_values = true)]
    rng_key: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, simulate the three strategies and write the report and tables.
    Run { config: PathBuf },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Print the lattice ground truth of a small one-dimensional config.
    Oracle { config: PathBuf },
}

fn load(path: &PathBuf, key: &Option<String>) -> Result<RunConfig, optswitch_cli::CliError> {
    let mut cfg = RunConfig::from_file(path)?;
    if cfg.rng_key.is_none() {
        if let Some(k) = key.as_deref().filter(|k| !k.trim().is_empty()) {
            cfg.rng_key = Some(k.parse().map_err(|e: optswitch::PathError| {
                optswitch_cli::CliError::Config {
                    path: RNG_KEY_ENV.into(),
                    message: e.to_string(),
                }
            })?);
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => load(config, &cli.rng_key).and_then(|cfg| {
            let opts = RunOptions {
                workers: cli.workers,
                out: cli.out.clone(),
                assert_invariants: cli.assert_invariants,
            };
            let outcome = run(&cfg, &opts)?;
            let r = &outcome.report;
            println!(
                "{}: value {} ± {} {} from regime {}; report in {}",
                r.problem,
                r.solver.value_start,
                r.solver.standard_error_start,
                r.value_unit,
                r.solver.start_regime,
                outcome.out_dir.join("report.json").display()
            );
            for s in &r.strategies {
                println!(
                    "  {:<20} {:>16.6e} ± {:.3e}",
                    s.name, s.mean_gain, s.standard_error
                );
            }
            Ok(())
        }),
        Command::Validate { config } => load(config, &cli.rng_key).map(|cfg| {
            println!(
                "{}: ok ({} steps, M = {}, K = {})",
                config.display(),
                cfg.steps(),
                cfg.solver.paths,
                cfg.solver.cells
            );
        }),
        Command::Oracle { config } => load(config, &cli.rng_key).and_then(|cfg| {
            let v = oracle_table(&cfg)?;
            let q = v.values.len();
            let header: Vec<String> = (0..q).map(|i| format!("value_regime_{i}")).collect();
            println!("x,{}", header.join(","));
            for (x, row) in v.lattice.iter().zip(&v.table) {
                let cells: Vec<String> = row.iter().map(|r| format!("{r:?}")).collect();
                println!("{x:?},{}", cells.join(","));
            }
            let at: Vec<String> = v.values.iter().map(|r| format!("{r:?}")).collect();
            println!("x0,{}", at.join(","));
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
