use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crossdiff_cli::{presets, runner, sweep, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "crossdiff",
    version,
    about = "Two-species cross-diffusion solver"
)]
struct Cli {
    /// Output root; each run writes to <out>/<name>/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for particle runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Snapshot time, repeatable; replaces output.snapshots.
    #[arg(long = "snapshot", global = true)]
    snapshots: Vec<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config file.
    Run { config: PathBuf },
    /// Run several config files concurrently and write sweep.csv.
    Sweep { configs: Vec<PathBuf> },
    /// Run a built-in preset, or print it with --emit. Lists presets without a name.
    Preset {
        name: Option<String>,
        #[arg(long)]
        emit: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        snapshots: (!cli.snapshots.is_empty()).then_some(cli.snapshots),
    };
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            run_one(cfg, &overrides)
        }
        Command::Preset { name: None, .. } => {
            for n in presets::names() {
                println!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset {
            name: Some(name),
            emit,
        } => {
            let preset = presets::get(&name)
                .ok_or_else(|| CliError::config("preset", format!("unknown preset `{name}`")))?;
            if emit {
                print!("{}", preset.emit());
                Ok(ExitCode::SUCCESS)
            } else {
                run_one(preset.config, &overrides)
            }
        }
        Command::Sweep { configs } => {
            let cfgs = configs
                .iter()
                .map(|p| RunConfig::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            let root = match cfgs.first() {
                Some(c) => overrides.out_root(c),
                None => overrides.out.clone().unwrap_or_else(|| {
                    std::env::var_os(runner::OUT_ENV)
                        .map(PathBuf::from)
                        .unwrap_or_else(|| PathBuf::from("out"))
                }),
            };
            let report = sweep::sweep(&cfgs, &overrides, &root)?;
            print!("{}", report.csv);
            for (name, res) in &report.results {
                if let Err(e) = res {
                    eprintln!("{}", e.machine_line());
                    log::debug!("{name} failed");
                }
            }
            if report.failures() > 0 {
                Ok(ExitCode::from(3))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

fn run_one(mut cfg: RunConfig, overrides: &Overrides) -> Result<ExitCode, CliError> {
    overrides.apply(&mut cfg);
    let root = overrides.out_root(&cfg);
    let s = runner::run(&cfg, &root)?;
    let r = &s.last;
    println!(
        "{}: step {} t = {} overlap = {} stationary = {} -> {}",
        s.name,
        r.step,
        r.time,
        r.overlap,
        s.stationary,
        s.dir.display()
    );
    if let Some(p) = &s.particles {
        println!("particles n = {}: L1 = {} / {}", p.n, p.l1[0], p.l1[1]);
    }
    Ok(ExitCode::SUCCESS)
}
