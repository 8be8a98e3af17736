use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{CliResult, Context};
use config::Config;

/// Exact non-Markovian quantum Otto cycle of a damped oscillator.
///
/// Units: hbar = 1 and k_B is folded into the temperatures; all energies,
/// frequencies and temperatures share one arbitrary unit.
#[derive(Parser, Debug)]
#[command(name = "nmotto", version, about)]
struct Cli {
    /// Flat key=value config file, or any output file with a `#:` echo.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweeps; does not change the output.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Absolute quadrature tolerance (overrides `tol_abs`).
    #[arg(long, global = true)]
    tol_abs: Option<f64>,

    /// Relative quadrature tolerance (overrides `tol_rel`).
    #[arg(long, global = true)]
    tol_rel: Option<f64>,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,

    /// Override a config key, e.g. `-D gamma0=5`. Repeatable.
    #[arg(short = 'D', long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// One limit cycle, exact and Markov side by side.
    Cycle,
    /// Time trace of one bath stroke (`bath = hot | cold`).
    Trace,
    /// Work, heat and efficiency against the bath peak omega_c.
    SweepWc,
    /// Cycle loops in the (omega, n) plane for `omega_c_list`.
    Diagram,
    /// J and dJ/domega at the stroke frequencies against omega_c.
    Spectral,
    /// Operating-mode maps over (delta_t, delta_omega), one per panel.
    Regions,
    /// Efficiency over (gamma0, lambda).
    Heatmap,
    /// Moment-equation oracle on both strokes.
    Validate,
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(x) = cli.tol_abs {
        cfg.set("tol_abs", &x.to_string())?;
    }
    if let Some(x) = cli.tol_rel {
        cfg.set("tol_rel", &x.to_string())?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Context {
        config: load_config(cli)?,
        out: cli.out.clone(),
        jobs: cli.jobs,
        svg: cli.svg,
    };
    match cli.command {
        Command::Cycle => commands::cycle(&ctx),
        Command::Trace => commands::trace(&ctx),
        Command::SweepWc => commands::sweep_wc(&ctx),
        Command::Diagram => commands::diagram(&ctx),
        Command::Spectral => commands::spectral(&ctx),
        Command::Regions => commands::regions(&ctx),
        Command::Heatmap => commands::heatmap(&ctx),
        Command::Validate => commands::validate(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nmotto: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

