use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wiretrap::cli::{self, exit, exit_code};
use wiretrap::config::{load_config, RunConfig};
use wiretrap::units::Units;
use wiretrap::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "wiretrap", version, about = "Magnetic fields and trap sites of current-carrying wire grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, conflicts_with = "scenario")]
    config: Option<PathBuf>,

    /// Built-in scenario (fig1b, fig1c, fig5, configA-cell, configB-cell,
    /// configC-cell, fig8-array).
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Output units: si or gauss-mm. Overrides the config's `units`.
    #[arg(long, global = true)]
    units: Option<Units>,

    /// Output file; defaults to the config's [output] path, else stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Trap-search seed grid, e.g. 9x9x7.
    #[arg(long, global = true, value_parser = parse_seed_grid)]
    seed_grid: Option<[usize; 3]>,

    /// Worker threads for grid evaluation and trap search.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// |B| and components over a 3-D grid.
    Fieldmap,
    /// |B| along a line.
    Profile,
    /// Locate, classify and label trap sites.
    Traps,
    /// Field of the lattice outside one unit cell.
    Perturbation,
    /// Closed forms and quoted values against the field solver.
    Verify,
}

fn parse_seed_grid(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(format!("expected NxNxN, got `{s}`"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("bad count `{p}` in `{s}`"))?;
    }
    Ok(out)
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.scenario) {
        (Some(path), None) => load_config(path)?,
        (None, Some(name)) => RunConfig::from_scenario(name, cli.units.unwrap_or(Units::GaussMm))?,
        _ => return Err(Error::validation("arguments", "give exactly one of --config or --scenario")),
    };
    if let Some(u) = cli.units {
        cfg.units = u;
    }
    if let Some(g) = cli.seed_grid {
        match cfg.region.as_mut() {
            Some(r) => {
                r.seed_grid = g;
                r.validate()?;
            }
            None => return Err(Error::validation("seed_grid", "no search region configured")),
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::validation("threads", e.to_string()))?;
    }
    let (text, code, out) = match cli.command {
        Command::Verify => {
            let units = cli.units.unwrap_or(Units::GaussMm);
            let (text, ok) = cli::verify(units)?;
            let code = if ok { exit::OK } else { exit::VERIFICATION };
            (text, code, cli.out.clone())
        }
        cmd => {
            let cfg = load(cli)?;
            let text = match cmd {
                Command::Fieldmap => cli::fieldmap(&cfg)?,
                Command::Profile => cli::profile(&cfg)?,
                Command::Traps => cli::traps(&cfg)?.0,
                Command::Perturbation => cli::perturbation(&cfg)?,
                Command::Verify => unreachable!(),
            };
            (text, exit::OK, cli.out.clone().or(cfg.output))
        }
    };
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
