mod commands;
mod config;
mod failure;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::{GridConfig, RunConfig};
use failure::Failure;
use validate::Outcome;

#[derive(Parser, Debug)]
#[command(name = "patchcomp", version, about = "Two-species competition on patchy landscapes")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// JSON run configuration.
    #[arg(long, global = true, env = "PATCHCOMP_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true, env = "PATCHCOMP_OUT")]
    out: Option<PathBuf>,

    /// Seed for randomized checks (overrides the config's seed).
    #[arg(long, global = true, env = "PATCHCOMP_SEED")]
    seed: Option<u64>,

    /// Target grid spacing; replaces the config's grid section.
    #[arg(long, global = true, env = "PATCHCOMP_RESOLUTION")]
    resolution: Option<f64>,

    /// Worker threads for parallel commands; 0 uses all cores.
    #[arg(long, global = true, env = "PATCHCOMP_WORKERS", default_value_t = 0)]
    workers: usize,

    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Resident steady state and monotonicity report.
    Steady,
    /// Principal eigenpair of the resident's linearization at its steady state.
    Eigen,
    /// Invasion fitness of the mutant against the resident.
    Fitness,
    /// Time integration of the competition system and its long-time verdict.
    Simulate,
    /// Pairwise invasibility grid (two patches).
    Pip,
    /// Region-based prediction of invasion and global outcome.
    Classify,
    /// Batched classification and fitness over strategy lists.
    Sweep,
    /// Identity-residual and property checks on the configured instance.
    Validate,
}

fn load(cli: &Cli) -> Result<Context, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::validation("--config", "a configuration file is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::validation("--config", &format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(h) = cli.resolution {
        config.grid = GridConfig::Spacing(h);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let resolved = config.resolve()?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Context { config, resolved, out })
}

fn dispatch(cli: &Cli, command: Command) -> Result<(), Failure> {
    let ctx = load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Failure::validation("--workers", &e.to_string()))?;
    pool.install(|| {
        let summary = match command {
            Command::Steady => commands::steady(&ctx)?,
            Command::Eigen => commands::eigen(&ctx)?,
            Command::Fitness => commands::fitness(&ctx)?,
            Command::Simulate => commands::simulate(&ctx)?,
            Command::Pip => commands::pip(&ctx)?,
            Command::Classify => commands::classify(&ctx)?,
            Command::Sweep => commands::sweep(&ctx)?,
            Command::Validate => return run_validate(&ctx),
        };
        println!("{summary}");
        Ok(())
    })
}

fn run_validate(ctx: &Context) -> Result<(), Failure> {
    let checks = validate::run(ctx, ctx.config.seed);
    let mut failed = 0;
    for c in &checks {
        let (tag, detail) = match &c.outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {}: {detail}", c.name);
    }
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        println!("{}", RunConfig::default().to_json());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(1);
    };
    match dispatch(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
