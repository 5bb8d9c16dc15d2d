use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toroid_cqed_cli::commands;
use toroid_cqed_cli::config::{FitModel, RunConfig};
use toroid_cqed_cli::output::write_all;
use toroid_cqed_cli::CliError;

/// Atom–microtoroid cavity QED: spectra, dressed states, transit Monte Carlo and fits.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// TOML run configuration; defaults reproduce the experiment.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output_dir` from the configuration.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(short, long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward transmission against probe detuning (spectrum.csv).
    Spectrum {
        #[arg(long)]
        g0: Option<f64>,
        #[arg(long)]
        kx: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta_ac: Option<f64>,
    },
    /// Dressed-state eigenvalues against atom–cavity detuning (eigen.json).
    Eigen {
        #[arg(long)]
        g0: Option<f64>,
        #[arg(long)]
        kx: Option<f64>,
    },
    /// Simulated drops: counts, events, histogram and Γ(τ).
    Drop {
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        g0m: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta_ac: Option<f64>,
        #[arg(long)]
        no_atoms: bool,
    },
    /// Events per drop against atom–cavity detuning (sweep.csv).
    Sweep {
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        theory_only: bool,
    },
    /// Fit a CSV trace (fit.json).
    Fit {
        input: PathBuf,
        #[arg(long, value_enum)]
        model: Option<FitModel>,
    },
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let files = match &cli.command {
        Command::Spectrum { g0, kx, delta_ac } => {
            let s = &mut cfg.spectrum;
            s.g0 = g0.unwrap_or(s.g0);
            s.kx = kx.unwrap_or(s.kx);
            s.delta_ac = delta_ac.unwrap_or(s.delta_ac);
            commands::spectrum(&cfg)?
        }
        Command::Eigen { g0, kx } => {
            let e = &mut cfg.eigen;
            e.g0 = g0.unwrap_or(e.g0);
            e.kx = kx.unwrap_or(e.kx);
            commands::eigen(&cfg)?
        }
        Command::Drop { drops, g0m, delta_ac, no_atoms } => {
            let d = &mut cfg.drop;
            d.drops = drops.unwrap_or(d.drops);
            d.g0m = g0m.unwrap_or(d.g0m);
            d.delta_ac = delta_ac.unwrap_or(d.delta_ac);
            d.no_atoms |= no_atoms;
            commands::drop(&cfg)?
        }
        Command::Sweep { drops, theory_only } => {
            cfg.sweep.drops = drops.unwrap_or(cfg.sweep.drops);
            cfg.sweep.theory_only |= theory_only;
            commands::sweep(&cfg)?
        }
        Command::Fit { input, model } => {
            let model = model.unwrap_or(cfg.fit.model);
            match commands::fit(&cfg, input, model) {
                Ok(files) => files,
                Err(e) => {
                    let digest = std::fs::read(input).ok().map(|b| commands::digest(&b));
                    let diagnostic = serde_json::json!({
                        "format": "fit-error/1",
                        "model": model,
                        "input_sha256": digest,
                        "exit_code": e.exit_code(),
                        "error": e.to_string(),
                    });
                    println!("{}", serde_json::to_string_pretty(&diagnostic).expect("json"));
                    return Err(e);
                }
            }
        }
    };
    write_all(&cfg.output_dir, &files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("toroid-cqed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
