//! Command-line front end: one binary with a subcommand per experiment
//! family. Every run writes its outputs plus a manifest into the output
//! directory and exits 0 on success, 2 on configuration errors, 3 when the
//! subcritical-replica quota is breached, 4 on I/O failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpplab::config::ExperimentConfig;
use fpplab::error::Error;
use fpplab::runner::run_experiment_with;

#[derive(Parser)]
#[command(name = "fpplab", version, about = "Growth and percolation experiments on random geometric graphs")]
struct Cli {
    /// Output path: a directory, or a file name whose parent becomes the
    /// output directory and which names the primary output.
    #[arg(long, global = true, env = "FPPLAB_OUT", default_value = "out")]
    out: PathBuf,

    /// Worker threads for replica-parallel experiments.
    #[arg(long, global = true, env = "FPPLAB_THREADS")]
    threads: Option<usize>,

    /// Root seed override (replaces the seed in the config).
    #[arg(long, global = true, env = "FPPLAB_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment from a JSON config with a "kind" field.
    Run(ConfigArgs),
    /// Sample a Poisson point process and write it as NDJSON.
    Ppp {
        #[arg(long)]
        lambda: f64,
        /// Box half-width.
        #[arg(long = "box", alias = "l")]
        half_width: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Build the disk graph on a fresh sample and export it.
    Rgg {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        r: f64,
        #[arg(long = "box", alias = "l")]
        half_width: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Also draw an SVG snapshot (2-d only).
        #[arg(long)]
        svg: bool,
    },
    /// First-passage percolation runs.
    Fpp {
        #[command(subcommand)]
        action: FppAction,
    },
    /// Time-constant profiles and shape error.
    Shape {
        #[command(subcommand)]
        action: ShapeAction,
    },
    /// Zero-time bond percolation sweeps.
    Perc {
        #[command(subcommand)]
        action: PercAction,
    },
    /// High-density rescaling experiments.
    Scale {
        #[command(subcommand)]
        action: ScaleAction,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum FppAction {
    /// Run one first-passage field from a JSON config.
    Run(ConfigArgs),
}

#[derive(Subcommand)]
enum ShapeAction {
    /// Directional time-constant profile from a JSON config.
    Profile(ConfigArgs),
    /// Ball-inclusion error at chosen times from a JSON config.
    Error(ConfigArgs),
}

#[derive(Subcommand)]
enum PercAction {
    /// Sweep the open probability over a grid.
    Sweep {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Open-probability grid "start:stop:step" (inclusive) or a
        /// comma-separated list.
        #[arg(long = "p-grid")]
        p_grid: String,
        /// Comma-separated box half-widths.
        #[arg(long, default_value = "50")]
        sizes: String,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Emit an open-cluster SVG snapshot at this open probability.
        #[arg(long = "svg-p")]
        svg_p: Option<f64>,
    },
}

#[derive(Subcommand)]
enum ScaleAction {
    /// Empirical vs limit jump kernel at one intensity multiplier.
    Kernels {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long = "lambda-i", default_value_t = 1.0)]
        lambda_i: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "box", default_value_t = 2.0)]
        half_width: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Occupied set; only "origin" (one Palm point at o) is supported.
        #[arg(long = "s", alias = "S", default_value = "origin")]
        occupied: String,
        #[arg(long, default_value_t = 4096)]
        mc_samples: usize,
    },
    /// Convergence table of the rescaled growth process to the branching
    /// limit over an alpha grid.
    Converge {
        /// Comma-separated increasing alpha grid.
        #[arg(long)]
        alphas: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long = "n-ref", default_value_t = 20000)]
        n_ref: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long = "lambda-i", default_value_t = 1.0)]
        lambda_i: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "box")]
        half_width: Option<f64>,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number '{s}': {e}")))
        })
        .collect()
}

fn parse_p_grid(text: &str) -> Result<Vec<f64>, Error> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "p-grid '{text}' must be start:stop:step"
            )));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|e| Error::Config(format!("p-grid start: {e}")))?;
        let stop: f64 = parts[1]
            .parse()
            .map_err(|e| Error::Config(format!("p-grid stop: {e}")))?;
        let step: f64 = parts[2]
            .parse()
            .map_err(|e| Error::Config(format!("p-grid step: {e}")))?;
        if step <= 0.0 || stop < start {
            return Err(Error::Config("p-grid needs step > 0 and stop >= start".into()));
        }
        let mut grid = Vec::new();
        let mut k = 0u32;
        loop {
            let p = start + step * k as f64;
            if p > stop + 1e-12 {
                break;
            }
            grid.push(p);
            k += 1;
        }
        Ok(grid)
    } else {
        parse_f64_list(text)
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

/// `--out sims/profile.csv` means directory `sims`, primary file
/// `profile.csv`; a bare directory keeps the default file names.
fn split_out(out: &Path) -> (PathBuf, Option<String>) {
    let is_file = matches!(
        out.extension().and_then(|e| e.to_str()),
        Some("csv" | "json" | "ndjson" | "svg")
    );
    if is_file {
        let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = if dir.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            dir
        };
        let name = out.file_name().and_then(|n| n.to_str()).map(str::to_owned);
        (dir, name)
    } else {
        (out.to_path_buf(), None)
    }
}

fn override_seed(cfg: &mut ExperimentConfig, seed: Option<u64>) {
    let Some(seed) = seed else { return };
    match cfg {
        ExperimentConfig::Ppp(c) => c.seed = seed,
        ExperimentConfig::Rgg(c) => c.seed = seed,
        ExperimentConfig::Fpp(c) => c.seed = seed,
        ExperimentConfig::Shape(c) => c.seed = seed,
        ExperimentConfig::Perc(c) => c.seed = seed,
        ExperimentConfig::Scale(c) => c.seed = seed,
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let json = |v: serde_json::Value| -> Result<ExperimentConfig, Error> {
        ExperimentConfig::from_json(&v.to_string())
    };
    match &cli.command {
        Command::Run(args) => load_config(&args.config),
        Command::Ppp {
            lambda,
            half_width,
            d,
        } => json(serde_json::json!({
            "kind": "ppp", "lambda": lambda, "box": half_width, "d": d,
            "seed": cli.seed.unwrap_or(1)
        })),
        Command::Rgg {
            lambda,
            r,
            half_width,
            d,
            svg,
        } => json(serde_json::json!({
            "kind": "rgg", "lambda": lambda, "r": r, "box": half_width, "d": d,
            "seed": cli.seed.unwrap_or(1), "svg": svg
        })),
        Command::Fpp {
            action: FppAction::Run(args),
        } => load_config(&args.config),
        Command::Shape { action } => {
            let (args, task) = match action {
                ShapeAction::Profile(a) => (a, "profile"),
                ShapeAction::Error(a) => (a, "error"),
            };
            let cfg = load_config(&args.config)?;
            match &cfg {
                ExperimentConfig::Shape(s) => {
                    let want = match task {
                        "profile" => fpplab::config::ShapeTask::Profile,
                        _ => fpplab::config::ShapeTask::Error,
                    };
                    if s.task != want {
                        return Err(Error::Config(format!(
                            "config task does not match the '{task}' subcommand"
                        )));
                    }
                    Ok(cfg)
                }
                _ => Err(Error::Config("expected a shape config".into())),
            }
        }
        Command::Perc {
            action:
                PercAction::Sweep {
                    lambda,
                    r,
                    d,
                    p_grid,
                    sizes,
                    seeds,
                    svg_p,
                },
        } => json(serde_json::json!({
            "kind": "perc", "lambda": lambda, "r": r, "d": d,
            "p_grid": parse_p_grid(p_grid)?,
            "half_widths": parse_f64_list(sizes)?,
            "n_seeds": seeds, "seed": cli.seed.unwrap_or(1), "svg_p": svg_p
        })),
        Command::Scale { action } => match action {
            ScaleAction::Kernels {
                alpha,
                delta,
                lambda,
                lambda_i,
                r,
                half_width,
                d,
                occupied,
                mc_samples,
            } => {
                if occupied != "origin" {
                    return Err(Error::Config(format!(
                        "unsupported occupied set '{occupied}': only 'origin'"
                    )));
                }
                json(serde_json::json!({
                    "kind": "scale", "task": "kernels", "lambda": lambda,
                    "lambda_i": lambda_i, "r": r, "d": d, "box": half_width,
                    "seed": cli.seed.unwrap_or(1), "alpha": alpha, "delta": delta,
                    "mc_samples": mc_samples
                }))
            }
            ScaleAction::Converge {
                alphas,
                k,
                runs,
                n_ref,
                lambda,
                lambda_i,
                r,
                half_width,
                d,
            } => {
                let half = half_width.unwrap_or((*k as f64 + 2.0) * r);
                json(serde_json::json!({
                    "kind": "scale", "task": "converge", "lambda": lambda,
                    "lambda_i": lambda_i, "r": r, "d": d, "box": half,
                    "seed": cli.seed.unwrap_or(1), "alphas": parse_f64_list(alphas)?,
                    "k": k, "runs": runs, "n_ref": n_ref
                }))
            }
        },
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut cfg = build_config(cli)?;
    override_seed(&mut cfg, cli.seed);
    let (dir, primary) = split_out(&cli.out);
    let manifest = run_experiment_with(&cfg, &dir, cli.threads, primary)?;
    println!(
        "{}",
        serde_json::json!({
            "kind": manifest.kind,
            "out_dir": dir,
            "outputs": manifest.outputs.iter().map(|o| o.path.clone()).collect::<Vec<_>>(),
            "warnings": manifest.warnings,
            "wall_clock_secs": manifest.wall_clock_secs,
        })
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let label = match err.exit_code() {
                2 => "config",
                3 => "subcritical_quota",
                4 => "io",
                _ => "runtime",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": label, "message": err.to_string() })
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
