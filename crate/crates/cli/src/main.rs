use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use geolift_cli::config::parse_override;
use geolift_cli::repro::{run_suite, SUITES};
use geolift_cli::{exit_code, AcceptanceFailure, RunConfig};
use log::error;
use toml::Value;

/// Geodesic-lifted point embeddings: shape generation, graph geodesics,
/// network fitting, analysis, meshing and reproduction suites.
///
/// Exit codes: 0 success, 1 invalid input, 2 numerical failure,
/// 3 failed acceptance criterion.
#[derive(Parser)]
#[command(name = "geolift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (default: $GEOLIFT_OUTPUT_ROOT/<command>, else runs/<command>).
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Upper bound on worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Override any config entry, e.g. `--set training.steps=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic shape into cloud.ply.
    Gen {
        #[command(flatten)]
        common: Common,
        /// sphere, cube, cut_cylinder_band, thin_plate, torus or swiss_roll.
        #[arg(long)]
        kind: Option<String>,
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Build the k-NN graph of a cloud and write all-pairs geodesics.
    Geodesics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Fit a mapping network to a cloud and its distance matrix.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        distances: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lambda_c: Option<f64>,
        #[arg(long)]
        lambda_g: Option<f64>,
    },
    /// Evaluate a checkpoint: Chamfer, normal consistency, geodesic error, charts.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        distances: Option<PathBuf>,
    },
    /// Build a chart mesh from a checkpoint and evaluate it.
    Mesh {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        charts: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Run a reproduction suite, or `all`.
    Repro {
        /// Suite name.
        suite: String,
        /// Output directory (default: $GEOLIFT_OUTPUT_ROOT/repro, else runs/repro).
        #[arg(short, long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

/// Resolves the config file plus overrides; dedicated flags are applied
/// after `--set` so they win.
fn resolve(common: &Common, flags: Vec<(&str, Option<Value>)>) -> anyhow::Result<RunConfig> {
    let mut overrides = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut push = |key: &str, value: Option<Value>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    };
    push("seed", common.seed.map(|s| Value::Integer(s as i64)));
    push("threads", common.threads.map(|t| Value::Integer(t as i64)));
    for (key, value) in flags {
        push(key, value);
    }
    push("output_dir", path(&common.out));
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn int(v: Option<usize>) -> Option<Value> {
    v.map(|x| Value::Integer(x as i64))
}

fn float(v: Option<f64>) -> Option<Value> {
    v.map(Value::Float)
}

fn path(v: &Option<PathBuf>) -> Option<Value> {
    v.as_deref()
        .map(|p| Value::String(p.to_string_lossy().into_owned()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { common, kind, n } => {
            let config = resolve(
                &common,
                vec![("shape.kind", kind.map(Value::String)), ("shape.n", int(n))],
            )?;
            let path = geolift_cli::commands::gen(&config)?;
            println!("{}", path.display());
        }
        Command::Geodesics { common, cloud, k } => {
            let config = resolve(
                &common,
                vec![("inputs.cloud", path(&cloud)), ("graph.k", int(k))],
            )?;
            let summary = geolift_cli::commands::geodesics(&config)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Fit {
            common,
            cloud,
            distances,
            steps,
            lr,
            lambda_c,
            lambda_g,
        } => {
            let config = resolve(
                &common,
                vec![
                    ("inputs.cloud", path(&cloud)),
                    ("inputs.distances", path(&distances)),
                    ("training.steps", int(steps)),
                    ("training.learning_rate", float(lr)),
                    ("training.weights.lambda_c", float(lambda_c)),
                    ("training.weights.lambda_g", float(lambda_g)),
                ],
            )?;
            let fit = geolift_cli::commands::fit(&config)?;
            if let (Some(first), Some(last)) = (fit.trace.first(), fit.trace.last()) {
                println!("total loss {:.6} -> {:.6}", first.total, last.total);
            }
            println!("{}", fit.checkpoint.display());
        }
        Command::Analyze {
            common,
            checkpoint,
            cloud,
            distances,
        } => {
            let config = resolve(
                &common,
                vec![
                    ("inputs.checkpoint", path(&checkpoint)),
                    ("inputs.cloud", path(&cloud)),
                    ("inputs.distances", path(&distances)),
                ],
            )?;
            let result = geolift_cli::commands::analyze(&config)?;
            println!("{}", serde_json::to_string_pretty(&result.report)?);
        }
        Command::Mesh {
            common,
            checkpoint,
            cloud,
            charts,
            resolution,
        } => {
            let config = resolve(
                &common,
                vec![
                    ("inputs.checkpoint", path(&checkpoint)),
                    ("inputs.cloud", path(&cloud)),
                    ("mesh.charts", int(charts)),
                    ("mesh.resolution", int(resolution)),
                ],
            )?;
            let report = geolift_cli::commands::mesh(&config)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Repro { suite, out } => {
            let names: Vec<&str> = if suite == "all" {
                SUITES.to_vec()
            } else {
                vec![suite.as_str()]
            };
            let root = out.unwrap_or_else(|| RunConfig::default().output_dir("repro"));
            let mut failed = Vec::new();
            let mut table = String::new();
            for name in names {
                let report = run_suite(name, &root).with_context(|| format!("suite {name}"))?;
                print!("{}", report.table());
                println!("{report}");
                table.push_str(&report.table());
                if !report.passed() {
                    failed.push(name.to_string());
                }
            }
            std::fs::write(root.join("summary.txt"), table)?;
            if !failed.is_empty() {
                return Err(
                    AcceptanceFailure(format!("failed suites: {}", failed.join(", "))).into(),
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            error!("{err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
