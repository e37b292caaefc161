use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grl_core::envs::catalog_listing;
use grl_core::prediction::PredictorSpec;
use grl_core::{DiscountKind, DiscountSchedule, EnvSpec};
use grl_runner::literal::parse_descriptor;
use grl_runner::sweep::{sweep, Grid};
use grl_runner::{run, values, Config, Experiment, Kind, RunError, Seeds};

#[derive(Parser)]
#[command(name = "grl", version, about = "General reinforcement learning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment for each of its seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides [output].dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment over a grid of config values and aggregate the summaries.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print per-action optimal values at a history.
    Values {
        /// Environment descriptor, e.g. `separator:epsilon=0.1`.
        #[arg(long)]
        env: String,
        /// History literal, e.g. `beta:1 alpha:0`; empty for the empty history.
        #[arg(long, default_value = "")]
        history: String,
        /// Absolute horizon: rewards of steps t..m−1 count.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps: f64,
        /// Only count rewards on paths that survive to the horizon.
        #[arg(long)]
        iterative: bool,
        /// Discount descriptor.
        #[arg(long, default_value = "geometric:gamma=0.5")]
        discount: String,
        /// Output as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run sequence prediction against a sampled source.
    Predict {
        /// Source descriptor, e.g. `bernoulli:p=0.7`.
        #[arg(long)]
        truth: String,
        /// Predictor descriptors, e.g. `laplace` or `bernoulli_grid:n=9`.
        #[arg(long = "predictor", required = true)]
        predictors: Vec<String>,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "prediction")]
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the environment catalog.
    ListEnvs,
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))
}

fn execute(cfg: &Config, out: &Path) -> Result<(), RunError> {
    let mut first_err = None;
    for (r, paths) in run::run(cfg, out)? {
        for p in paths {
            println!("{}", p.display());
        }
        if let Some(e) = r.error {
            eprintln!("seed {}: {e}", r.seed);
            first_err.get_or_insert(e);
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn main_inner(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = Config::from_toml(&read(&config)?)?;
            if let Some(s) = seed {
                cfg.experiment.seeds = Seeds::List(vec![s]);
            }
            let out = out.unwrap_or_else(|| cfg.output.dir.clone());
            execute(&cfg, &out)
        }
        Command::Sweep { config, grid, out } => {
            let text = read(&config)?;
            let cfg = Config::from_toml(&text)?;
            let res = sweep(&text, &Grid::from_toml(&read(&grid)?)?)?;
            let out = out.unwrap_or_else(|| cfg.output.dir.clone());
            for p in res.write(&out, &cfg.experiment.name)? {
                println!("{}", p.display());
            }
            for e in &res.failures {
                eprintln!("{e}");
            }
            res.failures.into_iter().next().map_or(Ok(()), Err)
        }
        Command::Values {
            env,
            history,
            m,
            eps,
            iterative,
            discount,
            json,
        } => {
            let spec: EnvSpec = parse_descriptor(&env).map_err(RunError::Config)?;
            let kind: DiscountKind = parse_descriptor(&discount).map_err(RunError::Config)?;
            let sched = DiscountSchedule::new(kind).map_err(|e| RunError::Config(e.to_string()))?;
            let cap = grl_core::planner::default_depth_cap();
            let report = values::query(&spec, &sched, &history, m, eps, iterative, cap)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                println!("{report}");
            }
            Ok(())
        }
        Command::Predict {
            truth,
            predictors,
            steps,
            seed,
            name,
            out,
        } => {
            let mut e = Experiment::new(Kind::Prediction, name);
            e.steps = steps;
            e.seeds = Seeds::List(vec![seed]);
            e.truth = Some(parse_descriptor::<PredictorSpec>(&truth).map_err(RunError::Config)?);
            e.predictors = predictors
                .iter()
                .map(|p| parse_descriptor::<PredictorSpec>(p))
                .collect::<Result<_, _>>()
                .map_err(RunError::Config)?;
            execute(&Config::with_experiment(e)?, &out)
        }
        Command::ListEnvs => {
            for (kind, desc) in catalog_listing() {
                println!("{kind:<24} {desc}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("grl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
