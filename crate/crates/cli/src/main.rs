//! `priorgp` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use priorgp::{ErrorEstimator, Method};

/// Prior-informed Gaussian process forecasting of degradation trajectories.
///
/// Every command reads an optional JSON experiment config; flags override
/// its fields. Outputs go to `--out`, else the config's `output_dir`, else
/// `$PRIORGP_OUT/<command>`, else `./priorgp-out/<command>`, together with
/// the resolved config as `config.json`. Failures print a JSON error object
/// on stderr and exit non-zero.
#[derive(Debug, Parser)]
#[command(name = "priorgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(short, long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dataset manifest (JSON); overrides `dataset` in the config.
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Output directory; overrides `output_dir` and `$PRIORGP_OUT`.
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for optimizer starts, data splits and synthesis.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for concurrent leave-one-out runs (timed runs always
    /// use one).
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Record zero timings so that outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct MethodArgs {
    /// Method label: GPM-curr, GPM-prev-ZM-SE, GPM-prev-POLY, IGPM-poly or
    /// IGPM-paris.
    #[arg(short, long, value_name = "LABEL")]
    pub method: Option<Method>,
    /// Polynomial order q of kernels, means and the polynomial basis.
    #[arg(long, value_name = "Q")]
    pub order: Option<u32>,
    /// IGPM observation-error estimator: rms, max-likelihood or
    /// derivative-scaled.
    #[arg(long, value_name = "NAME")]
    pub error_estimator: Option<ErrorEstimator>,
    /// Total optimizer starts (multi-start count) for trained methods.
    #[arg(long, value_name = "N")]
    pub starts: Option<usize>,
    /// Evaluate Paris-law basis functions by direct quadrature instead of
    /// the interpolated table.
    #[arg(long)]
    pub quadrature_direct: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a dataset manifest and write the normalized trajectories.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Draw a synthetic ensemble from a generator spec.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Generator spec (JSON); overrides `generator` in the config.
        #[arg(long, value_name = "PATH")]
        generator: Option<PathBuf>,
    },
    /// Choose the polynomial order by held-out error of per-trajectory fits.
    SelectOrder {
        #[command(flatten)]
        common: Common,
        /// Candidate orders, comma separated.
        #[arg(long, value_name = "Q,..", value_delimiter = ',')]
        candidates: Option<Vec<u32>>,
    },
    /// Infer (IGPM) or train a method on the inference trajectories.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Predict the final value of each evaluation trajectory step by step
    /// and draw prediction fans.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
        /// Include observation noise in predicted intervals.
        #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
        predictive_noise: Option<bool>,
        /// Points conditioned on in the prediction fans (default: half).
        #[arg(long, value_name = "K")]
        observed: Option<usize>,
    },
    /// Compare methods by RMSE, MAPE, half-series variants and timing.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
        /// Methods to compare, comma separated; overrides `methods`.
        #[arg(long, value_name = "LABEL,..", value_delimiter = ',')]
        methods: Option<Vec<Method>>,
    },
    /// Empirical coverage of credible intervals at 50/90/95/99%.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
        /// Include observation noise in the intervals (default on).
        #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
        predictive_noise: Option<bool>,
    },
    /// 95% interval half-widths at a target before any values are measured.
    VarianceForecast {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
        /// Saved IGPM model; overrides `model` in the config.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Planned measurement locations, comma separated.
        #[arg(long, value_name = "X,..", value_delimiter = ',', allow_hyphen_values = true)]
        schedule: Option<Vec<f64>>,
        /// Location whose interval is forecast.
        #[arg(long, value_name = "X", allow_hyphen_values = true)]
        target: Option<f64>,
        /// Step counts to report, comma separated (default: all).
        #[arg(long, value_name = "S,..", value_delimiter = ',')]
        steps: Option<Vec<usize>>,
    },
    /// Model covariance on a grid against the sample covariance of fitted
    /// trajectories.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
        /// Saved IGPM model; overrides `model` in the config.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Grid points (default 40).
        #[arg(long, value_name = "N")]
        grid_points: Option<usize>,
    },
    /// Check a config file without running anything; prints violations as
    /// JSON pointers.
    Validate {
        /// Experiment config (JSON).
        #[arg(value_name = "PATH")]
        config: PathBuf,
    },
}

fn report_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
    };
    use commands as c;
    let result = match cli.command {
        Command::Ingest { common } => c::ingest(&common),
        Command::Synthesize { common, generator } => c::synthesize(&common, generator),
        Command::SelectOrder { common, candidates } => c::select_order(&common, candidates),
        Command::Fit { common, method } => c::fit(&common, &method),
        Command::Predict {
            common,
            method,
            predictive_noise,
            observed,
        } => c::predict(&common, &method, predictive_noise, observed),
        Command::Benchmark { common, method, methods } => c::benchmark(&common, &method, methods),
        Command::Calibrate {
            common,
            method,
            predictive_noise,
        } => c::calibrate(&common, &method, predictive_noise),
        Command::VarianceForecast {
            common,
            method,
            model,
            schedule,
            target,
            steps,
        } => c::variance_forecast(&common, &method, model, schedule, target, steps),
        Command::Diagnose {
            common,
            method,
            model,
            grid_points,
        } => c::diagnose(&common, &method, model, grid_points),
        Command::Validate { config } => return c::validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
