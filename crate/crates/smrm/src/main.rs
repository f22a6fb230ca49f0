//! `smrm` binary: subcommand dispatch, config loading, and flag overrides.
//!
//! Usage: `smrm <baseline|fit|path|simulate|missingness> --config <file>
//! [--key value ...]` where every configuration key is also available as a
//! long flag of the same name, overriding the file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smrm::cli::{execute, CliCommand};
use smrm::io::RunConfig;
use smrm::Result;

#[derive(Parser)]
#[command(
    name = "smrm",
    version,
    about = "Sparse multivariate regression with missing responses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-response lasso reference with cross-validated penalties.
    Baseline(CommonArgs),
    /// One joint fit at the configured penalties; exports parameters and the
    /// imputed response matrix.
    Fit(CommonArgs),
    /// Full (lambda1, r) regularization-path sweep with warm starts.
    Path(CommonArgs),
    /// Synthetic data with known ground truth plus a recovery report.
    Simulate(CommonArgs),
    /// Per-column and per-row missingness summary.
    Missingness(CommonArgs),
}

/// Every configuration key, as an override flag of the same name.
#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long = "input")]
    input: Option<String>,
    #[arg(long = "output_dir")]
    output_dir: Option<String>,
    #[arg(long = "missing_token")]
    missing_token: Option<String>,
    #[arg(long = "predictor_columns")]
    predictor_columns: Option<String>,
    #[arg(long = "response_columns")]
    response_columns: Option<String>,
    #[arg(long = "scale")]
    scale: Option<String>,
    #[arg(long = "split_ratio")]
    split_ratio: Option<String>,
    #[arg(long = "split_seed")]
    split_seed: Option<String>,
    #[arg(long = "lambda1_low")]
    lambda1_low: Option<String>,
    #[arg(long = "lambda1_high")]
    lambda1_high: Option<String>,
    #[arg(long = "lambda1_points")]
    lambda1_points: Option<String>,
    #[arg(long = "lambda1")]
    lambda1: Option<String>,
    #[arg(long = "r")]
    r: Option<String>,
    #[arg(long = "r_values")]
    r_values: Option<String>,
    #[arg(long = "lambda2_mode")]
    lambda2_mode: Option<String>,
    #[arg(long = "cv_folds")]
    cv_folds: Option<String>,
    #[arg(long = "cv_seed")]
    cv_seed: Option<String>,
    #[arg(long = "em_epsilon")]
    em_epsilon: Option<String>,
    #[arg(long = "em_max_iter")]
    em_max_iter: Option<String>,
    #[arg(long = "inner_tol")]
    inner_tol: Option<String>,
    #[arg(long = "inner_max_iter")]
    inner_max_iter: Option<String>,
    #[arg(long = "glasso_tol")]
    glasso_tol: Option<String>,
    #[arg(long = "glasso_max_iter")]
    glasso_max_iter: Option<String>,
    #[arg(long = "lasso_tol")]
    lasso_tol: Option<String>,
    #[arg(long = "lasso_max_iter")]
    lasso_max_iter: Option<String>,
    #[arg(long = "synth_n")]
    synth_n: Option<String>,
    #[arg(long = "synth_p")]
    synth_p: Option<String>,
    #[arg(long = "synth_q")]
    synth_q: Option<String>,
    #[arg(long = "synth_coef_density")]
    synth_coef_density: Option<String>,
    #[arg(long = "synth_pattern")]
    synth_pattern: Option<String>,
    #[arg(long = "synth_pairs")]
    synth_pairs: Option<String>,
    #[arg(long = "synth_band_width")]
    synth_band_width: Option<String>,
    #[arg(long = "synth_strength")]
    synth_strength: Option<String>,
    #[arg(long = "synth_noise_scale")]
    synth_noise_scale: Option<String>,
    #[arg(long = "synth_missing")]
    synth_missing: Option<String>,
    #[arg(long = "synth_rate")]
    synth_rate: Option<String>,
    #[arg(long = "synth_dependence")]
    synth_dependence: Option<String>,
    #[arg(long = "synth_seed")]
    synth_seed: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("input", &self.input),
            ("output_dir", &self.output_dir),
            ("missing_token", &self.missing_token),
            ("predictor_columns", &self.predictor_columns),
            ("response_columns", &self.response_columns),
            ("scale", &self.scale),
            ("split_ratio", &self.split_ratio),
            ("split_seed", &self.split_seed),
            ("lambda1_low", &self.lambda1_low),
            ("lambda1_high", &self.lambda1_high),
            ("lambda1_points", &self.lambda1_points),
            ("lambda1", &self.lambda1),
            ("r", &self.r),
            ("r_values", &self.r_values),
            ("lambda2_mode", &self.lambda2_mode),
            ("cv_folds", &self.cv_folds),
            ("cv_seed", &self.cv_seed),
            ("em_epsilon", &self.em_epsilon),
            ("em_max_iter", &self.em_max_iter),
            ("inner_tol", &self.inner_tol),
            ("inner_max_iter", &self.inner_max_iter),
            ("glasso_tol", &self.glasso_tol),
            ("glasso_max_iter", &self.glasso_max_iter),
            ("lasso_tol", &self.lasso_tol),
            ("lasso_max_iter", &self.lasso_max_iter),
            ("synth_n", &self.synth_n),
            ("synth_p", &self.synth_p),
            ("synth_q", &self.synth_q),
            ("synth_coef_density", &self.synth_coef_density),
            ("synth_pattern", &self.synth_pattern),
            ("synth_pairs", &self.synth_pairs),
            ("synth_band_width", &self.synth_band_width),
            ("synth_strength", &self.synth_strength),
            ("synth_noise_scale", &self.synth_noise_scale),
            ("synth_missing", &self.synth_missing),
            ("synth_rate", &self.synth_rate),
            ("synth_dependence", &self.synth_dependence),
            ("synth_seed", &self.synth_seed),
        ]
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                config.apply_pair(key, v)?;
            }
        }
        Ok(config)
    }
}

fn run(command: CliCommand, args: &CommonArgs) -> Result<Vec<PathBuf>> {
    let config = args.resolve()?;
    execute(command, &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Command::Baseline(a) => (CliCommand::Baseline, a),
        Command::Fit(a) => (CliCommand::Fit, a),
        Command::Path(a) => (CliCommand::Path, a),
        Command::Simulate(a) => (CliCommand::Simulate, a),
        Command::Missingness(a) => (CliCommand::Missingness, a),
    };
    match run(command, args) {
        Ok(artifacts) => {
            for artifact in artifacts {
                println!("{}", artifact.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            // Machine-readable error record on stderr.
            let record = serde_json::json!({
                "error": err.to_string(),
                "kind": err.kind(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
