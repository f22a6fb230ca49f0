//! Command orchestration: wires ingestion, the fitting pipeline, and artifact
//! export into the five subcommands.
//!
//! * `baseline` — per-response lasso with cross-validated penalties on the
//!   training split; emits the reference table.
//! * `fit` — one joint fit on all rows at the configured `(lambda1, r)`;
//!   emits coefficients, precision, correlation, objective trace, and the
//!   imputed response matrix.
//! * `path` — the full `(lambda1, r)` sweep with warm starts on a train/test
//!   split; emits curve data, per-response errors, penalty weights, and the
//!   correlation heatmap at the best point. Sweeps over `r` run in parallel.
//! * `simulate` — synthetic data with known ground truth, a ready-to-run
//!   config for it, and a recovery report.
//! * `missingness` — per-column and per-row missingness ratios.
//!
//! Every command writes `metadata.json` describing the resolved configuration
//! and the artifacts produced. All writes are atomic.

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::em::{smrm_fit, SmrmConfig, SmrmFit};
use crate::error::{Error, Result};
use crate::io::{
    artifact_comment, format_float, ingest_csv, write_atomic, write_dataset_csv, write_metadata,
    write_named_matrix_csv, write_svg_heatmap, write_table_csv, Lambda2Mode, RunConfig, Scale,
};
use crate::path::{
    assemble_adjusted, build_lambda2_uniform, exp_back, lambda1_grid, lasso_baseline,
    log_transform, run_path, train_test_split, Lambda2Matrix, LassoBaseline, PathOutcome,
    PathResult,
};
use crate::synth::{generate_synthetic, support_auc};
use crate::types::{precision_to_correlation, Dataset, MaskedMatrix, ModelParams};

/// The five subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliCommand {
    Baseline,
    Fit,
    Path,
    Simulate,
    Missingness,
}

impl CliCommand {
    pub fn name(&self) -> &'static str {
        match self {
            CliCommand::Baseline => "baseline",
            CliCommand::Fit => "fit",
            CliCommand::Path => "path",
            CliCommand::Simulate => "simulate",
            CliCommand::Missingness => "missingness",
        }
    }
}

/// Runs one command against a resolved configuration and returns the paths of
/// every artifact written (metadata sidecar last).
pub fn execute(command: CliCommand, config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate_numeric()?;
    let mut artifacts = match command {
        CliCommand::Baseline => cmd_baseline(config)?,
        CliCommand::Fit => cmd_fit(config)?,
        CliCommand::Path => cmd_path(config)?,
        CliCommand::Simulate => cmd_simulate(config)?,
        CliCommand::Missingness => cmd_missingness(config)?,
    };
    let names: Vec<String> = artifacts
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    artifacts.push(write_metadata(command.name(), config, &names)?);
    Ok(artifacts)
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    PathBuf::from(&config.output_dir).join(name)
}

/// Ingests the CSV named in the config; `raw` keeps the file's values,
/// `modeled` applies the configured scale transform.
fn load_dataset(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let input = config.input.as_ref().ok_or_else(|| {
        Error::InvalidInput("this command needs an input CSV: set 'input'".into())
    })?;
    let raw = ingest_csv(std::path::Path::new(input), config)?;
    let modeled = match config.scale {
        Scale::Raw => raw.clone(),
        Scale::Log => {
            let y = log_transform(&raw.y)?;
            Dataset::new(raw.x.clone(), y, raw.predictor_names.clone(), None)?
        }
    };
    Ok((raw, modeled))
}

fn build_lambda2(
    config: &RunConfig,
    p: usize,
    baseline: &LassoBaseline,
    names: &[String],
    r: f64,
) -> Result<Lambda2Matrix> {
    match config.lambda2_mode {
        Lambda2Mode::Uniform => build_lambda2_uniform(p, &baseline.lambda_train.view(), r),
        Lambda2Mode::Adjusted => Ok(assemble_adjusted(
            p,
            &baseline.lambda_train.view(),
            r,
            &baseline.train_mse.view(),
            names,
        )?
        .0),
    }
}

/// Intercept row stacked on top of the coefficient matrix, with row names.
fn stacked_coefficients(
    params: &ModelParams,
    predictor_names: &[String],
) -> (Vec<String>, Array2<f64>) {
    let (p, q) = params.b.dim();
    let mut rows = Vec::with_capacity(p + 1);
    rows.push("(intercept)".to_string());
    rows.extend(predictor_names.iter().cloned());
    let mut m = Array2::<f64>::zeros((p + 1, q));
    m.row_mut(0).assign(&params.b0);
    for j in 0..p {
        m.row_mut(j + 1).assign(&params.b.row(j));
    }
    (rows, m)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "NA".to_string())
}

fn cmd_baseline(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (_, modeled) = load_dataset(config)?;
    let split = train_test_split(&modeled, config.split_ratio, config.split_seed)?;
    let baseline = lasso_baseline(
        &split.dataset,
        config.cv_folds,
        config.cv_seed,
        &config.lasso_controls(),
    )?;

    let comment = artifact_comment("baseline", config);
    let names = split.dataset.y.names();
    let rows: Vec<Vec<String>> = (0..names.len())
        .map(|l| {
            vec![
                names[l].clone(),
                format_float(baseline.lambda_train[l]),
                opt_cell(baseline.test_mse[l]),
            ]
        })
        .collect();
    let table = out_path(config, "baseline.csv");
    write_table_csv(
        &table,
        &comment,
        &["response", "lambda_train", "mse"],
        &rows,
    )?;
    Ok(vec![table])
}

fn cmd_fit(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (raw, modeled) = load_dataset(config)?;
    // The single fit uses every row; penalties still come from per-response
    // cross-validation.
    let baseline = lasso_baseline(
        &modeled,
        config.cv_folds,
        config.cv_seed,
        &config.lasso_controls(),
    )?;
    let p = modeled.x.ncols();
    let names = modeled.y.names().to_vec();
    let lambda2 = build_lambda2(config, p, &baseline, &names, config.r)?;
    let smrm_config = SmrmConfig {
        lambda1: config.lambda1,
        lambda2: lambda2.values.clone(),
        controls: config.em_controls(),
    };
    let fit = smrm_fit(&modeled, &smrm_config, None)?;

    let comment = artifact_comment("fit", config);
    let mut artifacts = Vec::new();

    let (coef_rows, coef) = stacked_coefficients(&fit.params, &modeled.predictor_names);
    let path = out_path(config, "coefficients.csv");
    write_named_matrix_csv(&path, &comment, "term", &names, &coef_rows, &coef.view())?;
    artifacts.push(path);

    let path = out_path(config, "precision.csv");
    write_named_matrix_csv(
        &path,
        &comment,
        "response",
        &names,
        &names,
        &fit.params.k.view(),
    )?;
    artifacts.push(path);

    let corr = precision_to_correlation(&fit.params.k.view())?;
    let path = out_path(config, "correlation.csv");
    write_named_matrix_csv(&path, &comment, "response", &names, &names, &corr.view())?;
    artifacts.push(path);
    let path = out_path(config, "correlation.svg");
    write_svg_heatmap(&path, &corr.view(), &names, "residual correlation")?;
    artifacts.push(path);

    let trace_rows: Vec<Vec<String>> = fit
        .objective_trace
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), format_float(*v)])
        .collect();
    let path = out_path(config, "objective.csv");
    write_table_csv(&path, &comment, &["iteration", "objective"], &trace_rows)?;
    artifacts.push(path);

    // Imputed responses on the original data scale: observed entries pass
    // through verbatim, missing entries get their conditional means.
    let imputed_model_scale = &fit.y_imputed;
    let back = match config.scale {
        Scale::Raw => imputed_model_scale.clone(),
        Scale::Log => exp_back(&imputed_model_scale.view()),
    };
    let n = raw.y.nrows();
    let q = raw.y.ncols();
    let mut filled = Array2::<f64>::zeros((n, q));
    for i in 0..n {
        for l in 0..q {
            filled[[i, l]] = if raw.y.is_observed(i, l) {
                raw.y.values()[[i, l]]
            } else {
                back[[i, l]]
            };
        }
    }
    let complete = MaskedMatrix::new(filled, Array2::from_elem((n, q), true), names.clone())?;
    let imputed_dataset = Dataset::new(raw.x.clone(), complete, raw.predictor_names.clone(), None)?;
    let path = out_path(config, "imputed.csv");
    write_dataset_csv(&path, &imputed_dataset, &config.missing_token, &comment)?;
    artifacts.push(path);

    Ok(artifacts)
}

fn cmd_path(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (_, modeled) = load_dataset(config)?;
    let split = train_test_split(&modeled, config.split_ratio, config.split_seed)?;
    let data = split.dataset;
    let baseline = lasso_baseline(
        &data,
        config.cv_folds,
        config.cv_seed,
        &config.lasso_controls(),
    )?;
    let grid = lambda1_grid(
        config.lambda1_low,
        config.lambda1_high,
        config.lambda1_points,
    )?;
    let p = data.x.ncols();
    let names = data.y.names().to_vec();
    let controls = config.em_controls();

    // Each r owns an independent warm-start chain.
    let sweeps: Vec<Result<PathResult>> = config
        .r_values
        .par_iter()
        .map(|&r| {
            let lambda2 = build_lambda2(config, p, &baseline, &names, r)?;
            run_path(&data, &lambda2, &grid, &controls, &baseline.test_mse)
        })
        .collect();
    let mut results = Vec::with_capacity(sweeps.len());
    for sweep in sweeps {
        results.push(sweep?);
    }

    let comment = artifact_comment("path", config);
    let mut artifacts = Vec::new();

    let mut curve_rows = Vec::new();
    let mut per_response_rows = Vec::new();
    let mut best: Option<(f64, f64, f64, Array2<f64>)> = None;
    for result in &results {
        for point in &result.points {
            match &point.outcome {
                PathOutcome::Fitted { fit, report } => {
                    curve_rows.push(vec![
                        format_float(result.r),
                        format_float(point.lambda1),
                        format_float(report.mse_tilde_smrm),
                        format_float(report.mse_tilde_lasso),
                        report.q_effective.to_string(),
                        fit.em_iters.to_string(),
                        fit.converged.to_string(),
                        "ok".to_string(),
                    ]);
                    for (l, name) in names.iter().enumerate() {
                        per_response_rows.push(vec![
                            format_float(result.r),
                            format_float(point.lambda1),
                            name.clone(),
                            opt_cell(report.per_response_mse_smrm[l]),
                            opt_cell(report.per_response_mse_lasso[l]),
                        ]);
                    }
                    if report.q_effective > 0 {
                        let better = match &best {
                            Some((mse, ..)) => report.mse_tilde_smrm < *mse,
                            None => true,
                        };
                        if better {
                            let corr = report.correlation.clone().ok_or_else(|| {
                                Error::InvalidInput(
                                    "fitted path point is missing its correlation matrix".into(),
                                )
                            })?;
                            best = Some((report.mse_tilde_smrm, result.r, point.lambda1, corr));
                        }
                    }
                }
                PathOutcome::Failed { message } => {
                    curve_rows.push(vec![
                        format_float(result.r),
                        format_float(point.lambda1),
                        "NA".to_string(),
                        "NA".to_string(),
                        "NA".to_string(),
                        "NA".to_string(),
                        "false".to_string(),
                        message.clone(),
                    ]);
                }
            }
        }
    }

    let path = out_path(config, "path_curve.csv");
    write_table_csv(
        &path,
        &comment,
        &[
            "r",
            "lambda1",
            "mse_tilde_smrm",
            "mse_tilde_lasso",
            "q_effective",
            "em_iters",
            "converged",
            "status",
        ],
        &curve_rows,
    )?;
    artifacts.push(path);

    let path = out_path(config, "per_response_mse.csv");
    write_table_csv(
        &path,
        &comment,
        &["r", "lambda1", "response", "mse_smrm", "mse_lasso"],
        &per_response_rows,
    )?;
    artifacts.push(path);

    // Penalty provenance: CV penalty, reference test error, and the
    // variance-adjustment weight per response.
    let a: Array1<f64> = match config.lambda2_mode {
        Lambda2Mode::Uniform => Array1::ones(names.len()),
        Lambda2Mode::Adjusted => {
            assemble_adjusted(
                p,
                &baseline.lambda_train.view(),
                1.0,
                &baseline.train_mse.view(),
                &names,
            )?
            .1
        }
    };
    let weight_rows: Vec<Vec<String>> = (0..names.len())
        .map(|l| {
            vec![
                names[l].clone(),
                format_float(baseline.lambda_train[l]),
                format_float(baseline.train_mse[l]),
                opt_cell(baseline.test_mse[l]),
                format_float(a[l]),
            ]
        })
        .collect();
    let path = out_path(config, "penalty_weights.csv");
    write_table_csv(
        &path,
        &comment,
        &["response", "lambda_train", "train_mse", "test_mse", "a"],
        &weight_rows,
    )?;
    artifacts.push(path);

    let (best_mse, best_r, best_lambda1, best_corr) = best
        .ok_or_else(|| Error::InvalidInput("every path point failed; nothing to report".into()))?;
    let best_comment = format!(
        "{comment} | best point: r = {}, lambda1 = {}, mse_tilde = {}",
        format_float(best_r),
        format_float(best_lambda1),
        format_float(best_mse)
    );
    let path = out_path(config, "correlation_best.csv");
    write_named_matrix_csv(
        &path,
        &best_comment,
        "response",
        &names,
        &names,
        &best_corr.view(),
    )?;
    artifacts.push(path);
    let path = out_path(config, "correlation_best.svg");
    write_svg_heatmap(
        &path,
        &best_corr.view(),
        &names,
        &format!(
            "residual correlation at r = {}, lambda1 = {}",
            format_float(best_r),
            format_float(best_lambda1)
        ),
    )?;
    artifacts.push(path);

    Ok(artifacts)
}

fn generated_config_text(config: &RunConfig, data_file: &str, p: usize, q: usize) -> String {
    let predictors: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let responses: Vec<String> = (1..=q).map(|l| format!("y{l}")).collect();
    let r_values: Vec<String> = config.r_values.iter().map(|r| format_float(*r)).collect();
    format!(
        "# generated by 'smrm simulate'; ready for the baseline, fit, path and\n\
         # missingness commands\n\
         input = {data_file}\n\
         output_dir = {}\n\
         missing_token = {}\n\
         predictor_columns = {}\n\
         response_columns = {}\n\
         scale = raw\n\
         split_ratio = {}\n\
         split_seed = {}\n\
         lambda1_low = {}\n\
         lambda1_high = {}\n\
         lambda1_points = {}\n\
         lambda1 = {}\n\
         r = {}\n\
         r_values = {}\n\
         lambda2_mode = {}\n\
         cv_folds = {}\n\
         cv_seed = {}\n\
         em_epsilon = {}\n\
         em_max_iter = {}\n\
         inner_tol = {}\n\
         inner_max_iter = {}\n\
         glasso_tol = {}\n\
         glasso_max_iter = {}\n\
         lasso_tol = {}\n\
         lasso_max_iter = {}\n",
        config.output_dir,
        config.missing_token,
        predictors.join(","),
        responses.join(","),
        format_float(config.split_ratio),
        config.split_seed,
        format_float(config.lambda1_low),
        format_float(config.lambda1_high),
        config.lambda1_points,
        format_float(config.lambda1),
        format_float(config.r),
        r_values.join(","),
        match config.lambda2_mode {
            Lambda2Mode::Uniform => "uniform",
            Lambda2Mode::Adjusted => "adjusted",
        },
        config.cv_folds,
        config.cv_seed,
        format_float(config.em_epsilon),
        config.em_max_iter,
        format_float(config.inner_tol),
        config.inner_max_iter,
        format_float(config.glasso_tol),
        config.glasso_max_iter,
        format_float(config.lasso_tol),
        config.lasso_max_iter,
    )
}

fn cmd_simulate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec = config.synth_spec()?;
    let data = generate_synthetic(&spec)?;
    let comment = artifact_comment("simulate", config);
    let mut artifacts = Vec::new();

    let data_path = out_path(config, "synthetic_data.csv");
    write_dataset_csv(&data_path, &data.dataset, &config.missing_token, &comment)?;
    artifacts.push(data_path.clone());

    let names = data.dataset.y.names().to_vec();
    let (coef_rows, coef) = stacked_coefficients(&data.truth, &data.dataset.predictor_names);
    let path = out_path(config, "true_coefficients.csv");
    write_named_matrix_csv(&path, &comment, "term", &names, &coef_rows, &coef.view())?;
    artifacts.push(path);

    let path = out_path(config, "true_precision.csv");
    write_named_matrix_csv(
        &path,
        &comment,
        "response",
        &names,
        &names,
        &data.truth.k.view(),
    )?;
    artifacts.push(path);

    let path = out_path(config, "simulate_config.txt");
    write_atomic(
        &path,
        generated_config_text(config, &data_path.display().to_string(), spec.p, spec.q).as_bytes(),
    )?;
    artifacts.push(path);

    // Recovery report: one joint fit at the configured penalties, scored
    // against the known truth.
    let baseline = lasso_baseline(
        &data.dataset,
        config.cv_folds,
        config.cv_seed,
        &config.lasso_controls(),
    )?;
    let lambda2 = build_lambda2_uniform(spec.p, &baseline.lambda_train.view(), config.r)?;
    let smrm_config = SmrmConfig {
        lambda1: config.lambda1,
        lambda2: lambda2.values.clone(),
        controls: config.em_controls(),
    };
    let fit = smrm_fit(&data.dataset, &smrm_config, None)?;
    let auc = match support_auc(&data.truth.k.view(), &fit.params.k.view()) {
        Ok(v) => format_float(v),
        Err(_) => "NA".to_string(), // single-class truth (e.g. diagonal pattern)
    };
    let coef_rmse = {
        let d: f64 = fit
            .params
            .b
            .iter()
            .zip(data.truth.b.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / (spec.p * spec.q) as f64;
        d.sqrt()
    };
    let intercept_rmse = {
        let d: f64 = fit
            .params
            .b0
            .iter()
            .zip(data.truth.b0.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / spec.q as f64;
        d.sqrt()
    };
    let rows = vec![
        vec!["support_auc".to_string(), auc],
        vec!["coefficient_rmse".to_string(), format_float(coef_rmse)],
        vec!["intercept_rmse".to_string(), format_float(intercept_rmse)],
        vec!["em_iters".to_string(), fit.em_iters.to_string()],
        vec!["converged".to_string(), fit.converged.to_string()],
        vec!["lambda1".to_string(), format_float(config.lambda1)],
        vec!["r".to_string(), format_float(config.r)],
    ];
    let path = out_path(config, "recovery.csv");
    write_table_csv(&path, &comment, &["metric", "value"], &rows)?;
    artifacts.push(path);

    Ok(artifacts)
}

fn ratio_cell(y: &MaskedMatrix, l: usize) -> f64 {
    y.missing_ratio_per_column()[l]
}

fn cmd_missingness(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (raw, _) = load_dataset(config)?;
    let split = train_test_split(&raw, config.split_ratio, config.split_seed)?;
    let data = split.dataset;
    let comment = artifact_comment("missingness", config);
    let names = data.y.names().to_vec();
    let q = names.len();

    let train_rows = data.train_rows();
    let test_rows = data.test_rows();
    let y_train = data.y_subset(&train_rows);
    let y_test = data.y_subset(&test_rows);

    let mut rows: Vec<Vec<String>> = (0..q)
        .map(|l| {
            vec![
                names[l].clone(),
                format_float(ratio_cell(&data.y, l)),
                format_float(ratio_cell(&y_train, l)),
                format_float(ratio_cell(&y_test, l)),
            ]
        })
        .collect();
    let total = |y: &MaskedMatrix| -> f64 {
        let missing = y.observed().iter().filter(|&&m| !m).count();
        missing as f64 / (y.nrows() * y.ncols()) as f64
    };
    rows.push(vec![
        "(all)".to_string(),
        format_float(total(&data.y)),
        format_float(total(&y_train)),
        format_float(total(&y_test)),
    ]);
    let columns_path = out_path(config, "missingness_columns.csv");
    write_table_csv(
        &columns_path,
        &comment,
        &["response", "missing_ratio", "train_ratio", "test_ratio"],
        &rows,
    )?;

    let per_row = data.y.missing_ratio_per_row();
    let split_tags = {
        let train: std::collections::HashSet<usize> = train_rows.iter().copied().collect();
        (0..data.y.nrows())
            .map(|i| if train.contains(&i) { "train" } else { "test" })
            .collect::<Vec<_>>()
    };
    let row_rows: Vec<Vec<String>> = per_row
        .iter()
        .enumerate()
        .map(|(i, ratio)| {
            vec![
                i.to_string(),
                format_float(*ratio),
                split_tags[i].to_string(),
            ]
        })
        .collect();
    let rows_path = out_path(config, "missingness_rows.csv");
    write_table_csv(
        &rows_path,
        &comment,
        &["row", "missing_ratio", "split"],
        &row_rows,
    )?;

    Ok(vec![columns_path, rows_path])
}

/// Convenience wrapper used by tests: a fitted model plus its imputation, on
/// the full dataset, at uniform penalties derived from CV.
pub fn fit_with_cv_penalties(
    dataset: &Dataset,
    lambda1: f64,
    r: f64,
    config: &RunConfig,
) -> Result<SmrmFit> {
    let baseline = lasso_baseline(
        dataset,
        config.cv_folds,
        config.cv_seed,
        &config.lasso_controls(),
    )?;
    let lambda2 = build_lambda2_uniform(dataset.x.ncols(), &baseline.lambda_train.view(), r)?;
    let smrm_config = SmrmConfig {
        lambda1,
        lambda2: lambda2.values.clone(),
        controls: config.em_controls(),
    };
    smrm_fit(dataset, &smrm_config, None)
}
