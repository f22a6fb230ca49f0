//! Regularization-path protocol: train/test splitting, construction of the
//! coefficient-penalty matrix from per-response reference penalties, the
//! descending `lambda1` grid with warm starts, and test-set evaluation
//! normalized by a per-response lasso baseline.
//!
//! The protocol fits, for a fixed penalty multiplier `r`, the whole model at
//! each grid value of `lambda1` (precision penalty), warm-starting every fit
//! from the previous one. Each fitted point is scored on the held-out rows by
//!
//! ```text
//! MSE_l       = mean over observed test entries of (y_il - yhat_il)^2
//! mse_tilde   = sum_l MSE_l / MSE_l^ref
//! ```
//!
//! where the reference is a per-response lasso fitted on the training rows.
//! Normalizing by the reference makes the aggregate insensitive to the very
//! different scales responses can have, and the baseline scores exactly `q`
//! against itself.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::em::{fit_matrices, EmControls, SmrmConfig, SmrmFit};
use crate::error::{Error, Result};
use crate::lasso::{
    default_lambda_grid, lasso_cv, lasso_fit, log_spaced_descending, LassoControls, LassoFit,
};
use crate::types::{precision_to_correlation, Dataset, MaskedMatrix, ModelParams, SplitTag};

/// Default precision-penalty grid: 200 log-spaced points on [6.5e-3, 1].
pub const DEFAULT_LAMBDA1_LOW: f64 = 6.5e-3;
pub const DEFAULT_LAMBDA1_HIGH: f64 = 1.0;
pub const DEFAULT_LAMBDA1_POINTS: usize = 200;

/// How many fresh shuffles a split may attempt before giving up on the
/// per-response train-coverage requirement.
pub const MAX_SPLIT_RETRIES: u32 = 100;

/// How the coefficient-penalty matrix was built.
#[derive(Debug, Clone)]
pub enum Lambda2Provenance {
    /// Entry (j, l) = r * lambda_train[l].
    Uniform,
    /// Entry (j, l) = r * lambda_train[l] * a[l] with `a[l]` the reciprocal
    /// training MSE of the reference lasso for response l.
    VarianceAdjusted { a: Array1<f64> },
}

/// Coefficient-penalty matrix for one value of the multiplier `r`.
///
/// Both constructions replicate a length-q vector across the p rows, so every
/// column is constant.
#[derive(Debug, Clone)]
pub struct Lambda2Matrix {
    pub values: Array2<f64>,
    pub lambda_train: Array1<f64>,
    pub r: f64,
    pub provenance: Lambda2Provenance,
}

/// Per-response lasso reference: CV-selected penalties, the refitted models,
/// and their training/test errors.
#[derive(Debug, Clone)]
pub struct LassoBaseline {
    /// Cross-validated penalty per response, chosen on observed training rows.
    pub lambda_train: Array1<f64>,
    /// One fit per response at its chosen penalty, on observed training rows.
    pub fits: Vec<LassoFit>,
    /// Training MSE per response (feeds the variance-adjusted weights).
    pub train_mse: Array1<f64>,
    /// Test MSE per response over observed test entries; `None` when a
    /// response has no observed test entries.
    pub test_mse: Vec<Option<f64>>,
}

/// Scores of one model on the held-out rows, normalized by the baseline.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Test MSE per response; `None` for responses excluded from evaluation.
    pub per_response_mse_smrm: Vec<Option<f64>>,
    /// Baseline test MSE per response (copied from the reference).
    pub per_response_mse_lasso: Vec<Option<f64>>,
    pub mse_tilde_smrm: f64,
    /// Equals `q_effective` exactly: the baseline normalized by itself.
    pub mse_tilde_lasso: f64,
    /// Number of responses actually evaluated.
    pub q_effective: usize,
    /// Names of responses with no observed test entries.
    pub excluded: Vec<String>,
    pub lambda1: f64,
    pub r: f64,
    /// Residual correlation matrix from the fitted precision, when the model
    /// under evaluation has one.
    pub correlation: Option<Array2<f64>>,
}

/// One grid point of a path: either a fit with its scores, or the error that
/// stopped it (the chain itself continues past failures).
#[derive(Debug, Clone)]
pub enum PathOutcome {
    Fitted { fit: SmrmFit, report: EvalReport },
    Failed { message: String },
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda1: f64,
    pub outcome: PathOutcome,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub r: f64,
    pub points: Vec<PathPoint>,
}

/// Result of [`train_test_split`]: the tagged dataset plus how many re-draws
/// the coverage requirement forced.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub dataset: Dataset,
    pub retries: u32,
}

/// Tags each row Train or Test by a seeded shuffle, with `floor(ratio * n)`
/// training rows.
///
/// A draw is accepted only if every response has at least one observed entry
/// among the training rows; otherwise the shuffle is repeated with an
/// incremented sub-seed, up to [`MAX_SPLIT_RETRIES`] times.
pub fn train_test_split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<SplitOutcome> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie strictly between 0 and 1, got {ratio}"
        )));
    }
    let n = dataset.y.nrows();
    let q = dataset.y.ncols();
    let n_train = (ratio * n as f64).floor() as usize;
    let observed = dataset.y.observed();

    for attempt in 0..=MAX_SPLIT_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut is_train = vec![false; n];
        for &i in order.iter().take(n_train) {
            is_train[i] = true;
        }

        let covered = (0..q).all(|l| (0..n).any(|i| is_train[i] && observed[[i, l]]));
        if covered {
            let tags: Vec<SplitTag> = is_train
                .iter()
                .map(|&t| if t { SplitTag::Train } else { SplitTag::Test })
                .collect();
            let tagged = Dataset::new(
                dataset.x.clone(),
                dataset.y.clone(),
                dataset.predictor_names.clone(),
                Some(tags),
            )?;
            return Ok(SplitOutcome {
                dataset: tagged,
                retries: attempt,
            });
        }
    }

    Err(Error::SplitInvariant {
        retries: MAX_SPLIT_RETRIES,
    })
}

fn validate_multiplier(r: f64) -> Result<()> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "penalty multiplier r must be finite and positive, got {r}"
        )));
    }
    Ok(())
}

fn validate_lambda_train(lambda_train: &ArrayView1<f64>) -> Result<()> {
    if lambda_train.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidInput(
            "per-response penalties must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Uniform construction: entry (j, l) = r * lambda_train[l].
pub fn build_lambda2_uniform(
    p: usize,
    lambda_train: &ArrayView1<f64>,
    r: f64,
) -> Result<Lambda2Matrix> {
    validate_multiplier(r)?;
    validate_lambda_train(lambda_train)?;
    if p == 0 || lambda_train.is_empty() {
        return Err(Error::InvalidInput(
            "penalty matrix needs at least one predictor and one response".into(),
        ));
    }
    let values = Array2::from_shape_fn((p, lambda_train.len()), |(_, l)| r * lambda_train[l]);
    Ok(Lambda2Matrix {
        values,
        lambda_train: lambda_train.to_owned(),
        r,
        provenance: Lambda2Provenance::Uniform,
    })
}

/// Assembles the variance-adjusted matrix from already-computed training MSEs:
/// entry (j, l) = (r * lambda_train[l]) * a[l] with a[l] = 1 / train_mse[l].
///
/// Exposed separately so the weighting arithmetic is testable without running
/// the reference fits.
pub fn assemble_adjusted(
    p: usize,
    lambda_train: &ArrayView1<f64>,
    r: f64,
    train_mse: &ArrayView1<f64>,
    response_names: &[String],
) -> Result<(Lambda2Matrix, Array1<f64>)> {
    validate_multiplier(r)?;
    validate_lambda_train(lambda_train)?;
    let q = lambda_train.len();
    if train_mse.len() != q || response_names.len() != q {
        return Err(Error::DimensionMismatch(
            "training MSEs and names must match the number of responses".into(),
        ));
    }
    if p == 0 || q == 0 {
        return Err(Error::InvalidInput(
            "penalty matrix needs at least one predictor and one response".into(),
        ));
    }
    let mut a = Array1::<f64>::zeros(q);
    for l in 0..q {
        let t = train_mse[l];
        if t == 0.0 || !(1.0 / t).is_finite() {
            return Err(Error::PerfectFit {
                column: response_names[l].clone(),
            });
        }
        a[l] = 1.0 / t;
    }
    let values = Array2::from_shape_fn((p, q), |(_, l)| (r * lambda_train[l]) * a[l]);
    Ok((
        Lambda2Matrix {
            values,
            lambda_train: lambda_train.to_owned(),
            r,
            provenance: Lambda2Provenance::VarianceAdjusted { a: a.clone() },
        },
        a,
    ))
}

/// Variance-adjusted construction: fits one lasso per response at
/// `lambda_train[l]` on its observed training rows, then weights column l by
/// the reciprocal training MSE.
pub fn build_lambda2_adjusted(
    x_train: &ArrayView2<f64>,
    y_train: &MaskedMatrix,
    lambda_train: &ArrayView1<f64>,
    r: f64,
    controls: &LassoControls,
) -> Result<(Lambda2Matrix, Array1<f64>)> {
    validate_multiplier(r)?;
    validate_lambda_train(lambda_train)?;
    let q = y_train.ncols();
    if lambda_train.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "lambda_train has {} entries for {q} responses",
            lambda_train.len()
        )));
    }
    let p = x_train.ncols();
    let mut train_mse = Array1::<f64>::zeros(q);
    for l in 0..q {
        let (xl, yl) = observed_rows_for(x_train, y_train, l)?;
        let fit = lasso_fit(&xl.view(), &yl.view(), lambda_train[l], None, controls)?;
        train_mse[l] = mean_squared_residual(&xl.view(), &yl.view(), &fit);
    }
    assemble_adjusted(p, lambda_train, r, &train_mse.view(), y_train.names())
}

/// Log-equispaced, strictly descending penalty grid from `high` to `low`.
pub fn lambda1_grid(low: f64, high: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(low > 0.0) || !(high > low) || !high.is_finite() {
        return Err(Error::InvalidInput(format!(
            "grid bounds must satisfy 0 < low < high, got [{low}, {high}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidInput(
            "a penalty grid needs at least 2 points".into(),
        ));
    }
    Ok(log_spaced_descending(low, high, n_points))
}

/// Per-response lasso reference on a split dataset: cross-validated penalty,
/// refit, training MSE, and test MSE over observed test entries.
pub fn lasso_baseline(
    dataset: &Dataset,
    folds: usize,
    seed: u64,
    controls: &LassoControls,
) -> Result<LassoBaseline> {
    let train = dataset.train_rows();
    let test = dataset.test_rows();
    if train.is_empty() {
        return Err(Error::InvalidInput("dataset has no training rows".into()));
    }
    let x_train = dataset.x_subset(&train);
    let y_train = dataset.y_subset(&train);
    let x_test = dataset.x_subset(&test);
    let y_test = dataset.y_subset(&test);
    let q = y_train.ncols();

    let mut lambda_train = Array1::<f64>::zeros(q);
    let mut fits = Vec::with_capacity(q);
    let mut train_mse = Array1::<f64>::zeros(q);
    let mut test_mse = Vec::with_capacity(q);

    for l in 0..q {
        let (xl, yl) = observed_rows_for(&x_train.view(), &y_train, l)?;
        let grid = default_lambda_grid(&xl.view(), &yl.view());
        let cv = lasso_cv(
            &xl.view(),
            &yl.view(),
            &grid,
            folds,
            seed.wrapping_add(l as u64),
            controls,
        )?;
        let fit = lasso_fit(&xl.view(), &yl.view(), cv.best_lambda, None, controls)?;
        lambda_train[l] = cv.best_lambda;
        train_mse[l] = mean_squared_residual(&xl.view(), &yl.view(), &fit);

        // Test error over observed entries of response l.
        let mut sum = 0.0;
        let mut count = 0usize;
        for (row_pos, _) in test.iter().enumerate() {
            if y_test.is_observed(row_pos, l) {
                let pred = fit.beta0 + x_test.row(row_pos).dot(&fit.beta);
                let diff = y_test.values()[[row_pos, l]] - pred;
                sum += diff * diff;
                count += 1;
            }
        }
        test_mse.push(if count > 0 {
            Some(sum / count as f64)
        } else {
            None
        });
        fits.push(fit);
    }

    Ok(LassoBaseline {
        lambda_train,
        fits,
        train_mse,
        test_mse,
    })
}

/// Scores a prediction matrix on the observed test entries, normalizing each
/// response by its baseline test MSE. Responses without observed test entries
/// are excluded and named in the report.
pub fn evaluate(
    predictions: &ArrayView2<f64>,
    y_test: &MaskedMatrix,
    lasso_reference_mse: &[Option<f64>],
    lambda1: f64,
    r: f64,
    k_fitted: Option<&ArrayView2<f64>>,
) -> Result<EvalReport> {
    let n = y_test.nrows();
    let q = y_test.ncols();
    if predictions.dim() != (n, q) {
        return Err(Error::DimensionMismatch(format!(
            "predictions are {:?} but the test responses are ({n}, {q})",
            predictions.dim()
        )));
    }
    if lasso_reference_mse.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "got {} reference MSEs for {q} responses",
            lasso_reference_mse.len()
        )));
    }

    let values = y_test.values();
    let mut per_response = vec![None; q];
    let mut excluded = Vec::new();
    let mut mse_tilde = 0.0;
    let mut q_effective = 0usize;

    for l in 0..q {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            if y_test.is_observed(i, l) {
                let diff = values[[i, l]] - predictions[[i, l]];
                sum += diff * diff;
                count += 1;
            }
        }
        if count == 0 {
            excluded.push(y_test.names()[l].clone());
            continue;
        }
        let reference = match lasso_reference_mse[l] {
            Some(t) if t > 0.0 && t.is_finite() => t,
            Some(_) => {
                return Err(Error::PerfectFit {
                    column: y_test.names()[l].clone(),
                })
            }
            None => {
                return Err(Error::InvalidInput(format!(
                    "response '{}' has observed test entries but no reference MSE",
                    y_test.names()[l]
                )))
            }
        };
        let mse = sum / count as f64;
        per_response[l] = Some(mse);
        mse_tilde += mse / reference;
        q_effective += 1;
    }

    let correlation = match k_fitted {
        Some(k) => Some(precision_to_correlation(k)?),
        None => None,
    };

    Ok(EvalReport {
        per_response_mse_smrm: per_response,
        per_response_mse_lasso: lasso_reference_mse.to_vec(),
        mse_tilde_smrm: mse_tilde,
        // The baseline normalized by itself contributes exactly 1 per
        // evaluated response.
        mse_tilde_lasso: q_effective as f64,
        q_effective,
        excluded,
        lambda1,
        r,
        correlation,
    })
}

/// Fits the model at every grid value of `lambda1` (descending), warm-starting
/// each fit from the previous parameters, and scores each point on the test
/// rows.
///
/// A point whose fit errors out is recorded as [`PathOutcome::Failed`] and the
/// chain continues from the last successful parameters; a fit that merely hits
/// its iteration cap is kept (flagged by `SmrmFit::converged`) and still seeds
/// the next point.
pub fn run_path(
    dataset: &Dataset,
    lambda2: &Lambda2Matrix,
    grid: &[f64],
    controls: &EmControls,
    lasso_reference_mse: &[Option<f64>],
) -> Result<PathResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda1 grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput(
            "lambda1 grid must be strictly descending for warm starts".into(),
        ));
    }
    let train = dataset.train_rows();
    let test = dataset.test_rows();
    if train.is_empty() {
        return Err(Error::InvalidInput("dataset has no training rows".into()));
    }
    let x_train = dataset.x_subset(&train);
    let y_train = dataset.y_subset(&train);
    let x_test = dataset.x_subset(&test);
    let y_test = dataset.y_subset(&test);

    let mut warm: Option<ModelParams> = None;
    let mut points = Vec::with_capacity(grid.len());
    for &lambda1 in grid {
        let config = SmrmConfig {
            lambda1,
            lambda2: lambda2.values.clone(),
            controls: *controls,
        };
        match fit_matrices(&x_train.view(), &y_train, &config, warm.as_ref()) {
            Ok(fit) => {
                let predictions = fit.params.predict(&x_test.view());
                let report = evaluate(
                    &predictions.view(),
                    &y_test,
                    lasso_reference_mse,
                    lambda1,
                    lambda2.r,
                    Some(&fit.params.k.view()),
                )?;
                warm = Some(fit.params.clone());
                points.push(PathPoint {
                    lambda1,
                    outcome: PathOutcome::Fitted { fit, report },
                });
            }
            Err(err) => points.push(PathPoint {
                lambda1,
                outcome: PathOutcome::Failed {
                    message: err.to_string(),
                },
            }),
        }
    }

    Ok(PathResult {
        r: lambda2.r,
        points,
    })
}

/// Elementwise natural log of the observed entries; the mask is unchanged.
/// Every observed entry must be strictly positive.
pub fn log_transform(y: &MaskedMatrix) -> Result<MaskedMatrix> {
    let values = y.values();
    let mut out = values.to_owned();
    for ((i, l), &obs) in y.observed().indexed_iter() {
        if obs {
            let v = values[[i, l]];
            if !(v > 0.0) {
                return Err(Error::NonPositive {
                    row: i,
                    column: y.names()[l].clone(),
                });
            }
            out[[i, l]] = v.ln();
        }
    }
    MaskedMatrix::from_parts(out, y.observed().to_owned(), y.names().to_vec())
}

/// Elementwise exponential, the inverse of the log transform, for mapping
/// predictions back to the original scale.
pub fn exp_back(predictions: &ArrayView2<f64>) -> Array2<f64> {
    predictions.mapv(f64::exp)
}

fn observed_rows_for(
    x: &ArrayView2<f64>,
    y: &MaskedMatrix,
    l: usize,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let rows: Vec<usize> = (0..y.nrows()).filter(|&i| y.is_observed(i, l)).collect();
    if rows.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "response '{}' has {} observed training rows; need at least 2",
            y.names()[l],
            rows.len()
        )));
    }
    let mut xl = Array2::<f64>::zeros((rows.len(), x.ncols()));
    let mut yl = Array1::<f64>::zeros(rows.len());
    for (t, &i) in rows.iter().enumerate() {
        xl.row_mut(t).assign(&x.row(i));
        yl[t] = y.values()[[i, l]];
    }
    Ok((xl, yl))
}

fn mean_squared_residual(x: &ArrayView2<f64>, y: &ArrayView1<f64>, fit: &LassoFit) -> f64 {
    let n = x.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        let diff = y[i] - (fit.beta0 + x.row(i).dot(&fit.beta));
        sum += diff * diff;
    }
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn names(q: usize) -> Vec<String> {
        (0..q).map(|l| format!("y{}", l + 1)).collect()
    }

    fn complete_dataset(n: usize, p: usize, q: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>() * 2.0 - 1.0);
        let yv = Array2::from_shape_fn((n, q), |(i, l)| {
            x[[i, 0]] * (1.0 + l as f64) + 0.2 * rng.random::<f64>()
        });
        let mask = Array2::from_elem((n, q), true);
        let y = MaskedMatrix::new(yv, mask, names(q)).unwrap();
        let pnames = (0..p).map(|j| format!("x{}", j + 1)).collect();
        Dataset::new(x, y, pnames, None).unwrap()
    }

    #[test]
    fn split_sizes_follow_the_floor_convention() {
        let data = complete_dataset(114, 2, 2, 0);
        let out = train_test_split(&data, 0.8, 7).unwrap();
        assert_eq!(out.dataset.train_rows().len(), 91);
        assert_eq!(out.dataset.test_rows().len(), 23);
        assert_eq!(out.retries, 0);

        let tiny = complete_dataset(2, 1, 1, 1);
        let out = train_test_split(&tiny, 0.5, 3).unwrap();
        assert_eq!(out.dataset.train_rows().len(), 1);
        assert_eq!(out.dataset.test_rows().len(), 1);
    }

    #[test]
    fn split_is_deterministic_in_the_seed() {
        let data = complete_dataset(40, 3, 2, 5);
        let a = train_test_split(&data, 0.8, 123).unwrap();
        let b = train_test_split(&data, 0.8, 123).unwrap();
        assert_eq!(a.dataset.train_rows(), b.dataset.train_rows());
        let c = train_test_split(&data, 0.8, 124).unwrap();
        assert!(
            a.dataset.train_rows() != c.dataset.train_rows(),
            "different seeds produced the same split"
        );
    }

    #[test]
    fn split_retries_until_coverage_holds() {
        // Response 2 is observed only in row 0, so row 0 must land in train.
        let n = 5;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let mut yv = Array2::from_elem((n, 2), 1.0);
        let mut mask = Array2::from_elem((n, 2), true);
        for i in 1..n {
            mask[[i, 1]] = false;
            yv[[i, 1]] = f64::NAN;
        }
        let y = MaskedMatrix::new(yv, mask, names(2)).unwrap();
        let data = Dataset::new(x, y, vec!["x1".into()], None).unwrap();

        let mut saw_retry = false;
        for seed in 0..50u64 {
            let out = train_test_split(&data, 0.8, seed).unwrap();
            assert!(out.dataset.train_rows().contains(&0));
            if out.retries > 0 {
                saw_retry = true;
                // Retried splits are reproducible too.
                let again = train_test_split(&data, 0.8, seed).unwrap();
                assert_eq!(again.retries, out.retries);
                assert_eq!(again.dataset.train_rows(), out.dataset.train_rows());
            }
        }
        assert!(saw_retry, "no seed in 0..50 exercised the retry path");
    }

    #[test]
    fn impossible_coverage_reports_the_retry_budget() {
        // Two responses observed in disjoint single rows; a 1-row train set
        // can never cover both.
        let x = array![[0.0], [1.0]];
        let yv = array![[1.0, f64::NAN], [f64::NAN, 2.0]];
        let mask = array![[true, false], [false, true]];
        let y = MaskedMatrix::new(yv, mask, names(2)).unwrap();
        let data = Dataset::new(x, y, vec!["x1".into()], None).unwrap();
        match train_test_split(&data, 0.5, 9).unwrap_err() {
            Error::SplitInvariant { retries } => assert_eq!(retries, MAX_SPLIT_RETRIES),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn uniform_matrix_replicates_scaled_penalties() {
        let lt = array![1.0, 2.0];
        let m = build_lambda2_uniform(3, &lt.view(), 0.5).unwrap();
        assert_eq!(m.values.dim(), (3, 2));
        for j in 0..3 {
            assert_eq!(m.values[[j, 0]], 0.5);
            assert_eq!(m.values[[j, 1]], 1.0);
        }
        let unit = build_lambda2_uniform(2, &lt.view(), 1.0).unwrap();
        for j in 0..2 {
            assert_eq!(unit.values[[j, 0]], lt[0]);
            assert_eq!(unit.values[[j, 1]], lt[1]);
        }
        let single = build_lambda2_uniform(1, &lt.view(), 2.0).unwrap();
        assert_eq!(single.values.row(0).to_vec(), vec![2.0, 4.0]);

        assert!(build_lambda2_uniform(3, &lt.view(), 0.0).is_err());
    }

    #[test]
    fn adjusted_assembly_inverts_training_mse() {
        let lt = array![1.0, 1.0];
        let t = array![0.5, 2.0];
        let (m, a) = assemble_adjusted(3, &lt.view(), 1.0, &t.view(), &names(2)).unwrap();
        assert_eq!(a[0], 2.0);
        assert_eq!(a[1], 0.5);
        for j in 0..3 {
            assert_eq!(m.values[[j, 0]], 2.0);
            assert_eq!(m.values[[j, 1]], 0.5);
        }
        // Dividing column l by a_l recovers the uniform construction exactly.
        let uniform = build_lambda2_uniform(3, &lt.view(), 1.0).unwrap();
        for j in 0..3 {
            for l in 0..2 {
                assert_eq!(m.values[[j, l]], uniform.values[[j, l]] * a[l]);
            }
        }
        match assemble_adjusted(2, &lt.view(), 1.0, &array![0.0, 1.0].view(), &names(2))
            .unwrap_err()
        {
            Error::PerfectFit { column } => assert_eq!(column, "y1"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn adjusted_construction_symmetry_and_perfect_fit() {
        // Two identical responses get identical penalty columns.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let col: Vec<f64> = (0..n)
            .map(|i| x[[i, 0]] - 0.5 * x[[i, 1]] + 0.1 * rng.random::<f64>())
            .collect();
        let mut yv = Array2::zeros((n, 2));
        for i in 0..n {
            yv[[i, 0]] = col[i];
            yv[[i, 1]] = col[i];
        }
        let y = MaskedMatrix::new(yv, Array2::from_elem((n, 2), true), names(2)).unwrap();
        let controls = LassoControls::default();
        let lt = array![0.3, 0.3];
        let (m, a) = build_lambda2_adjusted(&x.view(), &y, &lt.view(), 2.0, &controls).unwrap();
        assert_eq!(a[0], a[1]);
        for j in 0..2 {
            assert_eq!(m.values[[j, 0]], m.values[[j, 1]]);
        }

        // A response that is an exact linear image of a centered predictor is
        // fitted perfectly at zero penalty.
        let xp = array![[-1.5], [-0.5], [0.5], [1.5]];
        let yp = array![[-3.0], [-1.0], [1.0], [3.0]];
        let yp = MaskedMatrix::new(yp, Array2::from_elem((4, 1), true), names(1)).unwrap();
        match build_lambda2_adjusted(&xp.view(), &yp, &array![0.0].view(), 1.0, &controls)
            .unwrap_err()
        {
            Error::PerfectFit { column } => assert_eq!(column, "y1"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn grid_is_log_equispaced_and_descending() {
        let g = lambda1_grid(0.01, 1.0, 3).unwrap();
        assert_eq!(g[0], 1.0);
        assert_abs_diff_eq!(g[1], 0.1, epsilon = 1e-15);
        assert_eq!(g[2], 0.01);

        let g = lambda1_grid(
            DEFAULT_LAMBDA1_LOW,
            DEFAULT_LAMBDA1_HIGH,
            DEFAULT_LAMBDA1_POINTS,
        )
        .unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[199], 6.5e-3);
        assert!(g.windows(2).all(|w| w[1] < w[0]));

        let a = 0.37;
        let g = lambda1_grid(a, a * std::f64::consts::E.powi(2), 3).unwrap();
        assert_abs_diff_eq!(g[0] / g[1], std::f64::consts::E, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1] / g[2], std::f64::consts::E, epsilon = 1e-12);

        assert!(lambda1_grid(1.0, 0.5, 10).is_err());
        assert!(lambda1_grid(0.0, 1.0, 10).is_err());
        assert!(lambda1_grid(0.1, 1.0, 1).is_err());
    }

    #[test]
    fn evaluating_the_baseline_against_itself_scores_q() {
        let yv = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let y = MaskedMatrix::new(yv.clone(), Array2::from_elem((3, 2), true), names(2)).unwrap();
        let preds = &yv + 0.5; // arbitrary imperfect predictions
        let mut ref_mse = Vec::new();
        for l in 0..2 {
            let mse = (0..3)
                .map(|i| (yv[[i, l]] - preds[[i, l]]).powi(2))
                .sum::<f64>()
                / 3.0;
            ref_mse.push(Some(mse));
        }
        let report = evaluate(&preds.view(), &y, &ref_mse, 0.1, 1.0, None).unwrap();
        assert_eq!(report.q_effective, 2);
        assert_eq!(report.mse_tilde_lasso, 2.0);
        assert_abs_diff_eq!(report.mse_tilde_smrm, 2.0, epsilon = 1e-12);
        assert!(report.excluded.is_empty());
    }

    #[test]
    fn evaluate_arithmetic_and_exclusions() {
        // Perfect predictions score zero.
        let yv = array![[1.0, 2.0], [3.0, 4.0]];
        let y = MaskedMatrix::new(yv.clone(), Array2::from_elem((2, 2), true), names(2)).unwrap();
        let report = evaluate(&yv.view(), &y, &[Some(1.0), Some(1.0)], 0.2, 0.5, None).unwrap();
        assert_eq!(report.mse_tilde_smrm, 0.0);
        assert_eq!(report.per_response_mse_smrm, vec![Some(0.0), Some(0.0)]);
        assert_eq!(report.lambda1, 0.2);
        assert_eq!(report.r, 0.5);

        // Single response with MSE 2 against reference 4 scores 0.5.
        let yv = array![[0.0], [2.0]];
        let y = MaskedMatrix::new(yv, Array2::from_elem((2, 1), true), names(1)).unwrap();
        let preds = array![[2.0], [4.0]]; // squared errors 4 and 4 -> MSE 4
        let report = evaluate(&preds.view(), &y, &[Some(8.0)], 0.1, 1.0, None).unwrap();
        assert_abs_diff_eq!(report.mse_tilde_smrm, 0.5, epsilon = 1e-12);

        // A response with no observed test entries is excluded and flagged.
        let yv = array![[1.0, f64::NAN], [2.0, f64::NAN]];
        let mask = array![[true, false], [true, false]];
        let y = MaskedMatrix::from_parts(yv, mask, names(2)).unwrap();
        let preds = array![[1.0, 9.0], [2.0, 9.0]];
        let report = evaluate(&preds.view(), &y, &[Some(1.0), None], 0.1, 1.0, None).unwrap();
        assert_eq!(report.q_effective, 1);
        assert_eq!(report.mse_tilde_lasso, 1.0);
        assert_eq!(report.excluded, vec!["y2".to_string()]);
        assert_eq!(report.per_response_mse_smrm[1], None);
    }

    #[test]
    fn evaluate_ignores_unobserved_values() {
        // Two masked matrices differing only in their unobserved payloads
        // produce identical reports.
        let mask = array![[true, false], [false, true]];
        let a = MaskedMatrix::from_parts(array![[1.0, 7.0], [9.0, 2.0]], mask.clone(), names(2))
            .unwrap();
        let b =
            MaskedMatrix::from_parts(array![[1.0, -100.0], [55.0, 2.0]], mask, names(2)).unwrap();
        let preds = array![[0.5, 0.5], [0.5, 0.5]];
        let refs = [Some(2.0), Some(3.0)];
        let ra = evaluate(&preds.view(), &a, &refs, 0.1, 1.0, None).unwrap();
        let rb = evaluate(&preds.view(), &b, &refs, 0.1, 1.0, None).unwrap();
        assert_eq!(ra.mse_tilde_smrm, rb.mse_tilde_smrm);
        assert_eq!(ra.per_response_mse_smrm, rb.per_response_mse_smrm);
    }

    #[test]
    fn log_transform_round_trip_and_domain() {
        let yv = array![[1.0, 2.5], [0.3, f64::NAN]];
        let mask = array![[true, true], [true, false]];
        let y = MaskedMatrix::from_parts(yv.clone(), mask, names(2)).unwrap();
        let logged = log_transform(&y).unwrap();
        assert_eq!(logged.values()[[0, 0]], 0.0); // ln 1 = 0 exactly
        let back = exp_back(&logged.values().view());
        for ((i, l), &obs) in y.observed().indexed_iter() {
            if obs {
                let orig = yv[[i, l]];
                assert_abs_diff_eq!(back[[i, l]], orig, epsilon = 1e-12 * orig.abs());
            }
        }

        let bad =
            MaskedMatrix::from_parts(array![[1.0, 0.0]], array![[true, true]], names(2)).unwrap();
        match log_transform(&bad).unwrap_err() {
            Error::NonPositive { row, column } => {
                assert_eq!(row, 0);
                assert_eq!(column, "y2");
            }
            other => panic!("unexpected error: {other}"),
        }

        // Unobserved nonpositive values are fine: the mask protects them.
        let masked =
            MaskedMatrix::from_parts(array![[2.0, -5.0]], array![[true, false]], names(2)).unwrap();
        assert!(log_transform(&masked).is_ok());
    }

    fn split_synthetic(seed: u64) -> (Dataset, LassoBaseline) {
        let spec = crate::synth::SyntheticSpec {
            n: 60,
            p: 3,
            q: 2,
            coef_density: 0.8,
            pattern: crate::synth::PrecisionPattern::Pairs {
                count: 1,
                strength: 0.6,
            },
            noise_scale: 0.7,
            missing: crate::synth::MissingMechanism::Mcar { rate: 0.2 },
            seed,
        };
        let data = crate::synth::generate_synthetic(&spec).unwrap();
        let split = train_test_split(&data.dataset, 0.8, seed).unwrap();
        let baseline = lasso_baseline(&split.dataset, 5, seed, &LassoControls::default()).unwrap();
        (split.dataset, baseline)
    }

    #[test]
    fn single_point_path_equals_a_cold_fit() {
        let (data, baseline) = split_synthetic(41);
        let lt = baseline.lambda_train.clone();
        let lambda2 = build_lambda2_uniform(3, &lt.view(), 1.0).unwrap();
        let controls = EmControls::default();
        let path = run_path(&data, &lambda2, &[0.2], &controls, &baseline.test_mse).unwrap();
        assert_eq!(path.points.len(), 1);
        let PathOutcome::Fitted { fit, report } = &path.points[0].outcome else {
            panic!("point failed");
        };

        let config = SmrmConfig {
            lambda1: 0.2,
            lambda2: lambda2.values.clone(),
            controls,
        };
        let cold = crate::em::smrm_fit(&data, &config, None).unwrap();
        assert_eq!(fit.params.b, cold.params.b);
        assert_eq!(fit.params.k, cold.params.k);
        assert_eq!(fit.objective_trace, cold.objective_trace);
        assert!(report.q_effective >= 1);
    }

    #[test]
    fn path_runs_are_bitwise_deterministic() {
        let (data, baseline) = split_synthetic(42);
        let lt = baseline.lambda_train.clone();
        let lambda2 = build_lambda2_uniform(3, &lt.view(), 0.5).unwrap();
        let grid = lambda1_grid(0.05, 0.8, 6).unwrap();
        let controls = EmControls::default();
        let a = run_path(&data, &lambda2, &grid, &controls, &baseline.test_mse).unwrap();
        let b = run_path(&data, &lambda2, &grid, &controls, &baseline.test_mse).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (pa, pb) in a.points.iter().zip(b.points.iter()) {
            match (&pa.outcome, &pb.outcome) {
                (
                    PathOutcome::Fitted {
                        fit: fa,
                        report: ra,
                    },
                    PathOutcome::Fitted {
                        fit: fb,
                        report: rb,
                    },
                ) => {
                    assert_eq!(fa.params.b, fb.params.b);
                    assert_eq!(fa.params.k, fb.params.k);
                    assert_eq!(fa.objective_trace, fb.objective_trace);
                    assert_eq!(ra.mse_tilde_smrm, rb.mse_tilde_smrm);
                }
                (PathOutcome::Failed { message: ma }, PathOutcome::Failed { message: mb }) => {
                    assert_eq!(ma, mb)
                }
                _ => panic!("outcome kinds diverged between identical runs"),
            }
        }
        // Warm starts matter: at least the first point must be fitted.
        assert!(matches!(a.points[0].outcome, PathOutcome::Fitted { .. }));
    }

    #[test]
    fn path_rejects_ascending_grids() {
        let (data, baseline) = split_synthetic(43);
        let lt = baseline.lambda_train.clone();
        let lambda2 = build_lambda2_uniform(3, &lt.view(), 1.0).unwrap();
        let err = run_path(
            &data,
            &lambda2,
            &[0.1, 0.2],
            &EmControls::default(),
            &baseline.test_mse,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
