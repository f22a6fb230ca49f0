//! Single-response lasso via cyclic coordinate descent, plus k-fold
//! cross-validation for the penalty level.
//!
//! The objective uses a 1/n scaling on the quadratic term and an unpenalized
//! intercept:
//!
//! ```text
//! f(b0, beta) = (1/n) ||y - b0 1 - X beta||^2 + lambda ||beta||_1
//! ```
//!
//! Under this scaling the exact one-dimensional update for coordinate j, with
//! partial residual r excluding column j, is
//!
//! ```text
//! beta_j = soft( x_j^T r / n, lambda / 2 ) / ( x_j^T x_j / n )
//! ```
//!
//! and the smallest penalty that zeroes every coefficient is
//! `lambda_max = 2 max_j |x_j^T (y - ybar)| / n`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shrinks `z` toward zero by `t`: `sign(z) * max(|z| - t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Solver tolerances for coordinate descent.
#[derive(Debug, Clone, Copy)]
pub struct LassoControls {
    /// Stop when the largest absolute coefficient change in a sweep (intercept
    /// included) drops to this level.
    pub tol: f64,
    /// Sweep cap; hitting it flags the fit as non-converged rather than erroring.
    pub max_iter: usize,
}

impl Default for LassoControls {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// A fitted lasso model.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub beta0: f64,
    pub beta: Array1<f64>,
    pub lambda: f64,
    /// Coordinate-descent sweeps performed.
    pub n_iter: usize,
    pub converged: bool,
    /// Objective value at the end of each kept sweep. Exactly non-increasing:
    /// a sweep whose recomputed objective fails to improve on the previous one
    /// (possible only through rounding, since every coordinate step is an
    /// exact one-dimensional minimization) is rolled back and the solver
    /// stops, so no such value is recorded.
    pub sweep_objectives: Vec<f64>,
}

/// Fits the lasso at a single penalty level.
///
/// `init` warm-starts the solver; the default start is `beta = 0`,
/// `b0 = mean(y)`. Columns with zero sum of squares are skipped (their
/// coefficients stay at the initial value's shrunken fate of zero only if
/// initialized there; warm starts keep whatever was passed in, since such a
/// column cannot change the fit).
pub fn lasso_fit(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    lambda: f64,
    init: Option<(f64, &ArrayView1<f64>)>,
    controls: &LassoControls,
) -> Result<LassoFit> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} rows but y has length {}",
            y.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput(
            "lasso requires at least one row".into(),
        ));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso design or response".into()));
    }

    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).dot(&x.column(j)) / nf).collect();

    let (mut beta0, mut beta) = match init {
        Some((b0, b)) => {
            if b.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "warm start has {} coefficients but X has {p} columns",
                    b.len()
                )));
            }
            (b0, b.to_owned())
        }
        None => (y.mean().unwrap(), Array1::zeros(p)),
    };

    // Residual r = y - beta0 - X beta, maintained incrementally.
    let mut r = y.to_owned();
    r -= beta0;
    for j in 0..p {
        if beta[j] != 0.0 {
            let bj = beta[j];
            r.iter_mut()
                .zip(x.column(j).iter())
                .for_each(|(ri, &xij)| *ri -= xij * bj);
        }
    }

    let mut sweep_objectives = Vec::new();
    let mut converged = false;
    let mut n_iter = 0;
    for _ in 0..controls.max_iter {
        n_iter += 1;
        let snapshot = (beta0, beta.clone());
        let mut max_delta = 0.0f64;

        // Unpenalized intercept: exact update is the residual mean.
        let d0 = r.mean().unwrap();
        if d0 != 0.0 {
            beta0 += d0;
            r -= d0;
            max_delta = max_delta.max(d0.abs());
        }

        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let grad = x.column(j).dot(&r) / nf;
            let new = soft_threshold(beta[j] * col_sq[j] + grad, lambda / 2.0) / col_sq[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                r.iter_mut()
                    .zip(x.column(j).iter())
                    .for_each(|(ri, &xij)| *ri -= xij * delta);
                max_delta = max_delta.max(delta.abs());
            }
        }

        let obj = r.dot(&r) / nf + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
        if sweep_objectives.last().is_some_and(|&prev| obj > prev) {
            // Each coordinate step minimizes its one-dimensional objective
            // exactly, so a recomputed increase can only be rounding noise:
            // the iterate is at the floating-point resolution of the optimum.
            // Undo the no-op sweep and stop rather than record an uphill step
            // (the residual array needs no revert; nothing reads it after
            // this break).
            (beta0, beta) = snapshot;
            converged = true;
            break;
        }
        sweep_objectives.push(obj);

        if max_delta <= controls.tol {
            converged = true;
            break;
        }
    }

    Ok(LassoFit {
        beta0,
        beta,
        lambda,
        n_iter,
        converged,
        sweep_objectives,
    })
}

/// Predictions `b0 + X beta`.
pub fn lasso_predict(fit: &LassoFit, x: &ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.ncols() != fit.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns but the fit has {} coefficients",
            x.ncols(),
            fit.beta.len()
        )));
    }
    let mut out = x.dot(&fit.beta);
    out += fit.beta0;
    Ok(out)
}

/// Smallest penalty at which every coefficient is zero:
/// `2 max_j |x_j^T (y - ybar)| / n`.
pub fn lambda_max(x: &ArrayView2<f64>, y: &ArrayView1<f64>) -> f64 {
    let n = x.nrows() as f64;
    let ybar = y.mean().unwrap_or(0.0);
    let centered = y.mapv(|v| v - ybar);
    (0..x.ncols())
        .map(|j| 2.0 * x.column(j).dot(&centered).abs() / n)
        .fold(0.0f64, f64::max)
}

/// Default CV grid: 100 log-spaced values descending from `lambda_max` to
/// `1e-4 * lambda_max`. Degenerates to `[0]` when the response is flat.
pub fn default_lambda_grid(x: &ArrayView2<f64>, y: &ArrayView1<f64>) -> Vec<f64> {
    let hi = lambda_max(x, y);
    if hi <= 0.0 {
        return vec![0.0];
    }
    log_spaced_descending(hi * 1e-4, hi, 100)
}

/// `n` points log-equispaced from `high` down to `low`, endpoints exact.
pub(crate) fn log_spaced_descending(low: f64, high: f64, n: usize) -> Vec<f64> {
    assert!(low > 0.0 && high >= low && n >= 1);
    if n == 1 {
        return vec![high];
    }
    let (lh, ll) = (high.ln(), low.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (lh + (ll - lh) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = high;
    grid[n - 1] = low;
    grid
}

/// Cross-validation output: the grid, mean held-out squared error per grid
/// point, and the winning penalty.
#[derive(Debug, Clone)]
pub struct LassoCv {
    pub grid: Vec<f64>,
    pub cv_errors: Vec<f64>,
    pub best_lambda: f64,
}

/// k-fold cross-validation over a penalty grid.
///
/// Rows are shuffled deterministically from `seed` and dealt round-robin into
/// `k` folds; per fold the grid is fitted warm-started from large to small
/// penalties. The winner minimizes the mean of per-fold held-out MSEs, with
/// ties broken toward the larger penalty.
pub fn lasso_cv(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    grid: &[f64],
    k: usize,
    seed: u64,
    controls: &LassoControls,
) -> Result<LassoCv> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} rows but y has length {}",
            y.len()
        )));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "cv folds must satisfy 2 <= k <= n rows; got k = {k}, n = {n}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidInput(
            "lambda grid entries must be finite and nonnegative".into(),
        ));
    }

    // Evaluate large penalties first so warm starts follow the usual
    // strong-to-weak regularization path.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));

    let mut shuffled: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &row) in shuffled.iter().enumerate() {
            f[row] = pos % k;
        }
        f
    };

    let mut fold_mse = vec![vec![0.0f64; grid.len()]; k];
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let xt = x.select(ndarray::Axis(0), &train);
        let yt = y.select(ndarray::Axis(0), &train);
        let xh = x.select(ndarray::Axis(0), &held);
        let yh = y.select(ndarray::Axis(0), &held);

        let mut warm: Option<LassoFit> = None;
        for &gi in &order {
            let init = warm.as_ref().map(|f: &LassoFit| (f.beta0, f.beta.view()));
            let fit = lasso_fit(
                &xt.view(),
                &yt.view(),
                grid[gi],
                init.as_ref().map(|(b0, b)| (*b0, b)),
                controls,
            )?;
            let pred = lasso_predict(&fit, &xh.view())?;
            let mse = (&pred - &yh).mapv(|e| e * e).mean().unwrap();
            fold_mse[fold][gi] = mse;
            warm = Some(fit);
        }
    }

    let cv_errors: Vec<f64> = (0..grid.len())
        .map(|gi| fold_mse.iter().map(|f| f[gi]).sum::<f64>() / k as f64)
        .collect();

    // Scan in descending-penalty order with a strict improvement rule so ties
    // resolve toward the larger lambda.
    let mut best = order[0];
    for &gi in &order {
        if cv_errors[gi] < cv_errors[best] {
            best = gi;
        }
    }

    Ok(LassoCv {
        grid: grid.to_vec(),
        cv_errors,
        best_lambda: grid[best],
    })
}
