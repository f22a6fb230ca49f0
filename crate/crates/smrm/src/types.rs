//! Core data types: response matrices with missingness masks, per-row
//! observed/missing index partitions, fitted model parameters, and the
//! conditional-Gaussian computations expressed in precision-matrix blocks.
//!
//! The central identity: if `y ~ N(mu, K^-1)` and the row is split into
//! observed (`o`) and missing (`m`) coordinates, then
//!
//! ```text
//! y_m | y_o  ~  N( mu_m - K_mm^-1 K_mo (y_o - mu_o),  K_mm^-1 )
//! ```
//!
//! i.e. the conditional precision of the missing block is just the
//! corresponding block of `K` — no marginalization over the observed block is
//! ever needed. Everything downstream (the E-step, the observed-data
//! likelihood) is built from this partition.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for the symmetry check on precision matrices.
pub const SYMMETRY_REL_TOL: f64 = 1e-10;

/// A response matrix paired with an observation mask (`true` = observed).
///
/// Values at unobserved positions are normalized to NaN at construction so
/// that accidental reads surface immediately; they are never consulted by any
/// algorithm in this crate.
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    values: Array2<f64>,
    observed: Array2<bool>,
    names: Vec<String>,
}

impl MaskedMatrix {
    /// Validating constructor: shapes must agree, observed entries must be
    /// finite, and every column must contain at least one observed entry.
    pub fn new(values: Array2<f64>, observed: Array2<bool>, names: Vec<String>) -> Result<Self> {
        let mm = Self::from_parts(values, observed, names)?;
        for (j, name) in mm.names.iter().enumerate() {
            if !mm.observed.column(j).iter().any(|&o| o) {
                return Err(Error::FullyMissingColumn {
                    column: name.clone(),
                });
            }
        }
        Ok(mm)
    }

    /// Like [`MaskedMatrix::new`] but without the per-column coverage check.
    ///
    /// Row subsets of a valid matrix (e.g. the test rows of a split) may
    /// legitimately leave a column with no observed entries; evaluation code
    /// handles that case explicitly.
    pub fn from_parts(
        mut values: Array2<f64>,
        observed: Array2<bool>,
        names: Vec<String>,
    ) -> Result<Self> {
        if values.dim() != observed.dim() {
            return Err(Error::DimensionMismatch(format!(
                "response values are {:?} but the mask is {:?}",
                values.dim(),
                observed.dim()
            )));
        }
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} response names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        for ((i, j), v) in values.indexed_iter_mut() {
            if observed[[i, j]] {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "observed response at row {i}, column '{}'",
                        names[j]
                    )));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self {
            values,
            observed,
            names,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn observed(&self) -> &Array2<bool> {
        &self.observed
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[[row, col]]
    }

    /// Row indices where column `col` is observed.
    pub fn observed_rows(&self, col: usize) -> Vec<usize> {
        self.observed
            .column(col)
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| o.then_some(i))
            .collect()
    }

    /// Fraction of missing entries per column.
    pub fn missing_ratio_per_column(&self) -> Vec<f64> {
        let n = self.nrows().max(1) as f64;
        (0..self.ncols())
            .map(|j| self.observed.column(j).iter().filter(|&&o| !o).count() as f64 / n)
            .collect()
    }

    /// Fraction of missing entries per row.
    pub fn missing_ratio_per_row(&self) -> Vec<f64> {
        let q = self.ncols().max(1) as f64;
        (0..self.nrows())
            .map(|i| self.observed.row(i).iter().filter(|&&o| !o).count() as f64 / q)
            .collect()
    }

    /// The rows `rows` as a new matrix, without re-checking column coverage.
    pub fn subset_rows(&self, rows: &[usize]) -> MaskedMatrix {
        let values = self.values.select(Axis(0), rows);
        let observed = self.observed.select(Axis(0), rows);
        MaskedMatrix {
            values,
            observed,
            names: self.names.clone(),
        }
    }
}

/// Observed/missing column indices of a single response row, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPartition {
    pub obs: Vec<usize>,
    pub mis: Vec<usize>,
}

impl RowPartition {
    pub fn n_obs(&self) -> usize {
        self.obs.len()
    }

    pub fn n_mis(&self) -> usize {
        self.mis.len()
    }

    pub fn is_complete(&self) -> bool {
        self.mis.is_empty()
    }
}

/// Splits a mask row into observed and missing index sets (both ascending).
pub fn partition_row(mask_row: ArrayView1<bool>) -> RowPartition {
    let mut obs = Vec::new();
    let mut mis = Vec::new();
    for (j, &observed) in mask_row.iter().enumerate() {
        if observed {
            obs.push(j);
        } else {
            mis.push(j);
        }
    }
    RowPartition { obs, mis }
}

/// Fitted (or initial) model parameters: intercepts `b0` (length q),
/// coefficients `B` (p x q), and residual precision `K` (q x q, SPD).
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub b0: Array1<f64>,
    pub b: Array2<f64>,
    pub k: Array2<f64>,
}

impl ModelParams {
    /// Validating constructor: dimension consistency, finiteness, symmetry of
    /// `K` to `1e-10 * max|K|`, and positive definiteness (checked by a
    /// factorization attempt, not an eigendecomposition).
    pub fn new(b0: Array1<f64>, b: Array2<f64>, k: Array2<f64>) -> Result<Self> {
        let q = b0.len();
        if b.ncols() != q {
            return Err(Error::DimensionMismatch(format!(
                "B has {} columns but b0 has length {q}",
                b.ncols()
            )));
        }
        if k.dim() != (q, q) {
            return Err(Error::DimensionMismatch(format!(
                "K is {:?} but there are {q} responses",
                k.dim()
            )));
        }
        if b0
            .iter()
            .chain(b.iter())
            .chain(k.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("model parameters".into()));
        }
        if !linalg::is_symmetric(&k.view(), SYMMETRY_REL_TOL) {
            return Err(Error::NotSpd("K is not symmetric".into()));
        }
        linalg::cholesky(&k.view(), "K")?;
        Ok(Self { b0, b, k })
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn q(&self) -> usize {
        self.b0.len()
    }

    /// Row-wise means `1 b0^T + X B`.
    pub fn predict(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut m = x.dot(&self.b);
        for mut row in m.rows_mut() {
            row += &self.b0;
        }
        m
    }
}

/// Train/test tag for a dataset row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

/// A complete design matrix paired with masked responses and a row split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: MaskedMatrix,
    pub predictor_names: Vec<String>,
    pub split: Vec<SplitTag>,
}

impl Dataset {
    /// `split = None` tags every row as training data.
    pub fn new(
        x: Array2<f64>,
        y: MaskedMatrix,
        predictor_names: Vec<String>,
        split: Option<Vec<SplitTag>>,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if predictor_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictor names for {} columns",
                predictor_names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        let split = split.unwrap_or_else(|| vec![SplitTag::Train; x.nrows()]);
        if split.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} split tags for {} rows",
                split.len(),
                x.nrows()
            )));
        }
        Ok(Self {
            x,
            y,
            predictor_names,
            split,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn train_rows(&self) -> Vec<usize> {
        self.rows_tagged(SplitTag::Train)
    }

    pub fn test_rows(&self) -> Vec<usize> {
        self.rows_tagged(SplitTag::Test)
    }

    fn rows_tagged(&self, tag: SplitTag) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| (t == tag).then_some(i))
            .collect()
    }

    pub fn x_subset(&self, rows: &[usize]) -> Array2<f64> {
        self.x.select(Axis(0), rows)
    }

    pub fn y_subset(&self, rows: &[usize]) -> MaskedMatrix {
        self.y.subset_rows(rows)
    }
}

/// Conditional mean and precision of the missing block given the observed one.
///
/// Returns `(mu_m - K_mm^-1 K_mo (y_o - mu_o), K_mm)`: note the second element
/// is the conditional *precision* (the `K_mm` block itself), not its inverse.
/// An empty missing set yields an empty vector and a 0 x 0 matrix.
pub fn conditional_gaussian(
    mu: &ArrayView1<f64>,
    k: &ArrayView2<f64>,
    part: &RowPartition,
    y_obs: &ArrayView1<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let q = mu.len();
    if k.dim() != (q, q) {
        return Err(Error::DimensionMismatch(format!(
            "K is {:?} but mu has length {q}",
            k.dim()
        )));
    }
    validate_partition(part, q)?;
    if y_obs.len() != part.n_obs() {
        return Err(Error::DimensionMismatch(format!(
            "y_obs has length {} but the partition has {} observed indices",
            y_obs.len(),
            part.n_obs()
        )));
    }
    if !linalg::is_symmetric(k, 1e-8) {
        return Err(Error::NotSpd("K is not symmetric".into()));
    }
    linalg::cholesky(k, "K")?;

    let k_mm = linalg::gather(k, &part.mis, &part.mis);
    if part.mis.is_empty() {
        return Ok((Array1::zeros(0), k_mm));
    }
    let k_mo = linalg::gather(k, &part.mis, &part.obs);
    let resid_obs = Array1::from_iter(part.obs.iter().zip(y_obs.iter()).map(|(&j, &y)| y - mu[j]));
    let rhs = k_mo.dot(&resid_obs);
    let l = linalg::cholesky(&k_mm.view(), "K_mm")?;
    let correction = linalg::chol_solve_vec(&l, &rhs.view());
    let cond_mean = Array1::from_iter(
        part.mis
            .iter()
            .zip(correction.iter())
            .map(|(&j, &c)| mu[j] - c),
    );
    Ok((cond_mean, k_mm))
}

fn validate_partition(part: &RowPartition, q: usize) -> Result<()> {
    let mut seen = vec![false; q];
    for &j in part.obs.iter().chain(part.mis.iter()) {
        if j >= q || seen[j] {
            return Err(Error::InvalidInput(format!(
                "row partition does not form a disjoint cover of 0..{q}"
            )));
        }
        seen[j] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::InvalidInput(format!(
            "row partition does not cover all {q} responses"
        )));
    }
    Ok(())
}

/// Converts a precision matrix to the implied response correlation matrix:
/// `R_ij = Sigma_ij / sqrt(Sigma_ii Sigma_jj)` with `Sigma = K^-1`.
///
/// The diagonal is exactly 1 and off-diagonals are clamped to `[-1, 1]` to
/// absorb last-bit rounding.
pub fn precision_to_correlation(k: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if !linalg::is_symmetric(k, 1e-8) {
        return Err(Error::NotSpd("K is not symmetric".into()));
    }
    let sigma = linalg::spd_inverse(k, "K")?;
    let q = sigma.nrows();
    let mut r = Array2::<f64>::zeros((q, q));
    for i in 0..q {
        r[[i, i]] = 1.0;
        for j in (i + 1)..q {
            let denom = (sigma[[i, i]] * sigma[[j, j]]).sqrt();
            let c = (sigma[[i, j]] / denom).clamp(-1.0, 1.0);
            r[[i, j]] = c;
            r[[j, i]] = c;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Plain Gauss-Jordan inverse, independent of the crate's Cholesky path.
    fn invert_gauss_jordan(a: &Array2<f64>) -> Array2<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut inv = Array2::<f64>::eye(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
                .unwrap();
            if pivot_row != col {
                for j in 0..n {
                    m.swap([col, j], [pivot_row, j]);
                    inv.swap([col, j], [pivot_row, j]);
                }
            }
            let piv = m[[col, col]];
            for j in 0..n {
                m[[col, j]] /= piv;
                inv[[col, j]] /= piv;
            }
            for i in 0..n {
                if i != col {
                    let f = m[[i, col]];
                    for j in 0..n {
                        m[[i, j]] -= f * m[[col, j]];
                        inv[[i, j]] -= f * inv[[col, j]];
                    }
                }
            }
        }
        inv
    }

    /// Oracle for the conditional moments via the covariance partition:
    /// mean = mu_m + Sigma_mo Sigma_oo^-1 (y_o - mu_o),
    /// cov  = Sigma_mm - Sigma_mo Sigma_oo^-1 Sigma_om, with Sigma = K^-1.
    fn conditional_by_covariance(
        mu: &Array1<f64>,
        k: &Array2<f64>,
        part: &RowPartition,
        y_obs: &Array1<f64>,
    ) -> (Array1<f64>, Array2<f64>) {
        let sigma = invert_gauss_jordan(k);
        let s_mm = linalg::gather(&sigma.view(), &part.mis, &part.mis);
        if part.obs.is_empty() {
            let mean = Array1::from_iter(part.mis.iter().map(|&j| mu[j]));
            return (mean, s_mm);
        }
        let s_mo = linalg::gather(&sigma.view(), &part.mis, &part.obs);
        let s_oo = linalg::gather(&sigma.view(), &part.obs, &part.obs);
        let s_oo_inv = invert_gauss_jordan(&s_oo);
        let resid = Array1::from_iter(part.obs.iter().zip(y_obs.iter()).map(|(&j, &y)| y - mu[j]));
        let gain = s_mo.dot(&s_oo_inv);
        let mean = Array1::from_iter(
            part.mis
                .iter()
                .zip(gain.dot(&resid).iter())
                .map(|(&j, &c)| mu[j] + c),
        );
        let cov = &s_mm - &gain.dot(&s_mo.t());
        (mean, cov)
    }

    pub(crate) fn random_spd(q: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let g = Array2::from_shape_fn((q, q), |_| rng.random::<f64>() * 2.0 - 1.0);
        let mut k = g.dot(&g.t());
        for i in 0..q {
            k[[i, i]] += 0.5 + q as f64 * 0.1;
        }
        k
    }

    #[test]
    fn partition_examples() {
        let p = partition_row(array![true, false, true].view());
        assert_eq!(p.obs, vec![0, 2]);
        assert_eq!(p.mis, vec![1]);

        let p = partition_row(array![true, true].view());
        assert_eq!(p.obs, vec![0, 1]);
        assert!(p.mis.is_empty());
        assert!(p.is_complete());

        let p = partition_row(array![false, false, false].view());
        assert!(p.obs.is_empty());
        assert_eq!(p.mis, vec![0, 1, 2]);
    }

    #[test]
    fn partition_round_trips_through_inverse_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let q = rng.random_range(1..9);
            let mask = Array1::from_shape_fn(q, |_| rng.random::<bool>());
            let part = partition_row(mask.view());
            let mut rebuilt = vec![None; q];
            for &j in &part.obs {
                rebuilt[j] = Some(true);
            }
            for &j in &part.mis {
                rebuilt[j] = Some(false);
            }
            let rebuilt: Vec<bool> = rebuilt.into_iter().map(Option::unwrap).collect();
            assert_eq!(rebuilt, mask.to_vec());
            assert!(part.obs.windows(2).all(|w| w[0] < w[1]));
            assert!(part.mis.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn conditional_identity_precision_ignores_observed_block() {
        // Independent coordinates: conditioning changes nothing.
        let mu = array![1.0, -2.0, 0.5];
        let k = Array2::eye(3);
        let part = partition_row(array![true, false, false].view());
        let (mean, prec) =
            conditional_gaussian(&mu.view(), &k.view(), &part, &array![9.0].view()).unwrap();
        assert_eq!(mean, array![-2.0, 0.5]);
        assert_eq!(prec, Array2::<f64>::eye(2));
    }

    #[test]
    fn conditional_with_no_missing_entries_is_empty() {
        let mu = array![0.0, 0.0];
        let k = array![[2.0, -1.0], [-1.0, 2.0]];
        let part = partition_row(array![true, true].view());
        let (mean, prec) =
            conditional_gaussian(&mu.view(), &k.view(), &part, &array![1.0, 2.0].view()).unwrap();
        assert_eq!(mean.len(), 0);
        assert_eq!(prec.dim(), (0, 0));
    }

    #[test]
    fn conditional_matches_covariance_oracle_q3() {
        // Worked instance: q = 3, middle coordinate missing.
        let mu = array![0.5, -1.0, 2.0];
        let k = array![[2.0, 0.6, 0.2], [0.6, 1.5, -0.4], [0.2, -0.4, 1.2]];
        let part = partition_row(array![true, false, true].view());
        let y_obs = array![1.1, 1.7];
        let (mean, prec) =
            conditional_gaussian(&mu.view(), &k.view(), &part, &y_obs.view()).unwrap();
        let (mean_oracle, cov_oracle) = conditional_by_covariance(&mu, &k, &part, &y_obs);
        assert_abs_diff_eq!(mean[0], mean_oracle[0], epsilon = 1e-10);
        // Conditional precision is K_mm; its inverse must equal the oracle covariance.
        assert_abs_diff_eq!(1.0 / prec[[0, 0]], cov_oracle[[0, 0]], epsilon = 1e-10);
        assert_abs_diff_eq!(prec[[0, 0]], k[[1, 1]], epsilon = 0.0);
    }

    #[test]
    fn conditional_rejects_bad_inputs() {
        let mu = array![0.0, 0.0];
        let k_bad = array![[1.0, 2.0], [2.0, 1.0]];
        let part = partition_row(array![true, false].view());
        let err = conditional_gaussian(&mu.view(), &k_bad.view(), &part, &array![0.0].view())
            .unwrap_err();
        assert!(matches!(err, Error::NotSpd(_)));

        let k = Array2::eye(2);
        let err = conditional_gaussian(&mu.view(), &k.view(), &part, &array![0.0, 1.0].view())
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn correlation_examples() {
        let r = precision_to_correlation(&Array2::eye(3).view()).unwrap();
        assert_eq!(r, Array2::<f64>::eye(3));

        // Diagonal precision: uncorrelated regardless of scales.
        let r = precision_to_correlation(&array![[2.0, 0.0], [0.0, 5.0]].view()).unwrap();
        assert_eq!(r, Array2::<f64>::eye(2));

        // K = [[2,-1],[-1,2]] => Sigma = (1/3)[[2,1],[1,2]] => correlation 0.5.
        let r = precision_to_correlation(&array![[2.0, -1.0], [-1.0, 2.0]].view()).unwrap();
        assert_abs_diff_eq!(r[[0, 1]], 0.5, epsilon = 1e-12);
        assert_eq!(r[[0, 0]], 1.0);
    }

    #[test]
    fn masked_matrix_rejects_fully_missing_column() {
        let values = array![[1.0, 2.0], [3.0, 4.0]];
        let observed = array![[true, false], [true, false]];
        let err = MaskedMatrix::new(values, observed, vec!["a".into(), "b".into()]).unwrap_err();
        match err {
            Error::FullyMissingColumn { column } => assert_eq!(column, "b"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn masked_matrix_normalizes_unobserved_values() {
        let values = array![[1.0, 99.0], [3.0, 4.0]];
        let observed = array![[true, false], [true, true]];
        let mm = MaskedMatrix::new(values, observed, vec!["a".into(), "b".into()]).unwrap();
        assert!(mm.values()[[0, 1]].is_nan());
        assert_eq!(mm.values()[[1, 1]], 4.0);
        assert_eq!(mm.missing_ratio_per_column(), vec![0.0, 0.5]);
        assert_eq!(mm.missing_ratio_per_row(), vec![0.5, 0.0]);
    }

    #[test]
    fn model_params_validation() {
        let b0 = array![0.0, 0.0];
        let b = Array2::zeros((3, 2));
        let asym = array![[1.0, 0.2], [0.1, 1.0]];
        assert!(matches!(
            ModelParams::new(b0.clone(), b.clone(), asym).unwrap_err(),
            Error::NotSpd(_)
        ));
        let indefinite = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            ModelParams::new(b0.clone(), b.clone(), indefinite).unwrap_err(),
            Error::NotSpd(_)
        ));
        let ok = ModelParams::new(b0, b, Array2::eye(2)).unwrap();
        assert_eq!(ok.p(), 3);
        assert_eq!(ok.q(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Precision-block and covariance-block routes agree on random SPD instances.
        #[test]
        fn conditional_agrees_with_covariance_partition(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = rng.random_range(2..7);
            let k = random_spd(q, &mut rng);
            let mu = Array1::from_shape_fn(q, |_| rng.random::<f64>() * 4.0 - 2.0);
            let mask = Array1::from_shape_fn(q, |_| rng.random::<bool>());
            let part = partition_row(mask.view());
            let y_obs =
                Array1::from_shape_fn(part.n_obs(), |_| rng.random::<f64>() * 4.0 - 2.0);
            let (mean, prec) =
                conditional_gaussian(&mu.view(), &k.view(), &part, &y_obs.view()).unwrap();
            let (mean_oracle, cov_oracle) = conditional_by_covariance(&mu, &k, &part, &y_obs);
            for (a, b) in mean.iter().zip(mean_oracle.iter()) {
                prop_assert!((a - b).abs() < 1e-9, "mean mismatch {a} vs {b}");
            }
            if part.n_mis() > 0 {
                let cov = invert_gauss_jordan(&prec);
                for (a, b) in cov.iter().zip(cov_oracle.iter()) {
                    prop_assert!((a - b).abs() < 1e-8, "cov mismatch {a} vs {b}");
                }
            }
        }

        /// Correlations are invariant under rescaling of the precision matrix.
        #[test]
        fn correlation_scale_invariant(seed in 0u64..10_000, c in 0.05f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = rng.random_range(2..6);
            let k = random_spd(q, &mut rng);
            let r1 = precision_to_correlation(&k.view()).unwrap();
            let r2 = precision_to_correlation(&(&k * c).view()).unwrap();
            for (a, b) in r1.iter().zip(r2.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
                prop_assert!(a.abs() <= 1.0);
            }
        }
    }
}
