//! Configuration, CSV input/output, heatmap rendering, and run metadata.
//!
//! Configuration is a flat `key = value` text format: one pair per line,
//! `#` starts a comment, list values are comma-separated. Every key can also
//! be overridden on the command line by a flag of the same name.
//!
//! CSV conventions:
//! * UTF-8 with a header row; the decimal separator is `.` and scientific
//!   notation is accepted.
//! * A configurable token (default `NA`) marks missing response entries;
//!   predictors must be complete.
//! * Every file this crate writes starts with a single `#` metadata comment
//!   line, which the reader skips on ingest.
//! * Floats are written in Rust's shortest round-trip decimal form, so
//!   write-then-read reproduces every value bit for bit.
//! * Writes are atomic: content goes to a `.tmp` sibling which is then
//!   renamed over the target.
//!
//! Row indices in ingest errors are 0-based positions among the data rows
//! (the header is not counted).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::em::EmControls;
use crate::error::{Error, Result};
use crate::lasso::LassoControls;
use crate::synth::{MissingMechanism, PrecisionPattern, SyntheticSpec};
use crate::types::{Dataset, MaskedMatrix};

/// Scale on which responses are modeled and evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Raw,
    Log,
}

/// How the coefficient-penalty matrix is built from the per-response
/// reference penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda2Mode {
    Uniform,
    Adjusted,
}

/// All run settings. Field names double as config keys and CLI flag names.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: Option<String>,
    pub output_dir: String,
    pub missing_token: String,
    pub predictor_columns: Vec<String>,
    pub response_columns: Vec<String>,
    pub scale: Scale,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub lambda1_low: f64,
    pub lambda1_high: f64,
    pub lambda1_points: usize,
    /// Precision penalty for a single fit.
    pub lambda1: f64,
    /// Coefficient-penalty multiplier for a single fit.
    pub r: f64,
    /// Multipliers swept by the path command.
    pub r_values: Vec<f64>,
    pub lambda2_mode: Lambda2Mode,
    pub cv_folds: usize,
    pub cv_seed: u64,
    pub em_epsilon: f64,
    pub em_max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub glasso_tol: f64,
    pub glasso_max_iter: usize,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub synth_n: usize,
    pub synth_p: usize,
    pub synth_q: usize,
    pub synth_coef_density: f64,
    pub synth_pattern: String,
    pub synth_pairs: usize,
    pub synth_band_width: usize,
    pub synth_strength: f64,
    pub synth_noise_scale: f64,
    pub synth_missing: String,
    pub synth_rate: f64,
    pub synth_dependence: f64,
    pub synth_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let em = EmControls::default();
        let lasso = LassoControls::default();
        Self {
            input: None,
            output_dir: "out".into(),
            missing_token: "NA".into(),
            predictor_columns: Vec::new(),
            response_columns: Vec::new(),
            scale: Scale::Raw,
            split_ratio: 0.8,
            split_seed: 0,
            lambda1_low: crate::path::DEFAULT_LAMBDA1_LOW,
            lambda1_high: crate::path::DEFAULT_LAMBDA1_HIGH,
            lambda1_points: crate::path::DEFAULT_LAMBDA1_POINTS,
            lambda1: 0.1,
            r: 1.0,
            r_values: vec![3.0, 2.0, 1.0, 0.75, 0.5, 0.225, 0.2, 0.175, 0.1],
            lambda2_mode: Lambda2Mode::Adjusted,
            cv_folds: 5,
            cv_seed: 0,
            em_epsilon: em.epsilon,
            em_max_iter: em.max_em_iter,
            inner_tol: em.inner_tol,
            inner_max_iter: em.inner_max_iter,
            glasso_tol: em.glasso_tol,
            glasso_max_iter: em.glasso_max_iter,
            lasso_tol: lasso.tol,
            lasso_max_iter: lasso.max_iter,
            synth_n: 114,
            synth_p: 26,
            synth_q: 22,
            synth_coef_density: 0.2,
            synth_pattern: "pairs".into(),
            synth_pairs: 6,
            synth_band_width: 1,
            synth_strength: 0.5,
            synth_noise_scale: 1.0,
            synth_missing: "mcar".into(),
            synth_rate: 0.6,
            synth_dependence: 1.0,
            synth_seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::InvalidInput(format!(
            "cannot parse value '{value}' for configuration key '{key}'"
        ))
    })
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl RunConfig {
    /// Applies one `key = value` pair, as found in a config file or a CLI
    /// flag of the same name.
    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "input" => self.input = Some(v.to_string()),
            "output_dir" => self.output_dir = v.to_string(),
            "missing_token" => self.missing_token = v.to_string(),
            "predictor_columns" => self.predictor_columns = parse_list(v),
            "response_columns" => self.response_columns = parse_list(v),
            "scale" => {
                self.scale = match v {
                    "raw" => Scale::Raw,
                    "log" => Scale::Log,
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "scale must be 'raw' or 'log', got '{v}'"
                        )))
                    }
                }
            }
            "split_ratio" => self.split_ratio = parse_num(key, v)?,
            "split_seed" => self.split_seed = parse_num(key, v)?,
            "lambda1_low" => self.lambda1_low = parse_num(key, v)?,
            "lambda1_high" => self.lambda1_high = parse_num(key, v)?,
            "lambda1_points" => self.lambda1_points = parse_num(key, v)?,
            "lambda1" => self.lambda1 = parse_num(key, v)?,
            "r" => self.r = parse_num(key, v)?,
            "r_values" => {
                let mut out = Vec::new();
                for item in parse_list(v) {
                    out.push(parse_num("r_values", &item)?);
                }
                self.r_values = out;
            }
            "lambda2_mode" => {
                self.lambda2_mode = match v {
                    "uniform" => Lambda2Mode::Uniform,
                    "adjusted" => Lambda2Mode::Adjusted,
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "lambda2_mode must be 'uniform' or 'adjusted', got '{v}'"
                        )))
                    }
                }
            }
            "cv_folds" => self.cv_folds = parse_num(key, v)?,
            "cv_seed" => self.cv_seed = parse_num(key, v)?,
            "em_epsilon" => self.em_epsilon = parse_num(key, v)?,
            "em_max_iter" => self.em_max_iter = parse_num(key, v)?,
            "inner_tol" => self.inner_tol = parse_num(key, v)?,
            "inner_max_iter" => self.inner_max_iter = parse_num(key, v)?,
            "glasso_tol" => self.glasso_tol = parse_num(key, v)?,
            "glasso_max_iter" => self.glasso_max_iter = parse_num(key, v)?,
            "lasso_tol" => self.lasso_tol = parse_num(key, v)?,
            "lasso_max_iter" => self.lasso_max_iter = parse_num(key, v)?,
            "synth_n" => self.synth_n = parse_num(key, v)?,
            "synth_p" => self.synth_p = parse_num(key, v)?,
            "synth_q" => self.synth_q = parse_num(key, v)?,
            "synth_coef_density" => self.synth_coef_density = parse_num(key, v)?,
            "synth_pattern" => self.synth_pattern = v.to_string(),
            "synth_pairs" => self.synth_pairs = parse_num(key, v)?,
            "synth_band_width" => self.synth_band_width = parse_num(key, v)?,
            "synth_strength" => self.synth_strength = parse_num(key, v)?,
            "synth_noise_scale" => self.synth_noise_scale = parse_num(key, v)?,
            "synth_missing" => self.synth_missing = v.to_string(),
            "synth_rate" => self.synth_rate = parse_num(key, v)?,
            "synth_dependence" => self.synth_dependence = parse_num(key, v)?,
            "synth_seed" => self.synth_seed = parse_num(key, v)?,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown configuration key '{key}'"
                )))
            }
        }
        Ok(())
    }

    /// Parses the flat config text format onto the defaults.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidInput(format!(
                    "config line {} is not a 'key = value' pair: '{raw}'",
                    line_no + 1
                )));
            };
            config.apply_pair(key.trim(), value)?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Cross-field checks shared by every command.
    pub fn validate_numeric(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "split_ratio must lie strictly between 0 and 1, got {}",
                self.split_ratio
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidInput(format!(
                "cv_folds must be at least 2, got {}",
                self.cv_folds
            )));
        }
        if self.r_values.is_empty() {
            return Err(Error::InvalidInput("r_values must not be empty".into()));
        }
        if self.r_values.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidInput(
                "every r value must be finite and positive".into(),
            ));
        }
        Ok(())
    }

    /// Checks the settings needed to read a dataset from disk.
    pub fn validate_data_io(&self) -> Result<()> {
        if self.input.is_none() {
            return Err(Error::InvalidInput(
                "this command needs an input CSV: set 'input'".into(),
            ));
        }
        if self.predictor_columns.is_empty() || self.response_columns.is_empty() {
            return Err(Error::InvalidInput(
                "predictor_columns and response_columns must both be nonempty".into(),
            ));
        }
        for set in [&self.predictor_columns, &self.response_columns] {
            let mut seen = std::collections::HashSet::new();
            for name in set {
                if !seen.insert(name) {
                    return Err(Error::InvalidInput(format!(
                        "column '{name}' is listed twice"
                    )));
                }
            }
        }
        for name in &self.predictor_columns {
            if self.response_columns.contains(name) {
                return Err(Error::InvalidInput(format!(
                    "column '{name}' is declared as both predictor and response"
                )));
            }
        }
        Ok(())
    }

    pub fn em_controls(&self) -> EmControls {
        EmControls {
            epsilon: self.em_epsilon,
            max_em_iter: self.em_max_iter,
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
            glasso_tol: self.glasso_tol,
            glasso_max_iter: self.glasso_max_iter,
        }
    }

    pub fn lasso_controls(&self) -> LassoControls {
        LassoControls {
            tol: self.lasso_tol,
            max_iter: self.lasso_max_iter,
        }
    }

    /// Assembles the synthetic-data spec from the `synth_*` keys.
    pub fn synth_spec(&self) -> Result<SyntheticSpec> {
        let pattern = match self.synth_pattern.as_str() {
            "diagonal" => PrecisionPattern::Diagonal,
            "pairs" => PrecisionPattern::Pairs {
                count: self.synth_pairs,
                strength: self.synth_strength,
            },
            "band" => PrecisionPattern::Band {
                width: self.synth_band_width,
                strength: self.synth_strength,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "synth_pattern must be 'diagonal', 'pairs' or 'band', got '{other}'"
                )))
            }
        };
        let missing = match self.synth_missing.as_str() {
            "mcar" => MissingMechanism::Mcar {
                rate: self.synth_rate,
            },
            "mar" => MissingMechanism::Mar {
                rate: self.synth_rate,
                dependence: self.synth_dependence,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "synth_missing must be 'mcar' or 'mar', got '{other}'"
                )))
            }
        };
        Ok(SyntheticSpec {
            n: self.synth_n,
            p: self.synth_p,
            q: self.synth_q,
            coef_density: self.synth_coef_density,
            pattern,
            noise_scale: self.synth_noise_scale,
            missing,
            seed: self.synth_seed,
        })
    }
}

/// Reads a dataset from CSV using the declared column lists, in their
/// declared order. The missing token masks response entries; predictors must
/// be complete.
pub fn ingest_csv(path: &Path, config: &RunConfig) -> Result<Dataset> {
    config.validate_data_io()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open '{}': {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("cannot read header row: {e}")))?
        .clone();
    let mut position: HashMap<&str, Vec<usize>> = HashMap::new();
    for (idx, name) in headers.iter().enumerate() {
        position.entry(name).or_default().push(idx);
    }
    let locate = |name: &str| -> Result<usize> {
        match position.get(name) {
            Some(hits) if hits.len() == 1 => Ok(hits[0]),
            Some(_) => Err(Error::InvalidInput(format!(
                "column '{name}' appears more than once in the header"
            ))),
            None => Err(Error::ColumnNotFound {
                column: name.to_string(),
            }),
        }
    };
    let pred_idx: Vec<usize> = config
        .predictor_columns
        .iter()
        .map(|n| locate(n))
        .collect::<Result<_>>()?;
    let resp_idx: Vec<usize> = config
        .response_columns
        .iter()
        .map(|n| locate(n))
        .collect::<Result<_>>()?;

    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    let mut mask_rows: Vec<Vec<bool>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::InvalidInput(format!("cannot read data row {row}: {e}")))?;
        let cell = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| Error::CsvCell {
                row,
                column: name.to_string(),
                detail: "row has too few fields".into(),
            })
        };

        let mut xr = Vec::with_capacity(pred_idx.len());
        for (&idx, name) in pred_idx.iter().zip(&config.predictor_columns) {
            let raw = cell(idx, name)?;
            if raw == config.missing_token {
                return Err(Error::MissingPredictor {
                    row,
                    column: name.clone(),
                });
            }
            xr.push(parse_cell(raw, row, name)?);
        }

        let mut yr = Vec::with_capacity(resp_idx.len());
        let mut mr = Vec::with_capacity(resp_idx.len());
        for (&idx, name) in resp_idx.iter().zip(&config.response_columns) {
            let raw = cell(idx, name)?;
            if raw == config.missing_token {
                yr.push(f64::NAN);
                mr.push(false);
            } else {
                yr.push(parse_cell(raw, row, name)?);
                mr.push(true);
            }
        }

        x_rows.push(xr);
        y_rows.push(yr);
        mask_rows.push(mr);
    }

    let n = x_rows.len();
    if n == 0 {
        return Err(Error::InvalidInput(format!(
            "'{}' contains no data rows",
            path.display()
        )));
    }
    let p = pred_idx.len();
    let q = resp_idx.len();
    let x = Array2::from_shape_fn((n, p), |(i, j)| x_rows[i][j]);
    let y = Array2::from_shape_fn((n, q), |(i, l)| y_rows[i][l]);
    let mask = Array2::from_shape_fn((n, q), |(i, l)| mask_rows[i][l]);
    let masked = MaskedMatrix::new(y, mask, config.response_columns.clone())?;
    Dataset::new(x, masked, config.predictor_columns.clone(), None)
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::CsvCell {
        row,
        column: column.to_string(),
        detail: format!("'{raw}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::CsvCell {
            row,
            column: column.to_string(),
            detail: format!("'{raw}' is not finite"),
        });
    }
    Ok(v)
}

/// Writes bytes to `path` atomically: a `.tmp` sibling is written in full and
/// renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest decimal representation that parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

fn csv_bytes(comment: &str, header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    debug_assert!(comment.starts_with('#'));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| Error::InvalidInput(format!("cannot encode CSV header: {e}")))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| Error::InvalidInput(format!("cannot encode CSV row: {e}")))?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("cannot finish CSV: {e}")))?;
    let mut bytes = Vec::with_capacity(comment.len() + 1 + body.len());
    bytes.extend_from_slice(comment.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(&body);
    Ok(bytes)
}

/// Writes a generic table with a leading `#` metadata comment.
pub fn write_table_csv(
    path: &Path,
    comment: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_atomic(path, &csv_bytes(comment, &header, rows)?)
}

/// Writes a labeled matrix: first column holds row names, remaining columns
/// the named values.
pub fn write_named_matrix_csv(
    path: &Path,
    comment: &str,
    corner: &str,
    col_names: &[String],
    row_names: &[String],
    values: &ArrayView2<f64>,
) -> Result<()> {
    if values.dim() != (row_names.len(), col_names.len()) {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {:?} but {} row names and {} column names were given",
            values.dim(),
            row_names.len(),
            col_names.len()
        )));
    }
    let mut header = Vec::with_capacity(col_names.len() + 1);
    header.push(corner.to_string());
    header.extend(col_names.iter().cloned());
    let rows: Vec<Vec<String>> = row_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut row = Vec::with_capacity(col_names.len() + 1);
            row.push(name.clone());
            row.extend(values.row(i).iter().map(|&v| format_float(v)));
            row
        })
        .collect();
    write_atomic(path, &csv_bytes(comment, &header, &rows)?)
}

/// Writes a dataset (predictors then responses); unobserved response entries
/// become the missing token.
pub fn write_dataset_csv(
    path: &Path,
    dataset: &Dataset,
    missing_token: &str,
    comment: &str,
) -> Result<()> {
    let x = &dataset.x;
    let y = dataset.y.values();
    let mask = dataset.y.observed();
    let mut header: Vec<String> = dataset.predictor_names.clone();
    header.extend(dataset.y.names().iter().cloned());
    let mut rows = Vec::with_capacity(x.nrows());
    for i in 0..x.nrows() {
        let mut row = Vec::with_capacity(header.len());
        for j in 0..x.ncols() {
            row.push(format_float(x[[i, j]]));
        }
        for l in 0..y.ncols() {
            if mask[[i, l]] {
                row.push(format_float(y[[i, l]]));
            } else {
                row.push(missing_token.to_string());
            }
        }
        rows.push(row);
    }
    write_atomic(path, &csv_bytes(comment, &header, &rows)?)
}

fn heat_color(v: f64) -> (u8, u8, u8) {
    // Diverging scale: blue (-1) through white (0) to red (+1).
    let v = v.clamp(-1.0, 1.0);
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    if v >= 0.0 {
        (
            lerp(255.0, 180.0, v),
            lerp(255.0, 4.0, v),
            lerp(255.0, 38.0, v),
        )
    } else {
        let t = -v;
        (
            lerp(255.0, 59.0, t),
            lerp(255.0, 76.0, t),
            lerp(255.0, 192.0, t),
        )
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders a square matrix as an SVG heatmap on a fixed diverging scale
/// mapping [-1, 1] to blue-white-red. Intended for correlation-like inputs;
/// values outside the range are clamped.
pub fn write_svg_heatmap(
    path: &Path,
    values: &ArrayView2<f64>,
    labels: &[String],
    title: &str,
) -> Result<()> {
    let q = values.nrows();
    if values.ncols() != q || labels.len() != q {
        return Err(Error::DimensionMismatch(
            "heatmap needs a square matrix and one label per row".into(),
        ));
    }
    const CELL: usize = 24;
    const MARGIN: usize = 80;
    const TOP: usize = 60;
    let width = MARGIN + q * CELL + 20;
    let height = TOP + q * CELL + 20;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <title>{}</title>\n  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n",
        xml_escape(title)
    ));
    svg.push_str(&format!(
        "  <text x=\"{MARGIN}\" y=\"20\" font-family=\"monospace\" font-size=\"13\">{}</text>\n",
        xml_escape(title)
    ));
    svg.push_str(
        "  <text x=\"10\" y=\"38\" font-family=\"monospace\" font-size=\"10\">\
         scale: blue = -1, white = 0, red = +1</text>\n",
    );
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + i * CELL + CELL / 2 + 4;
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{y}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN - 6,
            xml_escape(label)
        ));
        let x = MARGIN + i * CELL + CELL / 2;
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"start\" transform=\"rotate(-60 {x} {})\">{}</text>\n",
            TOP - 6,
            TOP - 6,
            xml_escape(label)
        ));
    }
    for i in 0..q {
        for j in 0..q {
            let (r, g, b) = heat_color(values[[i, j]]);
            let x = MARGIN + j * CELL;
            let y = TOP + i * CELL;
            svg.push_str(&format!(
                "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({r},{g},{b})\" stroke=\"#ccc\" stroke-width=\"0.5\">\
                 <title>{}, {}: {}</title></rect>\n",
                xml_escape(&labels[i]),
                xml_escape(&labels[j]),
                format_float(values[[i, j]])
            ));
        }
    }
    svg.push_str("</svg>\n");
    write_atomic(path, svg.as_bytes())
}

/// Conventions every artifact of a run is interpreted under.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    /// The precision penalty multiplies the l1 norm over ordered off-diagonal
    /// pairs (each unordered pair is charged twice).
    pub lambda1_penalty: &'static str,
    /// The coefficient penalty enters the objective as 2 * lambda2 * |B|.
    pub lambda2_factor: &'static str,
    /// Scale on which responses were modeled and MSEs computed.
    pub evaluation_scale: Scale,
    pub float_format: &'static str,
}

/// Structured sidecar describing one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub conventions: Conventions,
    pub artifacts: Vec<String>,
}

/// Writes `metadata.json` into the output directory and returns its path.
pub fn write_metadata(command: &str, config: &RunConfig, artifacts: &[String]) -> Result<PathBuf> {
    let meta = RunMetadata {
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config: config.clone(),
        conventions: Conventions {
            lambda1_penalty: "l1 norm over ordered off-diagonal precision entries",
            lambda2_factor: "objective charges 2 * lambda2[j,l] * |B[j,l]|",
            evaluation_scale: config.scale,
            float_format: "shortest round-trip decimal",
        },
        artifacts: artifacts.to_vec(),
    };
    let json = serde_json::to_vec_pretty(&meta)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize run metadata: {e}")))?;
    let path = Path::new(&config.output_dir).join("metadata.json");
    write_atomic(&path, &json)?;
    Ok(path)
}

/// The one-line `#` comment stamped at the top of every CSV artifact.
pub fn artifact_comment(command: &str, config: &RunConfig) -> String {
    format!(
        "# smrm v{} | command: {command} | scale: {} | seeds: split={} cv={} synth={} | \
         penalties: lambda1 per ordered off-diagonal pair, coefficient term 2*lambda2*|B|",
        env!("CARGO_PKG_VERSION"),
        match config.scale {
            Scale::Raw => "raw",
            Scale::Log => "log",
        },
        config.split_seed,
        config.cv_seed,
        config.synth_seed,
    )
}
