//! Dataset ingestion, splitting, label noise and standardization.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// A regression table: `features` is `n × n_vars`, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub target: Vec<f64>,
    pub names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        target: Vec<f64>,
        names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: target.len(),
                found: features.nrows(),
            });
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        if names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: names.len(),
            });
        }
        if features.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            target,
            names,
            target_name: target_name.into(),
        })
    }

    pub fn n_instances(&self) -> usize {
        self.target.len()
    }

    pub fn n_vars(&self) -> usize {
        self.features.ncols()
    }

    /// Contiguous view of feature column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        column(&self.features, j)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select_rows(indices);
        let target = indices.iter().map(|&i| self.target[i]).collect();
        Dataset {
            features,
            target,
            names: self.names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Contiguous view of column `j` of a column-major matrix.
pub fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

/// Reads a comma-separated table with a header row. The target is the named
/// column, or the last one when `target_column` is `None`.
pub fn load_csv(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| ingest(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.len() < 2 || headers.iter().all(String::is_empty) {
        return Err(ingest("expected a header with at least two columns".into()));
    }
    let target_idx = match target_column {
        None => headers.len() - 1,
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest(format!("no column named `{name}`")))?,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // Row numbers are 1-based data rows (the header is not counted).
        let row = r + 1;
        let record = record.map_err(|e| ingest(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(ingest(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(headers.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::NonNumeric {
                row,
                column: headers[c].clone(),
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row,
                    column: headers[c].clone(),
                    value: field.to_string(),
                });
            }
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(ingest("no data rows".into()));
    }

    let n = rows.len();
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != target_idx).collect();
    let features = DMatrix::from_fn(n, feature_cols.len(), |i, j| rows[i][feature_cols[j]]);
    let target = rows.iter().map(|r| r[target_idx]).collect();
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(features, target, names, headers[target_idx].clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// 100 training rows, the rest for testing.
    Fixed100,
    Ratio5050,
    Ratio8020,
}

impl std::str::FromStr for SplitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-100" => Ok(SplitRule::Fixed100),
            "ratio-50-50" => Ok(SplitRule::Ratio5050),
            "ratio-80-20" => Ok(SplitRule::Ratio8020),
            other => Err(Error::InvalidArgument(format!("unknown split rule `{other}`"))),
        }
    }
}

impl std::fmt::Display for SplitRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitRule::Fixed100 => "fixed-100",
            SplitRule::Ratio5050 => "ratio-50-50",
            SplitRule::Ratio8020 => "ratio-80-20",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub rule: SplitRule,
    pub seed: u64,
    pub label_noise_sigma: f64,
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Set when the fixed-100 rule could not be honoured and 50:50 was used.
    pub fell_back: bool,
}

/// Random train/test partition. Label noise in `spec` is not applied here; see
/// [`inject_label_noise`].
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let n = d.n_instances();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} rows")));
    }
    let mut fell_back = false;
    let n_train = match spec.rule {
        SplitRule::Fixed100 if n >= 200 => 100,
        SplitRule::Fixed100 => {
            fell_back = true;
            ratio_size(n, 0.5)
        }
        SplitRule::Ratio5050 => ratio_size(n, 0.5),
        SplitRule::Ratio8020 => ratio_size(n, 0.8),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::derived(spec.seed, &[0x5311]));
    let train_indices = order[..n_train].to_vec();
    let test_indices = order[n_train..].to_vec();
    Ok(Split {
        train: d.select(&train_indices),
        test: d.select(&test_indices),
        train_indices,
        test_indices,
        fell_back,
    })
}

fn ratio_size(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio).round() as usize).clamp(1, n - 1)
}

/// Adds `N(0, sigma²)` noise to every target value.
pub fn inject_label_noise(train: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "label noise sigma must be a nonnegative number, got {sigma}"
        )));
    }
    let mut out = train.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut rng = rng::derived(seed, &[0x10e5]);
    for y in &mut out.target {
        *y += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Per-column z-score statistics. A constant column records stddev 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

/// Columns with a population stddev at or below this are treated as constant.
const CONSTANT_EPS: f64 = 1e-12;

impl StandardizationStats {
    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            stddevs: vec![1.0; p],
        }
    }

    /// Fits on the columns of `m` (population stddev).
    pub fn fit(m: &DMatrix<f64>) -> Self {
        let (means, stddevs) = (0..m.ncols())
            .map(|j| mean_std(column(m, j)))
            .unzip();
        Self { means, stddevs }
    }

    pub fn fit_vector(v: &[f64]) -> Self {
        let (mean, std) = mean_std(v);
        Self {
            means: vec![mean],
            stddevs: vec![std],
        }
    }

    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - self.means[j]) / self.stddevs[j]);
        }
        out
    }

    pub fn invert(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.apply(|v| *v = *v * self.stddevs[j] + self.means[j]);
        }
        out
    }

    /// Scalar versions for the single column of a target scaler.
    pub fn apply_scalar(&self, v: f64) -> f64 {
        (v - self.means[0]) / self.stddevs[0]
    }

    pub fn invert_scalar(&self, v: f64) -> f64 {
        v * self.stddevs[0] + self.means[0]
    }
}

/// Mean and population stddev; the stddev of a constant sequence is 1.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let std = if std.is_finite() && std > CONSTANT_EPS * mean.abs().max(1.0) {
        std
    } else {
        1.0
    };
    (mean, std)
}

/// Z-scores the feature columns of both sets with training statistics.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, StandardizationStats)> {
    if train.n_instances() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if test.n_vars() != train.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: train.n_vars(),
            found: test.n_vars(),
        });
    }
    let stats = StandardizationStats::fit(&train.features);
    let mut tr = train.clone();
    let mut te = test.clone();
    tr.features = stats.apply(&train.features);
    te.features = stats.apply(&test.features);
    Ok((tr, te, stats))
}

/// Z-scores the target of both sets with training statistics.
pub fn standardize_target(train: &Dataset, test: &Dataset) -> (Dataset, Dataset, StandardizationStats) {
    let stats = StandardizationStats::fit_vector(&train.target);
    let mut tr = train.clone();
    let mut te = test.clone();
    tr.target.iter_mut().for_each(|y| *y = stats.apply_scalar(*y));
    te.target.iter_mut().for_each(|y| *y = stats.apply_scalar(*y));
    (tr, te, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn synthetic(n: usize) -> Dataset {
        let features = DMatrix::from_fn(n, 2, |i, j| (i * 3 + j) as f64);
        let target = (0..n).map(|i| i as f64 * 0.5).collect();
        Dataset::new(features, target, vec!["a".into(), "b".into()], "y").unwrap()
    }

    #[test]
    fn loads_last_column_as_target() {
        let f = write("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(f.path(), None).unwrap();
        assert_eq!(d.n_instances(), 3);
        assert_eq!(d.n_vars(), 2);
        assert_eq!(d.target, vec![3.0, 6.0, 9.0]);
        assert_eq!(d.column(1), &[2.0, 5.0, 8.0]);
        assert_eq!(d.names, vec!["a", "b"]);
    }

    #[test]
    fn loads_named_target() {
        let f = write("a,y,b\n1,2,3\n");
        let d = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!(d.n_instances(), 1);
        assert_eq!(d.target, vec![2.0]);
        assert_eq!(d.names, vec!["a", "b"]);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let f = write("a,b,y\n1,2,3\n4,oops,6\n");
        match load_csv(f.path(), None) {
            Err(Error::NonNumeric { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write("");
        assert!(load_csv(f.path(), None).is_err());
        let f = write("a,y\n");
        assert!(load_csv(f.path(), None).is_err());
    }

    #[test]
    fn fixed_split_sizes() {
        let d = synthetic(442);
        let spec = SplitSpec { rule: SplitRule::Fixed100, seed: 1, label_noise_sigma: 0.0 };
        let s = split(&d, &spec).unwrap();
        assert_eq!((s.train.n_instances(), s.test.n_instances()), (100, 342));
        assert!(!s.fell_back);
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..442).collect::<Vec<_>>());
    }

    #[test]
    fn fixed_split_falls_back_on_small_data() {
        let d = synthetic(150);
        let spec = SplitSpec { rule: SplitRule::Fixed100, seed: 1, label_noise_sigma: 0.0 };
        let s = split(&d, &spec).unwrap();
        assert_eq!((s.train.n_instances(), s.test.n_instances()), (75, 75));
        assert!(s.fell_back);
    }

    #[test]
    fn ratio_split_sizes() {
        let d = synthetic(101);
        let spec = SplitSpec { rule: SplitRule::Ratio8020, seed: 3, label_noise_sigma: 0.0 };
        let s = split(&d, &spec).unwrap();
        assert!((s.train.n_instances() as f64 - 80.8).abs() <= 1.0);
    }

    #[test]
    fn split_is_deterministic() {
        let d = synthetic(300);
        let spec = SplitSpec { rule: SplitRule::Fixed100, seed: 9, label_noise_sigma: 0.0 };
        let a = split(&d, &spec).unwrap();
        let b = split(&d, &spec).unwrap();
        assert_eq!(a.train_indices, b.train_indices);
        assert_eq!(a.test_indices, b.test_indices);
        let c = split(&d, &SplitSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.train_indices, c.train_indices);
    }

    #[test]
    fn zero_label_noise_is_identity() {
        let d = synthetic(20);
        assert_eq!(inject_label_noise(&d, 0.0, 4).unwrap(), d);
    }

    #[test]
    fn negative_label_noise_rejected() {
        assert!(inject_label_noise(&synthetic(5), -1.0, 0).is_err());
    }

    #[test]
    fn label_noise_moments() {
        let n = 100_000;
        let d = Dataset::new(DMatrix::zeros(n, 1), vec![2.0; n], vec!["x".into()], "y").unwrap();
        let noisy = inject_label_noise(&d, 1.0, 11).unwrap();
        let diffs: Vec<f64> = noisy.target.iter().map(|y| y - 2.0).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 1.0).abs() < 0.01, "stddev {}", var.sqrt());
        assert_eq!(noisy.features, d.features);
        let other = inject_label_noise(&d, 1.0, 12).unwrap();
        assert_ne!(other.target, noisy.target);
    }

    #[test]
    fn standardize_hand_values() {
        let train = Dataset::new(
            DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0]),
            vec![0.0; 3],
            vec!["a".into(), "c".into()],
            "y",
        )
        .unwrap();
        let test = Dataset::new(
            DMatrix::from_column_slice(1, 2, &[2.0, 7.0]),
            vec![0.0],
            vec!["a".into(), "c".into()],
            "y",
        )
        .unwrap();
        let (tr, te, stats) = standardize(&train, &test).unwrap();
        let z = 1.0 / (2.0f64 / 3.0).sqrt();
        for (got, want) in tr.column(0).iter().zip([-z, 0.0, z]) {
            assert!((got - want).abs() < 1e-4);
        }
        assert!((z - 1.2247).abs() < 1e-4);
        assert_eq!(tr.column(1), &[0.0, 0.0, 0.0]);
        assert_eq!(stats.stddevs[1], 1.0);
        assert_eq!(te.column(0), &[0.0]);
        assert_eq!(te.column(1), &[2.0]);
    }

    #[test]
    fn standardization_round_trips() {
        let d = synthetic(17);
        let stats = StandardizationStats::fit(&d.features);
        let back = stats.invert(&stats.apply(&d.features));
        for (a, b) in back.iter().zip(d.features.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let again = StandardizationStats::fit(&stats.apply(&d.features));
        for (m, s) in again.means.iter().zip(&again.stddevs) {
            assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10);
        }
    }
}
