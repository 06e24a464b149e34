//! Dataset ingestion, normalization, encoding, and fold splitting.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A classification dataset: an N x D feature matrix plus dense class labels.
#[derive(Clone, Debug)]
pub struct Dataset<F> {
    pub features: Vec<Vec<F>>,
    /// Class index per instance, in `0..C-1`.
    pub labels: Vec<usize>,
    /// Label names in first-appearance order; position = class index.
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl<F: Real> Dataset<F> {
    pub fn from_parts(
        features: Vec<Vec<F>>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.len();
        if labels.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} feature rows vs {} labels",
                labels.len()
            )));
        }
        let d = feature_names.len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite feature value at row {i}, column {}",
                    feature_names[bad]
                )));
            }
        }
        let c = label_names.len();
        let mut seen = vec![false; c];
        for (i, &l) in labels.iter().enumerate() {
            if l >= c {
                return Err(Error::InvalidArgument(format!(
                    "label index {l} at row {i} is out of range for {c} classes"
                )));
            }
            seen[l] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidArgument(
                "every class must appear at least once".into(),
            ));
        }
        Ok(Dataset {
            features,
            labels,
            label_names,
            feature_names,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.features.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> (Vec<Vec<F>>, Vec<usize>) {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (features, labels)
    }
}

/// Loads a CSV with a header row. All columns except `label_column` become
/// features; labels are mapped to dense indices in first-appearance order.
pub fn load_csv<F: Real>(path: &str, label_column: &str) -> Result<Dataset<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, "file", e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, "header", e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(Error::parse(path, "header", "empty file"));
    }
    let mut label_idx = None;
    let mut feature_names = Vec::new();
    let mut feature_cols = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if name == label_column {
            if label_idx.is_some() {
                return Err(Error::parse(
                    path,
                    "header",
                    format!("duplicate label column '{label_column}'"),
                ));
            }
            label_idx = Some(i);
        } else {
            if feature_names.iter().any(|n: &String| n == name) {
                return Err(Error::parse(
                    path,
                    "header",
                    format!("duplicate feature column '{name}'"),
                ));
            }
            feature_names.push(name.to_string());
            feature_cols.push(i);
        }
    }
    let Some(label_idx) = label_idx else {
        return Err(Error::parse(
            path,
            "header",
            format!("missing label column '{label_column}'"),
        ));
    };
    if feature_cols.is_empty() {
        return Err(Error::parse(path, "header", "no feature columns"));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let row = row_no + 1;
        let record = record.map_err(|e| Error::parse(path, format!("row {row}"), e.to_string()))?;
        let mut values = Vec::with_capacity(feature_cols.len());
        for (&col, name) in feature_cols.iter().zip(&feature_names) {
            let cell = record.get(col).ok_or_else(|| {
                Error::parse(path, format!("row {row}, column {name}"), "missing cell")
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(
                    path,
                    format!("row {row}, column {name}"),
                    format!("non-numeric cell '{cell}'"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    format!("row {row}, column {name}"),
                    format!("non-finite cell '{cell}'"),
                ));
            }
            values.push(F::from_f64(v).ok_or_else(|| {
                Error::parse(path, format!("row {row}, column {name}"), "value out of range")
            })?);
        }
        let label = record
            .get(label_idx)
            .ok_or_else(|| Error::parse(path, format!("row {row}"), "missing label cell"))?
            .trim()
            .to_string();
        let class = match label_names.iter().position(|n| *n == label) {
            Some(c) => c,
            None => {
                label_names.push(label);
                label_names.len() - 1
            }
        };
        features.push(values);
        labels.push(class);
    }
    if features.is_empty() {
        return Err(Error::parse(path, "file", "no data rows"));
    }
    Dataset::from_parts(features, labels, label_names, feature_names)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    MinMax,
    ZScore,
}

/// Per-feature normalization statistics, always computed on the training
/// split only. Test values may fall outside the training range; they are
/// intentionally not clipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormalizationStats<F> {
    MinMax { min: Vec<F>, max: Vec<F> },
    ZScore { mean: Vec<F>, std: Vec<F> },
}

impl<F: Real> NormalizationStats<F> {
    pub fn fit(train_features: &[Vec<F>], mode: NormalizationMode) -> Result<Self> {
        let Some(first) = train_features.first() else {
            return Err(Error::InvalidArgument(
                "cannot fit normalization on an empty training set".into(),
            ));
        };
        let d = first.len();
        match mode {
            NormalizationMode::MinMax => {
                let mut min = first.clone();
                let mut max = first.clone();
                for row in train_features {
                    for j in 0..d {
                        if row[j] < min[j] {
                            min[j] = row[j];
                        }
                        if row[j] > max[j] {
                            max[j] = row[j];
                        }
                    }
                }
                Ok(NormalizationStats::MinMax { min, max })
            }
            NormalizationMode::ZScore => {
                let n = F::from(train_features.len()).unwrap();
                let mut mean = vec![F::zero(); d];
                for row in train_features {
                    for j in 0..d {
                        mean[j] = mean[j] + row[j];
                    }
                }
                for m in mean.iter_mut() {
                    *m = *m / n;
                }
                let mut std = vec![F::zero(); d];
                for row in train_features {
                    for j in 0..d {
                        let e = row[j] - mean[j];
                        std[j] = std[j] + e * e;
                    }
                }
                for s in std.iter_mut() {
                    *s = (*s / n).sqrt();
                }
                Ok(NormalizationStats::ZScore { mean, std })
            }
        }
    }

    pub fn num_features(&self) -> usize {
        match self {
            NormalizationStats::MinMax { min, .. } => min.len(),
            NormalizationStats::ZScore { mean, .. } => mean.len(),
        }
    }

    /// Normalizes one row. Constant features (zero range or zero spread) map
    /// to 0.
    pub fn apply_row(&self, row: &[F]) -> Vec<F> {
        match self {
            NormalizationStats::MinMax { min, max } => row
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let span = max[j] - min[j];
                    if span == F::zero() {
                        F::zero()
                    } else {
                        (v - min[j]) / span
                    }
                })
                .collect(),
            NormalizationStats::ZScore { mean, std } => row
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    if std[j] == F::zero() {
                        F::zero()
                    } else {
                        (v - mean[j]) / std[j]
                    }
                })
                .collect(),
        }
    }

    pub fn apply(&self, features: &[Vec<F>]) -> Vec<Vec<F>> {
        features.iter().map(|r| self.apply_row(r)).collect()
    }

    /// Stats restricted to a subset of the features, in the given order.
    pub fn select_features(&self, keep: &[usize]) -> NormalizationStats<F> {
        let pick = |v: &[F]| keep.iter().map(|&j| v[j]).collect::<Vec<F>>();
        match self {
            NormalizationStats::MinMax { min, max } => NormalizationStats::MinMax {
                min: pick(min),
                max: pick(max),
            },
            NormalizationStats::ZScore { mean, std } => NormalizationStats::ZScore {
                mean: pick(mean),
                std: pick(std),
            },
        }
    }
}

/// Min-max normalization of a feature matrix with training-split stats:
/// `x' = (x - min) / (max - min)`, no clipping, constant features map to 0.
pub fn minmax_normalize<F: Real>(
    features: &[Vec<F>],
    stats: &NormalizationStats<F>,
) -> Result<Vec<Vec<F>>> {
    match stats {
        NormalizationStats::MinMax { .. } => Ok(stats.apply(features)),
        NormalizationStats::ZScore { .. } => Err(Error::InvalidArgument(
            "min-max normalization called with z-score statistics".into(),
        )),
    }
}

/// One-hot target table: row n has a single 1 at column `labels[n]`.
pub fn one_hot<F: Real>(labels: &[usize], classes: usize) -> Result<Vec<Vec<F>>> {
    labels
        .iter()
        .map(|&l| {
            if l >= classes {
                return Err(Error::InvalidArgument(format!(
                    "label {l} out of range for {classes} classes"
                )));
            }
            let mut row = vec![F::zero(); classes];
            row[l] = F::one();
            Ok(row)
        })
        .collect()
}

/// Stratified k-fold assignment: a seeded shuffle within each class followed
/// by a round-robin deal that continues across classes, so per-class fold
/// sizes differ by at most one and remainders spread over the folds.
pub fn kfold_split<F: Real>(
    dataset: &Dataset<F>,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let n = dataset.num_instances();
    if folds == 0 || n < folds {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} instances into {folds} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut assignment = vec![Vec::new(); folds];
    let mut next = 0usize;
    for class_indices in &mut by_class {
        class_indices.shuffle(&mut rng);
        for &i in class_indices.iter() {
            assignment[next % folds].push(i);
            next += 1;
        }
    }
    Ok(assignment)
}

/// Synthetic high-dimensional classification data with bimodal features.
///
/// Every feature takes values near 0.1 or 0.9 (half-width 0.05), so each
/// feature's variance stays high enough that a product of thousands of
/// Gaussian memberships underflows for every possible center placement.
/// The first `informative` features encode the class; the rest pick their
/// mode at random.
pub fn synthetic_classification<F: Real>(
    instances: usize,
    features: usize,
    informative: usize,
    classes: usize,
    seed: u64,
) -> Result<Dataset<F>> {
    if classes < 2 || instances < classes || informative > features || features == 0 {
        return Err(Error::InvalidArgument(format!(
            "bad synthetic shape: n={instances}, d={features}, informative={informative}, c={classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(instances);
    let mut labels = Vec::with_capacity(instances);
    let jitter = |rng: &mut ChaCha8Rng| (rand::Rng::random::<f64>(rng) - 0.5) * 0.1;
    for i in 0..instances {
        let class = i % classes;
        let mut row = Vec::with_capacity(features);
        for j in 0..features {
            let high = if j < informative {
                (class + j) % 2 == 0
            } else {
                rand::Rng::random::<bool>(&mut rng)
            };
            let center = if high { 0.9 } else { 0.1 };
            row.push(F::from_f64(center + jitter(&mut rng)).unwrap());
        }
        data.push(row);
        labels.push(class);
    }
    let label_names = (0..classes).map(|c| format!("class_{c}")).collect();
    let feature_names = (0..features).map(|j| format!("f{j}")).collect();
    Dataset::from_parts(data, labels, label_names, feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn labels_map_in_first_appearance_order() {
        let f = write_temp("x,class\n1.0,a\n2.0,b\n3.0,a\n");
        let ds: Dataset<f64> = load_csv(f.path().to_str().unwrap(), "class").unwrap();
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.label_names, vec!["a", "b"]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn nan_cell_is_rejected_with_row_location() {
        let f = write_temp("x,class\n1.0,a\nNaN,b\n");
        let err = load_csv::<f64>(f.path().to_str().unwrap(), "class").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = write_temp("x,y,class\n1.0,2.0,a\n1.0,oops,b\n");
        let err = load_csv::<f64>(f.path().to_str().unwrap(), "class").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("column y"), "{msg}");
    }

    #[test]
    fn missing_label_column_is_reported() {
        let f = write_temp("x,y\n1.0,2.0\n");
        let err = load_csv::<f64>(f.path().to_str().unwrap(), "class").unwrap_err();
        assert!(err.to_string().contains("missing label column"), "{err}");
    }

    #[test]
    fn empty_file_is_rejected() {
        let f = write_temp("");
        assert!(load_csv::<f64>(f.path().to_str().unwrap(), "class").is_err());
        let f = write_temp("x,class\n");
        assert!(load_csv::<f64>(f.path().to_str().unwrap(), "class").is_err());
    }

    #[test]
    fn bundled_iris_has_the_expected_shape() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/iris.csv");
        let ds: Dataset<f64> = load_csv(path, "class").unwrap();
        assert_eq!(ds.num_instances(), 150);
        assert_eq!(ds.num_features(), 4);
        assert_eq!(ds.num_classes(), 3);
    }

    #[test]
    fn minmax_examples() {
        let train = vec![vec![2.0f64, 5.0], vec![4.0, 5.0]];
        let stats = NormalizationStats::fit(&train, NormalizationMode::MinMax).unwrap();
        let out = minmax_normalize(&[vec![3.0, 5.0]], &stats).unwrap();
        assert_eq!(out[0][0], 0.5);
        // constant feature maps to 0
        assert_eq!(out[0][1], 0.0);
        // out-of-range values pass through without clipping
        let out = minmax_normalize(&[vec![5.0, 5.0]], &stats).unwrap();
        assert_eq!(out[0][0], 1.5);
    }

    #[test]
    fn zscore_centers_the_training_split() {
        let train = vec![vec![1.0f64], vec![3.0]];
        let stats = NormalizationStats::fit(&train, NormalizationMode::ZScore).unwrap();
        let out = stats.apply(&train);
        assert_eq!(out[0][0], -1.0);
        assert_eq!(out[1][0], 1.0);
    }

    #[test]
    fn one_hot_examples_and_round_trip() {
        let t = one_hot::<f64>(&[2], 3).unwrap();
        assert_eq!(t[0], vec![0.0, 0.0, 1.0]);
        let t = one_hot::<f64>(&[0, 1], 2).unwrap();
        assert_eq!(t, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let labels = vec![0usize, 2, 1, 1, 2, 0];
        let t = one_hot::<f64>(&labels, 3).unwrap();
        for (row, &l) in t.iter().zip(&labels) {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert_eq!(crate::model::argmax_class(row), l);
        }
        assert!(one_hot::<f64>(&[3], 3).is_err());
    }

    fn balanced_dataset(n: usize, classes: usize) -> Dataset<f64> {
        let features: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        Dataset::from_parts(
            features,
            labels,
            (0..classes).map(|c| format!("c{c}")).collect(),
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn stratified_folds_balance_each_class() {
        let ds = balanced_dataset(150, 3);
        let folds = kfold_split(&ds, 10, 42).unwrap();
        for fold in &folds {
            assert_eq!(fold.len(), 15);
            for class in 0..3 {
                let count = fold.iter().filter(|&&i| ds.labels[i] == class).count();
                assert_eq!(count, 5);
            }
        }
    }

    #[test]
    fn folds_partition_the_dataset() {
        let ds = balanced_dataset(53, 4);
        let folds = kfold_split(&ds, 7, 9).unwrap();
        let mut seen = vec![0usize; 53];
        for fold in &folds {
            for &i in fold {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        // per-class fold sizes differ by at most one
        for class in 0..4 {
            let sizes: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| ds.labels[i] == class).count())
                .collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn same_seed_gives_identical_folds() {
        let ds = balanced_dataset(40, 2);
        assert_eq!(kfold_split(&ds, 5, 7).unwrap(), kfold_split(&ds, 5, 7).unwrap());
        assert_ne!(kfold_split(&ds, 5, 7).unwrap(), kfold_split(&ds, 5, 8).unwrap());
    }

    #[test]
    fn leave_one_out_is_allowed() {
        let ds = balanced_dataset(12, 2);
        let folds = kfold_split(&ds, 12, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        assert!(kfold_split(&ds, 13, 1).is_err());
    }

    #[test]
    fn synthetic_data_is_bimodal_and_balanced() {
        let ds: Dataset<f64> = synthetic_classification(60, 200, 20, 2, 5).unwrap();
        assert_eq!(ds.num_instances(), 60);
        assert_eq!(ds.num_features(), 200);
        assert_eq!(ds.num_classes(), 2);
        for row in &ds.features {
            for &v in row {
                assert!((0.05..=0.95).contains(&v));
                assert!(v <= 0.15 || v >= 0.85, "value {v} not bimodal");
            }
        }
        // informative features separate the classes
        for j in 0..20 {
            for (i, row) in ds.features.iter().enumerate() {
                let expect_high = (ds.labels[i] + j) % 2 == 0;
                assert_eq!(row[j] > 0.5, expect_high);
            }
        }
        let _ = ds;
    }
}
