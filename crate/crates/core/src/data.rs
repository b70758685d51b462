//! Labelled datasets, seeded train/validation/test splits and accuracy.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Labelled feature vectors stored row-major in one flat buffer.
///
/// Labels are dense class indices in `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn from_flat(
        features: Vec<f64>,
        labels: Vec<usize>,
        feature_dim: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature_dim must be positive".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not fill {} rows of width {feature_dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "row {row} has label {label}, outside 0..{num_classes}"
            )));
        }
        Ok(Self { features, labels, feature_dim, num_classes })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[(R, usize)], num_classes: usize) -> Result<Self> {
        let feature_dim = rows.first().map(|(x, _)| x.as_ref().len()).ok_or(Error::EmptyDataset)?;
        let mut features = Vec::with_capacity(rows.len() * feature_dim);
        let mut labels = Vec::with_capacity(rows.len());
        for (row, (x, y)) in rows.iter().enumerate() {
            let x = x.as_ref();
            if x.len() != feature_dim {
                return Err(Error::InvalidDataset(format!(
                    "row {row} has {} features, expected {feature_dim}",
                    x.len()
                )));
            }
            features.extend_from_slice(x);
            labels.push(*y);
        }
        Self::from_flat(features, labels, feature_dim, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], usize)> + '_ {
        self.features
            .chunks_exact(self.feature_dim)
            .zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order. Keeps the class count of `self`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidDataset(format!(
                    "subset index {i} out of range for {} rows",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::from_flat(features, labels, self.feature_dim, self.num_classes)
    }

    /// Per-class instance counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Fractions of a three-way split plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.6, val_fraction: 0.2, test_fraction: 0.2, seed: 42 }
    }
}

impl SplitSpec {
    const SUM_TOLERANCE: f64 = 1e-9;

    pub fn validate(&self) -> Result<()> {
        for f in [self.train_fraction, self.val_fraction, self.test_fraction] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::FractionRange(f));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::FractionSum(sum));
        }
        Ok(())
    }

    /// Part sizes for `n` rows: validation and test get `floor(n * f)`,
    /// training gets whatever is left.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let val = libm::floor(n as f64 * self.val_fraction) as usize;
        let test = libm::floor(n as f64 * self.test_fraction) as usize;
        let train = n.saturating_sub(val + test);
        for (name, size) in [("train", train), ("validation", val), ("test", test)] {
            if size == 0 {
                return Err(Error::EmptyPart(name));
            }
        }
        Ok((train, val, test))
    }
}

/// The three parts of a split together with the source row indices of each.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Shuffles row indices with `SplitMix64(spec.seed)` and cuts the permutation
/// into train, validation and test parts in that order. Not stratified.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Partition> {
    let (n_train, n_val, _) = spec.sizes(dataset.len())?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    SplitMix64::new(spec.seed).shuffle(&mut order);

    let test_indices = order.split_off(n_train + n_val);
    let val_indices = order.split_off(n_train);
    let train_indices = order;
    Ok(Partition {
        train: dataset.subset(&train_indices)?,
        val: dataset.subset(&val_indices)?,
        test: dataset.subset(&test_indices)?,
        train_indices,
        val_indices,
        test_indices,
    })
}

/// Fraction of positions where `predictions` and `labels` agree.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: labels.len() });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// One served prediction.
///
/// `model_index` is the zero-based position in the chain of the model that
/// produced `label`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub confidence: f64,
    pub model_index: usize,
}
