//! Datasets, IDX ingestion and non-IID partitioning.

pub mod idx;
mod partition;
mod synthetic;

pub use idx::{load_idx, parse_idx, IdxError};
pub use partition::{dirichlet_partition, iid_partition, power_law_two_class_partition, Partition};
pub use synthetic::{blob_means, synthetic_blobs};

use crate::error::{Error, Result};
use crate::math::Sample;

/// Features (row-major `n x input_dim`) with class labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, input_dim: usize, num_classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim must be >= 1"));
        }
        if num_classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {num_classes}")));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values for {} labels of dim {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!("label {bad} out of range [0, {num_classes})")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Self {
            features,
            labels,
            input_dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample {
            x: self.row(i),
            y: self.labels[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.input_dim)
    }

    /// Class counts over the whole dataset.
    pub fn label_histogram(&self) -> Vec<u64> {
        label_histogram(&self.labels, self.num_classes, 0..self.len())
    }

    /// Class counts over `indices`.
    pub fn subset_histogram(&self, indices: &[usize]) -> Result<Vec<u64>> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "index {i} out of range for {} samples",
                self.len()
            )));
        }
        Ok(label_histogram(&self.labels, self.num_classes, indices.iter().copied()))
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "index {i} out of range for {} samples",
                self.len()
            )));
        }
        let features = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.input_dim, self.num_classes)
    }
}

/// Count of each class among `labels[i]` for `i` in `indices`.
pub fn label_histogram(labels: &[usize], num_classes: usize, indices: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut counts = vec![0u64; num_classes];
    for i in indices {
        counts[labels[i]] += 1;
    }
    counts
}
