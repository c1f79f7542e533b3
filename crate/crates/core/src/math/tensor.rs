use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense tensor of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!("tensor shape {shape:?} has a zero dimension")));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite tensor value {bad}")));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    /// 1-D tensor.
    pub fn vector(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute element, 0 for an all-zero tensor.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self { shape, values }
    }
}

/// Ordered, uniquely named collection of tensors, one per layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<(String, DenseTensor)>,
}

impl ParamSet {
    pub fn new(entries: Vec<(String, DenseTensor)>) -> Result<Self> {
        for (i, (name, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::invalid(format!("duplicate parameter name {name:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, DenseTensor)] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [(String, DenseTensor)] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> Option<&DenseTensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_elements(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().flat_map(|(_, t)| t.values.iter().copied())
    }

    /// Largest absolute element over all tensors.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, (_, t)| m.max(t.max_abs()))
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| 0.0)
    }

    /// Same names and shapes in the same order.
    pub fn is_conformable(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, ta), (b, tb))| a == b && ta.shape == tb.shape)
    }

    pub fn check_conformable(&self, other: &ParamSet) -> Result<()> {
        if self.is_conformable(other) {
            return Ok(());
        }
        let describe = |p: &ParamSet| {
            p.entries
                .iter()
                .map(|(n, t)| format!("{n}{:?}", t.shape))
                .collect::<Vec<_>>()
                .join(", ")
        };
        Err(Error::ShapeMismatch(format!(
            "[{}] vs [{}]",
            describe(self),
            describe(other)
        )))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(n, t)| {
                let values = t.values.iter().map(|&v| f(v)).collect();
                (n.clone(), DenseTensor::from_parts_unchecked(t.shape.clone(), values))
            })
            .collect();
        Self { entries }
    }

    /// Elementwise `f(self, other)` over conformable sets.
    pub fn zip_with(&self, other: &ParamSet, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_conformable(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|((n, a), (_, b))| {
                let values = a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect();
                (n.clone(), DenseTensor::from_parts_unchecked(a.shape.clone(), values))
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn add(&self, other: &ParamSet) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamSet) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// `self += c * other`, in place.
    pub fn axpy_in_place(&mut self, c: f64, other: &ParamSet) -> Result<()> {
        self.check_conformable(other)?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.values.iter_mut().zip(&b.values) {
                *x += c * y;
            }
        }
        Ok(())
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &ParamSet) -> Result<f64> {
        self.check_conformable(other)?;
        Ok(self
            .iter_values()
            .zip(other.iter_values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn all_finite(&self) -> bool {
        self.iter_values().all(f64::is_finite)
    }
}
