use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{DenseTensor, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Multinomial logistic regression: `softmax(W x + b)`.
    Logistic,
    /// One hidden tanh layer: `softmax(W2 tanh(W1 x + b1) + b2)`.
    Mlp { hidden_dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Logistic,
            input_dim,
            num_classes,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Mlp { hidden_dim },
            input_dim,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be >= 1"));
        }
        if let ModelKind::Mlp { hidden_dim: 0 } = self.kind {
            return Err(Error::invalid("hidden_dim must be >= 1"));
        }
        Ok(())
    }

    /// `(name, shape)` of every parameter tensor, in order.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (d, k) = (self.input_dim, self.num_classes);
        match self.kind {
            ModelKind::Logistic => vec![("weight", vec![k, d]), ("bias", vec![k])],
            ModelKind::Mlp { hidden_dim: h } => {
                vec![("w1", vec![h, d]), ("b1", vec![h]), ("w2", vec![k, h]), ("b2", vec![k])]
            }
        }
    }
}

/// One labeled example borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub y: usize,
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_params<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<ParamSet> {
    spec.validate()?;
    let entries = spec
        .layout()
        .into_iter()
        .map(|(name, shape)| {
            let tensor = if shape.len() == 2 {
                let bound = 1.0 / (shape[1] as f64).sqrt();
                let n = shape[0] * shape[1];
                let values = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
                DenseTensor::from_parts_unchecked(shape, values)
            } else {
                DenseTensor::zeros(shape)
            };
            (name.to_string(), tensor)
        })
        .collect();
    ParamSet::new(entries)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

// out = W x + b, W row-major [rows, cols]
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

struct Layers<'p> {
    tensors: Vec<&'p [f64]>,
}

fn layers<'p>(spec: &ModelSpec, params: &'p ParamSet) -> Result<Layers<'p>> {
    let layout = spec.layout();
    let entries = params.entries();
    let ok = entries.len() == layout.len()
        && entries
            .iter()
            .zip(&layout)
            .all(|((n, t), (ln, ls))| n == ln && t.shape() == ls.as_slice());
    if !ok {
        return Err(Error::ShapeMismatch(format!(
            "parameters do not match model layout {layout:?}"
        )));
    }
    Ok(Layers {
        tensors: entries.iter().map(|(_, t)| t.values()).collect(),
    })
}

fn check_sample(spec: &ModelSpec, s: &Sample<'_>) -> Result<()> {
    if s.y >= spec.num_classes {
        return Err(Error::invalid(format!(
            "label {} out of range [0, {})",
            s.y, spec.num_classes
        )));
    }
    if s.x.len() != spec.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "sample has {} features, model expects {}",
            s.x.len(),
            spec.input_dim
        )));
    }
    Ok(())
}

/// Class logits for one input.
fn logits(spec: &ModelSpec, l: &Layers<'_>, x: &[f64], hidden: &mut Vec<f64>) -> Vec<f64> {
    let mut z = vec![0.0; spec.num_classes];
    match spec.kind {
        ModelKind::Logistic => affine(l.tensors[0], l.tensors[1], x, &mut z),
        ModelKind::Mlp { hidden_dim } => {
            hidden.resize(hidden_dim, 0.0);
            affine(l.tensors[0], l.tensors[1], x, hidden);
            hidden.iter_mut().for_each(|h| *h = h.tanh());
            affine(l.tensors[2], l.tensors[3], hidden, &mut z);
        }
    }
    z
}

/// Predicted class (argmax, ties to the lowest index) for each input.
pub fn predict<'a>(
    spec: &ModelSpec,
    params: &ParamSet,
    inputs: impl IntoIterator<Item = &'a [f64]>,
) -> Result<Vec<usize>> {
    let l = layers(spec, params)?;
    let mut hidden = Vec::new();
    inputs
        .into_iter()
        .map(|x| {
            if x.len() != spec.input_dim {
                return Err(Error::ShapeMismatch(format!(
                    "input has {} features, model expects {}",
                    x.len(),
                    spec.input_dim
                )));
            }
            let z = logits(spec, &l, x, &mut hidden);
            let mut best = 0;
            for (k, &v) in z.iter().enumerate().skip(1) {
                if v > z[best] {
                    best = k;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Mean cross-entropy over `batch` and its exact gradient.
pub fn loss_and_grad(spec: &ModelSpec, params: &ParamSet, batch: &[Sample<'_>]) -> Result<(f64, ParamSet)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let l = layers(spec, params)?;
    for s in batch {
        check_sample(spec, s)?;
    }
    let inv_n = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    let mut hidden = Vec::new();

    {
        let mut g: Vec<&mut [f64]> = grad.entries_mut().iter_mut().map(|(_, t)| t.values_mut()).collect();

        for s in batch {
            let z = logits(spec, &l, s.x, &mut hidden);
            let p = softmax(&z);
            loss -= p[s.y].max(f64::MIN_POSITIVE).ln();
            let dz: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(k, &pk)| (pk - if k == s.y { 1.0 } else { 0.0 }) * inv_n)
                .collect();
            match spec.kind {
                ModelKind::Logistic => {
                    outer_acc(g[0], &dz, s.x);
                    add_acc(g[1], &dz);
                }
                ModelKind::Mlp { hidden_dim } => {
                    let w2 = l.tensors[2];
                    outer_acc(g[2], &dz, &hidden);
                    add_acc(g[3], &dz);
                    let da: Vec<f64> = (0..hidden_dim)
                        .map(|j| {
                            let back: f64 = dz.iter().enumerate().map(|(k, d)| d * w2[k * hidden_dim + j]).sum();
                            back * (1.0 - hidden[j] * hidden[j])
                        })
                        .collect();
                    outer_acc(g[0], &da, s.x);
                    add_acc(g[1], &da);
                }
            }
        }
    }
    Ok((loss * inv_n, grad))
}

fn outer_acc(g: &mut [f64], rows: &[f64], cols: &[f64]) {
    let c = cols.len();
    for (r, &a) in rows.iter().enumerate() {
        for (gv, &b) in g[r * c..(r + 1) * c].iter_mut().zip(cols) {
            *gv += a * b;
        }
    }
}

fn add_acc(g: &mut [f64], v: &[f64]) {
    g.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}
