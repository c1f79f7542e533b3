use rand::Rng;
use rand_distr::StandardNormal;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Class means on an integer lattice with unit spacing, centered at the origin.
///
/// With `m` the smallest base (at least 2) such that `m^input_dim >= K`, class
/// `k` sits at the base-`m` digits of `k` (least significant digit in
/// coordinate 0), each shifted by `-(m - 1) / 2`.
pub fn blob_means(num_classes: usize, input_dim: usize) -> Vec<Vec<f64>> {
    let mut base = 2usize;
    while base
        .checked_pow(input_dim.min(u32::MAX as usize) as u32)
        .is_some_and(|cells| cells < num_classes)
    {
        base += 1;
    }
    let shift = (base - 1) as f64 / 2.0;
    (0..num_classes)
        .map(|k| {
            let mut rest = k;
            (0..input_dim)
                .map(|_| {
                    let digit = rest % base;
                    rest /= base;
                    digit as f64 - shift
                })
                .collect()
        })
        .collect()
}

/// Isotropic Gaussian clusters around [`blob_means`], `n_per_class` per class,
/// stored class by class.
pub fn synthetic_blobs<R: Rng + ?Sized>(
    num_classes: usize,
    input_dim: usize,
    n_per_class: usize,
    spread: f64,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if num_classes < 2 {
        return Err(Error::invalid(format!("need K >= 2 classes, got {num_classes}")));
    }
    if input_dim == 0 {
        return Err(Error::invalid("input_dim must be >= 1"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!("spread must be finite and >= 0, got {spread}")));
    }
    let means = blob_means(num_classes, input_dim);
    let mut features = Vec::with_capacity(num_classes * n_per_class * input_dim);
    let mut labels = Vec::with_capacity(num_classes * n_per_class);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            for &m in mean {
                let z: f64 = rng.sample(StandardNormal);
                features.push(m + spread * z);
            }
            labels.push(k);
        }
    }
    LabeledDataset::new(features, labels, input_dim, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn means_are_distinct_lattice_points() {
        let m = blob_means(3, 2);
        assert_eq!(m, vec![vec![-0.5, -0.5], vec![0.5, -0.5], vec![-0.5, 0.5]]);
        let m = blob_means(10, 64);
        for i in 0..10 {
            for j in 0..i {
                assert_ne!(m[i], m[j]);
            }
        }
        let m = blob_means(5, 1);
        assert_eq!(m, vec![vec![-2.0], vec![-1.0], vec![0.0], vec![1.0], vec![2.0]]);
    }

    #[test]
    fn counts_and_zero_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = synthetic_blobs(3, 2, 50, 0.0, &mut rng).unwrap();
        assert_eq!(ds.len(), 150);
        assert_eq!(ds.label_histogram(), vec![50, 50, 50]);
        let means = blob_means(3, 2);
        for i in 0..ds.len() {
            assert_eq!(ds.row(i), means[ds.labels()[i]].as_slice());
        }
        assert!(synthetic_blobs(1, 2, 5, 0.1, &mut rng).is_err());
        assert!(synthetic_blobs(3, 2, 5, -0.1, &mut rng).is_err());
    }

    #[test]
    fn seeded() {
        let a = synthetic_blobs(4, 3, 10, 0.2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = synthetic_blobs(4, 3, 10, 0.2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }
}
