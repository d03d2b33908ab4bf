use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Adds i.i.d. `N(0, sigma^2)` noise to every entry, deterministically for a
/// given seed. `sigma = 0` returns the data unchanged.
pub fn add_noise(ds: &LabeledDataset, sigma: f64, seed: u64) -> Result<LabeledDataset> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidConfig(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(ds.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ds.clone().map_data(|mut m| {
        for v in m.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        m
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    fn zeros(n: usize) -> LabeledDataset {
        LabeledDataset::from_raw_labels(Matrix::zeros(1, n), &vec![0; n], vec![1]).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let ds = zeros(10);
        assert_eq!(add_noise(&ds, 0.0, 1).unwrap(), ds);
        assert!(add_noise(&ds, -1.0, 1).is_err());
    }

    #[test]
    fn seeded_reproducibility() {
        let ds = zeros(100);
        assert_eq!(add_noise(&ds, 2.0, 9).unwrap(), add_noise(&ds, 2.0, 9).unwrap());
        assert_ne!(add_noise(&ds, 2.0, 9).unwrap(), add_noise(&ds, 2.0, 10).unwrap());
    }

    #[test]
    fn sample_variance_matches_sigma_sq() {
        let n = 100_000;
        let sigma = 10.0;
        let noisy = add_noise(&zeros(n), sigma, 2024).unwrap();
        let xs = noisy.data().as_slice();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "variance {var}");
    }
}
