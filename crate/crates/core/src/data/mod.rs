//! Labeled sample collections and their on-disk formats.

mod csv;
mod idx;
mod noise;

pub use self::csv::{load_csv, save_csv};
pub use idx::{load_idx, load_idx_images, load_idx_labels, write_idx};
pub use noise::add_noise;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Vectorized samples as the columns of a `d x N` matrix, with dense labels
/// `0..C` and the tensor shape each column folds back into.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    data: Matrix,
    labels: Vec<usize>,
    label_names: Vec<i64>,
    dims: Vec<usize>,
}

impl LabeledDataset {
    /// `labels` must already be dense indices into `label_names`.
    pub fn new(data: Matrix, labels: Vec<usize>, label_names: Vec<i64>, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape(format!("bad tensor dims {dims:?}")));
        }
        if data.nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} give d = {d}, samples have length {}",
                data.nrows()
            )));
        }
        if labels.len() != data.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                data.ncols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(Error::InvalidConfig(format!(
                "label index {bad} out of range for {} classes",
                label_names.len()
            )));
        }
        Ok(Self {
            data,
            labels,
            label_names,
            dims,
        })
    }

    /// Builds dense labels from raw label values (sorted ascending).
    pub fn from_raw_labels(data: Matrix, raw: &[i64], dims: Vec<usize>) -> Result<Self> {
        let mut names: Vec<i64> = raw.to_vec();
        names.sort_unstable();
        names.dedup();
        let index: BTreeMap<i64, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let labels = raw.iter().map(|r| index[r]).collect();
        Self::new(data, labels, names, dims)
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[i64] {
        &self.label_names
    }

    pub fn raw_label(&self, i: usize) -> i64 {
        self.label_names[self.labels[i]]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn sample(&self, i: usize) -> DenseTensor {
        DenseTensor::new(self.dims.clone(), self.data.column(i).iter().copied().collect())
            .expect("dims validated at construction")
    }

    pub fn sample_slice(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data.as_slice()[i * d..(i + 1) * d]
    }

    /// Columns belonging to class `c`.
    pub fn class_data(&self, c: usize) -> Matrix {
        let idx: Vec<usize> = (0..self.n_samples()).filter(|&i| self.labels[i] == c).collect();
        self.columns(&idx)
    }

    fn columns(&self, idx: &[usize]) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(d, idx.len());
        for (j, &i) in idx.iter().enumerate() {
            out.column_mut(j).copy_from(&self.data.column(i));
        }
        out
    }

    /// Subset in the given order. Keeps the full label table.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            data: self.columns(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            dims: self.dims.clone(),
        }
    }

    /// Reinterprets every sample with a new tensor shape of the same size.
    pub fn reshape(mut self, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || d != self.dim() {
            return Err(Error::InvalidConfig(format!(
                "dims {dims:?} (product {d}) do not match sample length {}",
                self.dim()
            )));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn map_data(mut self, f: impl FnOnce(Matrix) -> Matrix) -> Self {
        self.data = f(self.data);
        self
    }

    /// Keeps only samples whose raw label is in `keep`, then re-densifies labels.
    pub fn filter_classes(&self, keep: &[i64]) -> Result<Self> {
        let idx: Vec<usize> = (0..self.n_samples())
            .filter(|&i| keep.contains(&self.raw_label(i)))
            .collect();
        if idx.is_empty() {
            return Err(Error::EmptyData(format!("no samples with labels {keep:?}")));
        }
        let raw: Vec<i64> = idx.iter().map(|&i| self.raw_label(i)).collect();
        Self::from_raw_labels(self.columns(&idx), &raw, self.dims.clone())
    }

    /// Keeps at most `cap` samples per class, in current order.
    pub fn cap_per_class(&self, cap: usize) -> Self {
        let mut counts = vec![0usize; self.n_classes()];
        let idx: Vec<usize> = (0..self.n_samples())
            .filter(|&i| {
                let c = &mut counts[self.labels[i]];
                *c += 1;
                *c <= cap
            })
            .collect();
        self.select(&idx)
    }

    /// Deterministic seeded permutation of the samples.
    pub fn shuffled(&self, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..self.n_samples()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.select(&idx)
    }

    /// Seeded shuffle, then the first `n_train` samples train and the rest test.
    pub fn split(&self, n_train: usize, seed: u64) -> Result<(Self, Self)> {
        if n_train == 0 || n_train >= self.n_samples() {
            return Err(Error::InvalidConfig(format!(
                "cannot split {} samples into {n_train} train + rest",
                self.n_samples()
            )));
        }
        let s = self.shuffled(seed);
        let train: Vec<usize> = (0..n_train).collect();
        let test: Vec<usize> = (n_train..s.n_samples()).collect();
        Ok((s.select(&train), s.select(&test)))
    }

    /// Re-indexes both datasets against the union of their label values so
    /// that dense indices mean the same class in each.
    pub fn harmonize(a: &Self, b: &Self) -> Result<(Self, Self)> {
        if a.dims != b.dims {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} vs {:?}",
                a.dims, b.dims
            )));
        }
        let mut names: Vec<i64> = a.label_names.iter().chain(&b.label_names).copied().collect();
        names.sort_unstable();
        names.dedup();
        let remap = |ds: &Self| -> Result<Self> {
            let labels = ds
                .labels
                .iter()
                .map(|&l| {
                    let raw = ds.label_names[l];
                    names.binary_search(&raw).expect("name in union")
                })
                .collect();
            Self::new(ds.data.clone(), labels, names.clone(), ds.dims.clone())
        };
        Ok((remap(a)?, remap(b)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        let data = Matrix::from_fn(2, 5, |r, c| (10 * c + r) as f64);
        LabeledDataset::from_raw_labels(data, &[7, 3, 7, 3, 9], vec![2]).unwrap()
    }

    #[test]
    fn dense_labels_follow_sorted_values() {
        let ds = toy();
        assert_eq!(ds.label_names(), &[3, 7, 9]);
        assert_eq!(ds.labels(), &[1, 0, 1, 0, 2]);
        assert_eq!(ds.raw_label(4), 9);
        assert_eq!(ds.class_data(0).column(1)[0], 30.0);
    }

    #[test]
    fn validation() {
        let data = Matrix::zeros(4, 2);
        assert!(LabeledDataset::new(data.clone(), vec![0, 0], vec![1], vec![3]).is_err());
        assert!(LabeledDataset::new(data.clone(), vec![0], vec![1], vec![4]).is_err());
        assert!(LabeledDataset::new(data, vec![0, 1], vec![1], vec![2, 2]).is_err());
    }

    #[test]
    fn filter_cap_split() {
        let ds = toy();
        let f = ds.filter_classes(&[3, 9]).unwrap();
        assert_eq!(f.n_samples(), 3);
        assert_eq!(f.label_names(), &[3, 9]);
        let capped = ds.cap_per_class(1);
        assert_eq!(capped.n_samples(), 3);
        let (tr, te) = ds.split(3, 42).unwrap();
        assert_eq!((tr.n_samples(), te.n_samples()), (3, 2));
        let (tr2, _) = ds.split(3, 42).unwrap();
        assert_eq!(tr, tr2);
        assert!(ds.split(5, 1).is_err());
    }

    #[test]
    fn harmonize_shares_label_space() {
        let a = LabeledDataset::from_raw_labels(Matrix::zeros(1, 2), &[1, 2], vec![1]).unwrap();
        let b = LabeledDataset::from_raw_labels(Matrix::zeros(1, 1), &[2], vec![1]).unwrap();
        let (a2, b2) = LabeledDataset::harmonize(&a, &b).unwrap();
        assert_eq!(a2.labels(), &[0, 1]);
        assert_eq!(b2.labels(), &[1]);
        assert_eq!(b2.label_names(), &[1, 2]);
    }

    #[test]
    fn reshape_checks_product() {
        let ds = LabeledDataset::from_raw_labels(Matrix::zeros(6, 1), &[0], vec![6]).unwrap();
        assert!(ds.clone().reshape(vec![2, 3]).is_ok());
        assert!(ds.reshape(vec![2, 2]).is_err());
    }
}
