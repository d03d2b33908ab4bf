//! TT-PCA: a left-to-right sweep of thresholded SVDs that yields an
//! orthonormal tensor train basis together with the coefficients of every
//! training sample, plus the nearest-subspace classifier built on it and a
//! plain PCA baseline.

use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::left_singular_pairs;
use crate::model::format::{read_subspace, ByteReader, ByteWriter};
use crate::model::TtSubspace;
use crate::tensor::{left_refold, DenseTensor, Matrix};

/// Singular values at or below this fraction of the largest count as zero.
pub const ZERO_SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum RankSelection {
    /// Keep singular values strictly larger than `tau * sigma_max` at every step.
    Threshold(f64),
    /// Keep the top `r_i` at step `i`, clamped to the number of nonzero singular values.
    Fixed(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtPcaConfig {
    pub selection: RankSelection,
    /// Subtract the sample mean before fitting (affine instead of linear subspace).
    pub center: bool,
}

impl TtPcaConfig {
    pub fn threshold(tau: f64) -> Self {
        Self {
            selection: RankSelection::Threshold(tau),
            center: false,
        }
    }

    pub fn fixed(ranks: Vec<usize>) -> Self {
        Self {
            selection: RankSelection::Fixed(ranks),
            center: false,
        }
    }

    pub fn centered(mut self, center: bool) -> Self {
        self.center = center;
        self
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        match &self.selection {
            RankSelection::Threshold(tau) if !tau.is_finite() || *tau < 0.0 => Err(
                Error::InvalidConfig(format!("threshold must be a finite value >= 0, got {tau}")),
            ),
            RankSelection::Fixed(r) if r.len() != n_modes => Err(Error::InvalidConfig(format!(
                "{} ranks given for {n_modes} modes",
                r.len()
            ))),
            RankSelection::Fixed(r) if r.contains(&0) => {
                Err(Error::InvalidConfig(format!("ranks must be positive: {r:?}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedTtPca {
    subspace: TtSubspace,
    representation: Matrix,
    mean: Option<Vec<f64>>,
    /// Some step had only zero singular values; a single basis vector was kept anyway.
    pub degenerate: bool,
    /// Some step selected no singular value (e.g. `tau >= 1`) and was forced to rank 1.
    pub rank_clamped: bool,
}

impl FittedTtPca {
    pub fn subspace(&self) -> &TtSubspace {
        &self.subspace
    }

    /// `A`, the `r_n x N` coefficients of the training columns.
    pub fn representation(&self) -> &Matrix {
        &self.representation
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.subspace.ranks()
    }

    /// `U A` (plus the mean when centered), the fitted approximation of the data.
    pub fn reconstruction(&self) -> Matrix {
        let mut out = self.subspace.basis() * &self.representation;
        if let Some(mean) = &self.mean {
            for mut col in out.column_iter_mut() {
                for (v, m) in col.iter_mut().zip(mean) {
                    *v += m;
                }
            }
        }
        out
    }

    /// Squared distance of a vectorized sample to the fitted (affine) subspace.
    pub fn residual_vector(&self, x: &[f64]) -> Result<f64> {
        match &self.mean {
            None => self.subspace.residual_norm_sq_vector(x),
            Some(mean) => {
                if mean.len() != x.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "sample of length {} for a model of dimension {}",
                        x.len(),
                        mean.len()
                    )));
                }
                let shifted: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
                self.subspace.residual_norm_sq_vector(&shifted)
            }
        }
    }
}

/// Runs the TT-PCA sweep on a `d x N` data matrix whose columns fold into `dims`.
pub fn fit(data: &Matrix, dims: &[usize], cfg: &TtPcaConfig) -> Result<FittedTtPca> {
    let n = dims.len();
    if n == 0 || dims.contains(&0) {
        return Err(Error::InvalidShape(format!("bad tensor dims {dims:?}")));
    }
    cfg.validate(n)?;
    let d: usize = dims.iter().product();
    if data.nrows() != d {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} give d = {d}, data has {} rows",
            data.nrows()
        )));
    }
    let n_samples = data.ncols();
    if n_samples == 0 {
        return Err(Error::EmptyData("TT-PCA needs at least one sample".into()));
    }

    let mean = cfg.center.then(|| {
        (0..d)
            .map(|r| data.row(r).iter().sum::<f64>() / n_samples as f64)
            .collect::<Vec<_>>()
    });
    let mut carry: Vec<f64> = match &mean {
        None => data.as_slice().to_vec(),
        Some(mu) => data
            .column_iter()
            .flat_map(|c| c.iter().zip(mu).map(|(v, m)| v - m).collect::<Vec<_>>())
            .collect(),
    };

    let mut cores = Vec::with_capacity(n);
    let mut degenerate = false;
    let mut rank_clamped = false;
    let mut r_prev = 1;
    for (i, &dim) in dims.iter().enumerate() {
        let rows = r_prev * dim;
        let cols = carry.len() / rows;
        let y = Matrix::from_column_slice(rows, cols, &carry);
        let (u, sigma) = left_singular_pairs(&y)?;
        let sigma_max = sigma.first().copied().unwrap_or(0.0);
        let nonzero = sigma
            .iter()
            .take_while(|&&s| s > ZERO_SINGULAR_TOL * sigma_max)
            .count();
        let wanted = match &cfg.selection {
            RankSelection::Threshold(tau) => sigma
                .iter()
                .take(nonzero)
                .take_while(|&&s| s > tau * sigma_max)
                .count(),
            RankSelection::Fixed(r) => r[i].min(nonzero),
        };
        let short = matches!(&cfg.selection, RankSelection::Fixed(r) if r[i] > nonzero);
        if nonzero == 0 {
            degenerate = true;
        } else if wanted == 0 || short {
            rank_clamped = true;
        }
        let keep = wanted.max(1);
        let basis = u.columns(0, keep).into_owned();
        carry = basis.tr_mul(&y).as_slice().to_vec();
        cores.push(left_refold(&basis, r_prev, dim, keep)?);
        r_prev = keep;
    }
    let representation = Matrix::from_column_slice(r_prev, n_samples, &carry);
    let subspace = TtSubspace::new(cores)?;
    if !subspace.is_orthonormal() {
        return Err(Error::Numeric(format!(
            "TT-PCA produced cores with orthonormality error {:e}",
            subspace.max_core_orthonormality_error()
        )));
    }
    Ok(FittedTtPca {
        subspace,
        representation,
        mean,
        degenerate,
        rank_clamped,
    })
}

/// One TT-PCA subspace per class; prediction picks the nearest subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassModel {
    classes: Vec<FittedTtPca>,
    label_names: Vec<i64>,
}

impl ClassModel {
    pub fn classes(&self) -> &[FittedTtPca] {
        &self.classes
    }

    pub fn label_names(&self) -> &[i64] {
        &self.label_names
    }

    pub fn dims(&self) -> Vec<usize> {
        self.classes[0].subspace.dims()
    }

    /// Squared residual of `x` against every class subspace.
    pub fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.classes.iter().map(|c| c.residual_vector(x)).collect()
    }

    pub fn classify(&self, y: &DenseTensor) -> Result<usize> {
        let dims = self.dims();
        if y.shape() != dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "tensor shape {:?} does not match model dims {dims:?}",
                y.shape()
            )));
        }
        self.classify_vector(y.data())
    }

    /// Dense label of the class with the smallest residual; ties go to the smaller label.
    pub fn classify_vector(&self, x: &[f64]) -> Result<usize> {
        Ok(argmin(&self.residuals(x)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(CLASSIFIER_MAGIC);
        w.u32(self.classes.len());
        for c in &self.classes {
            let block = c.subspace.to_bytes();
            w.u64(block.len());
            w.bytes(&block);
        }
        for c in &self.classes {
            w.matrix(&c.representation);
        }
        for (c, &name) in self.classes.iter().zip(&self.label_names) {
            w.bytes(&name.to_le_bytes());
            match &c.mean {
                None => w.u8(0),
                Some(mu) => {
                    w.u8(1);
                    w.f64s(mu);
                }
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(CLASSIFIER_MAGIC)?;
        let count = r.u32()?;
        if count == 0 {
            return Err(Error::Format("classifier with zero classes".into()));
        }
        let mut subspaces = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u64()?;
            let mut inner = ByteReader::new(r.take(len)?);
            subspaces.push(read_subspace(&mut inner)?);
            inner.finish()?;
        }
        let mut reps = Vec::with_capacity(count);
        for s in &subspaces {
            let a = r.matrix()?;
            if a.nrows() != s.embedding_dim() {
                return Err(Error::Format(format!(
                    "representation has {} rows for a subspace of rank {}",
                    a.nrows(),
                    s.embedding_dim()
                )));
            }
            reps.push(a);
        }
        let mut classes = Vec::with_capacity(count);
        let mut label_names = Vec::with_capacity(count);
        for (subspace, representation) in subspaces.into_iter().zip(reps) {
            label_names.push(i64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            let mean = match r.u8()? {
                0 => None,
                1 => Some(r.f64s(subspace.ambient_dim())?),
                other => return Err(Error::Format(format!("invalid mean flag {other}"))),
            };
            classes.push(FittedTtPca {
                subspace,
                representation,
                mean,
                degenerate: false,
                rank_clamped: false,
            });
        }
        r.finish()?;
        let dims = classes[0].subspace.dims();
        if classes.iter().any(|c| c.subspace.dims() != dims) {
            return Err(Error::Format("class subspaces disagree on dims".into()));
        }
        Ok(Self {
            classes,
            label_names,
        })
    }
}

pub const CLASSIFIER_MAGIC: &[u8; 4] = b"TTCL";

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Fits one TT-PCA model per class (in parallel across classes).
pub fn fit_classifier(ds: &LabeledDataset, cfg: &TtPcaConfig) -> Result<ClassModel> {
    let per_class: Vec<Matrix> = (0..ds.n_classes()).map(|c| ds.class_data(c)).collect();
    if let Some(c) = per_class.iter().position(|m| m.ncols() == 0) {
        return Err(Error::EmptyData(format!(
            "class {} has no training samples",
            ds.label_names()[c]
        )));
    }
    let classes = per_class
        .par_iter()
        .map(|m| fit(m, ds.dims(), cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassModel {
        classes,
        label_names: ds.label_names().to_vec(),
    })
}

/// Orthonormal basis and coefficients from standard (uncentered) PCA.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub basis: Matrix,
    pub coefficients: Matrix,
}

impl PcaBasis {
    pub fn residual_vector(&self, x: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(x);
        let coeffs = self.basis.tr_mul(&v);
        (&v - &self.basis * coeffs).norm_squared()
    }
}

/// Top-`r` left singular vectors of `D` (no centering).
pub fn pca_baseline_fit(data: &Matrix, r: usize) -> Result<PcaBasis> {
    let (d, n) = data.shape();
    if r == 0 || r > d.min(n) {
        return Err(Error::InvalidConfig(format!(
            "PCA rank {r} outside 1..={}",
            d.min(n)
        )));
    }
    let (u, _) = left_singular_pairs(data)?;
    let basis = u.columns(0, r).into_owned();
    let coefficients = basis.tr_mul(data);
    Ok(PcaBasis {
        basis,
        coefficients,
    })
}

/// Per-class PCA subspaces, the vector-space counterpart of [`ClassModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct PcaClassModel {
    pub classes: Vec<PcaBasis>,
}

impl PcaClassModel {
    pub fn fit(ds: &LabeledDataset, r: usize) -> Result<Self> {
        let classes = (0..ds.n_classes())
            .into_par_iter()
            .map(|c| pca_baseline_fit(&ds.class_data(c), r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { classes })
    }

    pub fn classify_vector(&self, x: &[f64]) -> usize {
        let res: Vec<f64> = self.classes.iter().map(|c| c.residual_vector(x)).collect();
        argmin(&res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, orthonormality_error};
    use crate::synthetic::{random_subspace, sample_in_subspace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn rank_one_data() {
        // v = a ⊗ b with a = (1, -2), b = (0.5, 3, 1): every TT rank is one
        let v = Matrix::from_column_slice(6, 1, &[0.5, -1.0, 3.0, -6.0, 1.0, -2.0]);
        let data = Matrix::from_fn(6, 5, |r, _| v[r]);
        for tau in [0.0, 0.3, 0.99] {
            let fit = fit(&data, &[2, 3], &TtPcaConfig::threshold(tau)).unwrap();
            assert_eq!(fit.ranks(), vec![1, 1, 1]);
            assert!(rel_err(&fit.reconstruction(), &data) <= 1e-12);
        }
    }

    #[test]
    fn tau_zero_reconstructs_anything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = gaussian_matrix(12, 7, &mut rng);
        let fit = fit(&data, &[2, 3, 2], &TtPcaConfig::threshold(0.0)).unwrap();
        assert!(rel_err(&fit.reconstruction(), &data) <= 1e-10);
        assert!(orthonormality_error(fit.subspace().basis()) <= 1e-10);
    }

    #[test]
    fn fixed_rank_recovers_tt_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth = random_subspace(&[3, 4, 2], &[2, 3, 2], &mut rng).unwrap();
        let data = sample_in_subspace(&truth, 30, &mut rng);
        let fit = fit(&data, &[3, 4, 2], &TtPcaConfig::fixed(vec![2, 3, 2])).unwrap();
        assert_eq!(fit.ranks(), vec![1, 2, 3, 2]);
        assert!(rel_err(&fit.reconstruction(), &data) <= 1e-10);
    }

    #[test]
    fn projection_of_training_columns_equals_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = gaussian_matrix(16, 9, &mut rng);
        let fit = fit(&data, &[4, 4], &TtPcaConfig::threshold(0.2)).unwrap();
        let proj = fit.subspace().project_columns(&data).unwrap();
        assert!((proj - fit.representation()).amax() <= 1e-10);
    }

    #[test]
    fn fixed_rank_above_numerical_rank_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = gaussian_matrix(8, 3, &mut rng);
        let fit = fit(&data, &[2, 4], &TtPcaConfig::fixed(vec![2, 5])).unwrap();
        assert!(fit.rank_clamped);
        assert_eq!(fit.ranks(), vec![1, 2, 3]);
        let ok = super::fit(&data, &[2, 4], &TtPcaConfig::fixed(vec![2, 3])).unwrap();
        assert!(!ok.rank_clamped);
    }

    #[test]
    fn large_tau_clamps_to_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = gaussian_matrix(8, 5, &mut rng);
        let fit = fit(&data, &[2, 4], &TtPcaConfig::threshold(1.5)).unwrap();
        assert!(fit.rank_clamped);
        assert_eq!(fit.ranks(), vec![1, 1, 1]);
    }

    #[test]
    fn all_zero_data_is_degenerate() {
        let fit = fit(&Matrix::zeros(4, 3), &[2, 2], &TtPcaConfig::threshold(0.1)).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.ranks(), vec![1, 1, 1]);
        assert!(fit.subspace().is_orthonormal());
    }

    #[test]
    fn config_errors() {
        let data = Matrix::zeros(4, 3);
        assert!(fit(&data, &[2, 2], &TtPcaConfig::threshold(-0.1)).is_err());
        assert!(fit(&data, &[2, 2], &TtPcaConfig::fixed(vec![1])).is_err());
        assert!(fit(&data, &[2, 2], &TtPcaConfig::fixed(vec![1, 0])).is_err());
        assert!(fit(&data, &[2, 3], &TtPcaConfig::threshold(0.1)).is_err());
        assert!(fit(&Matrix::zeros(4, 0), &[2, 2], &TtPcaConfig::threshold(0.1)).is_err());
    }

    #[test]
    fn centering_fits_affine_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = random_subspace(&[2, 3], &[2, 1], &mut rng).unwrap();
        let mut data = sample_in_subspace(&truth, 10, &mut rng);
        for mut c in data.column_iter_mut() {
            c[0] += 5.0;
        }
        let cfg = TtPcaConfig::fixed(vec![2, 1]).centered(true);
        let fitted = fit(&data, &[2, 3], &cfg).unwrap();
        assert!(fitted.mean().is_some());
        let plain = fit(&data, &[2, 3], &TtPcaConfig::fixed(vec![2, 1])).unwrap();
        let err_c = (fitted.reconstruction() - &data).norm();
        let err_p = (plain.reconstruction() - &data).norm();
        assert!(err_c <= err_p + 1e-12);
    }

    fn two_class_dataset(rng: &mut ChaCha8Rng) -> LabeledDataset {
        let dims = [3, 4];
        let a = random_subspace(&dims, &[1, 1], rng).unwrap();
        let b = random_subspace(&dims, &[2, 2], rng).unwrap();
        let da = sample_in_subspace(&a, 6, rng);
        let db = sample_in_subspace(&b, 6, rng);
        let mut data = Matrix::zeros(12, 12);
        data.columns_mut(0, 6).copy_from(&da);
        data.columns_mut(6, 6).copy_from(&db);
        let labels: Vec<i64> = (0..12).map(|i| i64::from(i >= 6)).collect();
        LabeledDataset::from_raw_labels(data, &labels, dims.to_vec()).unwrap()
    }

    #[test]
    fn classifier_ranks_differ_per_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ds = two_class_dataset(&mut rng);
        let model = fit_classifier(&ds, &TtPcaConfig::threshold(1e-6)).unwrap();
        assert_eq!(model.classes().len(), 2);
        assert_eq!(model.classes()[0].subspace().embedding_dim(), 1);
        assert_eq!(model.classes()[1].subspace().embedding_dim(), 2);
        for i in 0..ds.n_samples() {
            assert_eq!(model.classify(&ds.sample(i)).unwrap(), ds.labels()[i]);
        }
    }

    #[test]
    fn single_class_model() {
        let data = Matrix::from_fn(4, 3, |r, c| (r + c) as f64);
        let ds = LabeledDataset::from_raw_labels(data, &[5, 5, 5], vec![2, 2]).unwrap();
        let model = fit_classifier(&ds, &TtPcaConfig::threshold(0.1)).unwrap();
        assert_eq!(model.classes().len(), 1);
        assert_eq!(model.classify(&ds.sample(0)).unwrap(), 0);
    }

    #[test]
    fn tie_goes_to_smallest_label() {
        // class subspaces span e1 and e2; the query e1+e2 is equidistant
        let e1 = left_refold(&Matrix::from_column_slice(2, 1, &[1.0, 0.0]), 1, 2, 1).unwrap();
        let e2 = left_refold(&Matrix::from_column_slice(2, 1, &[0.0, 1.0]), 1, 2, 1).unwrap();
        let mk = |core| FittedTtPca {
            subspace: TtSubspace::new(vec![core]).unwrap(),
            representation: Matrix::zeros(1, 1),
            mean: None,
            degenerate: false,
            rank_clamped: false,
        };
        let model = ClassModel {
            classes: vec![mk(e1), mk(e2)],
            label_names: vec![0, 1],
        };
        assert_eq!(model.classify_vector(&[1.0, 1.0]).unwrap(), 0);
        assert_eq!(model.classify_vector(&[0.1, 1.0]).unwrap(), 1);
        let bad = DenseTensor::zeros(vec![3]).unwrap();
        assert!(model.classify(&bad).is_err());
    }

    #[test]
    fn empty_class_is_rejected() {
        let data = Matrix::zeros(2, 2);
        let ds = LabeledDataset::new(data, vec![0, 0], vec![1, 2], vec![2]).unwrap();
        assert!(matches!(
            fit_classifier(&ds, &TtPcaConfig::threshold(0.1)),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn classifier_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = two_class_dataset(&mut rng);
        let model = fit_classifier(&ds, &TtPcaConfig::threshold(0.05).centered(true)).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"TTCL");
        let mut back = ClassModel::from_bytes(&bytes).unwrap();
        for (b, m) in back.classes.iter_mut().zip(&model.classes) {
            b.degenerate = m.degenerate;
            b.rank_clamped = m.rank_clamped;
        }
        assert_eq!(back, model);
        assert!(ClassModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(ClassModel::from_bytes(&bad).is_err());
    }

    #[test]
    fn pca_baseline() {
        let v = [3.0, 4.0, 0.0];
        let data = Matrix::from_fn(3, 4, |r, c| v[r] * (c as f64 + 1.0));
        let p = pca_baseline_fit(&data, 1).unwrap();
        let dir = p.basis.column(0);
        assert!((dir[0].abs() - 0.6).abs() < 1e-12 && (dir[1].abs() - 0.8).abs() < 1e-12);
        assert!(pca_baseline_fit(&data, 4).is_err());
        assert!(pca_baseline_fit(&data, 0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = gaussian_matrix(5, 4, &mut rng);
        let full = pca_baseline_fit(&g, 4).unwrap();
        assert!(rel_err(&(&full.basis * &full.coefficients), &g) < 1e-12);
    }

    #[test]
    fn pca_error_equals_discarded_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = gaussian_matrix(6, 8, &mut rng);
        let mut s: Vec<f64> = g.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        for r in 1..=6 {
            let p = pca_baseline_fit(&g, r).unwrap();
            let err = (&g - &p.basis * &p.coefficients).norm_squared();
            let discarded: f64 = s[r..].iter().map(|x| x * x).sum();
            assert!((err - discarded).abs() < 1e-9 * g.norm_squared());
        }
    }
}
