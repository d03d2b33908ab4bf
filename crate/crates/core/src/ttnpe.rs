//! TT-NPE: neighborhood preserving embedding whose projection is constrained
//! to a tensor train subspace.
//!
//! The unconstrained problem `min tr(E^T Z E)` over orthonormal `E` is solved
//! by the eigenvectors `V` of the smallest eigenvalues of `Z = Y Y^T`,
//! `Y = D - D S^T`. The TT basis `U` is then pulled towards `V` one core at a
//! time, each update being a [`StiefelProblem`].

use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, complete_orthonormal, sym_eigen_ascending};
use crate::model::format::{read_subspace, ByteReader, ByteWriter, FORMAT_VERSION};
use crate::model::{materialize_basis, TtSubspace};
use crate::stiefel::{solve, SolverConfig, StiefelProblem};
use crate::tensor::{
    connect_chain, kron_identity, left_refold, left_unfold, reshape_t, right_unfold, DenseTensor,
    Matrix,
};
use crate::ttpca::{self, TtPcaConfig};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"TTNE";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsMode {
    Explicit(f64),
    /// Median of the retained squared neighbor distances (1 if that is 0).
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtNpeConfig {
    /// `(r1, .., rn)`; `rn` is the embedding dimension.
    pub ranks: Vec<usize>,
    pub k: usize,
    pub eps: EpsMode,
    pub max_sweeps: usize,
    /// Stop when a sweep lowers the relaxed objective by less than this fraction.
    pub sweep_tol: f64,
    pub solver: SolverConfig,
    /// Scale every affinity row to sum to one.
    pub row_normalize: bool,
}

impl TtNpeConfig {
    pub fn new(ranks: Vec<usize>, k: usize) -> Self {
        Self {
            ranks,
            k,
            eps: EpsMode::Auto,
            max_sweeps: 20,
            sweep_tol: 1e-8,
            solver: SolverConfig::default(),
            row_normalize: false,
        }
    }
}

/// Checks `r_i <= r_(i-1) I_i` and `r_i <= I_(i+1) .. I_n r_n`.
pub fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if dims.len() != ranks.len() || dims.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} ranks for {} modes",
            ranks.len(),
            dims.len()
        )));
    }
    let r_n = ranks[ranks.len() - 1];
    let mut prev = 1usize;
    for (i, (&dim, &r)) in dims.iter().zip(ranks).enumerate() {
        let right = dims[i + 1..].iter().fold(r_n, |acc, &x| acc.saturating_mul(x));
        if r == 0 || r > prev * dim || r > right {
            return Err(Error::RankChain(format!(
                "ranks {ranks:?} are infeasible for dims {dims:?} (position {})",
                i + 1
            )));
        }
        prev = r;
    }
    Ok(())
}

/// Sparse KNN affinity: row `i` lists its neighbors nearest first.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    k: usize,
    eps: f64,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|&&(c, _)| c == j)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n();
        let mut s = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                s[(i, j)] = v;
            }
        }
        s
    }

    /// Row-stochastic copy (rows summing to zero are left alone).
    pub fn row_normalized(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let total: f64 = row.iter().map(|&(_, v)| v).sum();
                if total > 0.0 {
                    row.iter().map(|&(j, v)| (j, v / total)).collect()
                } else {
                    row.clone()
                }
            })
            .collect();
        Self {
            rows,
            k: self.k,
            eps: self.eps,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn column(data: &Matrix, i: usize) -> &[f64] {
    let d = data.nrows();
    &data.as_slice()[i * d..(i + 1) * d]
}

/// Indices of the `k` nearest columns of `points` to `query` (ties go to the
/// smaller index), with their squared distances. `skip` excludes one column.
fn nearest(points: &Matrix, query: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = (0..points.ncols())
        .filter(|&j| Some(j) != skip)
        .map(|j| (j, sq_dist(query, column(points, j))))
        .collect();
    let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    let k = k.min(cand.len());
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by_dist);
        cand.truncate(k);
    }
    cand.sort_by(by_dist);
    cand
}

/// `S_ij = exp(-||x_i - x_j||^2 / eps)` for the `K` nearest neighbors `j != i`
/// of every column `i`, zero elsewhere. Not symmetrized.
pub fn build_affinity(data: &Matrix, k: usize, eps: EpsMode) -> Result<AffinityMatrix> {
    let n = data.ncols();
    if n < 2 {
        return Err(Error::EmptyData(format!("affinity needs at least 2 samples, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if let EpsMode::Explicit(e) = eps {
        if !e.is_finite() || e <= 0.0 {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {e}")));
        }
    }
    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(data, column(data, i), k, Some(i)))
        .collect();
    let eps = match eps {
        EpsMode::Explicit(e) => e,
        EpsMode::Auto => {
            let mut all: Vec<f64> = neighbors.iter().flatten().map(|&(_, d)| d).collect();
            all.sort_by(f64::total_cmp);
            let mid = all.len() / 2;
            let median = if all.len() % 2 == 1 {
                all[mid]
            } else {
                0.5 * (all[mid - 1] + all[mid])
            };
            if median > 0.0 {
                median
            } else {
                1.0
            }
        }
    };
    let rows = neighbors
        .into_iter()
        .map(|row| row.into_iter().map(|(j, d)| (j, (-d / eps).exp())).collect())
        .collect();
    Ok(AffinityMatrix {
        rows,
        k: k.min(n - 1),
        eps,
    })
}

/// `Z = Y Y^T` with `Y = D - D S^T`, symmetrized.
pub fn build_z(data: &Matrix, s: &AffinityMatrix) -> Result<Matrix> {
    if s.n() != data.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "affinity is {}x{} for {} samples",
            s.n(),
            s.n(),
            data.ncols()
        )));
    }
    let mut y = data.clone();
    for i in 0..s.n() {
        for &(j, w) in s.row(i) {
            let xj = data.column(j).clone_owned();
            y.column_mut(i).axpy(-w, &xj, 1.0);
        }
    }
    let z = &y * y.transpose();
    Ok((&z + z.transpose()) * 0.5)
}

/// Flips each column so that its largest-magnitude entry is positive.
fn fix_signs(v: &mut Matrix) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn check_symmetric(z: &Matrix) -> Result<()> {
    if !z.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Z must be square, got {}x{}",
            z.nrows(),
            z.ncols()
        )));
    }
    let asym = asymmetry(z);
    if asym > 1e-9 * z.amax().max(1.0) {
        return Err(Error::Numeric(format!("Z is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// Eigenvalues of `Z` ascending and the matching sign-normalized eigenvectors.
/// Within a repeated eigenvalue the basis is whatever the solver returns.
pub fn eigen_ascending(z: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(z)?;
    let (vals, mut vecs) = sym_eigen_ascending(z);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigen-solve produced non-finite values".into()));
    }
    fix_signs(&mut vecs);
    Ok((vals, vecs))
}

/// `V_rn`: eigenvectors of the `r_n` smallest eigenvalues of `Z`, ascending.
pub fn smallest_eigvecs(z: &Matrix, r_n: usize) -> Result<Matrix> {
    if r_n == 0 || r_n > z.nrows() {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {r_n} outside 1..={}",
            z.nrows()
        )));
    }
    let (_, vecs) = eigen_ascending(z)?;
    Ok(vecs.columns(0, r_n).into_owned())
}

/// Affinity and eigendecomposition of `Z` for one training set and `K`;
/// reusable for every rank choice.
#[derive(Clone, Debug)]
pub struct PreparedTarget {
    pub affinity: AffinityMatrix,
    pub eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl PreparedTarget {
    pub fn new(data: &Matrix, k: usize, eps: EpsMode, row_normalize: bool) -> Result<Self> {
        let mut affinity = build_affinity(data, k, eps)?;
        if row_normalize {
            affinity = affinity.row_normalized();
        }
        let z = build_z(data, &affinity)?;
        let (eigenvalues, eigenvectors) = eigen_ascending(&z)?;
        Ok(Self {
            affinity,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn target(&self, r_n: usize) -> Result<Matrix> {
        if r_n == 0 || r_n > self.dim() {
            return Err(Error::InvalidConfig(format!(
                "embedding dimension {r_n} outside 1..={}",
                self.dim()
            )));
        }
        Ok(self.eigenvectors.columns(0, r_n).into_owned())
    }
}

/// Settings for pulling a TT basis towards a fixed target.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignConfig {
    pub max_sweeps: usize,
    pub sweep_tol: f64,
    pub solver: SolverConfig,
}

impl From<&TtNpeConfig> for AlignConfig {
    fn from(cfg: &TtNpeConfig) -> Self {
        Self {
            max_sweeps: cfg.max_sweeps,
            sweep_tol: cfg.sweep_tol,
            solver: cfg.solver.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Alignment {
    pub cores: Vec<DenseTensor>,
    /// `||L(U1..Un) - V||_F^2` initially and after every core update.
    pub history: Vec<f64>,
    pub sweeps: usize,
}

impl Alignment {
    pub fn objective(&self) -> f64 {
        *self.history.last().expect("history starts with the initial value")
    }
}

/// Alternating minimization of `||L(U1..Un) - V||_F^2`, one core at a time,
/// starting from `init` (which must be left-orthonormal).
pub fn align_to_target(init: Vec<DenseTensor>, v: &Matrix, cfg: &AlignConfig) -> Result<Alignment> {
    let subspace = TtSubspace::new(init)?;
    if !subspace.is_orthonormal() {
        return Err(Error::NotOrthonormal(subspace.max_core_orthonormality_error()));
    }
    let dims = subspace.dims();
    let ranks = subspace.ranks();
    let n = dims.len();
    let r_n = ranks[n];
    if v.shape() != (subspace.ambient_dim(), r_n) {
        return Err(Error::DimensionMismatch(format!(
            "target is {}x{}, basis is {}x{r_n}",
            v.nrows(),
            v.ncols(),
            subspace.ambient_dim()
        )));
    }
    let mut cores = subspace.into_cores();
    let relaxed = |cores: &[DenseTensor]| -> Result<f64> { Ok((materialize_basis(cores)? - v).norm_squared()) };
    let mut history = vec![relaxed(&cores)?];
    let mut sweeps = 0;
    let targets: Vec<Matrix> = (1..=n)
        .map(|k| reshape_t(v, k, &dims, r_n))
        .collect::<Result<_>>()?;
    while sweeps < cfg.max_sweeps {
        let start = *history.last().unwrap();
        for k in 0..n {
            let left = connect_chain(&cores[..k], 1)?;
            let right = connect_chain(&cores[k + 1..], r_n)?;
            let a = kron_identity(dims[k], &left_unfold(&left)?);
            let b = right_unfold(&right)?;
            let prob = StiefelProblem::new(a, b, targets[k].clone())?;
            let x0 = left_unfold(&cores[k])?;
            let rep = solve(&prob, &x0, &cfg.solver)?;
            cores[k] = left_refold(&rep.x, ranks[k], dims[k], ranks[k + 1])?;
            history.push(relaxed(&cores)?);
        }
        sweeps += 1;
        let end = *history.last().unwrap();
        if end <= 1e-24 * r_n as f64 || start - end < cfg.sweep_tol * start {
            break;
        }
    }
    Ok(Alignment {
        cores,
        history,
        sweeps,
    })
}

/// Cores of a fixed-rank TT-PCA fit, padded with orthonormal completions
/// wherever the data did not support the requested rank.
pub fn ttpca_init(data: &Matrix, dims: &[usize], ranks: &[usize]) -> Result<Vec<DenseTensor>> {
    check_ranks(dims, ranks)?;
    let fit = ttpca::fit(data, dims, &TtPcaConfig::fixed(ranks.to_vec()))?;
    let got = fit.ranks();
    let mut cores = Vec::with_capacity(dims.len());
    let mut prev = 1;
    for (i, core) in fit.subspace().cores().iter().enumerate() {
        let (old_prev, old_r) = (got[i], got[i + 1]);
        if old_prev == prev && old_r == ranks[i] {
            cores.push(core.clone());
        } else {
            let old = left_unfold(core)?;
            let mut l = Matrix::zeros(prev * dims[i], old_r);
            for m in 0..dims[i] {
                for a in 0..old_prev {
                    l.row_mut(a + prev * m).copy_from(&old.row(a + old_prev * m));
                }
            }
            let full = complete_orthonormal(&l, ranks[i])?;
            cores.push(left_refold(&full, prev, dims[i], ranks[i])?);
        }
        prev = ranks[i];
    }
    Ok(cores)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedTtNpe {
    subspace: TtSubspace,
    embedded: Matrix,
    labels: Vec<usize>,
    label_names: Vec<i64>,
    relaxed_objective: f64,
    /// Relaxed objective after every core update (empty when loaded from disk).
    pub history: Vec<f64>,
    pub sweeps: usize,
}

/// Runs the full pipeline: affinity, `Z`, target, TT-PCA start, alignment.
pub fn fit(ds: &LabeledDataset, cfg: &TtNpeConfig) -> Result<FittedTtNpe> {
    validate(ds, cfg)?;
    let prepared = PreparedTarget::new(ds.data(), cfg.k, cfg.eps, cfg.row_normalize)?;
    fit_prepared(ds, &prepared, cfg)
}

fn validate(ds: &LabeledDataset, cfg: &TtNpeConfig) -> Result<()> {
    check_ranks(ds.dims(), &cfg.ranks)?;
    if cfg.k == 0 || ds.n_samples() < cfg.k + 1 {
        return Err(Error::InvalidConfig(format!(
            "K = {} needs at least K + 1 samples, have {}",
            cfg.k,
            ds.n_samples()
        )));
    }
    if cfg.max_sweeps == 0 {
        return Err(Error::InvalidConfig("max_sweeps must be positive".into()));
    }
    Ok(())
}

/// Same as [`fit`] with a precomputed target (the `K`/`eps` fields of `cfg`
/// are ignored in favor of the ones `prepared` was built with).
pub fn fit_prepared(ds: &LabeledDataset, prepared: &PreparedTarget, cfg: &TtNpeConfig) -> Result<FittedTtNpe> {
    validate(ds, cfg)?;
    if prepared.dim() != ds.dim() || prepared.affinity.n() != ds.n_samples() {
        return Err(Error::DimensionMismatch("prepared target belongs to another dataset".into()));
    }
    let r_n = *cfg.ranks.last().expect("ranks checked non-empty");
    let v = prepared.target(r_n)?;
    let init = ttpca_init(ds.data(), ds.dims(), &cfg.ranks)?;
    let aligned = align_to_target(init, &v, &AlignConfig::from(cfg))?;
    let relaxed_objective = aligned.objective();
    let subspace = TtSubspace::new(aligned.cores)?;
    if !subspace.is_orthonormal() {
        return Err(Error::NotOrthonormal(subspace.max_core_orthonormality_error()));
    }
    let embedded = subspace.project_columns(ds.data())?;
    Ok(FittedTtNpe {
        subspace,
        embedded,
        labels: ds.labels().to_vec(),
        label_names: ds.label_names().to_vec(),
        relaxed_objective,
        history: aligned.history,
        sweeps: aligned.sweeps,
    })
}

impl FittedTtNpe {
    pub fn subspace(&self) -> &TtSubspace {
        &self.subspace
    }

    /// `T = U^T D`, one column per training sample.
    pub fn embedded(&self) -> &Matrix {
        &self.embedded
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[i64] {
        &self.label_names
    }

    pub fn relaxed_objective(&self) -> f64 {
        self.relaxed_objective
    }

    pub fn embed(&self, y: &DenseTensor) -> Result<Vec<f64>> {
        self.subspace.project(y)
    }

    pub fn embed_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.subspace.project_vector(x)
    }

    pub fn classify_knn(&self, y: &DenseTensor, k: usize) -> Result<usize> {
        let t = self.embed(y)?;
        knn_vote(&self.embedded, &self.labels, self.label_names.len(), &t, k)
    }

    pub fn classify_knn_vector(&self, x: &[f64], k: usize) -> Result<usize> {
        let t = self.embed_vector(x)?;
        knn_vote(&self.embedded, &self.labels, self.label_names.len(), &t, k)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(EMBEDDING_MAGIC);
        w.u32(FORMAT_VERSION as usize);
        let block = self.subspace.to_bytes();
        w.u64(block.len());
        w.bytes(&block);
        w.matrix(&self.embedded);
        w.u32(self.labels.len());
        for &l in &self.labels {
            w.u32(l);
        }
        w.u32(self.label_names.len());
        for name in &self.label_names {
            w.bytes(&name.to_le_bytes());
        }
        w.f64(self.relaxed_objective);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(EMBEDDING_MAGIC)?;
        r.version()?;
        let len = r.u64()?;
        let mut inner = ByteReader::new(r.take(len)?);
        let subspace = read_subspace(&mut inner)?;
        inner.finish()?;
        let embedded = r.matrix()?;
        let n = r.u32()?;
        let labels = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let c = r.u32()?;
        let label_names = (0..c)
            .map(|_| Ok(i64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"))))
            .collect::<Result<Vec<_>>>()?;
        let relaxed_objective = r.f64()?;
        r.finish()?;
        if embedded.shape() != (subspace.embedding_dim(), n) {
            return Err(Error::Format(format!(
                "embedded matrix is {}x{}, expected {}x{n}",
                embedded.nrows(),
                embedded.ncols(),
                subspace.embedding_dim()
            )));
        }
        if labels.iter().any(|&l| l >= c) {
            return Err(Error::Format("label index outside the label table".into()));
        }
        Ok(Self {
            subspace,
            embedded,
            labels,
            label_names,
            relaxed_objective,
            history: Vec::new(),
            sweeps: 0,
        })
    }
}

/// Majority label among the `k` nearest columns of `points`. Distance ties go
/// to the smaller index, vote ties to the smaller label.
pub fn knn_vote(points: &Matrix, labels: &[usize], n_classes: usize, query: &[f64], k: usize) -> Result<usize> {
    if k == 0 || k > points.ncols() {
        return Err(Error::InvalidConfig(format!(
            "K = {k} outside 1..={}",
            points.ncols()
        )));
    }
    if query.len() != points.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "query of length {} against points of length {}",
            query.len(),
            points.nrows()
        )));
    }
    let mut votes = vec![0usize; n_classes];
    for (j, _) in nearest(points, query, k, None) {
        votes[labels[j]] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    Ok(best)
}

/// KNN in the raw vector space, the reference the embedding is compared against.
pub fn knn_baseline(train: &LabeledDataset, y: &DenseTensor, k: usize) -> Result<usize> {
    if y.shape() != train.dims() {
        return Err(Error::DimensionMismatch(format!(
            "query shape {:?} vs training dims {:?}",
            y.shape(),
            train.dims()
        )));
    }
    knn_vote(train.data(), train.labels(), train.n_classes(), y.data(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, orthonormality_error, random_orthonormal};
    use crate::synthetic::random_orthonormal_cores;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64]) -> Matrix {
        Matrix::from_row_slice(1, points.len(), points)
    }

    #[test]
    fn affinity_on_a_line() {
        let s = build_affinity(&line(&[0.0, 1.0, 10.0]), 1, EpsMode::Explicit(1.0)).unwrap();
        let e1 = (-1.0f64).exp();
        assert_eq!(s.get(0, 1), e1);
        assert_eq!(s.get(1, 0), e1);
        assert_eq!(s.get(2, 1), (-81.0f64).exp());
        for (i, j) in [(0, 2), (2, 0), (1, 2), (0, 0), (1, 1), (2, 2)] {
            assert_eq!(s.get(i, j), 0.0);
        }
    }

    #[test]
    fn affinity_ties_and_duplicates() {
        // 1 is equidistant from 0 and 2: the smaller index wins
        let s = build_affinity(&line(&[0.0, 1.0, 2.0, 2.0]), 1, EpsMode::Explicit(1.0)).unwrap();
        assert!(s.get(1, 0) > 0.0 && s.get(1, 2) == 0.0);
        assert_eq!(s.get(2, 3), 1.0);
        assert_eq!(s.get(3, 2), 1.0);
    }

    #[test]
    fn affinity_structure_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = gaussian_matrix(5, 20, &mut rng);
        let s = build_affinity(&data, 4, EpsMode::Auto).unwrap();
        assert!(s.eps() > 0.0);
        for i in 0..20 {
            assert_eq!(s.row(i).len(), 4);
            assert_eq!(s.get(i, i), 0.0);
            assert!(s.row(i).iter().all(|&(_, v)| v > 0.0 && v <= 1.0));
        }
        let big_k = build_affinity(&data, 50, EpsMode::Auto).unwrap();
        assert_eq!(big_k.row(0).len(), 19);
        let norm = s.row_normalized();
        for i in 0..20 {
            let total: f64 = norm.row(i).iter().map(|&(_, v)| v).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affinity_errors() {
        let data = line(&[0.0, 1.0]);
        assert!(build_affinity(&data, 1, EpsMode::Explicit(0.0)).is_err());
        assert!(build_affinity(&data, 0, EpsMode::Auto).is_err());
        assert!(build_affinity(&line(&[0.0]), 1, EpsMode::Auto).is_err());
    }

    #[test]
    fn auto_eps_falls_back_to_one() {
        let s = build_affinity(&line(&[3.0, 3.0, 3.0]), 1, EpsMode::Auto).unwrap();
        assert_eq!(s.eps(), 1.0);
    }

    #[test]
    fn z_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = gaussian_matrix(3, 4, &mut rng);
        let empty = AffinityMatrix {
            rows: vec![vec![]; 4],
            k: 1,
            eps: 1.0,
        };
        let z = build_z(&data, &empty).unwrap();
        assert!((z - &data * data.transpose()).amax() < 1e-12);

        let twins = Matrix::from_columns(&[data.column(0).into_owned(), data.column(0).into_owned()]);
        let s = build_affinity(&twins, 1, EpsMode::Auto).unwrap();
        assert_eq!(build_z(&twins, &s).unwrap().amax(), 0.0);
        assert!(build_z(&data, &s).is_err());
    }

    #[test]
    fn trace_matches_reconstruction_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = gaussian_matrix(6, 15, &mut rng);
        let s = build_affinity(&data, 3, EpsMode::Auto).unwrap();
        let z = build_z(&data, &s).unwrap();
        assert!(asymmetry(&z) < 1e-12);
        let e = random_orthonormal(6, 2, &mut rng);
        let lhs = (e.transpose() * &z * &e).trace();
        let proj = e.tr_mul(&data);
        let dense = s.to_dense();
        let mut rhs = 0.0;
        for i in 0..15 {
            let mut r = proj.column(i).into_owned();
            for j in 0..15 {
                r -= proj.column(j) * dense[(i, j)];
            }
            rhs += r.norm_squared();
        }
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn smallest_eigvecs_of_diagonal() {
        let z = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let v1 = smallest_eigvecs(&z, 1).unwrap();
        assert_eq!(v1.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
        let v2 = smallest_eigvecs(&z, 2).unwrap();
        assert!(((v2.transpose() * &z * &v2).trace() - 3.0).abs() < 1e-12);
        assert!(smallest_eigvecs(&z, 4).is_err());
        let mut bad = z.clone();
        bad[(0, 1)] = 1.0;
        assert!(smallest_eigvecs(&bad, 1).is_err());
    }

    #[test]
    fn rank_feasibility() {
        assert!(check_ranks(&[4, 4, 4], &[4, 12, 3]).is_ok());
        assert!(check_ranks(&[4, 4, 4], &[4, 13, 3]).is_err());
        assert!(check_ranks(&[4, 4, 4], &[5, 12, 3]).is_err());
        assert!(check_ranks(&[4, 4], &[4]).is_err());
    }

    #[test]
    fn init_pads_clamped_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = gaussian_matrix(12, 2, &mut rng);
        let cores = ttpca_init(&data, &[3, 4], &[3, 5]).unwrap();
        let s = TtSubspace::new(cores).unwrap();
        assert_eq!(s.ranks(), vec![1, 3, 5]);
        assert!(orthonormality_error(s.basis()) < 1e-12);
    }

    #[test]
    fn single_core_matches_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_orthonormal(6, 2, &mut rng);
        let init = random_orthonormal_cores(&[6], &[2], &mut rng).unwrap();
        let out = align_to_target(init, &v, &AlignConfig::from(&TtNpeConfig::new(vec![2], 1))).unwrap();
        assert_eq!(out.sweeps, 1, "{:?}", out.history);
        assert!(out.objective() < 1e-24);
    }

    #[test]
    fn representable_target_is_reached() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dims = [3, 4, 2];
        let ranks = [2, 3, 2];
        let v = materialize_basis(&random_orthonormal_cores(&dims, &ranks, &mut rng).unwrap()).unwrap();
        let z = Matrix::identity(24, 24) - &v * v.transpose();
        let target = smallest_eigvecs(&z, 2).unwrap();
        let init = random_orthonormal_cores(&dims, &ranks, &mut rng).unwrap();
        let cfg = AlignConfig {
            max_sweeps: 200,
            ..AlignConfig::from(&TtNpeConfig::new(ranks.to_vec(), 1))
        };
        // the eigenvectors span span(V) but are rotated; compare subspaces
        let out = align_to_target(init, &target, &cfg).unwrap();
        assert!(out.objective() <= 1e-8, "relaxed objective {:e}", out.objective());
    }

    fn toy_dataset(rng: &mut ChaCha8Rng, n: usize) -> LabeledDataset {
        let data = gaussian_matrix(12, n, rng);
        let raw: Vec<i64> = (0..n as i64).map(|i| i % 3).collect();
        LabeledDataset::from_raw_labels(data, &raw, vec![3, 4]).unwrap()
    }

    #[test]
    fn fit_is_monotone_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ds = toy_dataset(&mut rng, 30);
        let m = fit(&ds, &TtNpeConfig::new(vec![2, 3], 4)).unwrap();
        assert!(m.history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!(orthonormality_error(m.subspace().basis()) < 1e-10);
        let t = m.subspace().basis().tr_mul(ds.data());
        assert!((t - m.embedded()).amax() < 1e-10);
        let first = m.embed(&ds.sample(0)).unwrap();
        assert!(first.iter().zip(m.embedded().column(0).iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(fit(&ds, &TtNpeConfig::new(vec![2, 9], 4)).is_err());
        assert!(fit(&ds, &TtNpeConfig::new(vec![2, 3], 30)).is_err());
    }

    #[test]
    fn knn_rules() {
        let pts = line(&[0.0, 1.0, 5.0]);
        let labels = [0, 0, 1];
        assert_eq!(knn_vote(&pts, &labels, 2, &[4.0], 1).unwrap(), 1);
        assert_eq!(knn_vote(&pts, &labels, 2, &[1.0], 1).unwrap(), 0);
        // two votes each: the smaller label wins
        let pts = line(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(knn_vote(&pts, &[1, 0, 1, 0], 2, &[1.5], 4).unwrap(), 0);
        // equidistant: index 0 is taken first
        assert_eq!(knn_vote(&pts, &[1, 0, 1, 0], 2, &[0.5], 1).unwrap(), 1);
        assert!(knn_vote(&pts, &[1, 0, 1, 0], 2, &[0.5], 5).is_err());
        assert!(knn_vote(&pts, &[1, 0, 1, 0], 2, &[0.5, 1.0], 1).is_err());
    }

    #[test]
    fn embedding_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = toy_dataset(&mut rng, 20);
        let mut m = fit(&ds, &TtNpeConfig::new(vec![3, 2], 3)).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"TTNE");
        let back = FittedTtNpe::from_bytes(&bytes).unwrap();
        m.history.clear();
        m.sweeps = 0;
        assert_eq!(back, m);
        assert!(FittedTtNpe::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(FittedTtNpe::from_bytes(&extra).is_err());
    }
}
