//! The tensor train subspace: a chain of 3-mode cores whose connect product,
//! left-unfolded, is the basis of a linear subspace of the vectorized data
//! space.

pub mod format;
pub mod storage;

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::orthonormality_error;
use crate::tensor::{left_unfold, right_unfold, DenseTensor, Matrix};

/// Tolerance on `max |L^T L - I|` for a core (or basis) to count as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct TtSubspace {
    cores: Vec<DenseTensor>,
    orthonormal: bool,
    basis: OnceLock<Matrix>,
}

impl Clone for TtSubspace {
    fn clone(&self) -> Self {
        Self {
            cores: self.cores.clone(),
            orthonormal: self.orthonormal,
            basis: self.basis.clone(),
        }
    }
}

impl PartialEq for TtSubspace {
    fn eq(&self, other: &Self) -> bool {
        self.cores == other.cores && self.orthonormal == other.orthonormal
    }
}

impl TtSubspace {
    /// Validates the rank chain and detects left-orthonormality of every core.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        validate_chain(&cores)?;
        let orthonormal = max_core_error(&cores)? <= ORTHONORMAL_TOL;
        Ok(Self {
            cores,
            orthonormal,
            basis: OnceLock::new(),
        })
    }

    /// Like [`TtSubspace::new`] but takes the orthonormal flag from the caller.
    /// A set flag is still verified.
    pub fn with_flag(cores: Vec<DenseTensor>, orthonormal: bool) -> Result<Self> {
        validate_chain(&cores)?;
        if orthonormal {
            let err = max_core_error(&cores)?;
            if err > ORTHONORMAL_TOL {
                return Err(Error::NotOrthonormal(err));
            }
        }
        Ok(Self {
            cores,
            orthonormal,
            basis: OnceLock::new(),
        })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// `(r0 = 1, r1, .., rn)`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.cores.iter().map(|c| c.shape()[2]))
            .collect()
    }

    /// Number of basis vectors `r_n`.
    pub fn embedding_dim(&self) -> usize {
        self.cores.last().map_or(0, |c| c.shape()[2])
    }

    /// Ambient dimension `d = I1 * .. * In`.
    pub fn ambient_dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn max_core_orthonormality_error(&self) -> f64 {
        max_core_error(&self.cores).unwrap_or(f64::INFINITY)
    }

    /// `U = L(U1 .. Un)`, a `d x r_n` matrix. Computed once and cached.
    pub fn basis(&self) -> &Matrix {
        self.basis.get_or_init(|| {
            materialize_basis(&self.cores).expect("cores validated at construction")
        })
    }

    fn require_orthonormal(&self) -> Result<()> {
        if self.orthonormal {
            Ok(())
        } else {
            Err(Error::NotOrthonormal(self.max_core_orthonormality_error()))
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let d = self.ambient_dim();
        if len != d {
            return Err(Error::DimensionMismatch(format!(
                "subspace lives in dimension {d}, got a vector of length {len}"
            )));
        }
        Ok(())
    }

    /// Coefficients `U^T V(x)`.
    pub fn project(&self, x: &DenseTensor) -> Result<Vec<f64>> {
        if x.shape() != self.dims().as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "tensor shape {:?} does not match subspace dims {:?}",
                x.shape(),
                self.dims()
            )));
        }
        self.project_vector(x.data())
    }

    /// Coefficients `U^T x` for an already vectorized sample.
    pub fn project_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_orthonormal()?;
        self.check_len(x.len())?;
        let u = self.basis();
        Ok((0..u.ncols())
            .map(|j| u.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `U^T D` for a `d x N` sample matrix.
    pub fn project_columns(&self, data: &Matrix) -> Result<Matrix> {
        self.require_orthonormal()?;
        self.check_len(data.nrows())?;
        Ok(self.basis().tr_mul(data))
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let u = self.basis();
        if coeffs.len() != u.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                u.ncols(),
                coeffs.len()
            )));
        }
        let a = nalgebra::DVector::from_column_slice(coeffs);
        Ok((u * a).as_slice().to_vec())
    }

    /// `||U U^T V(x) - V(x)||^2`, the squared distance from `x` to the subspace.
    pub fn residual_norm_sq(&self, x: &DenseTensor) -> Result<f64> {
        if x.shape() != self.dims().as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "tensor shape {:?} does not match subspace dims {:?}",
                x.shape(),
                self.dims()
            )));
        }
        self.residual_norm_sq_vector(x.data())
    }

    pub fn residual_norm_sq_vector(&self, x: &[f64]) -> Result<f64> {
        let coeffs = self.project_vector(x)?;
        let back = self.reconstruct(&coeffs)?;
        Ok(back.iter().zip(x).map(|(p, v)| (v - p) * (v - p)).sum())
    }
}

fn validate_chain(cores: &[DenseTensor]) -> Result<()> {
    if cores.is_empty() {
        return Err(Error::RankChain("a TT subspace needs at least one core".into()));
    }
    let mut prev = 1;
    for (i, core) in cores.iter().enumerate() {
        let shape = core.shape();
        if shape.len() != 3 {
            return Err(Error::RankChain(format!(
                "core {i} has shape {shape:?}, expected 3 modes"
            )));
        }
        if shape[0] != prev {
            return Err(Error::RankChain(format!(
                "core {i} has left rank {} but the previous right rank is {prev}",
                shape[0]
            )));
        }
        if shape[2] > shape[0] * shape[1] {
            return Err(Error::RankChain(format!(
                "core {i} rank {} exceeds r_prev * I = {}",
                shape[2],
                shape[0] * shape[1]
            )));
        }
        prev = shape[2];
    }
    Ok(())
}

fn max_core_error(cores: &[DenseTensor]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for core in cores {
        worst = worst.max(orthonormality_error(&left_unfold(core)?));
    }
    Ok(worst)
}

/// `L(U1 U2 .. Un)`, built left to right by repeated connect products.
pub fn materialize_basis(cores: &[DenseTensor]) -> Result<Matrix> {
    let Some((first, rest)) = cores.split_first() else {
        return Err(Error::RankChain("no cores".into()));
    };
    if first.ndim() != 3 || first.shape()[0] != 1 {
        return Err(Error::RankChain(format!(
            "first core must have shape (1, I, r), got {:?}",
            first.shape()
        )));
    }
    let mut acc = left_unfold(first)?;
    for core in rest {
        if core.ndim() != 3 || core.shape()[0] != acc.ncols() {
            return Err(Error::RankChain(format!(
                "core shape {:?} does not chain onto rank {}",
                core.shape(),
                acc.ncols()
            )));
        }
        // (rows x r) * (r x I*r') read column-major is (rows*I) x r'
        let prod = &acc * right_unfold(core)?;
        let rows = acc.nrows() * core.shape()[1];
        acc = Matrix::from_column_slice(rows, core.shape()[2], prod.as_slice());
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_orthonormal_cores;
    use crate::tensor::{connect_chain, left_refold};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_core_basis_is_left_unfolding() {
        let core = DenseTensor::new(vec![1, 3, 2], (0..6).map(f64::from).collect()).unwrap();
        let basis = materialize_basis(std::slice::from_ref(&core)).unwrap();
        assert_eq!(basis, left_unfold(&core).unwrap());
    }

    #[test]
    fn two_rank_one_cores() {
        let (a, b, c) = (2.0, 3.0, 5.0);
        let u1 = DenseTensor::new(vec![1, 2, 1], vec![a, b]).unwrap();
        let u2 = DenseTensor::new(vec![1, 1, 1], vec![c]).unwrap();
        let basis = materialize_basis(&[u1, u2]).unwrap();
        assert_eq!(basis.as_slice(), &[a * c, b * c]);
    }

    #[test]
    fn basis_matches_connect_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cores = random_orthonormal_cores(&[3, 2, 4], &[2, 3, 2], &mut rng).unwrap();
        let chain = connect_chain(&cores, 1).unwrap();
        assert_eq!(materialize_basis(&cores).unwrap(), left_unfold(&chain).unwrap());
    }

    #[test]
    fn orthonormal_cores_give_orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cores = random_orthonormal_cores(&[4, 3, 4], &[3, 3, 2], &mut rng).unwrap();
        let s = TtSubspace::new(cores).unwrap();
        assert!(s.is_orthonormal());
        assert!(orthonormality_error(s.basis()) < 1e-10);
    }

    #[test]
    fn rejects_broken_chains() {
        let a = DenseTensor::zeros(vec![1, 2, 2]).unwrap();
        let b = DenseTensor::zeros(vec![3, 2, 1]).unwrap();
        assert!(matches!(TtSubspace::new(vec![a, b]), Err(Error::RankChain(_))));
        let first = DenseTensor::zeros(vec![2, 2, 1]).unwrap();
        assert!(TtSubspace::new(vec![first]).is_err());
        let wide = DenseTensor::zeros(vec![1, 2, 3]).unwrap();
        assert!(TtSubspace::new(vec![wide]).is_err());
        assert!(TtSubspace::new(vec![]).is_err());
    }

    #[test]
    fn projection_requires_orthonormal() {
        let core = DenseTensor::new(vec![1, 2, 1], vec![1.0, 1.0]).unwrap();
        let s = TtSubspace::new(vec![core]).unwrap();
        assert!(!s.is_orthonormal());
        assert!(matches!(
            s.project_vector(&[1.0, 0.0]),
            Err(Error::NotOrthonormal(_))
        ));
        assert!(TtSubspace::with_flag(s.into_cores(), true).is_err());
    }

    #[test]
    fn projection_of_in_span_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cores = random_orthonormal_cores(&[3, 4], &[2, 3], &mut rng).unwrap();
        let s = TtSubspace::new(cores).unwrap();
        let a = [0.5, -1.5, 2.0];
        let x = s.reconstruct(&a).unwrap();
        let coeffs = s.project_vector(&x).unwrap();
        for (c, e) in coeffs.iter().zip(&a) {
            assert!((c - e).abs() < 1e-10);
        }
        let t = DenseTensor::new(vec![3, 4], x).unwrap();
        assert!(s.residual_norm_sq(&t).unwrap() <= 1e-18);
    }

    #[test]
    fn orthogonal_point_projects_to_zero_and_unit_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cores = random_orthonormal_cores(&[4, 3], &[2, 2], &mut rng).unwrap();
        let s = TtSubspace::new(cores).unwrap();
        let u = s.basis().clone();
        // Gram-Schmidt a unit vector orthogonal to the basis
        let full = crate::linalg::complete_orthonormal(&u, 3).unwrap();
        let e: Vec<f64> = full.column(2).iter().copied().collect();
        let coeffs = s.project_vector(&e).unwrap();
        assert!(coeffs.iter().all(|c| c.abs() < 1e-12));
        // basis column + unit orthogonal noise has residual exactly 1
        let x: Vec<f64> = u.column(0).iter().zip(&e).map(|(a, b)| a + b).collect();
        let r = s.residual_norm_sq_vector(&x).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shape_mismatch_errors() {
        let core = left_refold(&Matrix::identity(2, 1), 1, 2, 1).unwrap();
        let s = TtSubspace::new(vec![core]).unwrap();
        let bad = DenseTensor::zeros(vec![3]).unwrap();
        assert!(s.project(&bad).is_err());
        assert!(s.residual_norm_sq(&bad).is_err());
        assert!(s.reconstruct(&[1.0, 2.0]).is_err());
    }
}
