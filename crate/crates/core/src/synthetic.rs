//! Random generators for TT-structured subspaces and data lying in them.
//! Used by the examples, the benchmarks in `tests/`, and the sweep harness.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthonormal};
use crate::model::TtSubspace;
use crate::tensor::{left_refold, DenseTensor, Matrix};

/// Random cores with left-orthonormal unfoldings. `ranks` is `(r1, .., rn)`.
pub fn random_orthonormal_cores<R: Rng + ?Sized>(
    dims: &[usize],
    ranks: &[usize],
    rng: &mut R,
) -> Result<Vec<DenseTensor>> {
    if dims.len() != ranks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} dims but {} ranks",
            dims.len(),
            ranks.len()
        )));
    }
    let mut prev = 1;
    let mut cores = Vec::with_capacity(dims.len());
    for (&dim, &r) in dims.iter().zip(ranks) {
        if r == 0 || r > prev * dim {
            return Err(Error::RankChain(format!(
                "rank {r} infeasible after rank {prev} with mode size {dim}"
            )));
        }
        let l = random_orthonormal(prev * dim, r, rng);
        cores.push(left_refold(&l, prev, dim, r)?);
        prev = r;
    }
    Ok(cores)
}

pub fn random_subspace<R: Rng + ?Sized>(
    dims: &[usize],
    ranks: &[usize],
    rng: &mut R,
) -> Result<TtSubspace> {
    TtSubspace::new(random_orthonormal_cores(dims, ranks, rng)?)
}

/// `N` samples `U * A` with Gaussian coefficients `A`, returned as a `d x N` matrix.
pub fn sample_in_subspace<R: Rng + ?Sized>(
    subspace: &TtSubspace,
    n_samples: usize,
    rng: &mut R,
) -> Matrix {
    let a = gaussian_matrix(subspace.embedding_dim(), n_samples, rng);
    subspace.basis() * a
}

/// Largest ranks a TT chain over `dims` can carry when the last rank is `r_n`:
/// `r_i <= r_(i-1) * I_i` from the left and `r_i <= I_(i+1) .. I_n * r_n` from the right.
pub fn max_feasible_ranks(dims: &[usize], r_n: usize) -> Vec<usize> {
    let n = dims.len();
    let mut ranks = vec![0; n];
    let mut left = 1usize;
    for i in 0..n {
        left = left.saturating_mul(dims[i]);
        let right = dims[i + 1..]
            .iter()
            .fold(r_n, |acc, &x| acc.saturating_mul(x));
        ranks[i] = left.min(right);
        left = ranks[i];
    }
    ranks
}

/// Every sample of a `d x N` matrix as a tensor of the given shape.
pub fn columns_as_tensors(data: &Matrix, dims: &[usize]) -> Result<Vec<DenseTensor>> {
    data.column_iter()
        .map(|c| DenseTensor::new(dims.to_vec(), c.iter().copied().collect()))
        .collect()
}
