//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// `max |M^T M - I|` over all entries.
pub fn orthonormality_error(m: &Matrix) -> f64 {
    let gram = m.transpose() * m;
    let mut worst: f64 = 0.0;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Largest entry of `|M - M^T|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Left singular vectors and singular values of `y`, sorted descending.
///
/// Wide inputs go through the eigendecomposition of the small Gram matrix
/// `Y Y^T`; otherwise a thin SVD is used. Either way at most `min(rows, cols)`
/// pairs are returned.
pub fn left_singular_pairs(y: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let (rows, cols) = y.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyData("SVD of an empty matrix".into()));
    }
    if cols > 2 * rows {
        let gram = y * y.transpose();
        let (_, vecs) = sym_eigen_descending(&gram);
        // sqrt of the eigenvalues is only accurate to sqrt(eps) * sigma_max;
        // the row norms of U^T Y resolve the small singular values properly
        let proj = vecs.tr_mul(y);
        let norms: Vec<f64> = proj.row_iter().map(|r| r.norm()).collect();
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        let sigma = order.iter().map(|&i| norms[i]).collect();
        let u = Matrix::from_fn(rows, rows, |r, c| vecs[(r, order[c])]);
        Ok((u, sigma))
    } else {
        let svd = y.clone().svd(true, false);
        let u = svd
            .u
            .ok_or_else(|| Error::Numeric("SVD did not return U".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = Matrix::from_fn(rows, order.len(), |r, c| u[(r, order[c])]);
        Ok((u, sigma))
    }
}

fn sym_eigen_sorted(m: &Matrix, descending: bool) -> (Vec<f64>, Matrix) {
    let n = m.nrows();
    // rows that are exactly zero are eigenvectors for 0; nalgebra's implicit
    // QR can return NaN when they are left in
    let live: Vec<usize> = (0..n).filter(|&i| m.row(i).iter().any(|&x| x != 0.0)).collect();
    let mut vals = vec![0.0; n];
    let mut vecs = Matrix::zeros(n, n);
    if live.len() == n {
        let eig = SymmetricEigen::new(m.clone());
        vals.copy_from_slice(eig.eigenvalues.as_slice());
        vecs = eig.eigenvectors;
    } else if !live.is_empty() {
        let reduced = Matrix::from_fn(live.len(), live.len(), |r, c| m[(live[r], live[c])]);
        let eig = SymmetricEigen::new(reduced);
        for (c, &v) in eig.eigenvalues.iter().enumerate() {
            vals[c] = v;
            for (r, &i) in live.iter().enumerate() {
                vecs[(i, c)] = eig.eigenvectors[(r, c)];
            }
        }
    }
    let dead = (0..n).filter(|i| live.binary_search(i).is_err());
    for (c, i) in (live.len()..n).zip(dead) {
        vecs[(i, c)] = 1.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ord = vals[a].total_cmp(&vals[b]);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    let sorted = order.iter().map(|&i| vals[i]).collect();
    let vecs = Matrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (sorted, vecs)
}

pub fn sym_eigen_ascending(m: &Matrix) -> (Vec<f64>, Matrix) {
    sym_eigen_sorted(m, false)
}

pub fn sym_eigen_descending(m: &Matrix) -> (Vec<f64>, Matrix) {
    sym_eigen_sorted(m, true)
}

/// Orthonormal polar factor `U V^T` of a tall `m x q` matrix (`q <= m`).
/// This maximizes `tr(X^T M)` over matrices with orthonormal columns.
pub fn polar_factor(m: &Matrix) -> Result<Matrix> {
    if m.ncols() > m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "polar factor needs a tall matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(Error::Numeric("SVD failed in polar factor".into())),
    }
}

/// Extends the orthonormal columns of `q` to `total` orthonormal columns by
/// Gram-Schmidt against the standard basis (deterministic).
pub fn complete_orthonormal(q: &Matrix, total: usize) -> Result<Matrix> {
    let rows = q.nrows();
    if total > rows {
        return Err(Error::RankChain(format!(
            "cannot fit {total} orthonormal columns in dimension {rows}"
        )));
    }
    let mut cols: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut candidate = 0;
    while cols.len() < total && candidate < rows {
        let mut v = nalgebra::DVector::zeros(rows);
        v[candidate] = 1.0;
        candidate += 1;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    if cols.len() < total {
        return Err(Error::Numeric("orthonormal completion failed".into()));
    }
    Ok(Matrix::from_columns(&cols[..total]))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random `rows x cols` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(cols <= rows, "need cols <= rows for orthonormal columns");
    let g = gaussian_matrix(rows, cols, rng);
    let q = g.qr().q();
    q.columns(0, cols).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_orthonormal_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_orthonormal(7, 3, &mut rng);
        assert!(orthonormality_error(&q) < 1e-13);
    }

    #[test]
    fn singular_pairs_agree_between_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = gaussian_matrix(3, 40, &mut rng);
        let (_, s_gram) = left_singular_pairs(&y).unwrap();
        let svd = y.clone().svd(false, false);
        let mut s_ref: Vec<f64> = svd.singular_values.iter().copied().collect();
        s_ref.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s_gram.iter().zip(&s_ref) {
            assert!((a - b).abs() < 1e-10 * s_ref[0]);
        }
    }

    #[test]
    fn completion_extends_basis() {
        let q = Matrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let full = complete_orthonormal(&q, 3).unwrap();
        assert!(orthonormality_error(&full) < 1e-14);
        assert_eq!(full.column(0), q.column(0));
        assert!(complete_orthonormal(&q, 4).is_err());
    }

    #[test]
    fn zero_rows_are_deflated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = gaussian_matrix(5, 3, &mut rng);
        let mut m = Matrix::zeros(8, 8);
        let live = [1, 2, 4, 6, 7];
        let small = &g * g.transpose();
        for (a, &i) in live.iter().enumerate() {
            for (b, &j) in live.iter().enumerate() {
                m[(i, j)] = small[(a, b)];
            }
        }
        let (vals, vecs) = sym_eigen_ascending(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(orthonormality_error(&vecs) < 1e-13);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
        assert!((&m * &vecs - &vecs * d).amax() < 1e-12);
    }

    #[test]
    fn polar_factor_of_orthonormal_is_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthonormal(6, 2, &mut rng);
        let p = polar_factor(&q).unwrap();
        assert!((p - &q).amax() < 1e-12);
    }
}
