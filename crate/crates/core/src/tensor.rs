//! Dense tensors and the reshaping operators of the tensor train calculus.
//!
//! Every flattening in this crate is first-index-fastest: entry
//! `(i1, .., in)` of a tensor with shape `(I1, .., In)` lives at flat position
//! `i1 + I1*i2 + I1*I2*i3 + ...`. `nalgebra`'s column-major storage is the
//! two-mode case of the same rule, so most operators below are pure
//! relabelings of the underlying buffer.
//!
//! Mode indices in this API are 0-based.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// An n-way real array stored first-index-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        check_shape(&shape)?;
        let len = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor from a column vector (the inverse of [`DenseTensor::vectorize`]).
    pub fn from_vector(shape: Vec<usize>, v: &[f64]) -> Result<Self> {
        Self::new(shape, v.to_vec())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut flat = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.shape) {
            assert!(i < n, "index {i} out of bounds for mode of size {n}");
            flat += i * stride;
            stride *= n;
        }
        flat
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let flat = self.flat_index(index);
        self.data[flat] = value;
    }

    /// Column vector `V(X)` of length `prod(shape)`.
    pub fn vectorize(&self) -> Matrix {
        Matrix::from_column_slice(self.data.len(), 1, &self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn three_modes(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(Error::InvalidShape(format!(
                "expected a 3-mode tensor, got shape {:?}",
                self.shape
            ))),
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("tensor needs at least one mode".into()));
    }
    if let Some(pos) = shape.iter().position(|&s| s == 0) {
        return Err(Error::InvalidShape(format!(
            "mode {pos} has size 0 in shape {shape:?}"
        )));
    }
    Ok(())
}

/// Mode-`mode` unfolding: rows follow the chosen mode, columns run over the
/// remaining modes in their original order with the earliest one fastest.
pub fn mode_unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    let ndim = t.ndim();
    if mode >= ndim {
        return Err(Error::ModeOutOfRange { mode, ndim });
    }
    let left: usize = t.shape[..mode].iter().product();
    let size = t.shape[mode];
    let right: usize = t.shape[mode + 1..].iter().product();
    let mut out = Matrix::zeros(size, left * right);
    for b in 0..right {
        for i in 0..size {
            let base = left * (i + size * b);
            for a in 0..left {
                out[(i, a + left * b)] = t.data[base + a];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`mode_unfold`].
pub fn mode_refold(m: &Matrix, shape: &[usize], mode: usize) -> Result<DenseTensor> {
    check_shape(shape)?;
    let ndim = shape.len();
    if mode >= ndim {
        return Err(Error::ModeOutOfRange { mode, ndim });
    }
    let left: usize = shape[..mode].iter().product();
    let size = shape[mode];
    let right: usize = shape[mode + 1..].iter().product();
    if m.nrows() != size || m.ncols() != left * right {
        return Err(Error::DimensionMismatch(format!(
            "mode-{mode} refold of shape {shape:?} needs {size}x{}, got {}x{}",
            left * right,
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![0.0; size * left * right];
    for b in 0..right {
        for i in 0..size {
            let base = left * (i + size * b);
            for a in 0..left {
                data[base + a] = m[(i, a + left * b)];
            }
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}

/// Left unfolding `L(X)` of a core `(r_prev, I, r_next)`: an
/// `(r_prev*I) x r_next` matrix with row `a + r_prev*i`.
pub fn left_unfold(t: &DenseTensor) -> Result<Matrix> {
    let (a, b, c) = t.three_modes()?;
    Ok(Matrix::from_column_slice(a * b, c, &t.data))
}

pub fn left_refold(m: &Matrix, r_prev: usize, dim: usize, r_next: usize) -> Result<DenseTensor> {
    if m.nrows() != r_prev * dim || m.ncols() != r_next {
        return Err(Error::DimensionMismatch(format!(
            "left refold to ({r_prev}, {dim}, {r_next}) needs {}x{r_next}, got {}x{}",
            r_prev * dim,
            m.nrows(),
            m.ncols()
        )));
    }
    DenseTensor::new(vec![r_prev, dim, r_next], m.as_slice().to_vec())
}

/// Right unfolding `R(X)`: an `r_prev x (I*r_next)` matrix (the mode-1 unfolding).
pub fn right_unfold(t: &DenseTensor) -> Result<Matrix> {
    let (a, b, c) = t.three_modes()?;
    Ok(Matrix::from_column_slice(a, b * c, &t.data))
}

pub fn right_refold(m: &Matrix, r_prev: usize, dim: usize, r_next: usize) -> Result<DenseTensor> {
    if m.nrows() != r_prev || m.ncols() != dim * r_next {
        return Err(Error::DimensionMismatch(format!(
            "right refold to ({r_prev}, {dim}, {r_next}) needs {r_prev}x{}, got {}x{}",
            dim * r_next,
            m.nrows(),
            m.ncols()
        )));
    }
    DenseTensor::new(vec![r_prev, dim, r_next], m.as_slice().to_vec())
}

/// Tensor connect product of two 3-mode cores.
///
/// The result has shape `(r_u, I_u*I_v, r_v)` with the `u` middle index
/// fastest. Its buffer equals `L(u) * R(v)` read column-major, which is the
/// same thing as `L(result) = (I ⊗ L(u)) * L(v)`.
pub fn connect_product(u: &DenseTensor, v: &DenseTensor) -> Result<DenseTensor> {
    let (ua, ub, uc) = u.three_modes()?;
    let (va, vb, vc) = v.three_modes()?;
    if uc != va {
        return Err(Error::RankChain(format!(
            "cannot connect core {:?} with core {:?}",
            u.shape, v.shape
        )));
    }
    let prod = left_unfold(u)? * right_unfold(v)?;
    DenseTensor::new(vec![ua, ub * vb, vc], prod.as_slice().to_vec())
}

/// Connect product of a whole chain. An empty chain yields the `(r, 1, r)`
/// identity core, so callers can treat missing left or right factors uniformly.
pub fn connect_chain(cores: &[DenseTensor], empty_rank: usize) -> Result<DenseTensor> {
    let Some((first, rest)) = cores.split_first() else {
        return identity_core(empty_rank);
    };
    rest.iter()
        .try_fold(first.clone(), |acc, core| connect_product(&acc, core))
}

/// The `(r, 1, r)` core whose left and right unfoldings are both `I_r`.
pub fn identity_core(r: usize) -> Result<DenseTensor> {
    let eye = Matrix::identity(r, r);
    DenseTensor::new(vec![r, 1, r], eye.as_slice().to_vec())
}

/// `T_k`: relabels a `(I1..In) x r_n` matrix as `(I1..Ik) x (I(k+1)..In * r_n)`.
/// `k` counts leading modes and must lie in `1..=n`.
pub fn reshape_t(m: &Matrix, k: usize, dims: &[usize], r_n: usize) -> Result<Matrix> {
    let n = dims.len();
    if k == 0 || k > n {
        return Err(Error::ModeOutOfRange { mode: k, ndim: n });
    }
    let d: usize = dims.iter().product();
    if m.nrows() != d || m.ncols() != r_n {
        return Err(Error::DimensionMismatch(format!(
            "reshape expects {d}x{r_n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let rows: usize = dims[..k].iter().product();
    let cols: usize = dims[k..].iter().product::<usize>() * r_n;
    Ok(Matrix::from_column_slice(rows, cols, m.as_slice()))
}

/// Kronecker product `I_reps ⊗ m` (block diagonal with `reps` copies of `m`).
pub fn kron_identity(reps: usize, m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    let mut out = Matrix::zeros(reps * r, reps * c);
    for k in 0..reps {
        out.view_mut((k * r, k * c), (r, c)).copy_from(m);
    }
    out
}
