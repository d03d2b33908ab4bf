//! Tensor train subspace learning.
//!
//! Samples are `n`-way tensors; a subspace is spanned by the columns of the
//! left unfolding of a chain of 3-way cores. [`ttpca`] fits such a subspace
//! by successive truncated SVDs and classifies by nearest subspace,
//! [`ttnpe`] fits a neighborhood preserving embedding constrained to the same
//! structure, and [`experiment`] sweeps both against PCA and raw KNN.
//!
//! Flattening is first-index-fastest everywhere, which matches nalgebra's
//! column-major storage, so vectorizations and unfoldings are free.

pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod stiefel;
pub mod synthetic;
pub mod tensor;
pub mod ttnpe;
pub mod ttpca;

pub use data::LabeledDataset;
pub use error::{Error, Result};
pub use model::TtSubspace;
pub use tensor::{DenseTensor, Matrix};
