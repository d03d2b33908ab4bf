//! Parameter counts and compression ratios for subspace and embedding models.
//!
//! Two families of counts exist:
//!
//! * subspace storage (`dim_*`), which subtracts `r(r+1)/2` per orthonormal
//!   factor, and the embedding storage that adds `r * N_tr` stored coefficients;
//! * manifold dimensions (`manifold_dim_*`), which subtract the `r_i^2` gauge
//!   freedom between adjacent factors instead.
//!
//! The two agree for PCA and differ for the tensor models. Compression ratios
//! are always `total_storage / (N_tr * d)`.
//!
//! Every count is an exact integer; only the ratio is real-valued.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StorageMethod {
    Pca,
    TPca,
    TtPca,
    Knn,
    Tnpe,
    TtNpe,
}

impl StorageMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            StorageMethod::Pca => "PCA",
            StorageMethod::TPca => "T-PCA",
            StorageMethod::TtPca => "TT-PCA",
            StorageMethod::Knn => "KNN",
            StorageMethod::Tnpe => "TNPE",
            StorageMethod::TtNpe => "TT-NPE",
        }
    }
}

impl fmt::Display for StorageMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StorageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "pca" => Ok(StorageMethod::Pca),
            "tpca" => Ok(StorageMethod::TPca),
            "ttpca" => Ok(StorageMethod::TtPca),
            "knn" => Ok(StorageMethod::Knn),
            "tnpe" => Ok(StorageMethod::Tnpe),
            "ttnpe" => Ok(StorageMethod::TtNpe),
            _ => Err(Error::InvalidConfig(format!("unknown storage method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StorageReport {
    pub method: StorageMethod,
    /// Parameters needed for the basis (or the transforms) alone.
    pub subspace_dim: u64,
    /// Everything that is stored, including embedded training data where applicable.
    pub total_storage: u64,
    pub compression_ratio: f64,
}

impl StorageReport {
    fn new(method: StorageMethod, subspace_dim: u64, total_storage: u64, d: u64, n_train: u64) -> Self {
        Self {
            method,
            subspace_dim,
            total_storage,
            compression_ratio: total_storage as f64 / (n_train as f64 * d as f64),
        }
    }
}

/// Which T-PCA count to report: the general rank-vector form
/// `sum(I_i r_i - r_i^2) + prod(r_i)`, or the equal-dims form
/// `r^(n+1) + n (I r - r(r+1)/2)` that assumes `r` stored cores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TpcaVariant {
    #[default]
    General,
    EqualDims,
}

fn to_u64(v: i128, what: &str) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} evaluates to {v}, out of range")))
}

fn check_positive(name: &str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidConfig(format!("{name} must be positive")));
    }
    Ok(())
}

fn check_dims(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidConfig("need at least one mode".into()));
    }
    if dims.len() != ranks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} dims but {} ranks",
            dims.len(),
            ranks.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("mode sizes must be positive: {dims:?}")));
    }
    Ok(())
}

fn tri(r: i128) -> i128 {
    r * (r + 1) / 2
}

/// Exact integer `n`-th root of `d`, or an error when `d` is not a perfect power.
pub fn exact_root(d: u64, n: u32) -> Result<u64> {
    check_positive("d", d)?;
    check_positive("n", u64::from(n))?;
    let guess = (d as f64).powf(1.0 / f64::from(n)).round() as u64;
    for cand in guess.saturating_sub(1)..=guess + 1 {
        if cand.checked_pow(n) == Some(d) {
            return Ok(cand);
        }
    }
    Err(Error::InvalidConfig(format!("{d} is not a perfect {n}-th power")))
}

/// `dim(PCA) = d r - r(r+1)/2`; also the PCA manifold dimension.
pub fn dim_pca(d: u64, r: u64) -> Result<u64> {
    check_positive("d", d)?;
    if r > d {
        return Err(Error::InvalidConfig(format!("PCA rank {r} exceeds dimension {d}")));
    }
    let (d, r) = (i128::from(d), i128::from(r));
    to_u64(d * r - tri(r), "dim(PCA)")
}

/// General TT subspace storage, one orthonormal factor per core:
/// `sum_i (r_(i-1) I_i r_i - r_i(r_i+1)/2)` with `r_0 = 1`.
/// With equal mode sizes and ranks this is `d^(1/n) r (r(n-1)+1) - r(r+1)n/2`.
pub fn dim_ttpca(dims: &[usize], ranks: &[usize]) -> Result<u64> {
    check_dims(dims, ranks)?;
    let mut prev = 1i128;
    let mut total = 0i128;
    for (&i, &r) in dims.iter().zip(ranks) {
        let r = r as i128;
        total += prev * i as i128 * r - tri(r);
        prev = r;
    }
    to_u64(total, "dim(TT-PCA)")
}

/// Equal-dims closed form `d^(1/n) r (r(n-1)+1) - r(r+1)n/2`.
pub fn dim_ttpca_equal(d: u64, n: u32, r: u64) -> Result<u64> {
    let root = i128::from(exact_root(d, n)?);
    let (n, r) = (i128::from(n), i128::from(r));
    to_u64(root * r * (r * (n - 1) + 1) - tri(r) * n, "dim(TT-PCA)")
}

/// TT manifold dimension `sum_i r_(i-1) I_i r_i - sum_(i<n) r_i^2`.
pub fn manifold_dim_ttpca(dims: &[usize], ranks: &[usize]) -> Result<u64> {
    check_dims(dims, ranks)?;
    let mut prev = 1i128;
    let mut total = 0i128;
    for (k, (&i, &r)) in dims.iter().zip(ranks).enumerate() {
        let r = r as i128;
        total += prev * i as i128 * r;
        if k + 1 < dims.len() {
            total -= r * r;
        }
        prev = r;
    }
    to_u64(total, "manifold dim(TT-PCA)")
}

/// T-PCA storage. `ranks` are the per-mode Tucker ranks.
pub fn dim_tpca(dims: &[usize], ranks: &[usize], variant: TpcaVariant) -> Result<u64> {
    check_dims(dims, ranks)?;
    match variant {
        TpcaVariant::General => {
            let factors: i128 = dims
                .iter()
                .zip(ranks)
                .map(|(&i, &r)| i as i128 * r as i128 - (r as i128) * (r as i128))
                .sum();
            let core: i128 = ranks.iter().map(|&r| r as i128).product();
            to_u64(factors + core, "dim(T-PCA)")
        }
        TpcaVariant::EqualDims => {
            let i = dims[0];
            let r = ranks[0];
            if dims.iter().any(|&x| x != i) || ranks.iter().any(|&x| x != r) {
                return Err(Error::InvalidConfig(
                    "equal-dims T-PCA form needs equal mode sizes and ranks".into(),
                ));
            }
            let n = dims.len() as u32;
            let (i, r) = (i as i128, r as i128);
            to_u64(
                r.pow(n + 1) + i128::from(n) * (i * r - tri(r)),
                "dim(T-PCA)",
            )
        }
    }
}

/// Total storage for `N` points under PCA: `dim(PCA) + r N`.
pub fn manifold_storage_pca(d: u64, r: u64, n: u64) -> Result<u64> {
    Ok(dim_pca(d, r)? + r * n)
}

/// Total storage for `N` points under T-PCA: `sum(I_i r_i - r_i^2) + N prod(r_i)`.
pub fn manifold_storage_tpca(dims: &[usize], ranks: &[usize], n: u64) -> Result<u64> {
    check_dims(dims, ranks)?;
    let factors: i128 = dims
        .iter()
        .zip(ranks)
        .map(|(&i, &r)| i as i128 * r as i128 - (r as i128) * (r as i128))
        .sum();
    let core: i128 = ranks.iter().map(|&r| r as i128).product();
    to_u64(factors + i128::from(n) * core, "storage(T-PCA)")
}

/// Total storage for `N` points under TT-PCA: manifold dimension `+ N r_n`.
pub fn manifold_storage_ttpca(dims: &[usize], ranks: &[usize], n: u64) -> Result<u64> {
    let base = manifold_dim_ttpca(dims, ranks)?;
    Ok(base + n * *ranks.last().expect("checked non-empty") as u64)
}

/// Report for a PCA subspace; the ratio is `dim / (N_tr d)`.
pub fn storage_pca(d: u64, r: u64, n_train: u64) -> Result<StorageReport> {
    check_positive("N_tr", n_train)?;
    let dim = dim_pca(d, r)?;
    Ok(StorageReport::new(StorageMethod::Pca, dim, dim, d, n_train))
}

pub fn storage_ttpca(dims: &[usize], ranks: &[usize], n_train: u64) -> Result<StorageReport> {
    check_positive("N_tr", n_train)?;
    let dim = dim_ttpca(dims, ranks)?;
    let d = dims.iter().product::<usize>() as u64;
    Ok(StorageReport::new(StorageMethod::TtPca, dim, dim, d, n_train))
}

pub fn storage_tpca(
    dims: &[usize],
    ranks: &[usize],
    variant: TpcaVariant,
    n_train: u64,
) -> Result<StorageReport> {
    check_positive("N_tr", n_train)?;
    let dim = dim_tpca(dims, ranks, variant)?;
    let d = dims.iter().product::<usize>() as u64;
    Ok(StorageReport::new(StorageMethod::TPca, dim, dim, d, n_train))
}

/// Closed-form storage of the embedding methods for data dimension `d`,
/// tensor order `n`, rank `r`, and `N_tr` training points:
///
/// * KNN: `d N_tr`
/// * TNPE: `r^n N_tr + n (d^(1/n) r - r(r+1)/2)`
/// * TT-NPE: `d^(1/n) r (r(n-1)+1) - r(r+1)n/2 + r N_tr`
pub fn storage_embedding(
    method: StorageMethod,
    d: u64,
    n: u32,
    r: u64,
    n_train: u64,
) -> Result<StorageReport> {
    check_positive("d", d)?;
    check_positive("N_tr", n_train)?;
    let nt = i128::from(n_train);
    let (subspace, total) = match method {
        StorageMethod::Knn => (0, i128::from(d) * nt),
        StorageMethod::Tnpe => {
            let root = i128::from(exact_root(d, n)?);
            let r = i128::from(r);
            let transforms = i128::from(n) * (root * r - tri(r));
            (transforms, r.pow(n) * nt + transforms)
        }
        StorageMethod::TtNpe => {
            let basis = i128::from(dim_ttpca_equal(d, n, r)?);
            (basis, basis + i128::from(r) * nt)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{other} is not an embedding method"
            )))
        }
    };
    Ok(StorageReport::new(
        method,
        to_u64(subspace, "subspace storage")?,
        to_u64(total, "total storage")?,
        d,
        n_train,
    ))
}

/// TT-NPE storage for an arbitrary rank vector: `dim_ttpca(dims, ranks) + r_n N_tr`.
pub fn storage_ttnpe(dims: &[usize], ranks: &[usize], n_train: u64) -> Result<StorageReport> {
    check_positive("N_tr", n_train)?;
    let basis = dim_ttpca(dims, ranks)?;
    let r_n = *ranks.last().expect("checked non-empty") as u64;
    let d = dims.iter().product::<usize>() as u64;
    Ok(StorageReport::new(
        StorageMethod::TtNpe,
        basis,
        basis + r_n * n_train,
        d,
        n_train,
    ))
}

/// TNPE storage with per-mode Tucker ranks: `prod(r_i) N_tr + sum(I_i r_i - r_i(r_i+1)/2)`.
/// Equal dims and ranks give the closed form of [`storage_embedding`].
pub fn storage_tnpe(dims: &[usize], ranks: &[usize], n_train: u64) -> Result<StorageReport> {
    check_dims(dims, ranks)?;
    check_positive("N_tr", n_train)?;
    if let Some((i, r)) = dims.iter().zip(ranks).find(|&(&i, &r)| r == 0 || r > i) {
        return Err(Error::InvalidConfig(format!(
            "Tucker rank {r} outside 1..={i}"
        )));
    }
    let transforms: i128 = dims
        .iter()
        .zip(ranks)
        .map(|(&i, &r)| i as i128 * r as i128 - tri(r as i128))
        .sum();
    let core: i128 = ranks.iter().map(|&r| r as i128).product();
    let d = dims.iter().product::<usize>() as u64;
    Ok(StorageReport::new(
        StorageMethod::Tnpe,
        to_u64(transforms, "TNPE transforms")?,
        to_u64(core * i128::from(n_train) + transforms, "TNPE storage")?,
        d,
        n_train,
    ))
}
