//! IDX files (the MNIST distribution format).
//!
//! Header: big-endian `u32` magic `0x000008NN` where `08` marks unsigned
//! bytes and `NN` is the number of dimensions, then one big-endian `u32` per
//! dimension, then the payload in row-major order. Images use `0x00000803`
//! (`count, rows, cols`), labels `0x00000801` (`count`).
//!
//! An image is read as the tensor `X(row, col)` and stored first-index-fastest,
//! so pixel `(row, col)` of a 28x28 image lands at `row + 28*col`.

use std::fs;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const UBYTE: u8 = 0x08;

struct IdxArray {
    shape: Vec<usize>,
    payload: Vec<u8>,
}

fn parse_idx(bytes: &[u8], expected_ndim: u8, what: &str) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::Format(format!("{what}: file too short for an IDX header")));
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != UBYTE || bytes[3] != expected_ndim {
        return Err(Error::Format(format!(
            "{what}: bad magic 0x{:02x}{:02x}{:02x}{:02x}, expected 0x000008{expected_ndim:02x}",
            bytes[0], bytes[1], bytes[2], bytes[3]
        )));
    }
    let ndim = expected_ndim as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Format(format!("{what}: truncated header")));
    }
    let shape: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| Error::Format(format!("{what}: size overflow")))?;
    let payload = &bytes[header..];
    if payload.len() != len {
        return Err(Error::Format(format!(
            "{what}: header promises {len} bytes of data, file has {}",
            payload.len()
        )));
    }
    Ok(IdxArray {
        shape,
        payload: payload.to_vec(),
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

/// Images as a `d x N` matrix (pixels widened to `f64` in `[0, 255]`) plus the
/// per-image shape.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<(Matrix, Vec<usize>)> {
    let path = path.as_ref();
    let arr = parse_idx(&read(path)?, 3, &path.display().to_string())?;
    let (n, rows, cols) = (arr.shape[0], arr.shape[1], arr.shape[2]);
    let d = rows * cols;
    let mut m = Matrix::zeros(d, n);
    for img in 0..n {
        let src = &arr.payload[img * d..(img + 1) * d];
        let mut dst = m.column_mut(img);
        for r in 0..rows {
            for c in 0..cols {
                dst[r + rows * c] = f64::from(src[r * cols + c]);
            }
        }
    }
    Ok((m, vec![rows, cols]))
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let arr = parse_idx(&read(path)?, 1, &path.display().to_string())?;
    Ok(arr.payload.iter().map(|&b| i64::from(b)).collect())
}

/// Loads an image file and its label file. Samples keep the image shape as
/// their tensor dims until reshaped.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (data, shape) = load_idx_images(images)?;
    let raw = load_idx_labels(labels)?;
    if raw.len() != data.ncols() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            data.ncols(),
            raw.len()
        )));
    }
    if data.ncols() == 0 {
        return Err(Error::EmptyData("IDX file holds no images".into()));
    }
    LabeledDataset::from_raw_labels(data, &raw, shape)
}

/// Writes a dataset whose dims are `[rows, cols]` as an IDX image/label pair.
/// Pixels are rounded and clamped to `0..=255`; labels must fit in a byte.
pub fn write_idx(ds: &LabeledDataset, images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
    let [rows, cols] = ds.dims()[..] else {
        return Err(Error::InvalidConfig(format!(
            "IDX images need 2-mode dims, got {:?}",
            ds.dims()
        )));
    };
    let n = ds.n_samples();
    let mut img = Vec::with_capacity(16 + n * rows * cols);
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    for v in [n, rows, cols] {
        img.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for i in 0..n {
        let col = ds.sample_slice(i);
        for r in 0..rows {
            for c in 0..cols {
                img.push(col[r + rows * c].round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    for i in 0..n {
        let raw = ds.raw_label(i);
        let b = u8::try_from(raw)
            .map_err(|_| Error::InvalidConfig(format!("label {raw} does not fit in a byte")))?;
        lab.push(b);
    }
    let images = images.as_ref();
    let labels = labels.as_ref();
    fs::write(images, img).map_err(|e| Error::io(format!("writing {}", images.display()), e))?;
    fs::write(labels, lab).map_err(|e| Error::io(format!("writing {}", labels.display()), e))?;
    Ok(())
}
