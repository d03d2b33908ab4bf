//! Binary model files.
//!
//! `TTSS` (subspace), little-endian throughout:
//!
//! ```text
//! "TTSS" | u32 version = 1 | u32 n | (n+1) x u32 ranks | n x u32 dims
//!        | cores in order, f64 first-index-fastest | u8 orthonormal flag
//! ```
//!
//! The classifier (`TTCL`) and embedding (`TTNE`) containers embed `TTSS`
//! blocks and reuse the reader/writer helpers here.

use crate::error::{Error, Result};
use crate::model::TtSubspace;
use crate::tensor::{DenseTensor, Matrix};

pub const SUBSPACE_MAGIC: &[u8; 4] = b"TTSS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("value does not fit in u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    /// `u32 rows | u32 cols | rows*cols f64` column-major.
    pub fn matrix(&mut self, m: &Matrix) {
        self.u32(m.nrows());
        self.u32(m.ncols());
        self.f64s(m.as_slice());
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated: need {n} bytes at offset {}, have {}",
                    self.pos,
                    self.buf.len() - self.pos
                ))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    pub fn u64(&mut self) -> Result<usize> {
        let b = self.take(8)?;
        usize::try_from(u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .map_err(|_| Error::Format("length does not fit in memory".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format("array length overflow".into()))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
        let data = self.f64s(len)?;
        Ok(Matrix::from_column_slice(rows, cols, &data))
    }

    pub fn version(&mut self) -> Result<()> {
        let v = self.u32()?;
        if v != FORMAT_VERSION as usize {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

impl TtSubspace {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(SUBSPACE_MAGIC);
        w.u32(FORMAT_VERSION as usize);
        w.u32(self.order());
        for r in self.ranks() {
            w.u32(r);
        }
        for d in self.dims() {
            w.u32(d);
        }
        for core in self.cores() {
            w.f64s(core.data());
        }
        w.u8(u8::from(self.is_orthonormal()));
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let s = read_subspace(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

pub(crate) fn read_subspace(r: &mut ByteReader<'_>) -> Result<TtSubspace> {
    r.magic(SUBSPACE_MAGIC)?;
    r.version()?;
    let n = r.u32()?;
    if n == 0 {
        return Err(Error::Format("subspace with zero cores".into()));
    }
    let ranks = (0..=n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let dims = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if ranks[0] != 1 {
        return Err(Error::Format(format!("r0 must be 1, got {}", ranks[0])));
    }
    if let Some(i) = ranks.iter().position(|&x| x == 0) {
        return Err(Error::Format(format!("rank r{i} is zero")));
    }
    if let Some(i) = dims.iter().position(|&x| x == 0) {
        return Err(Error::Format(format!("dimension I{} is zero", i + 1)));
    }
    let mut cores = Vec::with_capacity(n);
    for i in 0..n {
        let shape = vec![ranks[i], dims[i], ranks[i + 1]];
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &x| acc.checked_mul(x))
            .ok_or_else(|| Error::Format("core size overflow".into()))?;
        cores.push(DenseTensor::new(shape, r.f64s(len)?)?);
    }
    let flag = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("invalid orthonormal flag {other}"))),
    };
    TtSubspace::with_flag(cores, flag).map_err(|e| match e {
        Error::RankChain(msg) => Error::Format(format!("rank chain violation: {msg}")),
        other => other,
    })
}
