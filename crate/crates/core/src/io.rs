//! Binary grid files, CSV tables and content hashes.
//!
//! Grid layout: magic `CGOG`, version `u16`, rank `u8`, a flag byte
//! (0 real, 1 complex), each dimension as `u64`, then row-major
//! little-endian `f64` values, complex entries interleaved as re, im.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"CGOG";
pub const GRID_VERSION: u16 = 1;

/// A real or complex array with its shape.
#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Real { dims: Vec<usize>, values: Vec<f64> },
    Complex { dims: Vec<usize>, values: Vec<Complex64> },
}

impl GridData {
    pub fn dims(&self) -> &[usize] {
        match self {
            GridData::Real { dims, .. } | GridData::Complex { dims, .. } => dims,
        }
    }

    fn check(&self) -> Result<()> {
        let (dims, n) = match self {
            GridData::Real { dims, values } => (dims, values.len()),
            GridData::Complex { dims, values } => (dims, values.len()),
        };
        if dims.len() > u8::MAX as usize || dims.iter().product::<usize>() != n {
            return Err(Error::Shape(format!("grid dims {dims:?} do not match {n} values")));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let mut out = Vec::new();
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&GRID_VERSION.to_le_bytes());
        out.push(self.dims().len() as u8);
        match self {
            GridData::Real { dims, values } => {
                out.push(0);
                dims.iter().for_each(|d| out.extend_from_slice(&(*d as u64).to_le_bytes()));
                values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            }
            GridData::Complex { dims, values } => {
                out.push(1);
                dims.iter().for_each(|d| out.extend_from_slice(&(*d as u64).to_le_bytes()));
                for v in values {
                    out.extend_from_slice(&v.re.to_le_bytes());
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(Error::Format("truncated grid file".into()));
            }
            let (a, b) = r.split_at(n);
            r = b;
            Ok(a)
        };
        if take(4)? != GRID_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != GRID_VERSION {
            return Err(Error::Format(format!("unsupported grid version {version}")));
        }
        let rank = take(1)?[0] as usize;
        let complex = match take(1)?[0] {
            0 => false,
            1 => true,
            f => return Err(Error::Format(format!("unknown element flag {f}"))),
        };
        let dims = (0..rank)
            .map(|_| Ok(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let out = if complex {
            let values = (0..n).map(|_| Ok(Complex64::new(f()?, f()?))).collect::<Result<Vec<_>>>()?;
            GridData::Complex { dims, values }
        } else {
            let values = (0..n).map(|_| f()).collect::<Result<Vec<_>>>()?;
            GridData::Real { dims, values }
        };
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after grid data".into()));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

/// CSV text with a header row; numbers written with `{:e}` round-trip precision.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Shape(format!("csv row has {} fields, header {}", r.len(), header.len())));
        }
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
