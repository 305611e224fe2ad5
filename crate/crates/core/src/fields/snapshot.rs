//! Binary field snapshots.
//!
//! Layout (little endian): magic `MKGM1`; u32 version; u32 kind tag;
//! 3 x u32 dims; 3 x f64 extents; f64 time; f64 epsilon; u32 name length
//! and UTF-8 name; then `cells * components` f64 values, row-major, with
//! components interleaved per cell.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::field::{ComplexField, ScalarField, VectorField3};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"MKGM1";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum FieldKind {
    Scalar = 1,
    Complex = 2,
    Vector = 3,
    KgmState = 4,
    RemState = 5,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Complex => 2,
            FieldKind::Vector => 3,
            FieldKind::KgmState | FieldKind::RemState => 10,
        }
    }

    fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            1 => Some(FieldKind::Scalar),
            2 => Some(FieldKind::Complex),
            3 => Some(FieldKind::Vector),
            4 => Some(FieldKind::KgmState),
            5 => Some(FieldKind::RemState),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub kind: FieldKind,
    pub grid: Grid,
    pub time: f64,
    pub epsilon: f64,
    pub name: String,
    /// Interleaved per cell, `grid.len() * kind.components()` values.
    pub payload: Vec<f64>,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.name.len() + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind as u32).to_le_bytes());
        for n in self.grid.dims() {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for l in self.grid.extents() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&self.epsilon.to_le_bytes());
        out.extend_from_slice(&(self.name.len() as u32).to_le_bytes());
        out.extend_from_slice(self.name.as_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            path,
        };
        if r.take(5)? != MAGIC {
            return Err(Error::BadMagic { path: path.into() });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                path: path.into(),
                version,
            });
        }
        let tag = r.u32()?;
        let kind = FieldKind::from_tag(tag).ok_or(Error::WrongKind {
            path: path.into(),
            found: tag,
        })?;
        let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        let extents = [r.f64()?, r.f64()?, r.f64()?];
        let grid = Grid::new(dims, extents)?;
        let time = r.f64()?;
        let epsilon = r.f64()?;
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|e| Error::Io {
            path: path.into(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        let count = grid.len() * kind.components();
        let rest = &bytes[r.pos..];
        if rest.len() != count * 8 {
            return Err(Error::Truncated {
                path: path.into(),
                expected: count * 8,
                found: rest.len(),
            });
        }
        let payload = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            kind,
            grid,
            time,
            epsilon,
            name,
            payload,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn expect_kind(&self, kind: FieldKind, path: &Path) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::WrongKind {
                path: path.into(),
                found: self.kind as u32,
            })
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.into(),
                expected: self.pos + n,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Interleave planes cell by cell.
pub fn interleave(planes: &[&[f64]]) -> Vec<f64> {
    let n = planes.first().map_or(0, |p| p.len());
    let mut out = Vec::with_capacity(n * planes.len());
    for i in 0..n {
        for p in planes {
            out.push(p[i]);
        }
    }
    out
}

/// Inverse of [`interleave`].
pub fn deinterleave(payload: &[f64], components: usize) -> Vec<Vec<f64>> {
    (0..components)
        .map(|c| payload.iter().skip(c).step_by(components).copied().collect())
        .collect()
}

impl ScalarField {
    pub fn to_snapshot(&self, name: &str, time: f64) -> Snapshot {
        Snapshot {
            kind: FieldKind::Scalar,
            grid: self.grid,
            time,
            epsilon: 0.0,
            name: name.into(),
            payload: self.data.clone(),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind(FieldKind::Scalar, Path::new(&s.name))?;
        Ok(Self {
            grid: s.grid,
            data: s.payload.clone(),
        })
    }
}

impl ComplexField {
    pub fn to_snapshot(&self, name: &str, time: f64) -> Snapshot {
        Snapshot {
            kind: FieldKind::Complex,
            grid: self.grid,
            time,
            epsilon: 0.0,
            name: name.into(),
            payload: self.data.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind(FieldKind::Complex, Path::new(&s.name))?;
        Ok(Self {
            grid: s.grid,
            data: s
                .payload
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        })
    }
}

impl VectorField3 {
    pub fn to_snapshot(&self, name: &str, time: f64) -> Snapshot {
        Snapshot {
            kind: FieldKind::Vector,
            grid: self.grid,
            time,
            epsilon: 0.0,
            name: name.into(),
            payload: interleave(&[&self.c[0], &self.c[1], &self.c[2]]),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind(FieldKind::Vector, Path::new(&s.name))?;
        let mut p = deinterleave(&s.payload, 3).into_iter();
        Ok(Self {
            grid: s.grid,
            c: [p.next().unwrap(), p.next().unwrap(), p.next().unwrap()],
        })
    }
}
