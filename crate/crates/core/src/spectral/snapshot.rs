//! Binary field snapshots.
//!
//! Layout (little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `RLXF` |
//! | 4     | u32 format version (currently 1) |
//! | 4     | u32 spatial dimension d |
//! | 4     | u32 points per axis n |
//! | 8     | f64 domain length L |
//! | 8     | f64 time stamp |
//! | 4     | u32 representation: 0 = physical samples, 1 = spectral coefficients |
//! | 4     | u32 number of scalar components m |
//!
//! followed by `m · n^d` f64 samples (physical) or `m · n^d` (re, im) f64
//! pairs (spectral), component after component in row-major order.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{Grid, SpectralField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RLXF";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Physical = 0,
    Spectral = 1,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub representation: Representation,
    pub fields: Vec<SpectralField>,
}

pub fn write_snapshot<W: Write>(
    mut out: W,
    time: f64,
    representation: Representation,
    fields: &[&SpectralField],
) -> Result<()> {
    let Some(first) = fields.first() else {
        return Err(Error::Snapshot("no fields to write".into()));
    };
    let grid = first.grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(Error::Structure(
            "snapshot fields live on different grids".into(),
        ));
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&(grid.n() as u32).to_le_bytes())?;
    out.write_all(&grid.length().to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    out.write_all(&(representation as u32).to_le_bytes())?;
    out.write_all(&(fields.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(grid.len() * 16);
    for field in fields {
        buf.clear();
        match representation {
            Representation::Physical => {
                for v in field.to_physical() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Representation::Spectral => {
                for c in field.coeffs() {
                    buf.extend_from_slice(&c.re.to_le_bytes());
                    buf.extend_from_slice(&c.im.to_le_bytes());
                }
            }
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<Snapshot> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut input)? as usize;
    let n = read_u32(&mut input)? as usize;
    let length = read_f64(&mut input)?;
    let time = read_f64(&mut input)?;
    let representation = match read_u32(&mut input)? {
        0 => Representation::Physical,
        1 => Representation::Spectral,
        other => {
            return Err(Error::Snapshot(format!(
                "unknown representation flag {other}"
            )))
        }
    };
    let count = read_u32(&mut input)? as usize;
    let grid = Grid::new(dim, n, length)?;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let field = match representation {
            Representation::Physical => {
                let values = (0..grid.len())
                    .map(|_| read_f64(&mut input))
                    .collect::<Result<Vec<_>>>()?;
                SpectralField::from_physical(&grid, &values)?
            }
            Representation::Spectral => {
                let coeffs = (0..grid.len())
                    .map(|_| Ok(Complex64::new(read_f64(&mut input)?, read_f64(&mut input)?)))
                    .collect::<Result<Vec<_>>>()?;
                SpectralField::from_coeffs(&grid, coeffs)?
            }
        };
        fields.push(field);
    }
    Ok(Snapshot {
        time,
        representation,
        fields,
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
