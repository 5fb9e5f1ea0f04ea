//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | offset | type  | content                         |
//! |--------|-------|---------------------------------|
//! | 0      | [u8;4]| magic `MHDF`                    |
//! | 4      | u32   | format version (1)              |
//! | 8      | u32   | grid size `N`                   |
//! | 12     | f64   | box side `L`                    |
//! | 20     | u32   | component count (3)             |
//! | 24     | u32   | member count `K`                |
//! | 28     | f64×2 | coefficients                    |
//!
//! Coefficients follow member by member, component by component, each
//! component as `N³` complex numbers (`re`, `im`) in FFT storage order with
//! axis 0 slowest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralVectorField};

pub const MAGIC: [u8; 4] = *b"MHDF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

pub fn write_snapshot<W: Write>(mut out: W, members: &[SpectralVectorField]) -> Result<()> {
    let first = members
        .first()
        .ok_or_else(|| Error::Snapshot("a snapshot needs at least one member".into()))?;
    let grid = first.grid();
    for m in members {
        m.ensure_same_grid(first)?;
    }
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.n() as u32).to_le_bytes())?;
    out.write_all(&grid.side().to_le_bytes())?;
    out.write_all(&3u32.to_le_bytes())?;
    out.write_all(&(members.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * grid.len());
    for m in members {
        for i in 0..3 {
            buf.clear();
            for c in m.coeffs(i) {
                buf.extend_from_slice(&c.re.to_le_bytes());
                buf.extend_from_slice(&c.im.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn take<const B: usize, R: Read>(input: &mut R) -> Result<[u8; B]> {
    let mut b = [0u8; B];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::Snapshot(format!("truncated snapshot: {e}")))?;
    Ok(b)
}

/// Members in file order; the grid is taken from the header.
pub fn read_snapshot<R: Read>(mut input: R) -> Result<Vec<SpectralVectorField>> {
    if take::<4, _>(&mut input)? != MAGIC {
        return Err(Error::Snapshot("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(take(&mut input)?);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(take(&mut input)?) as usize;
    let side = f64::from_le_bytes(take(&mut input)?);
    let comps = u32::from_le_bytes(take(&mut input)?);
    if comps != 3 {
        return Err(Error::Snapshot(format!("expected 3 components, found {comps}")));
    }
    let k = u32::from_le_bytes(take(&mut input)?) as usize;
    if k == 0 {
        return Err(Error::Snapshot("member count is zero".into()));
    }
    let grid = Grid::new(n, side).map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
    let mut members = Vec::with_capacity(k);
    let mut raw = vec![0u8; 16 * grid.len()];
    for _ in 0..k {
        let mut comps: [Vec<Complex64>; 3] = Default::default();
        for c in comps.iter_mut() {
            input
                .read_exact(&mut raw)
                .map_err(|e| Error::Snapshot(format!("truncated coefficients: {e}")))?;
            *c = raw
                .chunks_exact(16)
                .map(|b| {
                    let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
                    Complex64::new(re, im)
                })
                .collect();
        }
        members.push(SpectralVectorField::from_coeffs(grid, comps)?);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after coefficients".into()));
    }
    Ok(members)
}

pub fn save_snapshot(path: &Path, members: &[SpectralVectorField]) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), members)
}

pub fn load_snapshot(path: &Path) -> Result<Vec<SpectralVectorField>> {
    read_snapshot(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_solenoidal;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::new(8, 3.5).unwrap();
        let a = random_solenoidal(g, 1, 1.0, 2).unwrap();
        let b = random_solenoidal(g, 2, 0.5, 2).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 2 * 3 * 16 * g.len());
        let back = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn header_layout() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &[SpectralVectorField::zeros(g)]).unwrap();
        assert_eq!(&bytes[..4], b"MHDF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2.0);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 1);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &[SpectralVectorField::zeros(g)]).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(bad.as_slice()), Err(Error::Snapshot(_))));
        assert!(read_snapshot(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_snapshot(long.as_slice()).is_err());
        assert!(write_snapshot(Vec::new(), &[]).is_err());
    }
}
