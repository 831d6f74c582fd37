//! Binary field snapshots and CSV output.
//!
//! Snapshot layout, all little-endian: magic `NLQW`, `u32` version, `u64` L,
//! then per site from `-L` upward `Re u_up, Im u_up, Re u_down, Im u_down` as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGrid, SpinorField};

pub const MAGIC: &[u8; 4] = b"NLQW";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(field: &SpinorField, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(field.grid().half_width() as u64).to_le_bytes())?;
    for s in field.values() {
        for v in [s[0].re, s[0].im, s[1].re, s[1].im] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SpinorField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("snapshot version {version}, expected {VERSION}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let l = u64::from_le_bytes(b8);
    let grid = LatticeGrid::new(usize::try_from(l).map_err(|_| Error::Format(format!("half width {l} too large")))?)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let mut v = [0.0f64; 4];
        for slot in &mut v {
            r.read_exact(&mut b8).map_err(|e| Error::Format(format!("truncated snapshot: {e}")))?;
            *slot = f64::from_le_bytes(b8);
        }
        values.push([C64::new(v[0], v[1]), C64::new(v[2], v[3])]);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after snapshot".into()));
    }
    SpinorField::from_values(grid, values)
}

pub fn save_snapshot(field: &SpinorField, path: &Path) -> Result<()> {
    write_snapshot(field, BufWriter::new(File::create(path)?))
}

pub fn load_snapshot(path: &Path) -> Result<SpinorField> {
    read_snapshot(BufReader::new(File::open(path)?))
}

/// Writes `rows` with a header row.
pub fn emit_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = LatticeGrid::new(2).unwrap();
        let f = SpinorField::from_fn(g, |x| [C64::new(x as f64, 0.5), C64::new(-1.0, x as f64)]);
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 4 * 32);
        assert_eq!(&buf[..4], b"NLQW");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        // first site is x = -2
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), -2.0);
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let f = SpinorField::zeros(LatticeGrid::new(1).unwrap());
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        buf[4] = 2;
        assert!(matches!(read_snapshot(buf.as_slice()), Err(Error::Format(_))));
        buf[4] = 1;
        buf.pop();
        assert!(read_snapshot(buf.as_slice()).is_err());
    }
}
