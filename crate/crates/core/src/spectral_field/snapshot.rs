//! Binary snapshot files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `PVSF`               |
//! | 4      | 4    | format version (`u32`)     |
//! | 8      | 4    | spatial dimension d        |
//! | 12     | 4    | modes per axis n           |
//! | 16     | 4    | components N               |
//! | 20     | 4    | snapshot index of record   |
//! | 24     | 8    | time (`f64`)               |
//!
//! followed by `N · n^d` pairs `(re, im)` of `f64`, component by component,
//! modes in lexicographic lattice order.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::field::SpectralField;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PVSF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub d: u32,
    pub n: u32,
    pub ncomp: u32,
    pub record: u32,
    pub time: f64,
}

pub fn write_snapshot(mut w: impl Write, f: &SpectralField, record: u32, time: f64) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(f.grid.dim() as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(f.grid.n() as u32).to_le_bytes());
    header[16..20].copy_from_slice(&(f.ncomp as u32).to_le_bytes());
    header[20..24].copy_from_slice(&record.to_le_bytes());
    header[24..32].copy_from_slice(&time.to_le_bytes());
    w.write_all(&header)?;
    let order = f.grid.lexicographic_order();
    let mut body = Vec::with_capacity(16 * f.coeffs.len());
    for c in 0..f.ncomp {
        let comp = f.component(c);
        for &p in &order {
            body.extend_from_slice(&comp[p].re.to_le_bytes());
            body.extend_from_slice(&comp[p].im.to_le_bytes());
        }
    }
    w.write_all(&body)?;
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> Result<(SnapshotHeader, SpectralField)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let head = SnapshotHeader {
        d: u32_at(8),
        n: u32_at(12),
        ncomp: u32_at(16),
        record: u32_at(20),
        time: f64::from_le_bytes(header[24..32].try_into().unwrap()),
    };
    let grid = TorusGrid::new(head.d as usize, head.n as usize)?;
    let mut f = SpectralField::zeros(&grid, head.ncomp as usize);
    let order = grid.lexicographic_order();
    let mut pair = [0u8; 16];
    for c in 0..f.ncomp {
        for &p in &order {
            r.read_exact(&mut pair)?;
            let re = f64::from_le_bytes(pair[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(pair[8..16].try_into().unwrap());
            f.component_mut(c)[p] = Complex64::new(re, im);
        }
    }
    Ok((head, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::PhysicalField;

    #[test]
    fn header_layout_and_roundtrip() {
        let g = TorusGrid::new(2, 8).unwrap();
        let f = SpectralField::from_physical(&PhysicalField::from_fn(&g, 2, |x| {
            vec![x[0].sin() + 0.5, (x[0] - x[1]).cos()]
        }));
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, 7, 0.25).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 16 * 2 * 64);
        assert_eq!(&buf[0..4], b"PVSF");
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 8);
        // first body entry is mode (-4, -4) of component 0
        let p = g.index_of([-4, -4]).unwrap();
        let re = f64::from_le_bytes(buf[32..40].try_into().unwrap());
        assert_eq!(re, f.coeffs[p].re);
        let (h, back) = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(h.record, 7);
        assert_eq!(h.time, 0.25);
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = vec![0u8; 64];
        assert!(read_snapshot(buf.as_slice()).is_err());
    }
}
