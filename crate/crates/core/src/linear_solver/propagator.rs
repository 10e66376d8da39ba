use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::petrovskii::{phi_functions, SquareMatrix};
use crate::spectral_field::{SpectralField, TorusGrid};

struct ModeBlock {
    p: DMatrix<f64>,
    w0: DMatrix<f64>,
    w1: DMatrix<f64>,
}

/// One-step exponential-trapezoid maps for `B|k|²`, one entry per distinct `|k|²`.
///
/// `c ↦ P c + w₀ G₀ + w₁ G₁` with `P = e^{−hB|k|²}`, `w₀ = h(φ₁ − φ₂)`,
/// `w₁ = hφ₂` evaluated at `−hB|k|²`; exact for forcing linear on the step.
pub struct Propagator {
    b: SquareMatrix,
    h: f64,
    blocks: Vec<ModeBlock>,
    mode_block: Vec<usize>,
}

impl Propagator {
    pub fn new(grid: &TorusGrid, b: &SquareMatrix, h: f64) -> Result<Self> {
        let n = b.nrows();
        let mut index: BTreeMap<u64, usize> = BTreeMap::new();
        let mut mode_block = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            let next = index.len();
            mode_block.push(*index.entry(grid.ksq(p)).or_insert(next));
        }
        let mut ksqs = vec![0u64; index.len()];
        for (k, i) in &index {
            ksqs[*i] = *k;
        }
        let mut blocks = Vec::with_capacity(ksqs.len());
        for &ksq in &ksqs {
            if ksq == 0 {
                let id = DMatrix::identity(n, n);
                blocks.push(ModeBlock {
                    p: id.clone(),
                    w0: &id * (0.5 * h),
                    w1: &id * (0.5 * h),
                });
                continue;
            }
            let z = b * (-h * ksq as f64);
            let (p, phi1, phi2) = phi_functions(&z)?;
            blocks.push(ModeBlock {
                w0: (&phi1 - &phi2) * h,
                w1: phi2 * h,
                p,
            });
        }
        Ok(Self {
            b: b.clone(),
            h,
            blocks,
            mode_block,
        })
    }

    pub fn matches(&self, b: &SquareMatrix, h: f64) -> bool {
        self.h == h && &self.b == b
    }

    pub fn step(&self, c: &SpectralField, g0: Option<&SpectralField>, g1: Option<&SpectralField>) -> SpectralField {
        let n = c.ncomp;
        let npts = c.npts();
        let mut out = SpectralField::zeros(&c.grid, n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for p in 0..npts {
            let blk = &self.blocks[self.mode_block[p]];
            for (i, o) in buf.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += c.coeffs[j * npts + p] * blk.p[(i, j)];
                }
                if let Some(g) = g0 {
                    for j in 0..n {
                        acc += g.coeffs[j * npts + p] * blk.w0[(i, j)];
                    }
                }
                if let Some(g) = g1 {
                    for j in 0..n {
                        acc += g.coeffs[j * npts + p] * blk.w1[(i, j)];
                    }
                }
                *o = acc;
            }
            for (i, v) in buf.iter().enumerate() {
                out.coeffs[i * npts + p] = *v;
            }
        }
        out
    }
}
