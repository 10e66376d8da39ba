use num_complex::Complex64;

use super::field::{MatrixField, SpectralField};
use crate::error::{Error, Result};

/// Pointwise product `a·f` computed pseudospectrally with the 2/3 rule.
///
/// `a` is either scalar (one component, broadcast over the components of `f`)
/// or a row-major `N×N` matrix field acting on an `N`-vector field `f`. Both
/// factors are truncated to the dealiasing band before the product and the
/// result is truncated again, so the output equals the exact convolution
/// restricted to the band.
pub fn dealiased_product(a: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    if a.grid != f.grid {
        return Err(Error::Usage("dealiased_product: grid mismatch".into()));
    }
    let n = f.ncomp;
    if a.ncomp != 1 && a.ncomp != n * n {
        return Err(Error::Usage(format!(
            "dealiased_product: coefficient has {} components, expected 1 or {}",
            a.ncomp,
            n * n
        )));
    }
    let ap = a.dealiased().to_physical_complex();
    let fp = f.dealiased().to_physical_complex();
    let npts = f.npts();
    let mut out = vec![Complex64::new(0.0, 0.0); n * npts];
    for i in 0..n {
        let dst = &mut out[i * npts..(i + 1) * npts];
        if a.ncomp == 1 {
            for p in 0..npts {
                dst[p] = ap[p] * fp[i * npts + p];
            }
        } else {
            for j in 0..n {
                let plane = &ap[(i * n + j) * npts..(i * n + j + 1) * npts];
                let src = &fp[j * npts..(j + 1) * npts];
                for p in 0..npts {
                    dst[p] += plane[p] * src[p];
                }
            }
        }
    }
    for i in 0..n {
        f.grid.forward_in_place(&mut out[i * npts..(i + 1) * npts]);
    }
    Ok(SpectralField {
        grid: f.grid.clone(),
        ncomp: n,
        coeffs: out,
    }
    .dealiased())
}

/// `V ↦ Σ_k ∂_k[M ∂_k V]` for a fixed sampled coefficient field.
///
/// The coefficient is truncated to the dealiasing band once at construction,
/// so repeated applications (inside a time step) do not redo that work.
#[derive(Clone, Debug)]
pub struct DivergenceOperator {
    dim: usize,
    /// Dealiased samples of `M`, plane-major.
    samples: Vec<f64>,
    grid: super::TorusGrid,
}

impl DivergenceOperator {
    pub fn new(m: &MatrixField) -> Self {
        let spec = m.dealiased_spectrum();
        Self {
            dim: m.dim,
            samples: spec.to_physical().data,
            grid: m.grid.clone(),
        }
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        if v.grid != self.grid {
            return Err(Error::Usage("apply_divergence_form: grid mismatch".into()));
        }
        if v.ncomp != self.dim {
            return Err(Error::Usage(format!(
                "apply_divergence_form: field has {} components, coefficient is {}x{}",
                v.ncomp, self.dim, self.dim
            )));
        }
        let n = self.dim;
        let npts = v.npts();
        let vd = v.dealiased();
        let mut total = SpectralField::zeros(&v.grid, n);
        for axis in 0..v.grid.dim() {
            let g = vd.derivative(axis).to_physical_complex();
            let mut prod = vec![Complex64::new(0.0, 0.0); n * npts];
            for i in 0..n {
                for j in 0..n {
                    let plane = &self.samples[(i * n + j) * npts..(i * n + j + 1) * npts];
                    let src = &g[j * npts..(j + 1) * npts];
                    let dst = &mut prod[i * npts..(i + 1) * npts];
                    for p in 0..npts {
                        dst[p] += src[p] * plane[p];
                    }
                }
            }
            for i in 0..n {
                v.grid.forward_in_place(&mut prod[i * npts..(i + 1) * npts]);
            }
            let flux = SpectralField {
                grid: v.grid.clone(),
                ncomp: n,
                coeffs: prod,
            }
            .dealiased();
            total.axpy(1.0, &flux.derivative(axis));
        }
        Ok(total)
    }
}

/// `Σ_k ∂_k[M ∂_k V]` with 2/3-rule dealiasing of the product.
pub fn apply_divergence_form(m: &MatrixField, v: &SpectralField) -> Result<SpectralField> {
    if m.grid != v.grid {
        return Err(Error::Usage("apply_divergence_form: grid mismatch".into()));
    }
    DivergenceOperator::new(m).apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::TorusGrid;
    use nalgebra::DMatrix;

    #[test]
    fn identity_coefficient_gives_laplacian() {
        let g = TorusGrid::new(2, 16).unwrap();
        let v = SpectralField::single_mode(&g, [2, -1], &[Complex64::new(1.0, 0.5), Complex64::new(-2.0, 0.0)])
            .unwrap();
        let m = MatrixField::constant(&g, &DMatrix::identity(2, 2));
        let out = apply_divergence_form(&m, &v).unwrap();
        let expect = v.scaled(-5.0);
        assert!((&out - &expect).l2_norm() < 1e-12);
    }

    #[test]
    fn constant_matrix_acts_per_mode() {
        let g = TorusGrid::new(1, 32).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 3.0]);
        let v = SpectralField::single_mode(&g, [3, 0], &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)])
            .unwrap();
        let out = apply_divergence_form(&MatrixField::constant(&g, &b), &v).unwrap();
        let p = g.index_of([3, 0]).unwrap();
        let c = v.mode(p);
        let got = out.mode(p);
        for i in 0..2 {
            let want = -9.0 * (b[(i, 0)] * c[0] + b[(i, 1)] * c[1]);
            assert!((got[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn variable_scalar_coefficient_matches_hand_expansion() {
        // ∂x[(2+cos x) ∂x e^{ix}] = -2 e^{ix} - e^{2ix}
        let g = TorusGrid::new(1, 32).unwrap();
        let m = MatrixField::from_fn(&g, 1, |p| DMatrix::from_element(1, 1, 2.0 + g.point(p)[0].cos()));
        let v = SpectralField::single_mode(&g, [1, 0], &[Complex64::new(1.0, 0.0)]).unwrap();
        let out = apply_divergence_form(&m, &v).unwrap();
        let mut expect = SpectralField::zeros(&g, 1);
        expect.coeffs[g.index_of([1, 0]).unwrap()] = Complex64::new(-2.0, 0.0);
        expect.coeffs[g.index_of([2, 0]).unwrap()] = Complex64::new(-1.0, 0.0);
        assert!((&out - &expect).l2_norm() < 1e-10);
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let g1 = TorusGrid::new(1, 16).unwrap();
        let g2 = TorusGrid::new(1, 32).unwrap();
        let m = MatrixField::constant(&g1, &DMatrix::identity(1, 1));
        let v = SpectralField::zeros(&g2, 1);
        assert!(apply_divergence_form(&m, &v).is_err());
    }
}
