use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::grid::TorusGrid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Real samples of an `ℝᴺ`-valued field, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub grid: TorusGrid,
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: &TorusGrid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            ncomp,
            data: vec![0.0; ncomp * grid.len()],
        }
    }

    pub fn from_fn(grid: &TorusGrid, ncomp: usize, f: impl Fn([f64; 2]) -> Vec<f64>) -> Self {
        let npts = grid.len();
        let mut out = Self::zeros(grid, ncomp);
        for p in 0..npts {
            let v = f(grid.point(p));
            for c in 0..ncomp {
                out.data[c * npts + p] = v[c];
            }
        }
        out
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let npts = self.grid.len();
        &self.data[c * npts..(c + 1) * npts]
    }

    /// State vector at grid point `p`.
    pub fn at(&self, p: usize) -> Vec<f64> {
        let npts = self.grid.len();
        (0..self.ncomp).map(|c| self.data[c * npts + p]).collect()
    }

    /// `(min value, flat index)` per component.
    pub fn min_per_component(&self) -> Vec<(f64, usize)> {
        (0..self.ncomp)
            .map(|c| {
                self.component(c)
                    .iter()
                    .enumerate()
                    .fold((f64::INFINITY, 0), |acc, (p, &v)| if v < acc.0 { (v, p) } else { acc })
            })
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `(mean of |f|²)^{1/2}` over the grid (normalized measure).
    pub fn l2_norm(&self) -> f64 {
        let npts = self.grid.len() as f64;
        (self.data.iter().map(|v| v * v).sum::<f64>() / npts).sqrt()
    }

    /// Pointwise map `u ↦ g(u)` producing a field with `out_comp` components.
    pub fn map_points(&self, out_comp: usize, g: impl Fn(&[f64]) -> Vec<f64>) -> PhysicalField {
        let npts = self.grid.len();
        let mut out = PhysicalField::zeros(&self.grid, out_comp);
        let mut u = vec![0.0; self.ncomp];
        for p in 0..npts {
            for (c, uc) in u.iter_mut().enumerate() {
                *uc = self.data[c * npts + p];
            }
            let v = g(&u);
            for c in 0..out_comp {
                out.data[c * npts + p] = v[c];
            }
        }
        out
    }
}

/// Fourier coefficients `c_k ∈ ℂᴺ` over the full lattice of a [`TorusGrid`].
///
/// Normalized so that `c_0` is the spatial mean. Storage is component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: TorusGrid,
    pub ncomp: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            ncomp,
            coeffs: vec![ZERO; ncomp * grid.len()],
        }
    }

    /// Spatially constant field.
    pub fn constant(grid: &TorusGrid, value: &[f64]) -> Self {
        let mut f = Self::zeros(grid, value.len());
        let npts = grid.len();
        for (c, v) in value.iter().enumerate() {
            f.coeffs[c * npts] = Complex64::new(*v, 0.0);
        }
        f
    }

    /// `e^{ik·x} v` (complex-valued unless combined with its conjugate mode).
    pub fn single_mode(grid: &TorusGrid, k: [i64; 2], v: &[Complex64]) -> Result<Self> {
        let p = grid
            .index_of(k)
            .ok_or_else(|| Error::Usage(format!("mode {k:?} not resolved on grid")))?;
        let mut f = Self::zeros(grid, v.len());
        f.set_mode(p, v);
        Ok(f)
    }

    pub fn from_physical(phys: &PhysicalField) -> Self {
        let npts = phys.grid.len();
        let mut coeffs: Vec<Complex64> = phys.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for c in 0..phys.ncomp {
            phys.grid.forward_in_place(&mut coeffs[c * npts..(c + 1) * npts]);
        }
        Self {
            grid: phys.grid.clone(),
            ncomp: phys.ncomp,
            coeffs,
        }
    }

    /// Real samples; imaginary parts (nonzero only for non-Hermitian data) are dropped.
    pub fn to_physical(&self) -> PhysicalField {
        let npts = self.grid.len();
        let mut buf = self.coeffs.clone();
        for c in 0..self.ncomp {
            self.grid.inverse_in_place(&mut buf[c * npts..(c + 1) * npts]);
        }
        PhysicalField {
            grid: self.grid.clone(),
            ncomp: self.ncomp,
            data: buf.into_iter().map(|z| z.re).collect(),
        }
    }

    /// Complex samples, for fields that are not Hermitian-symmetric.
    pub fn to_physical_complex(&self) -> Vec<Complex64> {
        let npts = self.grid.len();
        let mut buf = self.coeffs.clone();
        for c in 0..self.ncomp {
            self.grid.inverse_in_place(&mut buf[c * npts..(c + 1) * npts]);
        }
        buf
    }

    pub fn npts(&self) -> usize {
        self.grid.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let npts = self.npts();
        &self.coeffs[c * npts..(c + 1) * npts]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let npts = self.npts();
        &mut self.coeffs[c * npts..(c + 1) * npts]
    }

    pub fn mode(&self, p: usize) -> Vec<Complex64> {
        let npts = self.npts();
        (0..self.ncomp).map(|c| self.coeffs[c * npts + p]).collect()
    }

    pub fn set_mode(&mut self, p: usize, v: &[Complex64]) {
        let npts = self.npts();
        for (c, z) in v.iter().enumerate() {
            self.coeffs[c * npts + p] = *z;
        }
    }

    /// Squared Euclidean norm of `c_k` in `ℂᴺ`.
    pub fn mode_norm_sq(&self, p: usize) -> f64 {
        let npts = self.npts();
        (0..self.ncomp).map(|c| self.coeffs[c * npts + p].norm_sqr()).sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mode(0).iter().map(|z| z.re).collect()
    }

    pub fn project_mean_free(&self) -> Self {
        let mut out = self.clone();
        out.set_mode(0, &vec![ZERO; self.ncomp]);
        out
    }

    /// Applies a real Fourier multiplier `c_k ↦ m(p) c_k`.
    pub fn multiply_modes(&self, m: impl Fn(usize) -> f64) -> Self {
        let npts = self.npts();
        let weights: Vec<f64> = (0..npts).map(m).collect();
        let mut out = self.clone();
        for c in 0..self.ncomp {
            for (z, w) in out.component_mut(c).iter_mut().zip(&weights) {
                *z *= *w;
            }
        }
        out
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        let g = self.grid.clone();
        self.multiply_modes(|p| if g.in_dealias_band(p) { 1.0 } else { 0.0 })
    }

    /// Spectral `∂/∂x_axis`. The Nyquist wavenumber is dropped so real fields stay real.
    pub fn derivative(&self, axis: usize) -> Self {
        let npts = self.npts();
        let half = self.grid.n() as i64 / 2;
        let factors: Vec<Complex64> = (0..npts)
            .map(|p| {
                let k = self.grid.wavevector(p)[axis];
                if k == -half {
                    ZERO
                } else {
                    Complex64::new(0.0, k as f64)
                }
            })
            .collect();
        let mut out = self.clone();
        for c in 0..self.ncomp {
            for (z, f) in out.component_mut(c).iter_mut().zip(&factors) {
                *z *= *f;
            }
        }
        out
    }

    /// Multi-index derivative `∂^α` (exact on the lattice, no Nyquist dropping).
    pub fn derivative_multi(&self, alpha: &[usize]) -> Self {
        let npts = self.npts();
        let factors: Vec<Complex64> = (0..npts)
            .map(|p| {
                let k = self.grid.wavevector(p);
                let mut z = Complex64::new(1.0, 0.0);
                for (axis, &a) in alpha.iter().enumerate() {
                    z *= Complex64::new(0.0, k[axis] as f64).powu(a as u32);
                }
                z
            })
            .collect();
        let mut out = self.clone();
        for c in 0..self.ncomp {
            for (z, f) in out.component_mut(c).iter_mut().zip(&factors) {
                *z *= *f;
            }
        }
        out
    }

    /// `Σ_k w(k) |c_k|²` for a weight on the lattice.
    pub fn weighted_sq(&self, w: impl Fn(usize) -> f64) -> f64 {
        (0..self.npts()).map(|p| w(p) * self.mode_norm_sq(p)).sum()
    }

    /// `L²` norm for the normalized measure on the torus (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from `c_{-k} = conj(c_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        let npts = self.npts();
        let mut worst = 0.0f64;
        for p in 0..npts {
            let k = self.grid.wavevector(p);
            if let Some(q) = self.grid.index_of([-k[0], -k[1]]) {
                for c in 0..self.ncomp {
                    let a = self.coeffs[c * npts + p];
                    let b = self.coeffs[c * npts + q].conj();
                    worst = worst.max((a - b).norm());
                }
            }
        }
        worst
    }

    /// Replaces coefficients by the Hermitian-symmetric part `(c_k + conj(c_{-k}))/2`.
    pub fn symmetrized(&self) -> Self {
        let npts = self.npts();
        let mut out = self.clone();
        for p in 0..npts {
            let k = self.grid.wavevector(p);
            for c in 0..self.ncomp {
                let a = self.coeffs[c * npts + p];
                out.coeffs[c * npts + p] = match self.grid.index_of([-k[0], -k[1]]) {
                    Some(q) => 0.5 * (a + self.coeffs[c * npts + q].conj()),
                    None => Complex64::new(a.re, 0.0),
                };
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert_eq!(self.coeffs.len(), x.coeffs.len(), "field shape mismatch");
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += *xv * a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for z in out.coeffs.iter_mut() {
            *z *= a;
        }
        out
    }

    pub fn same_shape(&self, other: &SpectralField) -> bool {
        self.grid == other.grid && self.ncomp == other.ncomp
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Samples of an `N×N` matrix field on the grid; entry `(i, j)` occupies plane `i*N + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub grid: TorusGrid,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl MatrixField {
    pub fn constant(grid: &TorusGrid, b: &DMatrix<f64>) -> Self {
        Self::from_fn(grid, b.nrows(), |_| b.clone())
    }

    pub fn from_fn(grid: &TorusGrid, dim: usize, f: impl Fn(usize) -> DMatrix<f64>) -> Self {
        let npts = grid.len();
        let mut data = vec![0.0; dim * dim * npts];
        for p in 0..npts {
            let m = f(p);
            for i in 0..dim {
                for j in 0..dim {
                    data[(i * dim + j) * npts + p] = m[(i, j)];
                }
            }
        }
        Self {
            grid: grid.clone(),
            dim,
            data,
        }
    }

    /// `A(U(x))` evaluated pointwise from physical state samples.
    pub fn from_state(
        state: &PhysicalField,
        dim: usize,
        a: impl Fn(&[f64]) -> DMatrix<f64>,
    ) -> Self {
        Self::from_fn(&state.grid, dim, |p| a(&state.at(p)))
    }

    pub fn npts(&self) -> usize {
        self.grid.len()
    }

    pub fn entry(&self, i: usize, j: usize, p: usize) -> f64 {
        self.data[(i * self.dim + j) * self.npts() + p]
    }

    pub fn at(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j, p))
    }

    pub fn is_uniform(&self) -> bool {
        let npts = self.npts();
        self.data
            .chunks(npts)
            .all(|plane| plane.iter().all(|&v| v == plane[0]))
    }

    /// Spatial average; returns the common value exactly when the field is uniform.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let npts = self.npts();
        if self.is_uniform() {
            return self.at(0);
        }
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let plane = &self.data[(i * self.dim + j) * npts..(i * self.dim + j + 1) * npts];
            plane.iter().sum::<f64>() / npts as f64
        })
    }

    /// `max_x ⦀M(x) − B⦀_∞` with the max-row-sum norm.
    pub fn sup_deviation(&self, b: &DMatrix<f64>) -> f64 {
        let n = self.dim;
        (0..self.npts())
            .map(|p| {
                (0..n)
                    .map(|i| (0..n).map(|j| (self.entry(i, j, p) - b[(i, j)]).abs()).sum::<f64>())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max)
    }

    /// Spectrum of every entry plane, truncated to the 2/3 band.
    pub fn dealiased_spectrum(&self) -> SpectralField {
        let phys = PhysicalField {
            grid: self.grid.clone(),
            ncomp: self.dim * self.dim,
            data: self.data.clone(),
        };
        SpectralField::from_physical(&phys).dealiased()
    }

    /// Linear interpolation `(1−θ)·self + θ·other`.
    pub fn lerp(&self, other: &MatrixField, theta: f64) -> MatrixField {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        MatrixField {
            grid: self.grid.clone(),
            dim: self.dim,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = grid1(16);
        let phys = PhysicalField::from_fn(&g, 2, |_| vec![3.0, -1.5]);
        let f = SpectralField::from_physical(&phys);
        assert!((f.mean()[0] - 3.0).abs() < 1e-15);
        assert!((f.mean()[1] + 1.5).abs() < 1e-15);
        let rest: f64 = (1..16).map(|p| f.mode_norm_sq(p)).sum();
        assert!(rest < 1e-28);
    }

    #[test]
    fn cosine_splits_into_two_half_modes() {
        let g = grid1(16);
        let f = SpectralField::from_physical(&PhysicalField::from_fn(&g, 1, |x| vec![x[0].cos()]));
        for p in 0..16 {
            let k = g.wavevector(p)[0];
            let expect = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((f.coeffs[p] - Complex64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn size_mismatch_detected_by_shape() {
        let a = SpectralField::zeros(&grid1(8), 1);
        let b = SpectralField::zeros(&grid1(16), 1);
        assert!(!a.same_shape(&b));
    }

    #[test]
    fn mean_free_projection() {
        let g = grid1(8);
        let mut f = SpectralField::constant(&g, &[2.0]);
        f.set_mode(1, &[Complex64::new(0.3, 0.1)]);
        let p = f.project_mean_free();
        assert_eq!(p.coeffs[0], ZERO);
        assert_eq!(p.coeffs[1], Complex64::new(0.3, 0.1));
        assert_eq!(p.project_mean_free(), p);
    }

    #[test]
    fn derivative_of_sine() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = SpectralField::from_physical(&PhysicalField::from_fn(&g, 1, |x| {
            vec![(2.0 * x[1]).sin()]
        }));
        let df = f.derivative(1).to_physical();
        for p in 0..g.len() {
            let x = g.point(p);
            assert!((df.data[p] - 2.0 * (2.0 * x[1]).cos()).abs() < 1e-12);
        }
        assert!(f.derivative(0).l2_norm() < 1e-14);
    }

    #[test]
    fn uniform_matrix_mean_is_exact() {
        let g = grid1(64);
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.7, 0.3, 1.0 / 3.0]);
        let m = MatrixField::constant(&g, &b);
        assert!(m.is_uniform());
        assert_eq!(m.mean_matrix(), b);
        assert_eq!(m.sup_deviation(&b), 0.0);
    }
}
