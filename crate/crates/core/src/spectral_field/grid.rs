use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform grid on the torus `[0, 2π)^d` with `n` points (and modes) per axis.
///
/// Physical samples and Fourier coefficients share the same flat layout: for
/// `d = 2` the index is `i0 * n + i1`. Along each axis, index `i` carries the
/// wavenumber `i` for `i < n/2` and `i - n` otherwise (FFT order).
#[derive(Clone)]
pub struct TorusGrid {
    d: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("d", &self.d)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n
    }
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Usage(format!("spatial dimension {d} unsupported (1 or 2)")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Usage(format!("modes per axis {n} must be a power of two >= 4")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            d,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points (equivalently lattice modes), `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn axis_wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Lattice vector of flat index `p`; unused axes are zero.
    pub fn wavevector(&self, p: usize) -> [i64; 2] {
        match self.d {
            1 => [self.axis_wavenumber(p), 0],
            _ => [
                self.axis_wavenumber(p / self.n),
                self.axis_wavenumber(p % self.n),
            ],
        }
    }

    pub fn ksq(&self, p: usize) -> u64 {
        let k = self.wavevector(p);
        (k[0] * k[0] + k[1] * k[1]) as u64
    }

    pub fn kabs(&self, p: usize) -> f64 {
        (self.ksq(p) as f64).sqrt()
    }

    /// Largest `|k|²` present on the lattice.
    pub fn max_ksq(&self) -> u64 {
        let h = (self.n / 2) as u64;
        self.d as u64 * h * h
    }

    /// Flat index of the lattice vector `k`, if it is resolved.
    pub fn index_of(&self, k: [i64; 2]) -> Option<usize> {
        let n = self.n as i64;
        let wrap = |v: i64| -> Option<usize> {
            if v < -n / 2 || v >= n / 2 {
                None
            } else {
                Some(v.rem_euclid(n) as usize)
            }
        };
        match self.d {
            1 => {
                if k[1] != 0 {
                    return None;
                }
                wrap(k[0])
            }
            _ => Some(wrap(k[0])? * self.n + wrap(k[1])?),
        }
    }

    /// Cutoff of the 2/3 rule: modes with every `|k_i| <= cutoff` are kept.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }

    pub fn in_dealias_band(&self, p: usize) -> bool {
        let k = self.wavevector(p);
        let c = self.dealias_cutoff();
        k[0].abs() <= c && k[1].abs() <= c
    }

    /// Physical coordinates of grid point `p`.
    pub fn point(&self, p: usize) -> [f64; 2] {
        let h = 2.0 * PI / self.n as f64;
        match self.d {
            1 => [p as f64 * h, 0.0],
            _ => [(p / self.n) as f64 * h, (p % self.n) as f64 * h],
        }
    }

    /// Flat indices in lexicographic lattice order (`k_i` from `-n/2` to `n/2 - 1`,
    /// first axis slowest).
    pub fn lexicographic_order(&self) -> Vec<usize> {
        let half = self.n as i64 / 2;
        let axis: Vec<i64> = (-half..half).collect();
        match self.d {
            1 => axis.iter().map(|&k| self.index_of([k, 0]).unwrap()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for &a in &axis {
                    for &b in &axis {
                        out.push(self.index_of([a, b]).unwrap());
                    }
                }
                out
            }
        }
    }

    /// In-place normalized forward transform of one component: afterwards
    /// entry 0 holds the spatial mean.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.transform(buf, &self.fwd);
        let scale = 1.0 / self.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse of [`forward_in_place`](Self::forward_in_place).
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.transform(buf, &self.inv);
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        match self.d {
            1 => plan.process(buf),
            _ => {
                plan.process(buf);
                let mut t = transpose(buf, n);
                plan.process(&mut t);
                buf.copy_from_slice(&transpose(&t, n));
            }
        }
    }
}

fn transpose(buf: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); buf.len()];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = buf[i * n + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::new(1, 12).is_err());
        assert!(TorusGrid::new(1, 2).is_err());
    }

    #[test]
    fn wavevectors_follow_fft_order() {
        let g = TorusGrid::new(1, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|p| g.wavevector(p)[0]).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        let g2 = TorusGrid::new(2, 8).unwrap();
        let p = g2.index_of([-1, 3]).unwrap();
        assert_eq!(g2.wavevector(p), [-1, 3]);
        assert_eq!(g2.index_of([4, 0]), None);
    }

    #[test]
    fn lexicographic_order_is_a_permutation() {
        let g = TorusGrid::new(2, 8).unwrap();
        let mut order = g.lexicographic_order();
        assert_eq!(g.wavevector(order[0]), [-4, -4]);
        assert_eq!(g.wavevector(order[1]), [-4, -3]);
        order.sort_unstable();
        assert_eq!(order, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn dealias_cutoff_is_alias_free() {
        for n in [8usize, 16, 64, 128] {
            let g = TorusGrid::new(1, n).unwrap();
            assert!(3 * g.dealias_cutoff() < n as i64);
        }
    }
}
