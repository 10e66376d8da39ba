//! Sobolev-type norms on Fourier coefficients.
//!
//! Two conventions coexist. The bracket norms weight mode `k` by
//! `(1+|k|²)^s` and are defined for any field; the homogeneous norms weight by
//! `|k|^{2s}` and ignore the mean mode, which is the form energy inequalities
//! are stated in.

use super::field::SpectralField;

fn bracket(ksq: u64, s: f64) -> f64 {
    (1.0 + ksq as f64).powf(s)
}

fn homogeneous(ksq: u64, s: f64) -> f64 {
    if ksq == 0 {
        0.0
    } else {
        (ksq as f64).powf(s)
    }
}

/// `‖f‖_{H^s} = (Σ_k (1+|k|²)^s |c_k|²)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    f.weighted_sq(|p| bracket(f.grid.ksq(p), s)).sqrt()
}

/// `‖P₀f‖_{Ḣ^s} = (Σ_{k≠0} |k|^{2s} |c_k|²)^{1/2}`.
pub fn homogeneous_norm(f: &SpectralField, s: f64) -> f64 {
    f.weighted_sq(|p| homogeneous(f.grid.ksq(p), s)).sqrt()
}

/// `‖∇f‖²_{H^s} = Σ_k |k|²(1+|k|²)^s |c_k|²`.
pub fn gradient_sq(f: &SpectralField, s: f64) -> f64 {
    f.weighted_sq(|p| {
        let ksq = f.grid.ksq(p);
        ksq as f64 * bracket(ksq, s)
    })
}

/// `‖∇f‖²_{Ḣ^s} = Σ_{k≠0} |k|^{2s+2} |c_k|²`.
pub fn homogeneous_gradient_sq(f: &SpectralField, s: f64) -> f64 {
    f.weighted_sq(|p| homogeneous(f.grid.ksq(p), s + 1.0))
}
