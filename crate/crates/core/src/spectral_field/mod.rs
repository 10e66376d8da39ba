//! Fourier representation of `ℂᴺ`-valued fields on the torus: transforms,
//! mean projection, dealiased products, divergence-form operators, norms, and
//! the trajectory container with its norm traces.

mod field;
mod grid;
mod history;
pub mod norms;
mod operators;
pub mod snapshot;

pub use field::{MatrixField, PhysicalField, SpectralField};
pub use grid::TorusGrid;
pub use history::{energy_norms, trapezoid, EnergyNorms, NormRow, SolutionHistory};
pub use norms::{gradient_sq, homogeneous_gradient_sq, homogeneous_norm, sobolev_norm};
pub use operators::{apply_divergence_form, dealiased_product, DivergenceOperator};

use crate::error::{Error, Result};

/// Physical samples (component-major, `n^d` per component) to coefficients.
pub fn forward_transform(grid: &TorusGrid, ncomp: usize, samples: &[f64]) -> Result<SpectralField> {
    if samples.len() != ncomp * grid.len() {
        return Err(Error::Usage(format!(
            "forward_transform: expected {} samples, got {}",
            ncomp * grid.len(),
            samples.len()
        )));
    }
    Ok(SpectralField::from_physical(&PhysicalField {
        grid: grid.clone(),
        ncomp,
        data: samples.to_vec(),
    }))
}

pub fn inverse_transform(f: &SpectralField) -> PhysicalField {
    f.to_physical()
}

pub fn project_mean_free(f: &SpectralField) -> SpectralField {
    f.project_mean_free()
}

pub fn mean(f: &SpectralField) -> Vec<f64> {
    f.mean()
}
