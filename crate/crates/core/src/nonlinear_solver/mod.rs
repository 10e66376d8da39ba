//! Local existence as an algorithm: reference profile `U_F`, the Picard map
//! `Θ`, adaptive local horizon, continuation in time, residual and stability
//! diagnostics.

mod continuation;
mod picard;
mod residual;

pub use continuation::{continue_solution, stability_check, ContinuationOptions, LifetimeEstimate, Segment, StabilityReport, Termination};
pub use picard::{
    data_norm, mean_law_defect, picard_step, reaction_field, reference_profile, solve_local, PicardOptions,
    PicardState, ReferenceProfile, StateCoefficient, StateInterpolant,
};
pub use residual::{residual, ResidualReport};
