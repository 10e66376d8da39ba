pub mod error;
pub mod kv;
pub mod linear_solver;
pub mod littlewood_paley;
pub mod models;
pub mod nonlinear_solver;
pub mod petrovskii;
pub mod spectral_field;
pub mod verification;

pub use error::{Error, Result};
