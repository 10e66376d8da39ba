//! Solvers for `∂_t V − Σ_k ∂_k[M ∂_k V] = F` on the torus.
//!
//! Three coefficient regimes: a constant matrix (exact per-mode propagation),
//! a spatially uniform time-dependent path (piecewise freezing), and a general
//! space-time field (exponential predictor-corrector around the spatial mean).

mod certificate;
mod propagator;
mod solvers;

use std::fmt;
use std::sync::Arc;

pub use certificate::{calibrate_energy, energy_certificate, random_energy_problem, EnergyCertificate};
pub use propagator::Propagator;
pub use solvers::{solve, solve_constant, solve_time_dependent, solve_variable, Freezing, StepControl, TimeDependentOptions};

use crate::error::{Error, Result};
use crate::petrovskii::SquareMatrix;
use crate::spectral_field::{MatrixField, SpectralField};

/// Right-hand side `F(t)`.
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    None,
    Steady(SpectralField),
    /// Piecewise linear between samples, constant beyond the ends.
    Sampled {
        times: Vec<f64>,
        values: Vec<SpectralField>,
    },
    Function(Arc<dyn Fn(f64) -> SpectralField + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::None => write!(f, "Forcing::None"),
            Forcing::Steady(_) => write!(f, "Forcing::Steady(..)"),
            Forcing::Sampled { times, .. } => write!(f, "Forcing::Sampled({} samples)", times.len()),
            Forcing::Function(_) => write!(f, "Forcing::Function(..)"),
        }
    }
}

impl Forcing {
    pub fn function(f: impl Fn(f64) -> SpectralField + Send + Sync + 'static) -> Self {
        Forcing::Function(Arc::new(f))
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }

    /// `F(t)`, or `None` for the zero forcing.
    pub fn eval(&self, t: f64) -> Option<SpectralField> {
        match self {
            Forcing::None => None,
            Forcing::Steady(f) => Some(f.clone()),
            Forcing::Function(f) => Some(f(t)),
            Forcing::Sampled { times, values } => {
                if times.is_empty() {
                    return None;
                }
                let last = times.len() - 1;
                if t <= times[0] {
                    return Some(values[0].clone());
                }
                if t >= times[last] {
                    return Some(values[last].clone());
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                let theta = (t - times[i]) / (times[i + 1] - times[i]);
                if theta == 0.0 {
                    return Some(values[i].clone());
                }
                Some(&values[i].scaled(1.0 - theta) + &values[i + 1].scaled(theta))
            }
        }
    }

    /// Same forcing seen from a clock started at `offset`.
    pub fn shifted(&self, offset: f64) -> Forcing {
        match self {
            Forcing::None => Forcing::None,
            Forcing::Steady(f) => Forcing::Steady(f.clone()),
            Forcing::Sampled { times, values } => Forcing::Sampled {
                times: times.iter().map(|t| t - offset).collect(),
                values: values.clone(),
            },
            Forcing::Function(f) => {
                let f = f.clone();
                Forcing::Function(Arc::new(move |t| f(t + offset)))
            }
        }
    }
}

/// Space-time samples of a matrix coefficient.
pub trait CoefficientField: Send + Sync {
    fn at(&self, t: f64) -> MatrixField;
}

impl<F> CoefficientField for F
where
    F: Fn(f64) -> MatrixField + Send + Sync,
{
    fn at(&self, t: f64) -> MatrixField {
        self(t)
    }
}

/// The three coefficient regimes.
#[derive(Clone)]
pub enum Coefficient {
    Constant(SquareMatrix),
    Path(Arc<dyn Fn(f64) -> SquareMatrix + Send + Sync>),
    Field(Arc<dyn CoefficientField>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(b) => write!(f, "Coefficient::Constant({b})"),
            Coefficient::Path(_) => write!(f, "Coefficient::Path(..)"),
            Coefficient::Field(_) => write!(f, "Coefficient::Field(..)"),
        }
    }
}

/// Data of one linear Cauchy problem on `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    pub v0: SpectralField,
    pub forcing: Forcing,
    pub horizon: f64,
    pub dt: f64,
    /// Store every `stride`-th step (the final time is always stored).
    pub stride: usize,
}

impl LinearProblem {
    pub fn new(v0: SpectralField, forcing: Forcing, horizon: f64, dt: f64) -> Self {
        Self {
            v0,
            forcing,
            horizon,
            dt,
            stride: 1,
        }
    }

    /// Number of steps and the exact step size `horizon / steps`.
    pub fn steps(&self) -> Result<(usize, f64)> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Usage(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Usage(format!("dt must be positive, got {}", self.dt)));
        }
        let m = (self.horizon / self.dt).round().max(1.0) as usize;
        Ok((m, self.horizon / m as f64))
    }

    pub(crate) fn forcing_checked(&self, t: f64) -> Result<Option<SpectralField>> {
        match self.forcing.eval(t) {
            Some(f) if !f.same_shape(&self.v0) => Err(Error::Usage(
                "forcing and initial data live on different grids or component counts".into(),
            )),
            other => Ok(other),
        }
    }
}
