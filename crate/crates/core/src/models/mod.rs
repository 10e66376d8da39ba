//! Model definitions and structure checks: the SKT cross-diffusion system,
//! reaction terms `R(U) = diag(U)ρ(U)`, sign-preserving splits, cone-restricted
//! Petrovskii sampling, the symmetric-part determinant, and a smooth retraction
//! onto a neighbourhood of the nonnegative cone.

mod checks;
mod retraction;
mod skt;

use std::fmt;
use std::sync::Arc;

pub use checks::{
    nonnegativity_check, verify_cone_petrovskii, verify_sign_preserving, ConeReport, NonnegativityReport,
    SignPreservingReport,
};
pub use retraction::{retraction, retraction_derivative, retraction_scalar, RETRACTION_LAYER};
pub use skt::{skt_matrix, skt_reaction, skt_split, symmetric_part_determinant, symmetric_part_determinant_literal, SKTParams};

use crate::error::{Error, Result};
use crate::linear_solver::Forcing;
use crate::petrovskii::SquareMatrix;
use crate::spectral_field::SpectralField;

pub type StateMatrixFn = Arc<dyn Fn(&[f64]) -> SquareMatrix + Send + Sync>;
pub type StateVectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `A(U) = D(U) + diag(U)·B(U)`.
#[derive(Clone)]
pub struct Split {
    pub d: StateMatrixFn,
    pub b: StateMatrixFn,
}

/// A quasilinear system `∂_t U − Σ_k ∂_k[A(U)∂_k U] = F + diag(U)ρ(U)`.
#[derive(Clone)]
pub struct ModelSpec {
    pub n: usize,
    pub a: StateMatrixFn,
    pub split: Option<Split>,
    pub rho: Option<StateVectorFn>,
    pub forcing: Forcing,
    pub u0: SpectralField,
    pub s: f64,
    /// Petrovskii only required on the nonnegative cone; `A` is then always
    /// evaluated through [`retraction`] with `margin`.
    pub cone_only: bool,
    pub margin: f64,
    /// Time step used by the solvers.
    pub dt: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("n", &self.n)
            .field("split", &self.split.is_some())
            .field("reaction", &self.rho.is_some())
            .field("forcing", &self.forcing)
            .field("s", &self.s)
            .field("cone_only", &self.cone_only)
            .field("margin", &self.margin)
            .field("dt", &self.dt)
            .finish()
    }
}

/// `0.05 ×` the smallest positive sample of `u0`, or 0.05 when there is none.
pub fn default_margin(u0: &SpectralField) -> f64 {
    let m = u0
        .to_physical()
        .data
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        0.05 * m
    } else {
        0.05
    }
}

impl ModelSpec {
    /// Constant diffusion `A ≡ B`, no reaction.
    pub fn linear(b: SquareMatrix, u0: SpectralField, s: f64, dt: f64) -> Self {
        let n = b.nrows();
        let bb = b.clone();
        Self {
            n,
            a: Arc::new(move |_| bb.clone()),
            split: None,
            rho: None,
            forcing: Forcing::None,
            margin: default_margin(&u0),
            u0,
            s,
            cone_only: false,
            dt,
        }
    }

    /// SKT with its sign-preserving split; reaction included when any rate is nonzero.
    pub fn skt(p: SKTParams, u0: SpectralField, s: f64, dt: f64) -> Result<Self> {
        p.validate()?;
        let pa = p;
        let (pd, pb) = (p, p);
        let rho: Option<StateVectorFn> = if p.has_reaction() {
            Some(Arc::new(move |u: &[f64]| {
                vec![
                    p.r1 - p.s11 * u[0] - p.s12 * u[1],
                    p.r2 - p.s21 * u[0] - p.s22 * u[1],
                ]
            }))
        } else {
            None
        };
        Ok(Self {
            n: 2,
            a: Arc::new(move |u| skt_matrix(u, &pa)),
            split: Some(Split {
                d: Arc::new(move |u| skt_split(u, &pd).0),
                b: Arc::new(move |u| skt_split(u, &pb).1),
            }),
            rho,
            forcing: Forcing::None,
            margin: default_margin(&u0),
            u0,
            s,
            cone_only: true,
            dt,
        })
    }

    pub fn with_initial(&self, u0: SpectralField) -> Self {
        Self { u0, ..self.clone() }
    }

    pub fn with_forcing(&self, forcing: Forcing) -> Self {
        Self { forcing, ..self.clone() }
    }

    /// Sobolev index, component count and grid consistency.
    pub fn validate(&self) -> Result<()> {
        let d = self.u0.grid.dim() as f64;
        if !(self.s > 0.5 * d) {
            return Err(Error::Usage(format!("Sobolev index s = {} must exceed d/2 = {}", self.s, 0.5 * d)));
        }
        if self.u0.ncomp != self.n {
            return Err(Error::Usage(format!(
                "initial data has {} components, model has {}",
                self.u0.ncomp, self.n
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Usage(format!("model dt must be positive, got {}", self.dt)));
        }
        if self.cone_only && !(self.margin > 0.0) {
            return Err(Error::Usage("retraction margin must be positive".into()));
        }
        Ok(())
    }

    /// The diffusion matrix actually used by the solvers: `A∘h` for cone-only models.
    pub fn diffusion(&self, u: &[f64]) -> SquareMatrix {
        if self.cone_only {
            (self.a)(&retraction(u, self.margin))
        } else {
            (self.a)(u)
        }
    }

    /// `A(0)`, the reference coefficient.
    pub fn reference_matrix(&self) -> SquareMatrix {
        self.diffusion(&vec![0.0; self.n])
    }

    /// `R(U) = diag(U)ρ(U)`, zero without reaction.
    pub fn reaction(&self, u: &[f64]) -> Vec<f64> {
        match &self.rho {
            None => vec![0.0; self.n],
            Some(rho) => rho(u).iter().zip(u).map(|(r, x)| r * x).collect(),
        }
    }

    pub fn has_reaction(&self) -> bool {
        self.rho.is_some()
    }

    /// Whether `A` is the same matrix at every state (sampled at 0 and a unit state).
    pub fn is_linear(&self) -> bool {
        self.split.is_none() && self.rho.is_none() && {
            let z = (self.a)(&vec![0.0; self.n]);
            [1.0, -1.0, 3.0].iter().all(|v| (self.a)(&vec![*v; self.n]) == z)
        }
    }
}
