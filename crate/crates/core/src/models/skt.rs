use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::petrovskii::SquareMatrix;

/// SKT coefficients: base diffusion `d`, cross/self diffusion `a`, reaction `r`, `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SKTParams {
    pub d1: f64,
    pub d2: f64,
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub r1: f64,
    pub r2: f64,
    pub s11: f64,
    pub s12: f64,
    pub s21: f64,
    pub s22: f64,
}

impl Default for SKTParams {
    fn default() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            a11: 0.5,
            a12: 0.5,
            a21: 0.5,
            a22: 0.5,
            r1: 0.0,
            r2: 0.0,
            s11: 0.0,
            s12: 0.0,
            s21: 0.0,
            s22: 0.0,
        }
    }
}

impl SKTParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d1 > 0.0 && self.d2 > 0.0) {
            return Err(Error::Usage(format!("SKT needs d1, d2 > 0 (got {}, {})", self.d1, self.d2)));
        }
        let rest = [
            ("a11", self.a11),
            ("a12", self.a12),
            ("a21", self.a21),
            ("a22", self.a22),
            ("r1", self.r1),
            ("r2", self.r2),
            ("s11", self.s11),
            ("s12", self.s12),
            ("s21", self.s21),
            ("s22", self.s22),
        ];
        for (name, v) in rest {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("SKT parameter {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn has_reaction(&self) -> bool {
        [self.r1, self.r2, self.s11, self.s12, self.s21, self.s22]
            .iter()
            .any(|v| *v != 0.0)
    }
}

pub fn skt_matrix(u: &[f64], p: &SKTParams) -> SquareMatrix {
    let (u1, u2) = (u[0], u[1]);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            p.d1 + 2.0 * p.a11 * u1 + p.a12 * u2,
            p.a12 * u1,
            p.a21 * u2,
            p.d2 + p.a21 * u1 + 2.0 * p.a22 * u2,
        ],
    )
}

/// `(u₁(r₁ − s₁₁u₁ − s₁₂u₂), u₂(r₂ − s₂₁u₁ − s₂₂u₂))`.
pub fn skt_reaction(u: &[f64], p: &SKTParams) -> [f64; 2] {
    let (u1, u2) = (u[0], u[1]);
    [
        u1 * (p.r1 - p.s11 * u1 - p.s12 * u2),
        u2 * (p.r2 - p.s21 * u1 - p.s22 * u2),
    ]
}

/// `(D(U), B)` with `A = D + diag(U)B`.
pub fn skt_split(u: &[f64], p: &SKTParams) -> (SquareMatrix, SquareMatrix) {
    let d = DMatrix::from_row_slice(2, 2, &[p.d1 + p.a12 * u[1], 0.0, 0.0, p.d2 + p.a21 * u[0]]);
    let b = DMatrix::from_row_slice(2, 2, &[2.0 * p.a11, p.a12, p.a21, 2.0 * p.a22]);
    (d, b)
}

fn diag_and_cross(u: &[f64], p: &SKTParams) -> (f64, f64, f64) {
    let (u1, u2) = (u[0], u[1]);
    (
        p.d1 + 2.0 * p.a11 * u1 + p.a12 * u2,
        p.d2 + p.a21 * u1 + 2.0 * p.a22 * u2,
        p.a12 * u1 + p.a21 * u2,
    )
}

/// `(d₁+2a₁₁u₁+a₁₂u₂)(d₂+a₂₁u₁+2a₂₂u₂) − (a₁₂u₁+a₂₁u₂)²`, the determinant in its
/// conventional half-diagonal normalisation.
pub fn symmetric_part_determinant(u: &[f64], p: &SKTParams) -> f64 {
    let (p1, p2, q) = diag_and_cross(u, p);
    p1 * p2 - q * q
}

/// `det(A + Aᵀ) = 4P₁P₂ − Q²`.
pub fn symmetric_part_determinant_literal(u: &[f64], p: &SKTParams) -> f64 {
    let a = skt_matrix(u, p);
    (&a + a.transpose()).determinant()
}
