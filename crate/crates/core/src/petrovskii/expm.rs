//! Dense matrix exponential by scaling and squaring around a degree-13
//! diagonal Padé approximant, and the first two `φ` functions through an
//! augmented block exponential.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled degree-13 approximant is accurate to unit roundoff.
const THETA13: f64 = 5.371920351148152;

pub(crate) fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{A}`.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm of a non-square matrix");
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::ExpOverflow { norm });
    }
    if n == 0 || norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);

    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or(Error::ExpOverflow { norm })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().all(|x| x.is_finite()) {
        Ok(r)
    } else {
        Err(Error::ExpOverflow { norm })
    }
}

/// `(φ₀(A), φ₁(A), φ₂(A))` with `φ₀ = e^A`, `φ₁(z) = (e^z−1)/z`, `φ₂(z) = (e^z−1−z)/z²`.
///
/// Read off the first block row of `exp([[A, I, 0], [0, 0, I], [0, 0, 0]])`.
pub fn phi_functions(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut big = DMatrix::<f64>::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        big[(i, n + i)] = 1.0;
        big[(n + i, 2 * n + i)] = 1.0;
    }
    let e = expm(&big)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    ))
}
