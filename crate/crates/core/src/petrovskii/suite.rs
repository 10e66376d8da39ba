//! Seeded random matrices in `𝒫_δ` and the decay-bound calibration sweep.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{log_time_grid, matrix_exponential, operator_norm, SquareMatrix};
use crate::error::Result;

/// Largest 2-norm condition number accepted for the similarity `Q`.
pub const MAX_CONDITION: f64 = 20.0;

/// One draw `B = Q(Λ + δI)Q⁻¹` with `Re Λ ≥ 0`.
///
/// `Λ` is block diagonal with real `1×1` entries and `2×2` rotation blocks
/// `[[a, b], [−b, a]]`, entries scaled by `δ` so the spectrum lies in
/// `{δ ≤ Re z ≤ 5δ, |Im z| ≤ 4δ}`. `Q = I + G` with uniform `G`, redrawn until
/// its condition number is at most [`MAX_CONDITION`].
pub fn random_petrovskii_matrix(rng: &mut impl Rng, n: usize, delta: f64) -> SquareMatrix {
    let mut lam = DMatrix::<f64>::zeros(n, n);
    let mut i = 0;
    while i < n {
        let a = delta * (1.0 + 4.0 * rng.random::<f64>());
        if i + 1 < n && rng.random_bool(0.5) {
            let b = delta * 4.0 * (2.0 * rng.random::<f64>() - 1.0);
            lam[(i, i)] = a;
            lam[(i + 1, i + 1)] = a;
            lam[(i, i + 1)] = b;
            lam[(i + 1, i)] = -b;
            i += 2;
        } else {
            lam[(i, i)] = a;
            i += 1;
        }
    }
    loop {
        let g = DMatrix::from_fn(n, n, |_, _| 0.6 * (2.0 * rng.random::<f64>() - 1.0) / (n as f64).sqrt());
        let q = DMatrix::identity(n, n) + g;
        let sv = q.clone().singular_values();
        let cond = sv.max() / sv.min();
        if cond.is_finite() && cond <= MAX_CONDITION {
            let qinv = q.clone().try_inverse().expect("well-conditioned matrix is invertible");
            return &q * lam * qinv;
        }
    }
}

/// Draws `(B, δ)` with `δ ~ U[0.1, 2]`.
pub fn random_draw(rng: &mut impl Rng, n: usize) -> (SquareMatrix, f64) {
    let delta = 0.1 + 1.9 * rng.random::<f64>();
    (random_petrovskii_matrix(rng, n, delta), delta)
}

/// `max_t ‖e^{−tB}‖ e^{δt/2} / (1 + ⦀B⦀/δ)^N`, the value of `a_N` this draw needs.
pub fn required_constant(b: &SquareMatrix, delta: f64, t_grid: &[f64]) -> Result<f64> {
    let n = b.nrows() as i32;
    let scale = (1.0 + operator_norm(b) / delta).powi(n);
    let mut worst = 0.0f64;
    for &t in t_grid {
        let e = matrix_exponential(b, t)?;
        worst = worst.max(operator_norm(&e) * (0.5 * delta * t).exp() / scale);
    }
    Ok(worst)
}

/// Largest [`required_constant`] over `draws` seeded draws of size `n`, on a
/// dense log grid over `[0, 50/δ]`.
pub fn calibrate_decay(n: usize, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let (b, delta) = random_draw(&mut rng, n);
        let grid = log_time_grid(50.0 / delta, 400);
        worst = worst.max(required_constant(&b, delta, &grid)?);
    }
    Ok(worst)
}
