use crate::littlewood_paley::smooth_step;

/// Width `c` of the transition layer, in units of the margin.
pub const RETRACTION_LAYER: f64 = 0.5;
/// Value approached deep below the cone, in units of the margin.
const DEPTH: f64 = 0.25;

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn bump_prime(t: f64) -> f64 {
    if t > 0.0 {
        bump(t) / (t * t)
    } else {
        0.0
    }
}

fn smooth_step_prime(t: f64) -> f64 {
    let (a, b) = (bump(t), bump(1.0 - t));
    let den = a + b;
    if den == 0.0 {
        return 0.0;
    }
    (bump_prime(t) * b + a * bump_prime(1.0 - t)) / (den * den)
}

/// `ψ(τ) = τ + S(τ/c)(L − τ)`: identity to infinite order at 0, `≡ L` for `τ ≥ c`.
fn psi(tau: f64) -> f64 {
    tau + smooth_step(tau / RETRACTION_LAYER) * (DEPTH - tau)
}

fn psi_prime(tau: f64) -> f64 {
    let s = smooth_step(tau / RETRACTION_LAYER);
    1.0 - s + smooth_step_prime(tau / RETRACTION_LAYER) / RETRACTION_LAYER * (DEPTH - tau)
}

/// One component of the retraction.
pub fn retraction_scalar(u: f64, margin: f64) -> f64 {
    if u >= 0.0 {
        u
    } else {
        -margin * psi(-u / margin)
    }
}

/// Componentwise smooth map onto `(−margin/2, ∞)ᴺ`, the identity on the cone.
pub fn retraction(u: &[f64], margin: f64) -> Vec<f64> {
    u.iter().map(|&x| retraction_scalar(x, margin)).collect()
}

/// `dh_i/du_i`.
pub fn retraction_derivative(u: f64, margin: f64) -> f64 {
    if u >= 0.0 {
        1.0
    } else {
        psi_prime(-u / margin)
    }
}
