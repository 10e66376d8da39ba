use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kv::KvRecord;
use crate::petrovskii::suite::random_draw;
use crate::petrovskii::{decay_constant, operator_norm, SquareMatrix};
use crate::spectral_field::{homogeneous_gradient_sq, homogeneous_norm, SolutionHistory, SpectralField, TorusGrid};

use super::{solve_constant, Forcing, LinearProblem};

/// Both sides of the discrete energy estimate on the mean-free part.
///
/// `lhs = max_t ‖V‖²_{Ḣ^s} + δ ∫ ‖∇V‖²_{Ḣ^s}`,
/// `rhs_data = ‖V⁰‖²_{Ḣ^s} + δ⁻¹ ∫ ‖F‖²_{Ḣ^{s−1}}`, time integrals trapezoidal on
/// the stored snapshots. `balance_ratio` is
/// `max_t [‖V(t)‖²_{Ḣ^s} + δ ∫₀ᵗ ‖∇V‖²_{Ḣ^s}] / rhs_data`, which is at most 1 when
/// `M = bI` with `b ≥ δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCertificate {
    pub lhs: f64,
    pub rhs_data: f64,
    pub ratio: f64,
    pub balance_ratio: f64,
    pub delta: f64,
    /// `C_{B,δ}` for constant-coefficient runs.
    pub constant_bound: Option<f64>,
}

impl EnergyCertificate {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.ratio.is_finite() && self.constant_bound.is_none_or(|c| self.ratio <= c * (1.0 + tolerance))
    }

    pub fn to_kv(&self) -> KvRecord {
        let mut r = KvRecord::new();
        r.push_f64("lhs", self.lhs);
        r.push_f64("rhs", self.rhs_data);
        r.push_f64("ratio", self.ratio);
        r.push_f64("balance_ratio", self.balance_ratio);
        r.push_f64("delta", self.delta);
        if let Some(c) = self.constant_bound {
            r.push_f64("constant_bound", c);
        }
        r
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates both sides for a stored run of `prob`; pass the matrix for constant runs.
pub fn energy_certificate(
    h: &SolutionHistory,
    prob: &LinearProblem,
    s: f64,
    delta: f64,
    constant: Option<&SquareMatrix>,
) -> Result<EnergyCertificate> {
    if !(delta > 0.0) {
        return Err(Error::Usage(format!("energy certificate needs delta > 0, got {delta}")));
    }
    if h.is_empty() {
        return Err(Error::Usage("energy certificate of an empty history".into()));
    }
    let times = h.times();
    let mut x_sq = 0.0f64;
    let mut y_sq = 0.0;
    let mut f_sq = 0.0;
    let mut balance = 0.0f64;
    let mut prev: Option<(f64, f64, f64)> = None;
    for (t, v) in times.iter().zip(h.states()) {
        let xs = homogeneous_norm(v, s).powi(2);
        let gs = homogeneous_gradient_sq(v, s);
        let fs = prob.forcing.eval(*t).map_or(0.0, |f| homogeneous_norm(&f, s - 1.0).powi(2));
        if let Some((tp, gp, fp)) = prev {
            y_sq += 0.5 * (t - tp) * (gp + gs);
            f_sq += 0.5 * (t - tp) * (fp + fs);
        }
        x_sq = x_sq.max(xs);
        balance = balance.max(xs + delta * y_sq);
        prev = Some((*t, gs, fs));
    }
    let lhs = x_sq + delta * y_sq;
    let rhs = homogeneous_norm(&prob.v0, s).powi(2) + f_sq / delta;
    Ok(EnergyCertificate {
        lhs,
        rhs_data: rhs,
        ratio: ratio(lhs, rhs),
        balance_ratio: ratio(balance, rhs),
        delta,
        constant_bound: constant.map(|b| decay_constant(b, delta)).transpose()?,
    })
}

fn random_band_field(rng: &mut impl Rng, g: &TorusGrid, ncomp: usize, kmax: i64) -> SpectralField {
    let mut f = SpectralField::zeros(g, ncomp);
    let npts = g.len();
    for p in 0..npts {
        let k = g.wavevector(p);
        let r = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        if r == 0.0 || r > kmax as f64 {
            continue;
        }
        for c in 0..ncomp {
            f.coeffs[c * npts + p] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) / r;
        }
    }
    f.symmetrized()
}

/// A seeded constant-coefficient problem: `(B, δ)` from the Petrovskii suite,
/// band-limited mean-free data on a 16-point circle, forcing absent, steady,
/// or time-modulated with equal odds, horizon `8/δ`, steps resolving `⦀B⦀|k|²`.
pub fn random_energy_problem(rng: &mut impl Rng, n: usize) -> Result<(SquareMatrix, f64, LinearProblem)> {
    let g = TorusGrid::new(1, 16)?;
    let (b, delta) = random_draw(rng, n);
    let kmax = 3;
    let v0 = random_band_field(rng, &g, n, kmax);
    let forcing = match rng.random_range(0..3) {
        0 => Forcing::None,
        1 => Forcing::Steady(random_band_field(rng, &g, n, kmax).scaled(delta)),
        _ => {
            let f = random_band_field(rng, &g, n, kmax).scaled(delta);
            let w = delta * (0.5 + 2.0 * rng.random::<f64>());
            Forcing::function(move |t| f.scaled((w * t).cos()))
        }
    };
    let horizon = 8.0 / delta;
    let rate = operator_norm(&b) * (kmax * kmax) as f64;
    let dt = (horizon / 200.0).min(0.5 / rate);
    Ok((b, delta, LinearProblem::new(v0, forcing, horizon, dt)))
}

/// Largest `ratio / (1 + ⦀B⦀/δ)^N` over seeded [`random_energy_problem`]s, the
/// value of `a_N` the energy estimate needs.
pub fn calibrate_energy(n: usize, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let (b, delta, prob) = random_energy_problem(&mut rng, n)?;
        let h = solve_constant(&b, &prob, 1.0)?;
        let cert = energy_certificate(&h, &prob, 1.0, delta, None)?;
        worst = worst.max(cert.ratio / (1.0 + operator_norm(&b) / delta).powi(n as i32));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::PhysicalField;
    use nalgebra::DMatrix;

    #[test]
    fn scalar_heat_balance_is_tight() {
        let g = TorusGrid::new(1, 32).unwrap();
        let v0 = SpectralField::from_physical(&PhysicalField::from_fn(&g, 1, |x| {
            vec![x[0].sin() + 0.3 * (2.0 * x[0]).cos() + 0.1 * (4.0 * x[0]).sin()]
        }));
        let delta = 0.7;
        let b = DMatrix::from_element(1, 1, delta);
        let prob = LinearProblem::new(v0, Forcing::None, 4.0, 1e-3);
        let h = solve_constant(&b, &prob, 1.0).unwrap();
        let cert = energy_certificate(&h, &prob, 1.0, delta, Some(&b)).unwrap();
        assert!(cert.balance_ratio <= 1.0 + 1e-6 && cert.balance_ratio >= 1.0 - 1e-12);
        assert!(cert.holds(1e-9), "{cert:?}");
    }

    #[test]
    fn forced_scalar_balance() {
        let g = TorusGrid::new(1, 32).unwrap();
        let v0 = SpectralField::from_physical(&PhysicalField::from_fn(&g, 1, |x| vec![x[0].cos()]));
        let gf = g.clone();
        let f = Forcing::function(move |t| {
            SpectralField::from_physical(&PhysicalField::from_fn(&gf, 1, |x| vec![(3.0 * t).sin() * (2.0 * x[0]).sin()]))
        });
        let b = DMatrix::from_element(1, 1, 1.3);
        let prob = LinearProblem::new(v0, f, 3.0, 1e-3);
        let h = solve_constant(&b, &prob, 1.0).unwrap();
        let cert = energy_certificate(&h, &prob, 1.0, 1.0, Some(&b)).unwrap();
        assert!(cert.balance_ratio <= 1.0 + 1e-6, "{cert:?}");
    }

    #[test]
    fn zero_data_certificate() {
        let g = TorusGrid::new(1, 8).unwrap();
        let prob = LinearProblem::new(SpectralField::constant(&g, &[2.0]), Forcing::None, 1.0, 0.1);
        let b = DMatrix::from_element(1, 1, 1.0);
        let h = solve_constant(&b, &prob, 1.0).unwrap();
        let cert = energy_certificate(&h, &prob, 1.0, 1.0, Some(&b)).unwrap();
        assert_eq!((cert.lhs, cert.rhs_data, cert.ratio), (0.0, 0.0, 0.0));
        assert!(cert.holds(0.0));
    }

    #[test]
    fn random_suite_respects_frozen_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for _ in 0..5 {
                let (b, delta, prob) = random_energy_problem(&mut rng, n).unwrap();
                let h = solve_constant(&b, &prob, 1.0).unwrap();
                let cert = energy_certificate(&h, &prob, 1.0, delta, Some(&b)).unwrap();
                assert!(cert.holds(1e-9), "N={n}: {cert:?}");
            }
        }
    }
}
