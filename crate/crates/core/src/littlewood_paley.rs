//! Dyadic Littlewood–Paley blocks on the lattice of a [`TorusGrid`].
//!
//! `χ̂` is a radial smooth step equal to 1 on `|ξ| ≤ 3/4` and 0 on
//! `|ξ| ≥ 4/3`; the ring profile is `φ̂(ξ) = χ̂(ξ/2) − χ̂(ξ)`, supported in
//! `3/4 ≤ |ξ| ≤ 8/3`. The partition telescopes:
//! `χ̂(ξ) + Σ_{j=0}^{J} φ̂(2^{−j}ξ) = χ̂(2^{−J−1}ξ)`.

use crate::error::{Error, Result};
use crate::kv::KvRecord;
use crate::spectral_field::{dealiased_product, sobolev_norm, SpectralField, TorusGrid};

const INNER: f64 = 0.75;
const OUTER: f64 = 4.0 / 3.0;

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `C^∞` transition: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    let a = bump(t);
    let b = bump(1.0 - t);
    a / (a + b)
}

/// Low-frequency profile `χ̂(r)`.
pub fn chi_hat(r: f64) -> f64 {
    if r <= INNER {
        1.0
    } else if r >= OUTER {
        0.0
    } else {
        smooth_step((OUTER - r) / (OUTER - INNER))
    }
}

/// Ring profile `φ̂(r) = χ̂(r/2) − χ̂(r)`.
pub fn phi_hat(r: f64) -> f64 {
    chi_hat(0.5 * r) - chi_hat(r)
}

/// The block multipliers of one grid.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    grid: TorusGrid,
    j_max: i32,
}

impl DyadicPartition {
    /// `j_max` is the smallest `j` with `χ̂(2^{−j−1}k) = 1` on every lattice mode,
    /// so blocks past it vanish identically.
    pub fn new(grid: &TorusGrid) -> Self {
        let kmax = (grid.max_ksq() as f64).sqrt();
        let mut j_max = 0;
        while kmax > INNER * 2f64.powi(j_max + 1) {
            j_max += 1;
        }
        Self {
            grid: grid.clone(),
            j_max,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Multiplier of `Δ_j` at radius `r`.
    pub fn block_symbol(j: i32, r: f64) -> f64 {
        match j {
            j if j < -1 => 0.0,
            -1 => chi_hat(r),
            j => phi_hat(r * 2f64.powi(-j)),
        }
    }

    /// Multiplier of `S_j = Σ_{j′<j} Δ_{j′}` at radius `r`, in telescoped form.
    pub fn low_pass_symbol(j: i32, r: f64) -> f64 {
        if j < 0 {
            0.0
        } else {
            chi_hat(r * 2f64.powi(-j))
        }
    }

    fn check(&self, f: &SpectralField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::Usage("littlewood-paley: field grid differs from partition grid".into()));
        }
        Ok(())
    }

    /// `Δ_j f`.
    pub fn block(&self, f: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check(f)?;
        if j > self.j_max {
            return Ok(SpectralField::zeros(&f.grid, f.ncomp));
        }
        let g = &self.grid;
        Ok(f.multiply_modes(|p| Self::block_symbol(j, g.kabs(p))))
    }

    /// `S_j f`.
    pub fn low_pass(&self, f: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check(f)?;
        let g = &self.grid;
        Ok(f.multiply_modes(|p| Self::low_pass_symbol(j, g.kabs(p))))
    }

    /// Largest `|χ̂(k) + Σ_j φ̂(2^{−j}k) − 1|` over lattice modes.
    pub fn partition_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| {
                let r = self.grid.kabs(p);
                let s: f64 = (-1..=self.j_max).map(|j| Self::block_symbol(j, r)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `(Σ_j 2^{2js} ‖Δ_j f‖₂²)^{1/2}`.
    pub fn lp_sobolev_norm(&self, f: &SpectralField, s: f64) -> Result<f64> {
        self.check(f)?;
        let g = &self.grid;
        let total: f64 = (-1..=self.j_max)
            .map(|j| {
                let w = 2f64.powf(2.0 * j as f64 * s);
                w * f.weighted_sq(|p| Self::block_symbol(j, g.kabs(p)).powi(2))
            })
            .sum();
        Ok(total.sqrt())
    }

    /// Exact equivalence constants `(c₁, c₂)` between the block norm and the
    /// bracket `H^s` norm: extremes of the per-mode weight ratio over the lattice.
    pub fn equivalence_constants(&self, s: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for p in 0..self.grid.len() {
            let r = self.grid.kabs(p);
            let w: f64 = (-1..=self.j_max)
                .map(|j| 2f64.powf(2.0 * j as f64 * s) * Self::block_symbol(j, r).powi(2))
                .sum();
            let ratio = (w / (1.0 + r * r).powf(s)).sqrt();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        (lo, hi)
    }

    /// `‖∂^α Δ_j f‖_q / (2^{j(|α| + d(1/2 − 1/q))} ‖Δ_j f‖₂)`, `q ∈ {2, ∞}`;
    /// 0 when the block norm is below `1e−14`.
    pub fn bernstein_ratio(&self, f: &SpectralField, j: i32, alpha: &[usize], q: LebesgueExponent) -> Result<f64> {
        let b = self.block(f, j)?;
        let denom_norm = b.l2_norm();
        if denom_norm <= 1e-14 {
            return Ok(0.0);
        }
        let order: usize = alpha.iter().sum();
        let db = b.derivative_multi(alpha);
        let (num, gain) = match q {
            LebesgueExponent::Two => (db.l2_norm(), 0.0),
            LebesgueExponent::Infinity => {
                let sup = db
                    .to_physical_complex()
                    .iter()
                    .fold(0.0f64, |m, z| m.max(z.norm()));
                (sup, 0.5 * self.grid.dim() as f64)
            }
        };
        let scale = 2f64.powf(j.max(0) as f64 * (order as f64 + gain));
        Ok(num / (scale * denom_norm))
    }

    /// Smallest constant dominating [`Self::bernstein_ratio`] for every field.
    ///
    /// For `q = 2` this is the exact supremum `max_j max_{k ∈ supp Δ_j} |k^α| / 2^{j|α|}`.
    /// For `q = ∞` it is the `ℓ¹–ℓ²` bound `max_j max |k^α| √(#supp) / 2^{j(|α|+d/2)}`.
    pub fn bernstein_constant(&self, alpha: &[usize], q: LebesgueExponent) -> f64 {
        let order: usize = alpha.iter().sum();
        let d = self.grid.dim();
        let mut worst = 0.0f64;
        for j in -1..=self.j_max {
            let mut count = 0usize;
            let mut kmax = 0.0f64;
            for p in 0..self.grid.len() {
                if Self::block_symbol(j, self.grid.kabs(p)) == 0.0 {
                    continue;
                }
                count += 1;
                let k = self.grid.wavevector(p);
                let ka: f64 = (0..d).map(|a| (k[a].unsigned_abs() as f64).powi(alpha.get(a).copied().unwrap_or(0) as i32)).product();
                kmax = kmax.max(ka);
            }
            if count == 0 {
                continue;
            }
            let jj = j.max(0) as f64;
            let c = match q {
                LebesgueExponent::Two => kmax / 2f64.powf(jj * order as f64),
                LebesgueExponent::Infinity => {
                    kmax * (count as f64).sqrt() / 2f64.powf(jj * (order as f64 + 0.5 * d as f64))
                }
            };
            worst = worst.max(c);
        }
        worst
    }

    /// `[Δ_j, a] f = Δ_j(a f) − a Δ_j f`, products dealiased.
    pub fn commutator(&self, a: &SpectralField, f: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check(a)?;
        self.check(f)?;
        let af = dealiased_product(a, f)?;
        Ok(&self.block(&af, j)? - &dealiased_product(a, &self.block(f, j)?)?)
    }

    /// The three sums whose total is `[Δ_j, a] f`:
    ///
    /// * `T1 = Δ_j Σ_{j′} (Δ_{j′}a) S_{j′+2} f`
    /// * `T2 = −Σ_{j′} [S_{j′−1}a, Δ_j] Δ_{j′} f`
    /// * `T3 = Σ_{j′} (S_{j′−1}a − a) Δ_j Δ_{j′} f`
    ///
    /// `a` is scalar (1 component) or an `N×N` matrix field (`N²` components, row-major).
    pub fn commutator_decomposition(
        &self,
        a: &SpectralField,
        f: &SpectralField,
        j: i32,
    ) -> Result<CommutatorTerms> {
        self.check(a)?;
        self.check(f)?;
        let n = f.ncomp;
        let mut t1 = SpectralField::zeros(&f.grid, n);
        let mut t2 = SpectralField::zeros(&f.grid, n);
        let mut t3 = SpectralField::zeros(&f.grid, n);
        for jp in -1..=self.j_max {
            let da = self.block(a, jp)?;
            t1.axpy(1.0, &dealiased_product(&da, &self.low_pass(f, jp + 2)?)?);

            let sa = self.low_pass(a, jp - 1)?;
            let df = self.block(f, jp)?;
            let ddf = self.block(&df, j)?;
            // [S a, Δ_j] g = S a · Δ_j g − Δ_j(S a · g)
            let comm = &dealiased_product(&sa, &ddf)? - &self.block(&dealiased_product(&sa, &df)?, j)?;
            t2.axpy(-1.0, &comm);

            let diff = &sa - a;
            t3.axpy(1.0, &dealiased_product(&diff, &ddf)?);
        }
        Ok(CommutatorTerms {
            t1: self.block(&t1, j)?,
            t2,
            t3,
        })
    }

    /// Norm-equivalence and Bernstein constants for the report.
    pub fn calibrate(&self, sobolev_indices: &[f64]) -> Calibration {
        let d = self.grid.dim();
        let mut alphas: Vec<Vec<usize>> = vec![vec![0; d]];
        for a in 0..d {
            let mut e = vec![0; d];
            e[a] = 1;
            alphas.push(e);
        }
        Calibration {
            n: self.grid.n(),
            d,
            j_max: self.j_max,
            partition_defect: self.partition_defect(),
            equivalence: sobolev_indices
                .iter()
                .map(|&s| {
                    let (c1, c2) = self.equivalence_constants(s);
                    (s, c1, c2)
                })
                .collect(),
            bernstein: alphas
                .into_iter()
                .map(|a| {
                    let c2 = self.bernstein_constant(&a, LebesgueExponent::Two);
                    let ci = self.bernstein_constant(&a, LebesgueExponent::Infinity);
                    (a, c2, ci)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LebesgueExponent {
    Two,
    Infinity,
}

#[derive(Clone, Debug)]
pub struct CommutatorTerms {
    pub t1: SpectralField,
    pub t2: SpectralField,
    pub t3: SpectralField,
}

impl CommutatorTerms {
    pub fn sum(&self) -> SpectralField {
        &(&self.t1 + &self.t2) + &self.t3
    }
}

/// Measured constants of one partition.
#[derive(Clone, Debug)]
pub struct Calibration {
    pub n: usize,
    pub d: usize,
    pub j_max: i32,
    pub partition_defect: f64,
    /// `(s, c₁, c₂)`
    pub equivalence: Vec<(f64, f64, f64)>,
    /// `(α, C_α for q = 2, C_α for q = ∞)`
    pub bernstein: Vec<(Vec<usize>, f64, f64)>,
}

impl Calibration {
    pub fn to_kv(&self) -> KvRecord {
        let mut r = KvRecord::new();
        r.push("d", self.d);
        r.push("n", self.n);
        r.push("j_max", self.j_max);
        r.push_f64("partition_defect", self.partition_defect);
        for (s, c1, c2) in &self.equivalence {
            r.push_f64(format!("c1.s{s}"), *c1);
            r.push_f64(format!("c2.s{s}"), *c2);
        }
        for (a, c2, ci) in &self.bernstein {
            let tag: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let tag = tag.join("");
            r.push_f64(format!("bernstein.a{tag}.q2"), *c2);
            r.push_f64(format!("bernstein.a{tag}.qinf"), *ci);
        }
        r
    }
}

/// `Σ_j Δ_j f` over all active blocks.
pub fn resum(partition: &DyadicPartition, f: &SpectralField) -> Result<SpectralField> {
    let mut out = SpectralField::zeros(&f.grid, f.ncomp);
    for j in -1..=partition.j_max() {
        out.axpy(1.0, &partition.block(f, j)?);
    }
    Ok(out)
}

/// Relative bracket/block norm ratio, helper for diagnostics.
pub fn norm_ratio(partition: &DyadicPartition, f: &SpectralField, s: f64) -> Result<f64> {
    let hs = sobolev_norm(f, s);
    if hs == 0.0 {
        return Ok(0.0);
    }
    Ok(partition.lp_sobolev_norm(f, s)? / hs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::PhysicalField;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: &TorusGrid, ncomp: usize, rng: &mut impl Rng) -> SpectralField {
        let mut f = SpectralField::zeros(g, ncomp);
        for z in f.coeffs.iter_mut() {
            *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        f.symmetrized().dealiased()
    }

    #[test]
    fn profiles_take_values_in_unit_interval() {
        for i in 0..=400 {
            let r = i as f64 * 0.01;
            let c = chi_hat(r);
            let p = phi_hat(r);
            assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&p));
            if r <= 0.75 || r >= 8.0 / 3.0 {
                assert_eq!(p, 0.0);
            }
            if r >= 4.0 / 3.0 {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn j_max_matches_log_rule() {
        for (d, n) in [(1, 16), (1, 64), (2, 32), (2, 128)] {
            let g = TorusGrid::new(d, n).unwrap();
            let want = ((n / 2) as f64).log2().ceil() as i32;
            assert_eq!(DyadicPartition::new(&g).j_max(), want, "d={d} n={n}");
        }
    }

    #[test]
    fn constant_lives_in_low_block() {
        let g = TorusGrid::new(2, 16).unwrap();
        let lp = DyadicPartition::new(&g);
        let f = SpectralField::constant(&g, &[2.0]);
        assert_eq!(lp.block(&f, -1).unwrap(), f);
        for j in 0..=lp.j_max() {
            assert_eq!(lp.block(&f, j).unwrap().l2_norm(), 0.0);
            assert_eq!(lp.low_pass(&f, j).unwrap(), f);
        }
    }

    #[test]
    fn mode_of_radius_two_hits_blocks_zero_and_one() {
        let g = TorusGrid::new(1, 32).unwrap();
        let lp = DyadicPartition::new(&g);
        let f = SpectralField::single_mode(&g, [2, 0], &[Complex64::new(1.0, 0.0)]).unwrap();
        let active: Vec<i32> = (-1..=lp.j_max())
            .filter(|&j| lp.block(&f, j).unwrap().l2_norm() > 0.0)
            .collect();
        assert_eq!(active, vec![0, 1]);
        let (c1, c2) = lp.equivalence_constants(1.0);
        let r = norm_ratio(&lp, &f, 1.0).unwrap();
        assert!(r >= c1 * (1.0 - 1e-12) && r <= c2 * (1.0 + 1e-12));
    }

    #[test]
    fn resummation_and_low_pass() {
        let g = TorusGrid::new(2, 32).unwrap();
        let lp = DyadicPartition::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&g, 2, &mut rng);
        assert!((&resum(&lp, &f).unwrap() - &f).l2_norm() <= 1e-12 * f.l2_norm());
        assert!((&lp.low_pass(&f, lp.j_max() + 1).unwrap() - &f).l2_norm() <= 1e-12 * f.l2_norm());
        assert_eq!(lp.low_pass(&f, 0).unwrap(), lp.block(&f, -1).unwrap());
        let mut prev = f64::INFINITY;
        for j in 0..=lp.j_max() + 1 {
            let err = (&lp.low_pass(&f, j).unwrap() - &f).l2_norm();
            assert!(err <= prev);
            prev = err;
        }
    }

    #[test]
    fn low_pass_is_sum_of_blocks() {
        let g = TorusGrid::new(1, 64).unwrap();
        let lp = DyadicPartition::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&g, 1, &mut rng);
        for j in 0..=lp.j_max() {
            let mut s = SpectralField::zeros(&g, 1);
            for jp in -1..j {
                s.axpy(1.0, &lp.block(&f, jp).unwrap());
            }
            assert!((&s - &lp.low_pass(&f, j).unwrap()).l2_norm() < 1e-13);
        }
    }

    #[test]
    fn separated_blocks_are_orthogonal_exactly() {
        let g = TorusGrid::new(2, 64).unwrap();
        let lp = DyadicPartition::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field(&g, 1, &mut rng);
        for j in -1..=lp.j_max() {
            for jp in -1..=lp.j_max() {
                if (j - jp).abs() >= 2 {
                    let b = lp.block(&lp.block(&f, jp).unwrap(), j).unwrap();
                    assert_eq!(b.l2_norm(), 0.0, "j={j} j'={jp}");
                }
            }
        }
    }

    #[test]
    fn bernstein_single_mode_and_zero() {
        let g = TorusGrid::new(1, 64).unwrap();
        let lp = DyadicPartition::new(&g);
        let f = SpectralField::single_mode(&g, [4, 0], &[Complex64::new(1.0, 0.0)]).unwrap();
        let r = lp.bernstein_ratio(&f, 2, &[1], LebesgueExponent::Two).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let z = SpectralField::zeros(&g, 1);
        assert_eq!(lp.bernstein_ratio(&z, 2, &[1], LebesgueExponent::Two).unwrap(), 0.0);
    }

    #[test]
    fn bernstein_ratios_bounded_by_constant() {
        let g = TorusGrid::new(2, 32).unwrap();
        let lp = DyadicPartition::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for alpha in [[0usize, 0], [1, 0], [0, 1]] {
            for q in [LebesgueExponent::Two, LebesgueExponent::Infinity] {
                let c = lp.bernstein_constant(&alpha, q);
                for _ in 0..5 {
                    let shift = rng.random::<f64>();
                    let phys = PhysicalField::from_fn(&g, 1, |x| vec![(x[0] + shift).sin() * (2.0 * x[1]).cos()]);
                    let f = &SpectralField::from_physical(&phys) + &random_field(&g, 1, &mut rng);
                    for j in -1..=lp.j_max() {
                        let r = lp.bernstein_ratio(&f, j, &alpha, q).unwrap();
                        assert!(r <= c * (1.0 + 1e-12), "alpha={alpha:?} q={q:?} j={j} r={r} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn commutator_identity() {
        let g = TorusGrid::new(1, 64).unwrap();
        let lp = DyadicPartition::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let a = random_field(&g, 1, &mut rng);
            let f = random_field(&g, 2, &mut rng);
            let asup = a.to_physical().sup_norm();
            for j in -1..=lp.j_max() {
                let terms = lp.commutator_decomposition(&a, &f, j).unwrap();
                let direct = lp.commutator(&a, &f, j).unwrap();
                let res = (&terms.sum() - &direct).l2_norm();
                assert!(res <= 1e-10 * asup * f.l2_norm(), "j={j} res={res}");
            }
        }
    }

    #[test]
    fn commutator_with_constant_vanishes() {
        let g = TorusGrid::new(1, 32).unwrap();
        let lp = DyadicPartition::new(&g);
        let a = SpectralField::constant(&g, &[3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_field(&g, 1, &mut rng);
        for j in -1..=lp.j_max() {
            let t = lp.commutator_decomposition(&a, &f, j).unwrap();
            assert!(lp.commutator(&a, &f, j).unwrap().l2_norm() < 1e-14);
            assert!(t.sum().l2_norm() < 1e-13, "j={j}");
            // low-low pieces alone survive: [S a, Δ_j] = 0 for constant a
            assert!(t.t2.l2_norm() < 1e-13, "j={j}");
        }
    }

    #[test]
    fn matrix_coefficient_commutator() {
        let g = TorusGrid::new(1, 32).unwrap();
        let lp = DyadicPartition::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_field(&g, 4, &mut rng);
        let f = random_field(&g, 2, &mut rng);
        for j in 0..=lp.j_max() {
            let res = (&lp.commutator_decomposition(&a, &f, j).unwrap().sum() - &lp.commutator(&a, &f, j).unwrap()).l2_norm();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn calibration_report_keys() {
        let g = TorusGrid::new(1, 32).unwrap();
        let cal = DyadicPartition::new(&g).calibrate(&[0.0, 1.0]);
        let kv = cal.to_kv();
        assert!(kv.get_f64("c1.s1").unwrap() > 0.0);
        assert!(kv.get_f64("bernstein.a1.q2").unwrap() > 0.0);
        assert!(cal.partition_defect <= 1e-12);
    }
}
