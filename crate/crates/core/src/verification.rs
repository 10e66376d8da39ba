//! The acceptance battery: each check runs at pinned tolerances and returns an
//! [`Outcome`] with its measured figures.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::kv::KvRecord;
use crate::linear_solver::{
    energy_certificate, random_energy_problem, solve_constant, solve_time_dependent, solve_variable, Forcing,
    LinearProblem, StepControl, TimeDependentOptions,
};
use crate::littlewood_paley::{resum, DyadicPartition, LebesgueExponent};
use crate::models::{
    nonnegativity_check, symmetric_part_determinant, symmetric_part_determinant_literal, verify_cone_petrovskii,
    ModelSpec, SKTParams,
};
use crate::nonlinear_solver::{
    continue_solution, mean_law_defect, residual, solve_local, stability_check, ContinuationOptions, PicardOptions,
    Termination,
};
use crate::petrovskii::{
    log_time_grid, matrix_exponential, spectral_abscissa, suite::random_draw, verify_exp_decay, SquareMatrix,
};
use crate::spectral_field::{sobolev_norm, MatrixField, PhysicalField, SolutionHistory, SpectralField, TorusGrid};

/// Result of one acceptance check.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub metrics: KvRecord,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl Outcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let budget = self.budget.map_or(String::new(), |b| format!("/{}s", b.as_secs()));
        format!(
            "[{verdict}] {:>2} {:<24} ({:.2}s{budget}) {}",
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.metrics.to_string().replace('\n', " ")
        )
    }
}

fn timed(
    id: usize,
    name: &'static str,
    budget: Option<u64>,
    body: impl FnOnce(&mut KvRecord) -> Result<bool>,
) -> Outcome {
    let start = Instant::now();
    let mut metrics = KvRecord::new();
    let ok = match body(&mut metrics) {
        Ok(ok) => ok,
        Err(e) => {
            metrics.push("error", e.kind());
            metrics.push("reason", e.to_string());
            false
        }
    };
    let elapsed = start.elapsed();
    let budget = budget.map(Duration::from_secs);
    let in_time = budget.is_none_or(|b| elapsed <= b);
    if !in_time {
        metrics.push("over_budget", true);
    }
    Outcome {
        id,
        name,
        passed: ok && in_time,
        metrics,
        elapsed,
        budget,
    }
}

fn default_skt_data(g: &TorusGrid, amp: f64) -> SpectralField {
    SpectralField::from_physical(&PhysicalField::from_fn(g, 2, |x| {
        vec![amp * (1.0 + 0.1 * x[0].cos()), amp * (1.0 + 0.1 * x[0].sin())]
    }))
}

fn random_band(rng: &mut impl Rng, g: &TorusGrid, ncomp: usize, kmax: f64) -> SpectralField {
    let mut f = SpectralField::zeros(g, ncomp);
    let npts = g.len();
    for p in 0..npts {
        let r = g.kabs(p);
        if r == 0.0 || r > kmax {
            continue;
        }
        for c in 0..ncomp {
            f.coeffs[c * npts + p] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) / r;
        }
    }
    f.symmetrized()
}

/// Relative `ℓ²` distance of two coefficient arrays.
fn rel_err(a: &SpectralField, b: &SpectralField) -> f64 {
    let d = (a - b).l2_norm();
    let n = b.l2_norm();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Decay bound on 200 seeded matrices, `N ∈ {2, 3, 4}`.
pub fn exp_decay(seed: u64) -> Outcome {
    timed(1, "exp-decay-bound", Some(10), |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<(SquareMatrix, f64)> = (0..200).map(|i| random_draw(&mut rng, 2 + i % 3)).collect();
        let reports = draws
            .par_iter()
            .map(|(b, delta)| verify_exp_decay(b, *delta, &log_time_grid(50.0 / delta, 50)))
            .collect::<Result<Vec<_>>>()?;
        let violations = reports.iter().filter(|r| !r.bound_holds()).count();
        let worst = reports.iter().map(|r| r.max_bound_ratio).fold(0.0, f64::max);
        m.push("draws", reports.len());
        m.push("violations", violations);
        m.push_f64("max_ratio", worst);
        Ok(violations == 0)
    })
}

/// Constant-coefficient propagation against `e^{−t|k|²B}` per mode, and the
/// convergence order with smooth time-dependent forcing.
pub fn exact_linear(seed: u64) -> Outcome {
    timed(2, "exact-linear", Some(5), |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TorusGrid::new(1, 64)?;
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.6]);
        let v0 = random_band(&mut rng, &g, 2, 8.0);
        let prob = LinearProblem::new(v0.clone(), Forcing::None, 1.0, 0.01);
        let h = solve_constant(&b, &prob, 1.0)?;
        let mut worst = 0.0f64;
        let npts = g.len();
        for (t, u) in h.times().iter().zip(h.states()) {
            let mut exact = SpectralField::zeros(&g, 2);
            for p in 0..npts {
                let e = matrix_exponential(&b, t * g.ksq(p) as f64)?;
                let c = v0.mode(p);
                let v: Vec<Complex64> = (0..2).map(|i| c[0] * e[(i, 0)] + c[1] * e[(i, 1)]).collect();
                exact.set_mode(p, &v);
            }
            worst = worst.max(rel_err(u, &exact));
        }
        m.push_f64("max_rel_err", worst);

        let f = random_band(&mut rng, &g, 2, 4.0);
        let forcing = Forcing::function(move |t| f.scaled((3.0 * t).cos() + (5.0 * t).sin()));
        let run = |dt: f64| -> Result<SpectralField> {
            let mut p = LinearProblem::new(v0.clone(), forcing.clone(), 1.0, dt);
            p.stride = usize::MAX;
            Ok(solve_constant(&b, &p, 1.0)?.last().clone())
        };
        let (a, c, d) = (run(0.05)?, run(0.025)?, run(0.0125)?);
        let order = ((&a - &c).l2_norm() / (&c - &d).l2_norm()).log2();
        m.push_f64("order", order);
        Ok(worst <= 1e-12 && order >= 1.9)
    })
}

/// Energy inequality on 50 random constant-`B` problems plus the scalar heat case.
pub fn energy(seed: u64) -> Outcome {
    timed(3, "energy-certificate", Some(30), |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problems = (0..50)
            .map(|i| random_energy_problem(&mut rng, 1 + i % 3))
            .collect::<Result<Vec<_>>>()?;
        let certs = problems
            .par_iter()
            .map(|(b, delta, prob)| {
                let h = solve_constant(b, prob, 1.0)?;
                energy_certificate(&h, prob, 1.0, *delta, Some(b))
            })
            .collect::<Result<Vec<_>>>()?;
        let failures = certs.iter().filter(|c| !c.holds(0.0)).count();
        let worst = certs
            .iter()
            .map(|c| c.ratio / c.constant_bound.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        m.push("problems", certs.len());
        m.push("failures", failures);
        m.push_f64("max_ratio_over_constant", worst);

        let g = TorusGrid::new(1, 32)?;
        let v0 = SpectralField::from_physical(&PhysicalField::from_fn(&g, 1, |x| {
            vec![x[0].sin() + 0.3 * (2.0 * x[0]).cos() + 0.1 * (4.0 * x[0]).sin()]
        }));
        let delta = 0.7;
        let b = DMatrix::from_element(1, 1, delta);
        let prob = LinearProblem::new(v0, Forcing::None, 10.0, 0.005);
        let h = solve_constant(&b, &prob, 1.0)?;
        let cert = energy_certificate(&h, &prob, 1.0, delta, Some(&b))?;
        m.push_f64("heat_ratio", cert.ratio);
        m.push_f64("heat_balance_ratio", cert.balance_ratio);
        Ok(failures == 0 && cert.holds(0.0) && cert.balance_ratio <= 1.0 + 1e-6)
    })
}

fn linear_mean_defect(u: &SolutionHistory, forcing: &Forcing) -> f64 {
    let n = u.first().ncomp;
    let model = ModelSpec::linear(DMatrix::identity(n, n), u.first().clone(), 1.0, 1.0).with_forcing(forcing.clone());
    mean_law_defect(&model, u)
}

/// `⟨U(t)⟩ − ⟨U⁰⟩ − ∫⟨F + R(U)⟩` on every solver path.
pub fn mean_law(seed: u64) -> Outcome {
    timed(4, "mean-law", None, |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TorusGrid::new(1, 64)?;
        let mut v0 = random_band(&mut rng, &g, 2, 6.0);
        v0.axpy(1.0, &SpectralField::constant(&g, &[0.7, -0.3]));
        let mut fsp = random_band(&mut rng, &g, 2, 4.0);
        fsp.axpy(1.0, &SpectralField::constant(&g, &[0.4, 1.1]));
        let forcing = Forcing::function(move |t| fsp.scaled(1.0 + (2.0 * t).sin()));
        let prob = LinearProblem::new(v0.clone(), forcing.clone(), 2.0, 0.01);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.2, 0.8]);
        let mut worst = 0.0f64;

        let c = solve_constant(&b, &prob, 1.0)?;
        let d = linear_mean_defect(&c, &forcing);
        m.push_f64("constant", d);
        worst = worst.max(d);

        let bp = b.clone();
        let path = move |t: f64| &bp * (1.0 + 0.5 * t.sin());
        let td = solve_time_dependent(&path, &prob, 1.0, TimeDependentOptions::default())?;
        let d = linear_mean_defect(&td, &forcing);
        m.push_f64("time_dependent", d);
        worst = worst.max(d);

        let gg = g.clone();
        let bv = b.clone();
        let field = move |t: f64| {
            MatrixField::from_fn(&gg, 2, |p| &bv * (1.0 + 0.3 * (gg.point(p)[0] + t).cos()))
        };
        let var = solve_variable(&field, &prob, 1.0, StepControl::default())?;
        let d = linear_mean_defect(&var, &forcing);
        m.push_f64("variable", d);
        worst = worst.max(d);

        let p = SKTParams {
            r1: 1.0,
            r2: 0.8,
            s11: 0.5,
            s12: 0.2,
            s21: 0.3,
            s22: 0.6,
            ..SKTParams::default()
        };
        let model = ModelSpec::skt(p, default_skt_data(&g, 1.0), 1.0, 0.01)?;
        let (u, _) = solve_local(&model, 0.5, 1e-13, PicardOptions::default())?;
        let d = mean_law_defect(&model, &u);
        m.push_f64("skt_local", d);
        worst = worst.max(d);

        let opts = ContinuationOptions {
            segment: 0.5,
            tol_fixed: 1e-13,
            ..ContinuationOptions::default()
        };
        let (_, hist) = continue_solution(&model, 2.0, opts)?;
        let d = mean_law_defect(&model, &hist);
        m.push_f64("skt_continued", d);
        worst = worst.max(d);
        m.push_f64("max_defect", worst);
        Ok(worst <= 1e-10)
    })
}

/// Partition of unity, resummation, block orthogonality, commutator
/// identity and Bernstein ratios.
pub fn littlewood_paley(seed: u64) -> Outcome {
    timed(5, "littlewood-paley", Some(20), |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ok = true;
        let mut partition_defect = 0.0f64;
        let mut resum_defect = 0.0f64;
        let mut leak = 0.0f64;
        for (d, n) in [(1, 128), (2, 32)] {
            let g = TorusGrid::new(d, n)?;
            let lp = DyadicPartition::new(&g);
            partition_defect = partition_defect.max(lp.partition_defect());
            let f = random_band(&mut rng, &g, 2, n as f64);
            resum_defect = resum_defect.max(rel_err(&resum(&lp, &f)?, &f));
            for j in -1..=lp.j_max() {
                let bj = lp.block(&f, j)?;
                for jp in -1..=lp.j_max() {
                    if (j - jp).abs() >= 2 {
                        leak = leak.max(lp.block(&bj, jp)?.coeffs.iter().fold(0.0f64, |a, z| a.max(z.norm())));
                    }
                }
            }
        }
        m.push_f64("partition_defect", partition_defect);
        m.push_f64("resum_defect", resum_defect);
        m.push_f64("far_block_product", leak);
        ok &= partition_defect <= 1e-8 && resum_defect <= 1e-10 && leak == 0.0;

        let g = TorusGrid::new(1, 128)?;
        let lp = DyadicPartition::new(&g);
        let pairs: Vec<(SpectralField, SpectralField, i32)> = (0..100)
            .map(|_| {
                let a = random_band(&mut rng, &g, 1, 40.0);
                let f = random_band(&mut rng, &g, 1, 40.0);
                let j = rng.random_range(-1..=lp.j_max());
                (a, f, j)
            })
            .collect();
        let worst = pairs
            .par_iter()
            .map(|(a, f, j)| -> Result<f64> {
                let direct = lp.commutator(a, f, *j)?;
                let terms = lp.commutator_decomposition(a, f, *j)?;
                let scale = a.to_physical().sup_norm() * f.l2_norm();
                Ok((&direct - &terms.sum()).l2_norm() / scale)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        m.push_f64("commutator_residual", worst);
        ok &= worst <= 1e-10;

        let mut bern = 0.0f64;
        for (alpha, q) in [
            (vec![0usize], LebesgueExponent::Two),
            (vec![1], LebesgueExponent::Two),
            (vec![0], LebesgueExponent::Infinity),
            (vec![1], LebesgueExponent::Infinity),
        ] {
            let c = lp.bernstein_constant(&alpha, q);
            for _ in 0..10 {
                let f = random_band(&mut rng, &g, 1, 64.0);
                for j in -1..=lp.j_max() {
                    bern = bern.max(lp.bernstein_ratio(&f, j, &alpha, q)? / c);
                }
            }
        }
        m.push_f64("bernstein_over_constant", bern);
        ok &= bern <= 1.05;
        Ok(ok)
    })
}

/// The Picard construction for small SKT data with reaction off.
pub fn picard(_seed: u64) -> Outcome {
    timed(6, "picard", Some(60), |m| {
        let g = TorusGrid::new(1, 64)?;
        let model = ModelSpec::skt(SKTParams::default(), default_skt_data(&g, 1.0), 1.0, 0.01)?;
        let (u, st) = solve_local(&model, 1.0, 1e-9, PicardOptions::default())?;
        let rep = residual(&model, &u)?;
        m.extend_prefixed("picard", &st.to_kv());
        m.extend_prefixed("residual", &rep.to_kv());
        let contract = st.contraction_ratios.iter().skip(1).all(|r| *r < 1.0);
        Ok(contract && st.iterate_index <= 10 && st.distance_to_previous() <= 1e-9 && rep.ratio() <= 10.0)
    })
}

/// Linear response of the solution map to `ε` and `ε/2` perturbations of `U⁰`.
pub fn stability(seed: u64) -> Outcome {
    timed(7, "stability", None, |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TorusGrid::new(1, 64)?;
        let model = ModelSpec::skt(SKTParams::default(), default_skt_data(&g, 1.0), 1.0, 0.01)?;
        let mut dir = random_band(&mut rng, &g, 2, 6.0);
        dir = dir.scaled(1.0 / sobolev_norm(&dir, 1.0));
        let mut ratios = Vec::new();
        for eps in [1e-3, 5e-4] {
            let u1 = &model.u0 + &dir.scaled(eps);
            let rep = stability_check(&model, (&u1, &Forcing::None), (&model.u0, &Forcing::None), 0.5, 1e-12)?;
            m.extend_prefixed(&format!("eps{eps:e}"), &rep.to_kv());
            ratios.push(rep.ratio);
        }
        let agree = (ratios[0] / ratios[1] - 1.0).abs();
        m.push_f64("relative_gap", agree);
        Ok(ratios.iter().all(|r| r.is_finite() && *r > 0.0) && agree <= 0.2)
    })
}

fn random_nonnegative(rng: &mut impl Rng, g: &TorusGrid) -> SpectralField {
    let mut f = random_band(rng, g, 2, 5.0);
    let phys = f.to_physical();
    let npts = g.len();
    for c in 0..2 {
        let vals = &phys.data[c * npts..(c + 1) * npts];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // rescale to [floor, floor + 1]
        let floor = 0.05 * rng.random::<f64>();
        let scale = 1.0 / (hi - lo);
        let comp = f.component_mut(c);
        for z in comp.iter_mut() {
            *z *= scale;
        }
        comp[0] += Complex64::new(floor - lo * scale, 0.0);
    }
    f
}

/// SKT with reaction from nonnegative data stays nonnegative.
pub fn sign_preservation(seed: u64) -> Outcome {
    timed(8, "sign-preservation", Some(300), |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TorusGrid::new(1, 64)?;
        let cases: Vec<(SKTParams, SpectralField)> = (0..10)
            .map(|_| {
                let p = SKTParams {
                    d1: 0.5 + rng.random::<f64>(),
                    d2: 0.5 + rng.random::<f64>(),
                    a11: 0.5 * rng.random::<f64>(),
                    a12: rng.random::<f64>(),
                    a21: rng.random::<f64>(),
                    a22: 0.5 * rng.random::<f64>(),
                    r1: 1.0 + rng.random::<f64>(),
                    r2: 1.0 + rng.random::<f64>(),
                    s11: 1.0,
                    s12: 0.5 * rng.random::<f64>(),
                    s21: 0.5 * rng.random::<f64>(),
                    s22: 1.0,
                };
                (p, random_nonnegative(&mut rng, &g))
            })
            .collect();
        let results = cases
            .par_iter()
            .map(|(p, u0)| -> Result<(f64, f64)> {
                let model = ModelSpec::skt(*p, u0.clone(), 1.0, 0.01)?;
                let opts = ContinuationOptions {
                    segment: 0.5,
                    ..ContinuationOptions::default()
                };
                let (est, hist) = continue_solution(&model, 2.0, opts)?;
                let min = hist
                    .states()
                    .iter()
                    .map(|u| nonnegativity_check(u).min)
                    .fold(f64::INFINITY, f64::min);
                Ok((min, est.t_reached))
            })
            .collect::<Result<Vec<_>>>()?;
        let min = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let reached = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        m.push("runs", results.len());
        m.push_f64("min_component", min);
        m.push_f64("min_t_reached", reached);
        Ok(min >= -1e-8 && reached >= 2.0 * (1.0 - 1e-12))
    })
}

/// Bounded continuation for small data; shrinkage or a clean exit for large data.
pub fn persistence(_seed: u64) -> Outcome {
    timed(9, "small-data-persistence", None, |m| {
        let g = TorusGrid::new(1, 64)?;
        let small = ModelSpec::skt(SKTParams::default(), default_skt_data(&g, 1e-2), 1.0, 0.05)?;
        let opts = ContinuationOptions {
            segment: 5.0,
            ..ContinuationOptions::default()
        };
        let (est, hist) = continue_solution(&small, 50.0, opts)?;
        let trace_max = hist.rows().iter().map(|r| r.hs).fold(0.0, f64::max);
        m.extend_prefixed("small", &est.to_kv());
        m.push_f64("small.trace_over_initial", trace_max / est.initial_hs);
        let small_ok = est.termination == Termination::Horizon && trace_max <= 2.0 * est.initial_hs;

        let large = ModelSpec::skt(SKTParams::default(), default_skt_data(&g, 1e2), 1.0, 0.01)?;
        let opts = ContinuationOptions {
            segment: 1.0,
            max_segments: Some(20),
            ..ContinuationOptions::default()
        };
        let (est, hist) = continue_solution(&large, 1.0, opts)?;
        let finite = hist.states().iter().all(|u| u.is_finite()) && est.final_hs.is_finite() || est.blown_up;
        m.extend_prefixed("large", &est.to_kv());
        let clean_exit = matches!(
            est.termination,
            Termination::BlowUp | Termination::PetrovskiiViolation(_) | Termination::HorizonCollapse
        );
        Ok(small_ok && finite && (est.any_shrunk() || clean_exit))
    })
}

/// Cone-Petrovskii sampling and the symmetric-part counterexample.
pub fn structure(_seed: u64) -> Outcome {
    timed(10, "structure-checks", None, |m| {
        let g = TorusGrid::new(1, 8)?;
        let u0 = SpectralField::constant(&g, &[1.0, 1.0]);
        let ones = SKTParams {
            a11: 1.0,
            a12: 1.0,
            a21: 1.0,
            a22: 1.0,
            ..SKTParams::default()
        };
        let rep = verify_cone_petrovskii(&ModelSpec::skt(ones, u0.clone(), 1.0, 0.01)?, 10.0, 101)?;
        m.extend_prefixed("cone", &rep.to_kv());
        let cross = SKTParams {
            a11: 0.0,
            a22: 0.0,
            a12: 1.0,
            a21: 1.0,
            ..SKTParams::default()
        };
        let model = ModelSpec::skt(cross, u0, 1.0, 0.01)?;
        let cross_rep = verify_cone_petrovskii(&model, 10.0, 101)?;
        let mut max_det = f64::NEG_INFINITY;
        let mut min_gamma = f64::INFINITY;
        let mut literal_negative_from = None;
        for i in 0..=800 {
            let t = 2.0 + i as f64 * 0.01;
            let u = [t, 0.0];
            max_det = max_det.max(symmetric_part_determinant(&u, &cross));
            min_gamma = min_gamma.min(spectral_abscissa(&(model.a)(&u))?);
            if literal_negative_from.is_none() && symmetric_part_determinant_literal(&u, &cross) < 0.0 {
                literal_negative_from = Some(t);
            }
        }
        m.push_f64("cross.max_sym_det", max_det);
        m.push_f64("cross.min_gamma", min_gamma);
        m.push("cross.cone_passed", cross_rep.passed());
        m.push(
            "cross.literal_det_negative_from",
            literal_negative_from.map_or("never".to_string(), |t| format!("{t:.2}")),
        );
        Ok(rep.passed() && max_det < 0.0 && min_gamma > 0.0 && cross_rep.passed())
    })
}

/// Every check in order.
pub fn run_all(seed: u64) -> Vec<Outcome> {
    let checks: [fn(u64) -> Outcome; 10] = [
        exp_decay,
        exact_linear,
        energy,
        mean_law,
        littlewood_paley,
        picard,
        stability,
        sign_preservation,
        persistence,
        structure,
    ];
    checks.iter().map(|c| c(seed)).collect()
}
