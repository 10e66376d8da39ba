use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasipar::linear_solver::{solve_constant, Forcing, LinearProblem};
use quasipar::littlewood_paley::{resum, DyadicPartition};
use quasipar::models::{retraction_scalar, skt_matrix, skt_split, SKTParams};
use quasipar::petrovskii::suite::random_petrovskii_matrix;
use quasipar::petrovskii::{decay_constant, operator_norm, spectral_abscissa};
use quasipar::spectral_field::{
    apply_divergence_form, dealiased_product, sobolev_norm, MatrixField, PhysicalField, SpectralField, TorusGrid,
};

fn band_field(g: &TorusGrid, ncomp: usize, kmax: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(g, ncomp);
    let npts = g.len();
    for p in 0..npts {
        if g.kabs(p) > kmax {
            continue;
        }
        for c in 0..ncomp {
            f.coeffs[c * npts + p] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    f.symmetrized()
}

fn grid_strategy() -> impl Strategy<Value = TorusGrid> {
    prop_oneof![
        (3u32..=7).prop_map(|e| TorusGrid::new(1, 1 << e).unwrap()),
        (3u32..=5).prop_map(|e| TorusGrid::new(2, 1 << e).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn abscissa_shifts_with_identity(seed in any::<u64>(), n in 1usize..=5, c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_petrovskii_matrix(&mut rng, n, 0.5);
        let shifted = &b + DMatrix::identity(n, n) * c;
        let g0 = spectral_abscissa(&b).unwrap();
        prop_assert!((spectral_abscissa(&shifted).unwrap() - g0 - c).abs() <= 1e-10 * (1.0 + g0.abs()));
    }

    #[test]
    fn abscissa_similarity_invariant(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_petrovskii_matrix(&mut rng, n, 0.3);
        let q = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| 0.4 * (rng.random::<f64>() - 0.5));
        let sv = q.clone().singular_values();
        let cond = sv.max() / sv.min();
        let qi = q.clone().try_inverse().unwrap();
        let sim = &q * &b * qi;
        let tol = 1e-10 * cond * cond * (1.0 + operator_norm(&b));
        prop_assert!((spectral_abscissa(&sim).unwrap() - spectral_abscissa(&b).unwrap()).abs() <= tol);
    }

    #[test]
    fn decay_constant_monotone(seed in any::<u64>(), n in 1usize..=4, d1 in 0.05f64..2.0, f in 1.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_petrovskii_matrix(&mut rng, n, 2.0 * f * d1);
        prop_assert!(decay_constant(&b, f * d1).unwrap() < decay_constant(&b, d1).unwrap());
        prop_assert!(decay_constant(&(&b * f), d1).unwrap() > decay_constant(&b, d1).unwrap());
    }

    #[test]
    fn divergence_form_is_mean_free_and_linear(g in grid_strategy(), seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let m = MatrixField::from_fn(&g, 2, |p| {
            let x = g.point(p);
            DMatrix::from_row_slice(2, 2, &[2.0 + x[0].cos(), 0.3 * x[1].sin(), 0.1, 1.5 + (x[0] + x[1]).sin()])
        });
        let u = band_field(&g, 2, g.n() as f64 / 4.0, seed);
        let v = band_field(&g, 2, g.n() as f64 / 4.0, seed ^ 1);
        let lu = apply_divergence_form(&m, &u).unwrap();
        let lv = apply_divergence_form(&m, &v).unwrap();
        let mean = lu.mean();
        prop_assert!(mean.iter().all(|x| x.abs() <= 1e-13));
        let mut comb = u.clone();
        comb.axpy(alpha, &v);
        let mut expect = lu.clone();
        expect.axpy(alpha, &lv);
        let lc = apply_divergence_form(&m, &comb).unwrap();
        prop_assert!((&lc - &expect).l2_norm() <= 1e-12 * (1.0 + expect.l2_norm()));
    }

    #[test]
    fn sobolev_norm_monotone_and_projection(g in grid_strategy(), seed in any::<u64>(), s in 0.0f64..3.0, ds in 0.0f64..2.0) {
        let f = band_field(&g, 1, g.n() as f64 / 2.0, seed);
        prop_assert!(sobolev_norm(&f, s) <= sobolev_norm(&f, s + ds) * (1.0 + 1e-14));
        prop_assert!(sobolev_norm(&f.project_mean_free(), s) <= sobolev_norm(&f, s));
    }

    #[test]
    fn littlewood_paley_partition_and_support(g in grid_strategy(), seed in any::<u64>()) {
        let lp = DyadicPartition::new(&g);
        prop_assert!(lp.partition_defect() <= 1e-8);
        let f = band_field(&g, 1, g.n() as f64, seed);
        let back = resum(&lp, &f).unwrap();
        prop_assert!((&back - &f).l2_norm() <= 1e-10 * f.l2_norm());
        for j in -1..=lp.j_max() {
            for jp in (j + 2)..=lp.j_max() {
                let bb = lp.block(&lp.block(&f, j).unwrap(), jp).unwrap();
                prop_assert!(bb.coeffs.iter().all(|z| z.norm() == 0.0));
            }
        }
    }

    #[test]
    fn constant_solver_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = TorusGrid::new(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_petrovskii_matrix(&mut rng, 2, 0.5);
        let (u, v) = (band_field(&g, 2, 6.0, seed), band_field(&g, 2, 6.0, seed ^ 7));
        let (fu, fv) = (band_field(&g, 2, 4.0, seed ^ 3), band_field(&g, 2, 4.0, seed ^ 5));
        let run = |x: &SpectralField, f: &SpectralField| {
            let f = f.clone();
            let prob = LinearProblem::new(x.clone(), Forcing::function(move |t| f.scaled(t.cos())), 1.0, 0.05);
            solve_constant(&m, &prob, 1.0).unwrap()
        };
        let comb = |x: &SpectralField, y: &SpectralField| {
            let mut z = x.scaled(a);
            z.axpy(b, y);
            z
        };
        let hu = run(&u, &fu);
        let hv = run(&v, &fv);
        let hc = run(&comb(&u, &v), &comb(&fu, &fv));
        for i in 0..hc.len() {
            let expect = comb(&hu.states()[i], &hv.states()[i]);
            prop_assert!((&hc.states()[i] - &expect).l2_norm() <= 1e-11 * (1.0 + expect.l2_norm()));
        }
    }

    #[test]
    fn constant_solver_mean_law(seed in any::<u64>(), m0 in -1.0f64..1.0, f0 in -1.0f64..1.0) {
        let g = TorusGrid::new(1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_petrovskii_matrix(&mut rng, 2, 0.5);
        let mut u = band_field(&g, 2, 4.0, seed);
        u.axpy(1.0, &SpectralField::constant(&g, &[m0, 2.0 * m0]));
        let f = SpectralField::constant(&g, &[f0, -f0]);
        let h = solve_constant(&b, &LinearProblem::new(u.clone(), Forcing::Steady(f), 2.0, 0.1), 1.0).unwrap();
        let start = u.mean();
        for (t, x) in h.times().iter().zip(h.states()) {
            let mean = x.mean();
            prop_assert!((mean[0] - start[0] - f0 * t).abs() <= 1e-12);
            prop_assert!((mean[1] - start[1] + f0 * t).abs() <= 1e-12);
        }
    }

    #[test]
    fn skt_split_reconstructs_and_cone_is_petrovskii(
        d in (0.05f64..3.0, 0.05f64..3.0),
        a in (0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0),
    ) {
        let p = SKTParams { d1: d.0, d2: d.1, a11: a.0, a12: a.1, a21: a.2, a22: a.3, ..SKTParams::default() };
        for i in 0..100 {
            for j in 0..100 {
                let u = [i as f64 * 0.1, j as f64 * 0.1];
                let m = skt_matrix(&u, &p);
                prop_assert!(spectral_abscissa(&m).unwrap() > 0.0, "u={:?}", u);
                if (i + j) % 17 == 0 {
                    let (dd, bb) = skt_split(&u, &p);
                    let rec = dd + DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&u)) * bb;
                    prop_assert!((rec - m).amax() <= 1e-12 * (1.0 + u[0] + u[1]));
                }
            }
        }
    }

    #[test]
    fn retraction_idempotent(u in -100.0f64..100.0, margin in 0.01f64..1.0) {
        let h = retraction_scalar(u, margin);
        prop_assert!(h > -0.5 * margin);
        let hh = retraction_scalar(h, margin);
        if u >= 0.0 {
            prop_assert_eq!(h, u);
            prop_assert_eq!(hh, h);
        } else if -u >= 0.5 * margin {
            // deep below the cone h sits in the flat part of the layer
            prop_assert!((hh - h).abs() <= 1e-6);
        }
    }
}

#[test]
fn dealiased_product_matches_dense_convolution() {
    let g = TorusGrid::new(1, 64).unwrap();
    let k_band = g.dealias_cutoff();
    let a = band_field(&g, 1, k_band as f64, 11);
    let f = band_field(&g, 1, k_band as f64, 12);
    let got = dealiased_product(&a, &f).unwrap();
    let n = g.n() as i64;
    let mut worst = 0.0f64;
    for k in -k_band..=k_band {
        let mut acc = Complex64::new(0.0, 0.0);
        for k1 in -k_band..=k_band {
            let k2 = k - k1;
            if k2.abs() > k_band {
                continue;
            }
            acc += a.coeffs[g.index_of([k1, 0]).unwrap()] * f.coeffs[g.index_of([k2, 0]).unwrap()];
        }
        worst = worst.max((got.coeffs[g.index_of([k, 0]).unwrap()] - acc).norm());
    }
    assert!(worst <= 1e-12, "{worst} (n={n})");
}

#[test]
fn physical_roundtrip_is_exact_to_rounding() {
    for (d, n) in [(1, 64), (2, 16)] {
        let g = TorusGrid::new(d, n).unwrap();
        let phys = PhysicalField::from_fn(&g, 2, |x| vec![x[0].sin() + 2.0, (x[0] + x[1]).cos()]);
        let back = SpectralField::from_physical(&phys).to_physical();
        let err = phys.data.iter().zip(&back.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-13);
    }
}
