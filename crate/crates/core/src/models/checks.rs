use nalgebra::DMatrix;

use crate::error::Result;
use crate::kv::KvRecord;
use crate::petrovskii::spectral_abscissa;
use crate::spectral_field::SpectralField;

use super::ModelSpec;

/// Outcome of the sign-preserving structure check.
#[derive(Clone, Debug, PartialEq)]
pub struct SignPreservingReport {
    /// `false` when the model has no split.
    pub applicable: bool,
    /// `min` over samples and diagonal entries of `D`.
    pub alpha: f64,
    pub alpha_witness: Option<Vec<f64>>,
    /// Largest `|A − D − diag(U)B|` entry, relative to `max(1, |A|)`, plus
    /// the largest off-diagonal entry of `D`.
    pub max_defect: f64,
    pub defect_witness: Option<Vec<f64>>,
}

impl SignPreservingReport {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn passed(&self) -> bool {
        self.applicable && self.alpha >= 0.0 && self.max_defect <= Self::TOLERANCE
    }

    pub fn to_kv(&self) -> KvRecord {
        let mut r = KvRecord::new();
        r.push("applicable", self.applicable);
        r.push_f64("alpha", self.alpha);
        r.push_f64("max_defect", self.max_defect);
        r.push("passed", self.passed());
        r
    }
}

pub fn verify_sign_preserving(m: &ModelSpec, cone_samples: &[Vec<f64>]) -> SignPreservingReport {
    let Some(split) = &m.split else {
        return SignPreservingReport {
            applicable: false,
            alpha: f64::NAN,
            alpha_witness: None,
            max_defect: f64::NAN,
            defect_witness: None,
        };
    };
    let mut rep = SignPreservingReport {
        applicable: true,
        alpha: f64::INFINITY,
        alpha_witness: None,
        max_defect: 0.0,
        defect_witness: None,
    };
    for u in cone_samples {
        let a = (m.a)(u);
        let d = (split.d)(u);
        let b = (split.b)(u);
        let du = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(u));
        let rec = (&a - &d - du * b).amax() / a.amax().max(1.0);
        let mut off = 0.0f64;
        for i in 0..m.n {
            for j in 0..m.n {
                if i != j {
                    off = off.max(d[(i, j)].abs());
                }
            }
            if d[(i, i)] < rep.alpha {
                rep.alpha = d[(i, i)];
                rep.alpha_witness = Some(u.clone());
            }
        }
        let defect = rec.max(off);
        if defect > rep.max_defect {
            rep.max_defect = defect;
            rep.defect_witness = Some(u.clone());
        }
    }
    rep
}

/// Sampled Petrovskii margin of `A` on the box `[0, R]ᴺ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeReport {
    pub samples: usize,
    pub min_gamma: f64,
    pub min_gamma_at: Vec<f64>,
    /// First sample with `γ ≤ 0`.
    pub violation: Option<(Vec<f64>, f64)>,
    /// `N = 2` only.
    pub min_det: Option<f64>,
    pub min_trace: Option<f64>,
}

impl ConeReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
            && self.min_gamma > 0.0
            && self.min_det.is_none_or(|d| d > 0.0)
            && self.min_trace.is_none_or(|t| t > 0.0)
    }

    pub fn to_kv(&self) -> KvRecord {
        let mut r = KvRecord::new();
        r.push("samples", self.samples);
        r.push_f64("min_gamma", self.min_gamma);
        r.push("min_gamma_at", format!("{:?}", self.min_gamma_at));
        if let Some(d) = self.min_det {
            r.push_f64("min_det", d);
        }
        if let Some(t) = self.min_trace {
            r.push_f64("min_trace", t);
        }
        r.push("violation", self.violation.as_ref().map_or("none".to_string(), |(u, g)| format!("{u:?}:{g:e}")));
        r.push("passed", self.passed());
        r
    }
}

/// Tensor grid of `density` points per axis on `[0, R]ᴺ`, `γ(A(u))` at each.
pub fn verify_cone_petrovskii(m: &ModelSpec, r: f64, density: usize) -> Result<ConeReport> {
    let n = m.n;
    let density = density.max(2);
    let total = density.pow(n as u32);
    let mut rep = ConeReport {
        samples: total,
        min_gamma: f64::INFINITY,
        min_gamma_at: Vec::new(),
        violation: None,
        min_det: (n == 2).then_some(f64::INFINITY),
        min_trace: (n == 2).then_some(f64::INFINITY),
    };
    let mut u = vec![0.0; n];
    for idx in 0..total {
        let mut rest = idx;
        for x in u.iter_mut() {
            *x = r * (rest % density) as f64 / (density - 1) as f64;
            rest /= density;
        }
        let a = (m.a)(&u);
        let g = spectral_abscissa(&a)?;
        if g < rep.min_gamma {
            rep.min_gamma = g;
            rep.min_gamma_at = u.clone();
        }
        if !(g > 0.0) && rep.violation.is_none() {
            rep.violation = Some((u.clone(), g));
        }
        if n == 2 {
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let tr = a[(0, 0)] + a[(1, 1)];
            rep.min_det = rep.min_det.map(|d| d.min(det));
            rep.min_trace = rep.min_trace.map(|t| t.min(tr));
        }
    }
    Ok(rep)
}

/// Smallest physical sample over all components.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegativityReport {
    pub min: f64,
    pub component: usize,
    /// Flat grid index of the minimum.
    pub point: usize,
    pub per_component: Vec<(f64, usize)>,
}

pub fn nonnegativity_check(f: &SpectralField) -> NonnegativityReport {
    let per = f.to_physical().min_per_component();
    let (component, &(min, point)) = per
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("fields have at least one component");
    NonnegativityReport {
        min,
        component,
        point,
        per_component: per,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{SKTParams, Split};
    use crate::spectral_field::{PhysicalField, TorusGrid};
    use std::sync::Arc;

    fn skt(p: SKTParams) -> ModelSpec {
        let g = TorusGrid::new(1, 8).unwrap();
        ModelSpec::skt(p, SpectralField::constant(&g, &[1.0, 1.0]), 1.0, 0.01).unwrap()
    }

    fn cone_samples() -> Vec<Vec<f64>> {
        (0..11)
            .flat_map(|i| (0..11).map(move |j| vec![i as f64 * 0.7, j as f64 * 1.3]))
            .collect()
    }

    #[test]
    fn skt_split_is_sign_preserving() {
        let p = SKTParams {
            d1: 0.7,
            d2: 1.2,
            ..SKTParams::default()
        };
        let rep = verify_sign_preserving(&skt(p), &cone_samples());
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.alpha - 0.7).abs() < 1e-15);
    }

    #[test]
    fn negative_diagonal_fails() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut m = ModelSpec::linear(-DMatrix::<f64>::identity(2, 2), SpectralField::zeros(&g, 2), 1.0, 0.1);
        m.split = Some(Split {
            d: Arc::new(|_| -DMatrix::<f64>::identity(2, 2)),
            b: Arc::new(|_| DMatrix::zeros(2, 2)),
        });
        let rep = verify_sign_preserving(&m, &cone_samples());
        assert!(!rep.passed() && rep.alpha == -1.0);
        assert!(rep.max_defect == 0.0);
    }

    #[test]
    fn perturbed_split_is_located() {
        let mut m = skt(SKTParams::default());
        let base = m.split.clone().unwrap();
        let d = base.d.clone();
        m.split = Some(Split {
            d: Arc::new(move |u: &[f64]| {
                let mut x = d(u);
                if u[0] > 5.0 {
                    x[(0, 0)] += 1e-3;
                }
                x
            }),
            b: base.b,
        });
        let rep = verify_sign_preserving(&m, &cone_samples());
        assert!(!rep.passed());
        assert!(rep.defect_witness.unwrap()[0] > 5.0);
    }

    #[test]
    fn missing_split_is_inapplicable() {
        let g = TorusGrid::new(1, 8).unwrap();
        let m = ModelSpec::linear(DMatrix::identity(1, 1), SpectralField::zeros(&g, 1), 1.0, 0.1);
        assert!(!verify_sign_preserving(&m, &cone_samples()).applicable);
    }

    #[test]
    fn skt_cone_is_petrovskii() {
        let p = SKTParams {
            a11: 1.0,
            a12: 1.0,
            a21: 1.0,
            a22: 1.0,
            ..SKTParams::default()
        };
        let rep = verify_cone_petrovskii(&skt(p), 10.0, 41).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.samples, 41 * 41);
        assert_eq!(rep.min_gamma_at, vec![0.0, 0.0]);
    }

    #[test]
    fn constant_indefinite_matrix_violates_everywhere() {
        let g = TorusGrid::new(1, 8).unwrap();
        let m = ModelSpec::linear(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), SpectralField::zeros(&g, 2), 1.0, 0.1);
        let rep = verify_cone_petrovskii(&m, 1.0, 5).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.min_gamma, -1.0);
        assert_eq!(rep.violation.unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn no_self_diffusion_keeps_gamma_but_loses_symmetric_positivity() {
        let p = SKTParams {
            a11: 0.0,
            a22: 0.0,
            a12: 1.0,
            a21: 1.0,
            ..SKTParams::default()
        };
        let rep = verify_cone_petrovskii(&skt(p), 10.0, 21).unwrap();
        assert!(rep.passed());
        assert!(crate::models::symmetric_part_determinant(&[3.0, 0.0], &p) < 0.0);
    }

    #[test]
    fn nonnegativity_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let r = nonnegativity_check(&SpectralField::constant(&g, &[1.0, 1.0]));
        assert!((r.min - 1.0).abs() < 1e-15);
        let f = SpectralField::from_physical(&PhysicalField::from_fn(&g, 1, |x| vec![1.0 + x[0].cos()]));
        let r = nonnegativity_check(&f);
        assert!(r.min.abs() < 1e-14);
        assert_eq!(g.point(r.point)[0], std::f64::consts::PI);
    }
}
