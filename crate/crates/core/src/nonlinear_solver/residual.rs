use crate::error::{Error, Result};
use crate::kv::KvRecord;
use crate::linear_solver::Propagator;
use crate::models::ModelSpec;
use crate::petrovskii::SquareMatrix;
use crate::spectral_field::{sobolev_norm, DivergenceOperator, MatrixField, PhysicalField, SolutionHistory, SpectralField};

use super::picard::{data_norm, reaction_field};

/// Step defect of a stored trajectory against the exponential trapezoid,
/// both normalised by `‖(U⁰, F)‖_{D^s}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    /// `(Σ_n h_n ‖r_n‖²_{H^{s−1}})^{1/2}`.
    pub residual: f64,
    /// `(Σ_n h_n ‖(h_n²/8)·δ²G_n/h_n²‖²_{H^{s−1}})^{1/2}`, the leading quadrature error.
    pub discretization_bound: f64,
    pub data_size: f64,
}

impl ResidualReport {
    pub fn ratio(&self) -> f64 {
        if self.discretization_bound > 0.0 {
            self.residual / self.discretization_bound
        } else if self.residual == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn to_kv(&self) -> KvRecord {
        let mut r = KvRecord::new();
        r.push_f64("residual", self.residual);
        r.push_f64("discretization_bound", self.discretization_bound);
        r.push_f64("data_size", self.data_size);
        r.push_f64("ratio", self.ratio());
        r
    }
}

fn midpoint(a: &PhysicalField, b: &PhysicalField) -> PhysicalField {
    PhysicalField {
        grid: a.grid.clone(),
        ncomp: a.ncomp,
        data: a.data.iter().zip(&b.data).map(|(x, y)| 0.5 * (x + y)).collect(),
    }
}

fn shifted(m: &MatrixField, b: &SquareMatrix) -> MatrixField {
    let npts = m.npts();
    let n = m.dim;
    let mut out = m.clone();
    for i in 0..n {
        for j in 0..n {
            for x in &mut out.data[(i * n + j) * npts..(i * n + j + 1) * npts] {
                *x -= b[(i, j)];
            }
        }
    }
    out
}

/// `G = F + R(U) + Σ∂[(A(h(U)) − B̄)∂U]` at a node.
fn source(model: &ModelSpec, t: f64, u: &SpectralField, phys: &PhysicalField, bbar: &SquareMatrix) -> Result<SpectralField> {
    let m = MatrixField::from_state(phys, model.n, |x| model.diffusion(x));
    let mut g = DivergenceOperator::new(&shifted(&m, bbar)).apply(u)?;
    if model.has_reaction() {
        g.axpy(1.0, &reaction_field(model, phys));
    }
    if let Some(f) = model.forcing.eval(t) {
        g.axpy(1.0, &f);
    }
    Ok(g)
}

/// Residual of `u` as a solution of the quasilinear problem of `model`.
pub fn residual(model: &ModelSpec, u: &SolutionHistory) -> Result<ResidualReport> {
    let times = u.times();
    if times.len() < 2 {
        return Err(Error::Usage("residual needs at least two stored times".into()));
    }
    let s1 = model.s - 1.0;
    let phys: Vec<PhysicalField> = u.states().iter().map(|x| x.to_physical()).collect();
    let horizon = u.final_time() - times[0];
    let dt = horizon / (times.len() - 1) as f64;
    let data_size = data_norm(&model.u0, &model.forcing, model.s, horizon, dt)?;
    let mut res_sq = 0.0;
    let mut bound_sq = 0.0;
    let last = times.len() - 1;
    for n in 0..last {
        let h = times[n + 1] - times[n];
        let mid = midpoint(&phys[n], &phys[n + 1]);
        let bbar = MatrixField::from_state(&mid, model.n, |x| model.diffusion(x)).mean_matrix();
        let prop = Propagator::new(&u.first().grid, &bbar, h)?;
        let g0 = source(model, times[n], &u.states()[n], &phys[n], &bbar)?;
        let g1 = source(model, times[n + 1], &u.states()[n + 1], &phys[n + 1], &bbar)?;
        let pred = prop.step(&u.states()[n], Some(&g0), Some(&g1));
        let r = (&u.states()[n + 1] - &pred).scaled(1.0 / h);
        res_sq += h * sobolev_norm(&r, s1).powi(2);
        // second difference over the neighbouring step, same frozen B̄
        let (a, b, c) = if n + 1 < last {
            (g0.clone(), g1.clone(), source(model, times[n + 2], &u.states()[n + 2], &phys[n + 2], &bbar)?)
        } else if n > 0 {
            (source(model, times[n - 1], &u.states()[n - 1], &phys[n - 1], &bbar)?, g0.clone(), g1.clone())
        } else {
            continue;
        };
        let mut d2 = a;
        d2.axpy(-2.0, &b);
        d2.axpy(1.0, &c);
        // (h²/8)·|G''| with G'' ≈ δ²G/h²
        bound_sq += h * sobolev_norm(&d2.scaled(1.0 / 8.0), s1).powi(2);
    }
    let scale = if data_size > 0.0 { data_size } else { 1.0 };
    Ok(ResidualReport {
        residual: res_sq.sqrt() / scale,
        discretization_bound: bound_sq.sqrt() / scale,
        data_size,
    })
}
