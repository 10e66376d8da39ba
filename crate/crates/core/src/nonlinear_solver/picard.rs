use std::sync::Arc;

use crate::error::{Error, PetrovskiiWitness, Result};
use crate::kv::KvRecord;
use crate::linear_solver::{solve_constant, solve_variable, CoefficientField, Forcing, LinearProblem, StepControl};
use crate::models::ModelSpec;
use crate::petrovskii::spectral_abscissa;
use crate::spectral_field::{sobolev_norm, trapezoid, MatrixField, PhysicalField, SolutionHistory, SpectralField};

/// Piecewise-linear-in-time physical samples of a stored trajectory.
pub struct StateInterpolant {
    times: Vec<f64>,
    states: Vec<PhysicalField>,
}

impl StateInterpolant {
    pub fn new(h: &SolutionHistory) -> Self {
        Self {
            times: h.times().to_vec(),
            states: h.states().iter().map(|u| u.to_physical()).collect(),
        }
    }

    pub fn at(&self, t: f64) -> PhysicalField {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[last] {
            return self.states[last].clone();
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        if theta == 0.0 {
            return self.states[i].clone();
        }
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        PhysicalField {
            grid: a.grid.clone(),
            ncomp: a.ncomp,
            data: a.data.iter().zip(&b.data).map(|(x, y)| (1.0 - theta) * x + theta * y).collect(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &PhysicalField)> {
        self.times.iter().copied().zip(&self.states)
    }
}

/// `M(t, x) = A(h(U(t, x)))` for an interpolated state.
pub struct StateCoefficient {
    pub model: ModelSpec,
    pub state: Arc<StateInterpolant>,
}

impl CoefficientField for StateCoefficient {
    fn at(&self, t: f64) -> MatrixField {
        let u = self.state.at(t);
        MatrixField::from_state(&u, self.model.n, |x| self.model.diffusion(x))
    }
}

/// `R(U)` sampled pointwise and truncated to the dealiasing band.
pub fn reaction_field(model: &ModelSpec, u: &PhysicalField) -> SpectralField {
    let r = u.map_points(model.n, |x| model.reaction(x));
    SpectralField::from_physical(&r).dealiased()
}

fn check_state_field(model: &ModelSpec, t: f64, u: &PhysicalField) -> Result<()> {
    for p in 0..u.grid.len() {
        let x = u.at(p);
        let g = spectral_abscissa(&model.diffusion(&x))?;
        if !(g > 0.0) {
            return Err(Error::PetrovskiiViolation(Box::new(PetrovskiiWitness {
                time: t,
                point: p,
                state: x,
                gamma: g,
            })));
        }
    }
    Ok(())
}

/// `‖U⁰‖_{H^s} + ‖F‖_{Y_T^{s−1}} + ∫₀ᵀ |⟨F⟩|`, forcing sampled on the model's step grid.
pub fn data_norm(u0: &SpectralField, forcing: &Forcing, s: f64, horizon: f64, dt: f64) -> Result<f64> {
    let mut total = sobolev_norm(u0, s);
    if forcing.is_none() {
        return Ok(total);
    }
    let m = (horizon / dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=m).map(|i| i as f64 * horizon / m as f64).collect();
    let mut sq = Vec::with_capacity(times.len());
    let mut mean = Vec::with_capacity(times.len());
    for &t in &times {
        match forcing.eval(t) {
            Some(f) => {
                sq.push(sobolev_norm(&f, s - 1.0).powi(2));
                mean.push(f.mean().iter().map(|x| x * x).sum::<f64>().sqrt());
            }
            None => {
                sq.push(0.0);
                mean.push(0.0);
            }
        }
    }
    total += trapezoid(&times, &sq).sqrt() + trapezoid(&times, &mean);
    Ok(total)
}

/// `U_F` and the horizon-selection functional `‖∇U_F‖_{Y_T^s}`.
#[derive(Clone, Debug)]
pub struct ReferenceProfile {
    pub history: SolutionHistory,
    pub proxy: f64,
}

/// Constant-coefficient run with `B = A(0)` and data `(U⁰, F)`.
pub fn reference_profile(model: &ModelSpec, horizon: f64) -> Result<ReferenceProfile> {
    model.validate()?;
    let b = model.reference_matrix();
    let prob = LinearProblem::new(model.u0.clone(), model.forcing.clone(), horizon, model.dt);
    let history = solve_constant(&b, &prob, model.s)?;
    let proxy = history.norms().y;
    Ok(ReferenceProfile { history, proxy })
}

/// `Θ(U)`: solve `L_{A(U)} V = F + R(U)`, `V(0) = U⁰`, on the time nodes of `u`.
pub fn picard_step(model: &ModelSpec, u: &SolutionHistory) -> Result<SolutionHistory> {
    picard_step_with(model, u, StepControl::default())
}

fn picard_step_with(model: &ModelSpec, u: &SolutionHistory, ctrl: StepControl) -> Result<SolutionHistory> {
    let interp = Arc::new(StateInterpolant::new(u));
    for (t, x) in interp.nodes() {
        check_state_field(model, t, x)?;
    }
    let forcing = if model.has_reaction() {
        let mut times = Vec::with_capacity(u.len());
        let mut values = Vec::with_capacity(u.len());
        for (t, x) in interp.nodes() {
            let r = reaction_field(model, x);
            times.push(t);
            values.push(match model.forcing.eval(t) {
                Some(f) => &f + &r,
                None => r,
            });
        }
        Forcing::Sampled { times, values }
    } else {
        model.forcing.clone()
    };
    let coef = StateCoefficient {
        model: model.clone(),
        state: interp,
    };
    let prob = LinearProblem::new(model.u0.clone(), forcing, u.final_time(), model.dt);
    let out = solve_variable(&coef, &prob, model.s, ctrl)?;
    if out.times() != u.times() {
        return Err(Error::Usage("picard iterate time grid drifted from its input".into()));
    }
    Ok(out)
}

/// Tunables of [`solve_local`].
#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    /// Horizon test `‖∇U_F‖_{Y_T^s} ≤ theta_small / (1 + ‖(U⁰, F)‖_{D^s})`.
    pub theta_small: f64,
    pub n_max: usize,
    pub t_min: f64,
    pub step: StepControl,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            theta_small: 0.25,
            n_max: 50,
            t_min: 1e-6,
            step: StepControl::default(),
        }
    }
}

/// Audit trail of one local solve.
#[derive(Clone, Debug)]
pub struct PicardState {
    /// Number of `Θ` applications performed.
    pub iterate_index: usize,
    pub current: SolutionHistory,
    pub anchor: SolutionHistory,
    /// `‖Uⁿ⁺¹ − Uⁿ‖_{E^s}` for each application.
    pub distances: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    /// `‖Uⁿ − U_F‖_{E^s}` for each iterate after the anchor.
    pub anchor_distances: Vec<f64>,
    /// `d₀ / (1 − q)` with `q` the largest ratio; infinite without contraction.
    pub ball_radius: f64,
    pub t_init: f64,
    pub t_loc: f64,
    pub proxy: f64,
    pub threshold: f64,
    pub data_size: f64,
}

impl PicardState {
    pub fn distance_to_previous(&self) -> f64 {
        self.distances.last().copied().unwrap_or(0.0)
    }

    pub fn final_ratio(&self) -> Option<f64> {
        self.contraction_ratios.last().copied()
    }

    /// Every iterate inside the recorded ball.
    pub fn ball_audit(&self) -> bool {
        self.anchor_distances
            .iter()
            .all(|d| *d <= self.ball_radius * (1.0 + 1e-12) + 1e-300)
    }

    pub fn to_kv(&self) -> KvRecord {
        let mut r = KvRecord::new();
        r.push("iterations", self.iterate_index);
        r.push_f64("t_init", self.t_init);
        r.push_f64("t_loc", self.t_loc);
        r.push_f64("proxy", self.proxy);
        r.push_f64("threshold", self.threshold);
        r.push_f64("distance", self.distance_to_previous());
        r.push_f64("final_ratio", self.final_ratio().unwrap_or(0.0));
        r.push("ratios", format!("{:?}", self.contraction_ratios));
        r.push_f64("ball_radius", self.ball_radius);
        r.push("ball_audit", self.ball_audit());
        r
    }
}

/// Shrinks the horizon until the smallness test passes, then iterates `Θ` from
/// `U_F` until successive iterates are within `tol_fixed`.
pub fn solve_local(
    model: &ModelSpec,
    t_init: f64,
    tol_fixed: f64,
    opts: PicardOptions,
) -> Result<(SolutionHistory, PicardState)> {
    model.validate()?;
    let mut t_loc = t_init;
    let (profile, threshold, data_size) = loop {
        let data_size = data_norm(&model.u0, &model.forcing, model.s, t_loc, model.dt)?;
        let threshold = opts.theta_small / (1.0 + data_size);
        let rp = reference_profile(model, t_loc)?;
        if rp.proxy <= threshold {
            break (rp, threshold, data_size);
        }
        let next = 0.5 * t_loc;
        if next < opts.t_min {
            return Err(Error::DataTooLarge {
                t_min: opts.t_min,
                proxy: rp.proxy,
                threshold,
            });
        }
        t_loc = next;
    };
    let anchor = profile.history;
    let mut current = anchor.clone();
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut anchor_distances = Vec::new();
    for n in 0..opts.n_max {
        let next = picard_step_with(model, &current, opts.step)?;
        let d = next.difference(&current)?.norms().e;
        if !d.is_finite() {
            return Err(Error::BlowUp {
                time: t_loc,
                reason: format!("picard iterate {n} is not finite"),
            });
        }
        anchor_distances.push(next.difference(&anchor)?.norms().e);
        if let Some(&prev) = distances.last() {
            ratios.push(if prev > 0.0 { d / prev } else { 0.0 });
        }
        distances.push(d);
        current = next;
        let contracting = ratios.last().is_none_or(|r| *r < 1.0);
        if d <= tol_fixed && contracting {
            let q = ratios.iter().copied().fold(0.0f64, f64::max);
            let ball_radius = if q < 1.0 { distances[0] / (1.0 - q) } else { f64::INFINITY };
            let state = PicardState {
                iterate_index: n + 1,
                current: current.clone(),
                anchor,
                distances,
                contraction_ratios: ratios,
                anchor_distances,
                ball_radius,
                t_init,
                t_loc,
                proxy: profile.proxy,
                threshold,
                data_size,
            };
            return Ok((current, state));
        }
    }
    Err(Error::Divergence {
        iterations: opts.n_max,
        ratios,
    })
}

/// `max_t |⟨U(t)⟩ − ⟨U⁰⟩ − ∫₀ᵗ ⟨F + R(U)⟩|`, trapezoidal on the stored times.
pub fn mean_law_defect(model: &ModelSpec, u: &SolutionHistory) -> f64 {
    let n = model.n;
    let m0 = u.first().mean();
    let mut acc = vec![0.0; n];
    let mut worst = 0.0f64;
    let source = |t: f64, x: &SpectralField| -> Vec<f64> {
        let r = SpectralField::from_physical(&x.to_physical().map_points(n, |y| model.reaction(y))).mean();
        match model.forcing.eval(t) {
            Some(f) => f.mean().iter().zip(&r).map(|(a, b)| a + b).collect(),
            None => r,
        }
    };
    let times = u.times();
    let mut prev = source(times[0], &u.states()[0]);
    for i in 0..times.len() {
        if i > 0 {
            let cur = source(times[i], &u.states()[i]);
            for k in 0..n {
                acc[k] += 0.5 * (times[i] - times[i - 1]) * (prev[k] + cur[k]);
            }
            prev = cur;
        }
        let mi = u.states()[i].mean();
        for k in 0..n {
            worst = worst.max((mi[k] - m0[k] - acc[k]).abs());
        }
    }
    worst
}
