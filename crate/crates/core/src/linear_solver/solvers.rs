use crate::error::{Error, PetrovskiiWitness, Result};
use crate::petrovskii::{spectral_abscissa, SquareMatrix};
use crate::spectral_field::{DivergenceOperator, MatrixField, SolutionHistory, SpectralField};

use super::propagator::Propagator;
use super::{Coefficient, CoefficientField, LinearProblem};

fn violation(time: f64, point: usize, gamma: f64) -> Error {
    Error::PetrovskiiViolation(Box::new(PetrovskiiWitness {
        time,
        point,
        state: Vec::new(),
        gamma,
    }))
}

fn check_matrix(b: &SquareMatrix, time: f64) -> Result<()> {
    let g = spectral_abscissa(b)?;
    if g > 0.0 {
        Ok(())
    } else {
        Err(violation(time, 0, g))
    }
}

/// Smallest `γ` over the samples of `m` with the first offending point.
pub(crate) fn check_field(m: &MatrixField, time: f64) -> Result<()> {
    if m.is_uniform() {
        return check_matrix(&m.at(0), time);
    }
    for p in 0..m.npts() {
        let g = spectral_abscissa(&m.at(p))?;
        if !(g > 0.0) {
            return Err(violation(time, p, g));
        }
    }
    Ok(())
}

fn finite_or_blowup(c: &SpectralField, t: f64) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::BlowUp {
            time: t,
            reason: "non-finite state".into(),
        })
    }
}

fn sum(a: Option<SpectralField>, b: SpectralField) -> SpectralField {
    match a {
        Some(a) => &a + &b,
        None => b,
    }
}

/// Drives the output grid; `advance(n, t0, t1, c, F(t0), F(t1))` returns the state at `t1`.
fn march(
    prob: &LinearProblem,
    s: f64,
    mut advance: impl FnMut(usize, f64, f64, &SpectralField, Option<&SpectralField>, Option<&SpectralField>) -> Result<SpectralField>,
) -> Result<SolutionHistory> {
    let (m, h) = prob.steps()?;
    let stride = prob.stride.max(1);
    finite_or_blowup(&prob.v0, 0.0)?;
    let mut hist = SolutionHistory::with_initial(s, 0.0, prob.v0.clone());
    let mut c = prob.v0.clone();
    let mut f0 = prob.forcing_checked(0.0)?;
    for n in 0..m {
        let t0 = n as f64 * h;
        let t1 = (n + 1) as f64 * h;
        let f1 = prob.forcing_checked(t1)?;
        c = advance(n, t0, t1, &c, f0.as_ref(), f1.as_ref())?;
        finite_or_blowup(&c, t1)?;
        if (n + 1) % stride == 0 || n + 1 == m {
            hist.push(t1, c.clone())?;
        }
        f0 = f1;
    }
    Ok(hist)
}

/// Exact per-mode propagation with exponential-trapezoid Duhamel quadrature.
pub fn solve_constant(b: &SquareMatrix, prob: &LinearProblem, s: f64) -> Result<SolutionHistory> {
    if b.nrows() != prob.v0.ncomp {
        return Err(Error::Usage(format!(
            "coefficient is {}x{} but the data has {} components",
            b.nrows(),
            b.ncols(),
            prob.v0.ncomp
        )));
    }
    check_matrix(b, 0.0)?;
    let (_, h) = prob.steps()?;
    let prop = Propagator::new(&prob.v0.grid, b, h)?;
    march(prob, s, |_, _, _, c, f0, f1| Ok(prop.step(c, f0, f1)))
}

/// Where a frozen matrix is sampled inside its interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Freezing {
    /// Left endpoint, first order.
    Left,
    /// Midpoint, second order.
    #[default]
    Midpoint,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TimeDependentOptions {
    pub freezing: Freezing,
    /// Freeze on `κ` equal subintervals of `[0, T]` instead of per step;
    /// the step count must be a multiple of `κ`.
    pub subdivisions: Option<usize>,
}

/// Spatially uniform `M(t)`, frozen piecewise in time.
pub fn solve_time_dependent(
    path: &dyn Fn(f64) -> SquareMatrix,
    prob: &LinearProblem,
    s: f64,
    opts: TimeDependentOptions,
) -> Result<SolutionHistory> {
    let (m, h) = prob.steps()?;
    if let Some(k) = opts.subdivisions {
        if k == 0 || m % k != 0 {
            return Err(Error::Usage(format!("{m} steps cannot be split into {k} frozen intervals")));
        }
    }
    let mut prop: Option<Propagator> = None;
    march(prob, s, |n, t0, t1, c, f0, f1| {
        let (a, b) = match opts.subdivisions {
            None => (t0, t1),
            Some(k) => {
                let per = m / k;
                let i = n / per;
                ((i * per) as f64 * h, ((i + 1) * per) as f64 * h)
            }
        };
        let tau = match opts.freezing {
            Freezing::Left => a,
            Freezing::Midpoint => 0.5 * (a + b),
        };
        let bm = path(tau);
        if bm.nrows() != c.ncomp {
            return Err(Error::Usage("coefficient path has the wrong dimension".into()));
        }
        if !prop.as_ref().is_some_and(|p| p.matches(&bm, h)) {
            check_matrix(&bm, tau)?;
            prop = Some(Propagator::new(&c.grid, &bm, h)?);
        }
        Ok(prop.as_ref().expect("propagator built above").step(c, f0, f1))
    })
}

/// Step-size policy of [`solve_variable`].
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    /// Substeps satisfy `h ≤ c_stab·γ(B̄)/⦀M − B̄⦀²_∞`.
    pub c_stab: f64,
    pub dt_min: f64,
    /// A substep is retried at half size when the corrector moves the
    /// predictor by more than this fraction of the state norm.
    pub growth_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            c_stab: 0.5,
            dt_min: 1e-8,
            growth_tol: 0.25,
        }
    }
}

fn minus_matrix(m: &MatrixField, b: &SquareMatrix) -> MatrixField {
    let npts = m.npts();
    let n = m.dim;
    let mut out = m.clone();
    for i in 0..n {
        for j in 0..n {
            let v = b[(i, j)];
            for x in &mut out.data[(i * n + j) * npts..(i * n + j + 1) * npts] {
                *x -= v;
            }
        }
    }
    out
}

fn is_constant_equal(m: &MatrixField, b: &SquareMatrix) -> bool {
    m.is_uniform() && &m.at(0) == b
}

fn stable_substeps(m_mid: &MatrixField, h: f64, ctrl: &StepControl, t: f64) -> Result<usize> {
    let bbar = m_mid.mean_matrix();
    if is_constant_equal(m_mid, &bbar) {
        return Ok(1);
    }
    let g = spectral_abscissa(&bbar)?;
    if !(g > 0.0) {
        return Err(violation(t, 0, g));
    }
    let eps = m_mid.sup_deviation(&bbar);
    let dt_stab = ctrl.c_stab * g / (eps * eps);
    Ok(((h / dt_stab).ceil() as usize).max(1))
}

struct VariableStepper<'a> {
    coef: &'a dyn CoefficientField,
    ctrl: StepControl,
    prop: Option<Propagator>,
}

enum Substep {
    Done(SpectralField),
    Retry,
}

impl VariableStepper<'_> {
    #[allow(clippy::too_many_arguments)]
    fn substep(
        &mut self,
        c: &SpectralField,
        ta: f64,
        tb: f64,
        hs: f64,
        m_a: &MatrixField,
        f_a: Option<SpectralField>,
        f_b: Option<SpectralField>,
    ) -> Result<(Substep, MatrixField)> {
        let m_mid = self.coef.at(ta + 0.5 * hs);
        let m_b = self.coef.at(tb);
        let bbar = m_mid.mean_matrix();
        if !self.prop.as_ref().is_some_and(|p| p.matches(&bbar, hs)) {
            check_matrix(&bbar, ta + 0.5 * hs)?;
            self.prop = Some(Propagator::new(&c.grid, &bbar, hs)?);
        }
        let prop = self.prop.as_ref().expect("propagator built above");
        if is_constant_equal(m_a, &bbar) && is_constant_equal(&m_b, &bbar) {
            return Ok((Substep::Done(prop.step(c, f_a.as_ref(), f_b.as_ref())), m_b));
        }
        let rem_a = DivergenceOperator::new(&minus_matrix(m_a, &bbar));
        let rem_b = DivergenceOperator::new(&minus_matrix(&m_b, &bbar));
        let g_a = sum(f_a, rem_a.apply(c)?);
        let pred = prop.step(c, Some(&g_a), Some(&g_a));
        let g_b = sum(f_b, rem_b.apply(&pred)?);
        let corr = prop.step(c, Some(&g_a), Some(&g_b));
        let scale = c.l2_norm().max(corr.l2_norm());
        let moved = (&corr - &pred).l2_norm();
        if !corr.is_finite() || moved > self.ctrl.growth_tol * scale {
            return Ok((Substep::Retry, m_b));
        }
        Ok((Substep::Done(corr), m_b))
    }
}

/// General `M(t, x)`: `B̄` = spatial mean of `M` at each substep midpoint is
/// propagated exactly, `Σ∂_k[(M − B̄)∂_k V]` is treated explicitly with an
/// exponential predictor-corrector.
pub fn solve_variable(
    coef: &dyn CoefficientField,
    prob: &LinearProblem,
    s: f64,
    ctrl: StepControl,
) -> Result<SolutionHistory> {
    let (_, h) = prob.steps()?;
    let m0 = coef.at(0.0);
    if m0.dim != prob.v0.ncomp || m0.grid != prob.v0.grid {
        return Err(Error::Usage("coefficient field does not match the data".into()));
    }
    let mut st = VariableStepper { coef, ctrl, prop: None };
    let mut m_node = m0;
    check_field(&m_node, 0.0)?;
    march(prob, s, |_, t0, t1, c, f0, f1| {
        let mut sub = stable_substeps(&coef.at(t0 + 0.5 * h), h, &ctrl, t0)?;
        'retry: loop {
            let hs = h / sub as f64;
            if hs < ctrl.dt_min {
                return Err(Error::Stiffness {
                    time: t0,
                    dt_min: ctrl.dt_min,
                });
            }
            let mut v = c.clone();
            let mut m_a = m_node.clone();
            for j in 0..sub {
                let ta = if j == 0 { t0 } else { t0 + j as f64 * hs };
                let tb = if j + 1 == sub { t1 } else { t0 + (j + 1) as f64 * hs };
                let f_a = if j == 0 { f0.cloned() } else { prob.forcing_checked(ta)? };
                let f_b = if j + 1 == sub { f1.cloned() } else { prob.forcing_checked(tb)? };
                match st.substep(&v, ta, tb, hs, &m_a, f_a, f_b)? {
                    (Substep::Done(next), m_b) => {
                        check_field(&m_b, tb)?;
                        v = next;
                        m_a = m_b;
                    }
                    (Substep::Retry, _) => {
                        sub *= 2;
                        continue 'retry;
                    }
                }
            }
            m_node = m_a;
            return Ok(v);
        }
    })
}

/// Dispatches on the coefficient regime with default options.
pub fn solve(coef: &Coefficient, prob: &LinearProblem, s: f64) -> Result<SolutionHistory> {
    match coef {
        Coefficient::Constant(b) => solve_constant(b, prob, s),
        Coefficient::Path(p) => solve_time_dependent(p.as_ref(), prob, s, TimeDependentOptions::default()),
        Coefficient::Field(f) => solve_variable(f.as_ref(), prob, s, StepControl::default()),
    }
}
