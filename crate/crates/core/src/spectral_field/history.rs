use std::io::Write;

use super::field::SpectralField;
use super::norms::{gradient_sq, sobolev_norm};
use crate::error::{Error, Result};

/// `X_T^s`, `Y_T^{s+1}` and `E_T^s` norms of a stored trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyNorms {
    /// `max_t ‖U(t)‖_{H^s}`
    pub x: f64,
    /// `(∫₀ᵀ ‖∇U(t)‖²_{H^s} dt)^{1/2}`, trapezoidal on the stored times
    pub y: f64,
    /// `(x² + y²)^{1/2}`
    pub e: f64,
}

/// One row of the norm trace.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRow {
    pub time: f64,
    pub hs: f64,
    pub xs: f64,
    pub ys: f64,
    pub es: f64,
    pub mean: Vec<f64>,
}

/// Time-indexed snapshots with running norm traces at a fixed Sobolev index.
#[derive(Clone, Debug)]
pub struct SolutionHistory {
    s: f64,
    times: Vec<f64>,
    states: Vec<SpectralField>,
    rows: Vec<NormRow>,
    grad_sq: Vec<f64>,
    ys_sq: f64,
}

impl SolutionHistory {
    pub fn new(s: f64) -> Self {
        Self {
            s,
            times: Vec::new(),
            states: Vec::new(),
            rows: Vec::new(),
            grad_sq: Vec::new(),
            ys_sq: 0.0,
        }
    }

    pub fn with_initial(s: f64, t0: f64, state: SpectralField) -> Self {
        let mut h = Self::new(s);
        h.push(t0, state).expect("first push always succeeds");
        h
    }

    pub fn sobolev_index(&self) -> f64 {
        self.s
    }

    pub fn push(&mut self, t: f64, state: SpectralField) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Usage(format!(
                    "history times must increase strictly ({t} after {last})"
                )));
            }
            if !state.same_shape(&self.states[0]) {
                return Err(Error::Usage("history snapshot shape mismatch".into()));
            }
        }
        let hs = sobolev_norm(&state, self.s);
        let g = gradient_sq(&state, self.s);
        if let (Some(&t_prev), Some(&g_prev)) = (self.times.last(), self.grad_sq.last()) {
            self.ys_sq += 0.5 * (t - t_prev) * (g_prev + g);
        }
        let xs = self.rows.last().map_or(hs, |r| r.xs.max(hs));
        let ys = self.ys_sq.sqrt();
        self.rows.push(NormRow {
            time: t,
            hs,
            xs,
            ys,
            es: (xs * xs + self.ys_sq).sqrt(),
            mean: state.mean(),
        });
        self.grad_sq.push(g);
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn rows(&self) -> &[NormRow] {
        &self.rows
    }

    pub fn first(&self) -> &SpectralField {
        &self.states[0]
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("history is never empty after construction")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Norms at the history's own index.
    pub fn norms(&self) -> EnergyNorms {
        let r = self.rows.last().expect("non-empty history");
        EnergyNorms {
            x: r.xs,
            y: r.ys,
            e: r.es,
        }
    }

    /// Pointwise difference of two histories sampled at identical times.
    pub fn difference(&self, other: &SolutionHistory) -> Result<SolutionHistory> {
        if self.times != other.times {
            return Err(Error::Usage("histories sampled at different times".into()));
        }
        let mut out = SolutionHistory::new(self.s);
        for ((t, a), b) in self.times.iter().zip(&self.states).zip(&other.states) {
            out.push(*t, a - b)?;
        }
        Ok(out)
    }

    /// Keeps every `stride`-th snapshot plus the last one.
    pub fn downsampled(&self, stride: usize) -> SolutionHistory {
        let stride = stride.max(1);
        let mut out = SolutionHistory::new(self.s);
        let last = self.len() - 1;
        for i in (0..self.len()).filter(|i| i % stride == 0 || *i == last) {
            out.push(self.times[i], self.states[i].clone()).unwrap();
        }
        out
    }

    /// Appends a history whose first time equals this one's last time (that sample is skipped).
    pub fn extend_from(&mut self, other: &SolutionHistory) -> Result<()> {
        for (t, u) in other.times.iter().zip(&other.states) {
            if self.times.last().is_some_and(|&last| *t <= last) {
                continue;
            }
            self.push(*t, u.clone())?;
        }
        Ok(())
    }

    /// Norm trace CSV: `time,Hs,Xs,Ys,Es,mean_1..mean_N`.
    pub fn write_norm_csv(&self, mut w: impl Write) -> Result<()> {
        let ncomp = self.states.first().map_or(0, |s| s.ncomp);
        write!(w, "time,Hs,Xs,Ys,Es")?;
        for i in 1..=ncomp {
            write!(w, ",mean_{i}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", r.time, r.hs, r.xs, r.ys, r.es)?;
            for m in &r.mean {
                write!(w, ",{m:.17e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `X_T^s`, `Y_T^{s+1}` and `E_T^s` of `h`, recomputed at an arbitrary index `s`.
pub fn energy_norms(h: &SolutionHistory, s: f64) -> Result<EnergyNorms> {
    if h.is_empty() {
        return Err(Error::Usage("energy_norms of an empty history".into()));
    }
    let mut x = 0.0f64;
    let mut y_sq = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (t, u) in h.times.iter().zip(&h.states) {
        x = x.max(sobolev_norm(u, s));
        let g = gradient_sq(u, s);
        if let Some((tp, gp)) = prev {
            y_sq += 0.5 * (t - tp) * (gp + g);
        }
        prev = Some((*t, g));
    }
    Ok(EnergyNorms {
        x,
        y: y_sq.sqrt(),
        e: (x * x + y_sq).sqrt(),
    })
}

/// Trapezoidal `∫ q(t) dt` over sampled values.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::TorusGrid;
    use num_complex::Complex64;

    #[test]
    fn stationary_constant() {
        let g = TorusGrid::new(1, 8).unwrap();
        let h = SolutionHistory::with_initial(1.0, 0.0, SpectralField::constant(&g, &[3.0, 4.0]));
        let n = energy_norms(&h, 1.0).unwrap();
        assert!((n.x - 5.0).abs() < 1e-14);
        assert_eq!(n.y, 0.0);
        assert!((n.e - 5.0).abs() < 1e-14);
    }

    fn heat_mode_history(g: &TorusGrid, dt: f64, t_end: f64) -> SolutionHistory {
        let steps = (t_end / dt).round() as usize;
        let mut h = SolutionHistory::new(0.0);
        for i in 0..=steps {
            let t = i as f64 * dt;
            let f = SpectralField::single_mode(g, [1, 0], &[Complex64::new((-t).exp(), 0.0)]).unwrap();
            h.push(t, f).unwrap();
        }
        h
    }

    #[test]
    fn heat_mode_gradient_integral_converges_at_second_order() {
        // ∫₀ᵀ e^{-2t} dt = (1 - e^{-2T})/2 for |v| = 1, |k| = 1.
        let g = TorusGrid::new(1, 8).unwrap();
        let t_end: f64 = 1.0;
        let exact = (1.0 - (-2.0 * t_end).exp()) / 2.0;
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| {
                let n = energy_norms(&heat_mode_history(&g, dt, t_end), 0.0).unwrap();
                (n.y * n.y - exact).abs()
            })
            .collect();
        assert!(errs[0] < 1e-2);
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn running_trace_matches_recomputation() {
        let g = TorusGrid::new(1, 8).unwrap();
        let h = heat_mode_history(&g, 0.1, 1.0);
        let n = energy_norms(&h, 0.0).unwrap();
        let r = h.norms();
        assert!((n.y - r.y).abs() < 1e-15 && (n.x - r.x).abs() < 1e-15);
        for w in h.rows().windows(2) {
            assert!(w[1].es >= w[0].es);
        }
    }

    #[test]
    fn times_must_increase() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut h = SolutionHistory::with_initial(0.0, 0.0, SpectralField::zeros(&g, 1));
        assert!(h.push(0.0, SpectralField::zeros(&g, 1)).is_err());
    }

    #[test]
    fn downsample_keeps_stride_rows() {
        let g = TorusGrid::new(1, 8).unwrap();
        let h = heat_mode_history(&g, 0.1, 1.0);
        let d = h.downsampled(3);
        let idx: Vec<usize> = d.times().iter().map(|t| (t / 0.1).round() as usize).collect();
        assert_eq!(idx, vec![0, 3, 6, 9, 10]);
    }

    #[test]
    fn csv_header() {
        let g = TorusGrid::new(1, 8).unwrap();
        let h = SolutionHistory::with_initial(1.0, 0.0, SpectralField::constant(&g, &[1.0, 2.0]));
        let mut buf = Vec::new();
        h.write_norm_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,Hs,Xs,Ys,Es,mean_1,mean_2\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
