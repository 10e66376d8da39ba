use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nalgebra::DMatrix;
use serde::Deserialize;

use quasipar::linear_solver::{Forcing, StepControl};
use quasipar::models::{ModelSpec, SKTParams};
use quasipar::nonlinear_solver::{ContinuationOptions, PicardOptions};
use quasipar::spectral_field::snapshot::read_snapshot;
use quasipar::spectral_field::{PhysicalField, SpectralField, TorusGrid};

use crate::plot::NORM_FIELDS;
use crate::CliError;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CheckPetrovskii,
    SolveLinear,
    SolveNonlinear,
    Skt,
    LpCalibrate,
    Suite,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::CheckPetrovskii => "check-petrovskii",
            Mode::SolveLinear => "solve-linear",
            Mode::SolveNonlinear => "solve-nonlinear",
            Mode::Skt => "skt",
            Mode::LpCalibrate => "lp-calibrate",
            Mode::Suite => "suite",
        }
    }

    fn nonlinear(&self) -> bool {
        matches!(self, Mode::SolveNonlinear | Mode::Skt)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d: 1, n: 64 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Keep every `stride`-th step in the stored history of linear runs.
    pub stride: usize,
    /// Requested continuation segment length.
    pub segment: f64,
    /// Halve the local horizon until the smallness test passes; when off the
    /// requested horizon is used as is.
    pub adaptive: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            dt: 0.01,
            stride: 1,
            segment: 1.0,
            adaptive: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub s: f64,
    pub tol_fixed: f64,
    pub theta_small: f64,
    pub n_max: usize,
    pub t_min: f64,
    pub blowup_factor: f64,
    pub c_stab: f64,
    pub dt_min: f64,
    pub growth_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PicardOptions::default();
        let c = ContinuationOptions::default();
        let st = StepControl::default();
        Self {
            s: 1.0,
            tol_fixed: c.tol_fixed,
            theta_small: p.theta_small,
            n_max: p.n_max,
            t_min: p.t_min,
            blowup_factor: c.blowup_factor,
            c_stab: st.c_stab,
            dt_min: st.dt_min,
            growth_tol: st.growth_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Skt,
    Linear,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SktConfig {
    pub d1: f64,
    pub d2: f64,
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub r1: f64,
    pub r2: f64,
    pub s11: f64,
    pub s12: f64,
    pub s21: f64,
    pub s22: f64,
}

impl Default for SktConfig {
    fn default() -> Self {
        let p = SKTParams::default();
        Self {
            d1: p.d1,
            d2: p.d2,
            a11: p.a11,
            a12: p.a12,
            a21: p.a21,
            a22: p.a22,
            r1: p.r1,
            r2: p.r2,
            s11: p.s11,
            s12: p.s12,
            s21: p.s21,
            s22: p.s22,
        }
    }
}

impl SktConfig {
    pub fn params(&self) -> SKTParams {
        SKTParams {
            d1: self.d1,
            d2: self.d2,
            a11: self.a11,
            a12: self.a12,
            a21: self.a21,
            a22: self.a22,
            r1: self.r1,
            r2: self.r2,
            s11: self.s11,
            s12: self.s12,
            s21: self.s21,
            s22: self.s22,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Rows of the constant matrix of a linear model.
    pub b: Option<Vec<Vec<f64>>>,
    pub skt: SktConfig,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// `amplitude·(1 + 0.1cos x₁, 1 + 0.1sin x₁)` for SKT, `amplitude·cos x₁` per
    /// component for linear models.
    #[default]
    Default,
    Constant,
    Modes,
    Snapshot,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub k: [i64; 2],
    pub component: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub amplitude: f64,
    /// Spatial mean per component (`constant` and `modes`).
    pub mean: Option<Vec<f64>>,
    /// Single Fourier modes added on top of the mean; the conjugate mode is
    /// filled in so the field stays real.
    pub modes: Vec<ModeEntry>,
    pub path: Option<PathBuf>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: InitialKind::Default,
            amplitude: 1.0,
            mean: None,
            modes: Vec::new(),
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingKind {
    #[default]
    None,
    Constant,
    Snapshot,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    pub kind: ForcingKind,
    pub value: Option<Vec<f64>>,
    pub path: Option<PathBuf>,
    /// Modulate the spatial profile by `cos(frequency·t)`.
    pub frequency: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Number of evenly spaced stored states written as snapshots.
    pub snapshots: usize,
    pub fields: Vec<String>,
    pub profile_times: Vec<f64>,
    pub plot_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshots: 5,
            fields: NORM_FIELDS.iter().map(|s| s.to_string()).collect(),
            profile_times: vec![0.0],
            plot_stride: 1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PetrovskiiConfig {
    /// Side `R` of the sampled box `[0, R]ᴺ`.
    pub box_size: f64,
    pub density: usize,
}

impl Default for PetrovskiiConfig {
    fn default() -> Self {
        Self {
            box_size: 10.0,
            density: 41,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpConfig {
    pub sobolev: Vec<f64>,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            sobolev: vec![0.5, 1.0, 2.0],
        }
    }
}

pub const DEFAULT_SEED: u64 = 20240601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub petrovskii: PetrovskiiConfig,
    #[serde(default)]
    pub lp: LpConfig,
}

impl RunConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            seed: DEFAULT_SEED,
            out: None,
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            solver: SolverConfig::default(),
            model: ModelConfig::default(),
            initial: InitialConfig::default(),
            forcing: ForcingConfig::default(),
            output: OutputConfig::default(),
            petrovskii: PetrovskiiConfig::default(),
            lp: LpConfig::default(),
        }
    }

    /// Parses TOML; relative file paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))?;
        if let Some(base) = base {
            for p in [&mut cfg.initial.path, &mut cfg.forcing.path].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Every problem found, one `field: message` item each.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |field: &str, msg: String| out.push(format!("{field}: {msg}"));
        if !(1..=2).contains(&self.grid.d) {
            bad("grid.d", format!("must be 1 or 2, got {}", self.grid.d));
        }
        if self.grid.n < 4 || !self.grid.n.is_power_of_two() {
            bad("grid.n", format!("must be a power of two >= 4, got {}", self.grid.n));
        }
        if !(self.time.horizon > 0.0 && self.time.horizon.is_finite()) {
            bad("time.horizon", format!("must be positive, got {}", self.time.horizon));
        }
        if !(self.time.dt > 0.0) || self.time.dt > self.time.horizon {
            bad("time.dt", format!("must lie in (0, horizon], got {}", self.time.dt));
        }
        if self.time.stride == 0 {
            bad("time.stride", "must be >= 1".into());
        }
        if !(self.time.segment > 0.0) {
            bad("time.segment", format!("must be positive, got {}", self.time.segment));
        }
        if self.mode.nonlinear() && !(self.solver.s > 0.5 * self.grid.d as f64) {
            bad("solver.s", format!("must exceed d/2 = {} for nonlinear modes, got {}", 0.5 * self.grid.d as f64, self.solver.s));
        }
        for (name, v) in [
            ("solver.tol_fixed", self.solver.tol_fixed),
            ("solver.theta_small", self.solver.theta_small),
            ("solver.t_min", self.solver.t_min),
            ("solver.blowup_factor", self.solver.blowup_factor),
            ("solver.c_stab", self.solver.c_stab),
            ("solver.dt_min", self.solver.dt_min),
            ("solver.growth_tol", self.solver.growth_tol),
        ] {
            if !(v > 0.0) {
                bad(name, format!("must be positive, got {v}"));
            }
        }
        if self.solver.n_max == 0 {
            bad("solver.n_max", "must be >= 1".into());
        }
        let ncomp = match self.model.kind {
            ModelKind::Skt => {
                if let Err(e) = self.model.skt.params().validate() {
                    bad("model.skt", e.to_string());
                }
                if self.model.b.is_some() {
                    bad("model.b", "only used with kind = \"linear\"".into());
                }
                Some(2)
            }
            ModelKind::Linear => match &self.model.b {
                None => {
                    bad("model.b", "required for kind = \"linear\"".into());
                    None
                }
                Some(rows) => {
                    let n = rows.len();
                    if n == 0 || rows.iter().any(|r| r.len() != n) {
                        bad("model.b", "must be a non-empty square matrix".into());
                        None
                    } else if rows.iter().flatten().any(|v| !v.is_finite()) {
                        bad("model.b", "entries must be finite".into());
                        None
                    } else {
                        Some(n)
                    }
                }
            },
        };
        if self.mode == Mode::SolveLinear && self.model.kind != ModelKind::Linear {
            bad("model.kind", "solve-linear needs kind = \"linear\"".into());
        }
        match self.initial.kind {
            InitialKind::Snapshot => match &self.initial.path {
                None => bad("initial.path", "required for kind = \"snapshot\"".into()),
                Some(p) if !p.is_file() => bad("initial.path", format!("{} does not exist", p.display())),
                _ => {}
            },
            InitialKind::Constant | InitialKind::Modes => {
                if let (Some(m), Some(n)) = (&self.initial.mean, ncomp) {
                    if m.len() != n {
                        bad("initial.mean", format!("has {} entries, model has {n} components", m.len()));
                    }
                } else if self.initial.mean.is_none() && self.initial.kind == InitialKind::Constant {
                    bad("initial.mean", "required for kind = \"constant\"".into());
                }
                let half = self.grid.n as i64 / 2;
                for (i, m) in self.initial.modes.iter().enumerate() {
                    if ncomp.is_some_and(|n| m.component >= n) {
                        bad(&format!("initial.modes[{i}].component"), format!("{} out of range", m.component));
                    }
                    if m.k.iter().any(|k| k.abs() >= half) || (self.grid.d == 1 && m.k[1] != 0) {
                        bad(&format!("initial.modes[{i}].k"), format!("{:?} not resolved on the grid", m.k));
                    }
                }
            }
            InitialKind::Default => {}
        }
        match self.forcing.kind {
            ForcingKind::None => {}
            ForcingKind::Constant => match (&self.forcing.value, ncomp) {
                (None, _) => bad("forcing.value", "required for kind = \"constant\"".into()),
                (Some(v), Some(n)) if v.len() != n => {
                    bad("forcing.value", format!("has {} entries, model has {n} components", v.len()))
                }
                _ => {}
            },
            ForcingKind::Snapshot => match &self.forcing.path {
                None => bad("forcing.path", "required for kind = \"snapshot\"".into()),
                Some(p) if !p.is_file() => bad("forcing.path", format!("{} does not exist", p.display())),
                _ => {}
            },
        }
        for f in &self.output.fields {
            if !NORM_FIELDS.contains(&f.as_str()) {
                bad("output.fields", format!("unknown field {f:?} (known: {})", NORM_FIELDS.join(", ")));
            }
        }
        if self.output.plot_stride == 0 {
            bad("output.plot_stride", "must be >= 1".into());
        }
        if self.petrovskii.density < 2 || !(self.petrovskii.box_size > 0.0) {
            bad("petrovskii", "need density >= 2 and box_size > 0".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(d.join("; ")))
        }
    }

    pub fn grid(&self) -> Result<TorusGrid, CliError> {
        Ok(TorusGrid::new(self.grid.d, self.grid.n)?)
    }

    pub fn linear_matrix(&self) -> Option<DMatrix<f64>> {
        self.model.b.as_ref().map(|rows| {
            let n = rows.len();
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }

    fn components(&self) -> usize {
        match self.model.kind {
            ModelKind::Skt => 2,
            ModelKind::Linear => self.model.b.as_ref().map_or(1, |b| b.len()),
        }
    }

    fn read_field(&self, path: &Path, g: &TorusGrid) -> Result<SpectralField, CliError> {
        let file = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let (_, f) = read_snapshot(std::io::BufReader::new(file))?;
        if &f.grid != g || f.ncomp != self.components() {
            return Err(CliError::Usage(format!(
                "{}: snapshot is d={} n={} with {} components, run needs d={} n={} with {}",
                path.display(),
                f.grid.dim(),
                f.grid.n(),
                f.ncomp,
                g.dim(),
                g.n(),
                self.components()
            )));
        }
        Ok(f)
    }

    pub fn initial_data(&self, g: &TorusGrid) -> Result<SpectralField, CliError> {
        let n = self.components();
        let amp = self.initial.amplitude;
        let f = match self.initial.kind {
            InitialKind::Default => {
                let skt = self.model.kind == ModelKind::Skt;
                SpectralField::from_physical(&PhysicalField::from_fn(g, n, |x| {
                    if skt {
                        vec![amp * (1.0 + 0.1 * x[0].cos()), amp * (1.0 + 0.1 * x[0].sin())]
                    } else {
                        vec![amp * x[0].cos(); n]
                    }
                }))
            }
            InitialKind::Constant | InitialKind::Modes => {
                let mean = self.initial.mean.clone().unwrap_or_else(|| vec![0.0; n]);
                let mut f = SpectralField::constant(g, &mean);
                let npts = g.len();
                for m in &self.initial.modes {
                    let mut z = SpectralField::zeros(g, n);
                    let p = g.index_of(m.k).ok_or_else(|| CliError::Usage(format!("mode {:?} not on grid", m.k)))?;
                    let q = g.index_of([-m.k[0], -m.k[1]]).expect("negated mode is on the grid");
                    z.coeffs[m.component * npts + p].re += 0.5 * m.re;
                    z.coeffs[m.component * npts + p].im += 0.5 * m.im;
                    z.coeffs[m.component * npts + q].re += 0.5 * m.re;
                    z.coeffs[m.component * npts + q].im -= 0.5 * m.im;
                    f.axpy(1.0, &z);
                }
                f.scaled(amp)
            }
            InitialKind::Snapshot => {
                let path = self.initial.path.as_ref().expect("validated");
                self.read_field(path, g)?.scaled(amp)
            }
        };
        Ok(f)
    }

    pub fn forcing(&self, g: &TorusGrid) -> Result<Forcing, CliError> {
        let profile = match self.forcing.kind {
            ForcingKind::None => return Ok(Forcing::None),
            ForcingKind::Constant => SpectralField::constant(g, self.forcing.value.as_ref().expect("validated")),
            ForcingKind::Snapshot => self.read_field(self.forcing.path.as_ref().expect("validated"), g)?,
        };
        Ok(match self.forcing.frequency {
            None => Forcing::Steady(profile),
            Some(w) => Forcing::function(move |t| profile.scaled((w * t).cos())),
        })
    }

    pub fn model(&self, g: &TorusGrid) -> Result<ModelSpec, CliError> {
        let u0 = self.initial_data(g)?;
        let m = match self.model.kind {
            ModelKind::Skt => ModelSpec::skt(self.model.skt.params(), u0, self.solver.s, self.time.dt)?,
            ModelKind::Linear => {
                let b = self.linear_matrix().expect("validated");
                ModelSpec::linear(b, u0, self.solver.s, self.time.dt)
            }
        };
        Ok(m.with_forcing(self.forcing(g)?))
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            theta_small: if self.time.adaptive { self.solver.theta_small } else { f64::INFINITY },
            n_max: self.solver.n_max,
            t_min: self.solver.t_min,
            step: StepControl {
                c_stab: self.solver.c_stab,
                dt_min: self.solver.dt_min,
                growth_tol: self.solver.growth_tol,
            },
        }
    }

    pub fn continuation_options(&self) -> ContinuationOptions {
        ContinuationOptions {
            segment: self.time.segment,
            tol_fixed: self.solver.tol_fixed,
            blowup_factor: self.solver.blowup_factor,
            picard: self.picard_options(),
            max_segments: None,
        }
    }
}
