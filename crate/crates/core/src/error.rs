use std::fmt;

/// Location where a matrix field left the Petrovskii set.
#[derive(Clone, Debug, PartialEq)]
pub struct PetrovskiiWitness {
    pub time: f64,
    /// Flat grid index of the offending sample.
    pub point: usize,
    /// State value at the sample (empty when the field is not state-driven).
    pub state: Vec<f64>,
    /// Spectral abscissa measured there.
    pub gamma: f64,
}

impl fmt::Display for PetrovskiiWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={:.6e} point={} gamma={:.6e} state={:?}",
            self.time, self.point, self.gamma, self.state
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("eigensolver did not converge for matrix {0}")]
    Eigensolver(String),

    #[error("matrix exponential overflow (norm {norm:.3e})")]
    ExpOverflow { norm: f64 },

    #[error("petrovskii violation at {0}")]
    PetrovskiiViolation(Box<PetrovskiiWitness>),

    #[error("blow-up at t={time:.6e}: {reason}")]
    BlowUp { time: f64, reason: String },

    #[error("step size collapsed below {dt_min:.1e} at t={time:.6e}")]
    Stiffness { time: f64, dt_min: f64 },

    #[error("data too large: no admissible horizon above {t_min:.3e} (proxy {proxy:.3e} > threshold {threshold:.3e})")]
    DataTooLarge {
        t_min: f64,
        proxy: f64,
        threshold: f64,
    },

    #[error("picard iteration did not contract after {iterations} iterations (ratios {ratios:?})")]
    Divergence { iterations: usize, ratios: Vec<f64> },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short kebab-case tag used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Eigensolver(_) => "eigensolver",
            Error::ExpOverflow { .. } => "exp-overflow",
            Error::PetrovskiiViolation(_) => "petrovskii-violation",
            Error::BlowUp { .. } => "blow-up",
            Error::Stiffness { .. } => "stiffness",
            Error::DataTooLarge { .. } => "data-too-large",
            Error::Divergence { .. } => "divergence",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
