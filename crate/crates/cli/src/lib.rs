//! Experiment runner: reads a TOML run configuration, dispatches to the
//! checks and solvers of `quasipar`, and writes reports, norm traces,
//! snapshots and plot series into one output directory.

use std::path::{Path, PathBuf};

pub mod config;
pub mod plot;
pub mod run;

pub use config::{Mode, RunConfig};
pub use plot::{emit_plot_data, PlotSelection, NORM_FIELDS};
pub use run::run;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "QUASIPAR_OUT";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(quasipar::Error),
    /// A run finished and wrote its artifacts but ended in a failure state.
    Failed { code: i32, kind: String, reason: String },
}

impl CliError {
    pub const USAGE: i32 = 2;
    pub const BLOW_UP: i32 = 3;
    pub const PETROVSKII: i32 = 4;
    pub const DIVERGENCE: i32 = 5;
    pub const OTHER: i32 = 1;

    pub fn code_for_kind(kind: &str) -> i32 {
        match kind {
            "usage" => Self::USAGE,
            "blow-up" => Self::BLOW_UP,
            "petrovskii-violation" => Self::PETROVSKII,
            "divergence" => Self::DIVERGENCE,
            _ => Self::OTHER,
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Solver(e) => e.kind(),
            CliError::Failed { kind, .. } => kind,
        }
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Failed { code, .. } => *code,
            _ => Self::code_for_kind(self.kind()),
        }
    }

    pub fn reason(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Solver(quasipar::Error::Usage(m)) => m.clone(),
            CliError::Solver(e) => e.to_string(),
            CliError::Failed { reason, .. } => reason.clone(),
        }
    }

    /// The single stderr line: `error: code=N kind=K reason="..."`.
    pub fn line(&self) -> String {
        let reason = self.reason().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!("error: code={} kind={} reason=\"{}\"", self.code(), self.kind(), reason)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.reason())
    }
}

impl std::error::Error for CliError {}

impl From<quasipar::Error> for CliError {
    fn from(e: quasipar::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Solver(quasipar::Error::Io(e))
    }
}

/// `--out`, else `out` from the config, else `$QUASIPAR_OUT`, else
/// `./quasipar-out`; the mode name is appended.
pub fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    let root = flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("quasipar-out"));
    root.join(cfg.mode.as_str())
}
