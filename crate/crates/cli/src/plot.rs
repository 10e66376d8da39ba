use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quasipar::spectral_field::{NormRow, SolutionHistory};

use crate::CliError;

/// Selectable norm columns; `mean` expands to `mean_1..mean_N`.
pub const NORM_FIELDS: &[&str] = &["Hs", "Xs", "Ys", "Es", "mean"];

#[derive(Clone, Debug)]
pub struct PlotSelection {
    pub fields: Vec<String>,
    /// Keep time rows `0, k, 2k, ..`.
    pub stride: usize,
    /// Profiles are taken at the stored time nearest to each entry.
    pub profile_times: Vec<f64>,
}

fn columns(row: &NormRow, field: &str) -> Vec<f64> {
    match field {
        "Hs" => vec![row.hs],
        "Xs" => vec![row.xs],
        "Ys" => vec![row.ys],
        "Es" => vec![row.es],
        "mean" => row.mean.clone(),
        _ => unreachable!("field names are checked up front"),
    }
}

fn nearest(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, s) in times.iter().enumerate() {
        if (s - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

/// Writes `plot_norms.csv` and one `profile_XXXX.csv` per requested time
/// (`XXXX` is the stored index); returns the paths written.
pub fn emit_plot_data(h: &SolutionHistory, sel: &PlotSelection, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if let Some(bad) = sel.fields.iter().find(|f| !NORM_FIELDS.contains(&f.as_str())) {
        return Err(CliError::Usage(format!(
            "output.fields: unknown field {bad:?} (known: {})",
            NORM_FIELDS.join(", ")
        )));
    }
    if h.is_empty() {
        return Err(CliError::Usage("plot data of an empty history".into()));
    }
    std::fs::create_dir_all(dir)?;
    let stride = sel.stride.max(1);
    let ncomp = h.first().ncomp;
    let mut out = Vec::new();

    let mut text = String::from("t");
    for f in &sel.fields {
        if f == "mean" {
            for i in 1..=ncomp {
                write!(text, ",mean_{i}").unwrap();
            }
        } else {
            write!(text, ",{f}").unwrap();
        }
    }
    text.push('\n');
    for row in h.rows().iter().step_by(stride) {
        write!(text, "{:.17e}", row.time).unwrap();
        for f in &sel.fields {
            for v in columns(row, f) {
                write!(text, ",{v:.17e}").unwrap();
            }
        }
        text.push('\n');
    }
    let path = dir.join("plot_norms.csv");
    std::fs::write(&path, text)?;
    out.push(path);

    let mut done = Vec::new();
    for &t in &sel.profile_times {
        let idx = nearest(h.times(), t);
        if done.contains(&idx) {
            continue;
        }
        done.push(idx);
        let phys = h.states()[idx].to_physical();
        let g = &phys.grid;
        let mut text = String::from(if g.dim() == 1 { "x" } else { "x,y" });
        for i in 1..=ncomp {
            write!(text, ",U_{i}").unwrap();
        }
        text.push('\n');
        for p in 0..g.len() {
            let x = g.point(p);
            write!(text, "{:.17e}", x[0]).unwrap();
            if g.dim() == 2 {
                write!(text, ",{:.17e}", x[1]).unwrap();
            }
            for v in phys.at(p) {
                write!(text, ",{v:.17e}").unwrap();
            }
            text.push('\n');
        }
        let path = dir.join(format!("profile_{idx:04}.csv"));
        std::fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}
