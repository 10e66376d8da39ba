use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use quasipar::kv::KvRecord;
use quasipar::linear_solver::{energy_certificate, solve_constant, LinearProblem};
use quasipar::littlewood_paley::DyadicPartition;
use quasipar::models::{nonnegativity_check, verify_cone_petrovskii, verify_sign_preserving, ModelSpec};
use quasipar::nonlinear_solver::{continue_solution, mean_law_defect, residual, solve_local, Termination};
use quasipar::petrovskii::{log_time_grid, spectral_abscissa, verify_exp_decay};
use quasipar::spectral_field::snapshot::write_snapshot;
use quasipar::spectral_field::SolutionHistory;
use quasipar::verification;

use crate::config::{Mode, RunConfig};
use crate::plot::{emit_plot_data, PlotSelection};
use crate::CliError;

/// Runs `cfg` into `dir` (created if needed). `report.kv` is written on every
/// path that gets past validation, including failures, which carry `status`,
/// `error.kind` and `error.reason`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<KvRecord, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut report = header(cfg);
    let outcome = match cfg.mode {
        Mode::CheckPetrovskii => check_petrovskii(cfg, &mut report),
        Mode::SolveLinear => solve_linear(cfg, dir, &mut report),
        Mode::SolveNonlinear => solve_nonlinear(cfg, dir, &mut report),
        Mode::Skt => skt(cfg, dir, &mut report),
        Mode::LpCalibrate => lp_calibrate(cfg, &mut report),
        Mode::Suite => suite(cfg, dir, &mut report),
    };
    match &outcome {
        Ok(()) => {
            report.push("status", "ok");
        }
        Err(e) => {
            report.push("status", "failed");
            report.push("error.kind", e.kind());
            report.push("error.code", e.code());
            report.push("error.reason", e.reason().replace('\n', " "));
        }
    }
    std::fs::write(dir.join("report.kv"), report.to_string())?;
    outcome.map(|()| report)
}

fn header(cfg: &RunConfig) -> KvRecord {
    let mut r = KvRecord::new();
    r.push("mode", cfg.mode.as_str());
    r.push("seed", cfg.seed);
    r.push("grid.d", cfg.grid.d);
    r.push("grid.n", cfg.grid.n);
    r.push_f64("s", cfg.solver.s);
    r.push_f64("horizon", cfg.time.horizon);
    r.push_f64("dt", cfg.time.dt);
    r.push("adaptive", cfg.time.adaptive);
    r.push("model", format!("{:?}", cfg.model.kind).to_lowercase());
    r
}

fn write_history(cfg: &RunConfig, h: &SolutionHistory, dir: &Path) -> Result<(), CliError> {
    h.write_norm_csv(BufWriter::new(File::create(dir.join("norms.csv"))?))?;
    let k = cfg.output.snapshots;
    if k > 0 {
        let snaps = dir.join("snapshots");
        std::fs::create_dir_all(&snaps)?;
        let last = h.len() - 1;
        let mut picked: Vec<usize> = if k == 1 {
            vec![last]
        } else {
            (0..k).map(|i| (i * last + (k - 1) / 2) / (k - 1)).collect()
        };
        picked.dedup();
        for i in picked {
            let f = File::create(snaps.join(format!("snap_{i:04}.bin")))?;
            write_snapshot(BufWriter::new(f), &h.states()[i], i as u32, h.times()[i])?;
        }
    }
    let sel = PlotSelection {
        fields: cfg.output.fields.clone(),
        stride: cfg.output.plot_stride,
        profile_times: cfg.output.profile_times.clone(),
    };
    emit_plot_data(h, &sel, &dir.join("plot"))?;
    Ok(())
}

fn push_final(report: &mut KvRecord, h: &SolutionHistory) {
    let row = h.rows().last().expect("non-empty history");
    report.push("stored_steps", h.len());
    report.push_f64("final.time", row.time);
    report.push_f64("final.Hs", row.hs);
    for (i, m) in row.mean.iter().enumerate() {
        report.push_f64(format!("final.mean_{}", i + 1), *m);
    }
    let norms = h.norms();
    report.push_f64("norms.Xs", norms.x);
    report.push_f64("norms.Ys", norms.y);
    report.push_f64("norms.Es", norms.e);
}

fn push_nonnegativity(report: &mut KvRecord, h: &SolutionHistory) {
    let mut min = f64::INFINITY;
    let mut at = (0.0, 0, 0);
    for (t, u) in h.times().iter().zip(h.states()) {
        let r = nonnegativity_check(u);
        if r.min < min {
            min = r.min;
            at = (*t, r.component, r.point);
        }
    }
    report.push_f64("nonnegativity.min", min);
    report.push_f64("nonnegativity.time", at.0);
    report.push("nonnegativity.component", at.1 + 1);
    report.push("nonnegativity.point", at.2);
}

fn check_petrovskii(cfg: &RunConfig, report: &mut KvRecord) -> Result<(), CliError> {
    let g = cfg.grid()?;
    let m = cfg.model(&g)?;
    let cone = verify_cone_petrovskii(&m, cfg.petrovskii.box_size, cfg.petrovskii.density)?;
    report.extend_prefixed("cone", &cone.to_kv());
    report.push_f64("gamma_reference", spectral_abscissa(&m.reference_matrix())?);
    if m.split.is_some() {
        let d = cfg.petrovskii.density;
        let r = cfg.petrovskii.box_size;
        let samples: Vec<Vec<f64>> = (0..d * d)
            .map(|i| {
                let step = r / (d - 1) as f64;
                vec![(i % d) as f64 * step, (i / d) as f64 * step]
            })
            .collect();
        report.extend_prefixed("sign_preserving", &verify_sign_preserving(&m, &samples).to_kv());
    }
    if let Some(b) = cfg.linear_matrix() {
        let gamma = spectral_abscissa(&b)?;
        if gamma > 0.0 {
            let rep = verify_exp_decay(&b, gamma, &log_time_grid(50.0 / gamma, 400))?;
            report.extend_prefixed("decay", &rep.to_kv());
            report.push("decay.bound_holds", rep.bound_holds());
        }
    }
    if let Some((u, gamma)) = &cone.violation {
        return Err(CliError::Failed {
            code: CliError::PETROVSKII,
            kind: "petrovskii-violation".into(),
            reason: format!("gamma(A(u)) = {gamma:e} at u = {u:?}"),
        });
    }
    Ok(())
}

fn solve_linear(cfg: &RunConfig, dir: &Path, report: &mut KvRecord) -> Result<(), CliError> {
    let g = cfg.grid()?;
    let b = cfg.linear_matrix().expect("validated");
    let mut prob = LinearProblem::new(cfg.initial_data(&g)?, cfg.forcing(&g)?, cfg.time.horizon, cfg.time.dt);
    prob.stride = cfg.time.stride;
    let gamma = spectral_abscissa(&b)?;
    report.push_f64("gamma", gamma);
    let h = solve_constant(&b, &prob, cfg.solver.s)?;
    write_history(cfg, &h, dir)?;
    push_final(report, &h);
    report.extend_prefixed("energy", &energy_certificate(&h, &prob, cfg.solver.s, gamma, Some(&b))?.to_kv());
    push_nonnegativity(report, &h);
    Ok(())
}

fn solve_nonlinear(cfg: &RunConfig, dir: &Path, report: &mut KvRecord) -> Result<(), CliError> {
    let g = cfg.grid()?;
    let m = cfg.model(&g)?;
    let (h, st) = solve_local(&m, cfg.time.horizon, cfg.solver.tol_fixed, cfg.picard_options())?;
    write_history(cfg, &h, dir)?;
    push_final(report, &h);
    report.extend_prefixed("picard", &st.to_kv());
    report.extend_prefixed("residual", &residual(&m, &h)?.to_kv());
    report.push_f64("mean_law_defect", mean_law_defect(&m, &h));
    push_nonnegativity(report, &h);
    Ok(())
}

fn termination_error(t: &Termination, est_reached: f64) -> Option<CliError> {
    let code = match t {
        Termination::Horizon => return None,
        Termination::BlowUp => CliError::BLOW_UP,
        Termination::PetrovskiiViolation(_) => CliError::PETROVSKII,
        Termination::Divergence => CliError::DIVERGENCE,
        Termination::HorizonCollapse | Termination::SegmentLimit | Termination::Failed(_) => CliError::OTHER,
    };
    let reason = match t {
        Termination::PetrovskiiViolation(w) => format!("stopped at t={est_reached:e}: {w}"),
        Termination::Failed(m) => format!("stopped at t={est_reached:e}: {m}"),
        _ => format!("stopped at t={est_reached:e}"),
    };
    Some(CliError::Failed {
        code,
        kind: t.tag().into(),
        reason,
    })
}

fn skt(cfg: &RunConfig, dir: &Path, report: &mut KvRecord) -> Result<(), CliError> {
    let g = cfg.grid()?;
    let m: ModelSpec = cfg.model(&g)?;
    let (est, h) = continue_solution(&m, cfg.time.horizon, cfg.continuation_options())?;
    write_history(cfg, &h, dir)?;
    push_final(report, &h);
    report.extend_prefixed("lifetime", &est.to_kv());
    for (i, s) in est.segments.iter().enumerate() {
        let p = format!("segment.{i}");
        report.push_f64(format!("{p}.t_start"), s.t_start);
        report.push_f64(format!("{p}.t_end"), s.t_end);
        report.push(format!("{p}.iterations"), s.iterations);
        report.push_f64(format!("{p}.final_ratio"), s.final_ratio.unwrap_or(0.0));
        report.push_f64(format!("{p}.residual"), s.residual);
        report.push(format!("{p}.shrunk"), s.shrunk());
    }
    push_nonnegativity(report, &h);
    match termination_error(&est.termination, est.t_reached) {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

fn lp_calibrate(cfg: &RunConfig, report: &mut KvRecord) -> Result<(), CliError> {
    let g = cfg.grid()?;
    let cal = DyadicPartition::new(&g).calibrate(&cfg.lp.sobolev);
    report.extend_prefixed("lp", &cal.to_kv());
    Ok(())
}

fn suite(cfg: &RunConfig, dir: &Path, report: &mut KvRecord) -> Result<(), CliError> {
    let outcomes = verification::run_all(cfg.seed);
    let mut lines = String::new();
    let mut failed = Vec::new();
    for o in &outcomes {
        lines.push_str(&o.line());
        lines.push('\n');
        let p = format!("check.{}", o.id);
        report.push(format!("{p}.name"), o.name);
        report.push(format!("{p}.passed"), o.passed);
        report.extend_prefixed(&p, &o.metrics);
        if !o.passed {
            failed.push(o.id.to_string());
        }
    }
    std::fs::write(dir.join("suite.txt"), lines)?;
    report.push("suite.passed", outcomes.len() - failed.len());
    report.push("suite.total", outcomes.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed {
            code: CliError::OTHER,
            kind: "suite-failure".into(),
            reason: format!("failed checks: {}", failed.join(",")),
        })
    }
}
