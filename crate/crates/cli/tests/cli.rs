use std::path::Path;
use std::process::{Command, Output};

use quasipar::kv::KvRecord;
use quasipar::spectral_field::snapshot::read_snapshot;
use quasipar::spectral_field::TorusGrid;

fn quasipar(args: &[&str], cfg: Option<(&Path, &str)>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quasipar"));
    if let Some((dir, text)) = cfg {
        let p = dir.join("run.toml");
        std::fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.args(args).env_remove("QUASIPAR_OUT").output().unwrap()
}

fn report(dir: &Path) -> KvRecord {
    KvRecord::parse(&std::fs::read_to_string(dir.join("report.kv")).unwrap()).unwrap()
}

fn error_line(o: &Output) -> String {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    err.trim_end().to_string()
}

#[test]
fn skt_cone_check_reports_positive_margin() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = quasipar(&["--mode", "check-petrovskii", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{o:?}");
    let r = report(&out.join("check-petrovskii"));
    assert!(r.get_f64("cone.min_gamma").unwrap() > 0.0);
    assert_eq!(r.get("cone.violation"), Some("none"));
    assert_eq!(r.get("sign_preserving.passed"), Some("true"));
}

#[test]
fn heat_run_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
mode = "solve-linear"
out = "OUT"
grid.n = 32
time = { horizon = 2.0, dt = 0.01, stride = 10 }
model = { kind = "linear", b = [[1.0]] }
output = { snapshots = 3, profile_times = [0.0, 2.0], plot_stride = 5 }
"#
    .replace("OUT", tmp.path().join("o").to_str().unwrap());
    let o = quasipar(&[], Some((tmp.path(), &cfg)));
    assert!(o.status.success(), "{o:?}");
    let dir = tmp.path().join("o/solve-linear");

    // u = e^{-t} cos x, so every norm scales by e^{-t}
    let csv = std::fs::read_to_string(dir.join("norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("time,Hs,Xs,Ys,Es,mean_1"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert!((r[1] / rows[0][1] - (-r[0]).exp()).abs() < 1e-13, "{r:?}");
    }

    let g = TorusGrid::new(1, 32).unwrap();
    let f = std::fs::File::open(dir.join("snapshots/snap_0020.bin")).unwrap();
    let (hdr, u) = read_snapshot(f).unwrap();
    assert_eq!(hdr.record, 20);
    assert!((hdr.time - 2.0).abs() < 1e-12);
    let k1 = g.index_of([1, 0]).unwrap();
    assert!((u.coeffs[k1].re - 0.5 * (-2f64).exp()).abs() < 1e-15);

    let r = report(&dir);
    assert_eq!(r.get("status"), Some("ok"));
    assert!(r.get_f64("energy.balance_ratio").unwrap() <= 1.0 + 1e-6);
    let plot = std::fs::read_to_string(dir.join("plot/plot_norms.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 5);
    assert!(dir.join("plot/profile_0000.csv").is_file());
    assert!(dir.join("plot/profile_0020.csv").is_file());
}

#[test]
fn reruns_give_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "mode = \"skt\"\ntime = { horizon = 0.5, dt = 0.01, segment = 0.25 }\n";
    let mut texts = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let o = quasipar(&["--out", out.to_str().unwrap(), "--threads", threads], Some((tmp.path(), cfg)));
        assert!(o.status.success(), "{o:?}");
        texts.push(std::fs::read_to_string(out.join("skt/report.kv")).unwrap());
        texts.push(std::fs::read_to_string(out.join("skt/norms.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[2]);
    assert_eq!(texts[1], texts[3]);
}

#[test]
fn env_var_sets_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_quasipar"))
        .args(["--mode", "lp-calibrate"])
        .env("QUASIPAR_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let r = report(&tmp.path().join("lp-calibrate"));
    assert!(r.get_f64("lp.partition_defect").unwrap() <= 1e-8);
}

#[test]
fn invalid_config_is_a_usage_error_naming_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let o = quasipar(&[], Some((tmp.path(), "mode = \"skt\"\ngrid.n = 48\nsolver.s = 0.3\ninitial.kind = \"snapshot\"\ninitial.path = \"missing.bin\"\n")));
    assert_eq!(o.status.code(), Some(2));
    let line = error_line(&o);
    assert!(line.starts_with("error: code=2 kind=usage reason="));
    for f in ["grid.n", "solver.s", "initial.path"] {
        assert!(line.contains(f), "{line}");
    }
    let o = quasipar(&["--mode", "skt", "--bogus"], None);
    assert_eq!(o.status.code(), Some(2));
    error_line(&o);
    let o = quasipar(&[], None);
    assert_eq!(o.status.code(), Some(2));
}

fn expect_code(cfg: &str, code: i32, kind: &str) {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = quasipar(&["--out", out.to_str().unwrap()], Some((tmp.path(), cfg)));
    assert_eq!(o.status.code(), Some(code), "{o:?}");
    let line = error_line(&o);
    assert!(line.starts_with(&format!("error: code={code} kind={kind} reason=\"")), "{line}");
    let mode = cfg.split('"').nth(1).unwrap();
    let r = report(&out.join(mode));
    assert_eq!(r.get("status"), Some("failed"));
    assert_eq!(r.get("error.kind"), Some(kind));
}

#[test]
fn petrovskii_violation_exits_4() {
    expect_code(
        "mode = \"check-petrovskii\"\nmodel = { kind = \"linear\", b = [[1.0, 0.0], [0.0, -0.5]] }\n",
        4,
        "petrovskii-violation",
    );
    expect_code("mode = \"solve-linear\"\nmodel = { kind = \"linear\", b = [[-1.0]] }\n", 4, "petrovskii-violation");
}

#[test]
fn divergence_exits_5() {
    expect_code("mode = \"solve-nonlinear\"\nsolver = { n_max = 1, tol_fixed = 1e-14 }\n", 5, "divergence");
}

#[test]
fn blow_up_exits_3() {
    expect_code(
        "mode = \"skt\"\ntime.horizon = 3.0\nsolver.blowup_factor = 2.0\nmodel.skt = { r1 = 1.0, r2 = 1.0 }\n",
        3,
        "blow-up",
    );
}

#[test]
fn other_failures_exit_1() {
    expect_code("mode = \"solve-nonlinear\"\ninitial.amplitude = 100.0\n", 1, "data-too-large");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = quasipar_cli::RunConfig::load(&p).unwrap();
        assert!(cfg.validate().is_ok(), "{}: {:?}", p.display(), cfg.diagnostics());
        seen += 1;
    }
    assert!(seen >= 5);
}
