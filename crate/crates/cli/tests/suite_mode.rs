// Own test binary: the battery has wall-clock budgets and should not share
// cores with other tests.
use std::process::Command;

use quasipar::kv::KvRecord;

#[test]
fn suite_mode_runs_the_battery() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_quasipar"))
        .args(["--mode", "suite", "--seed", "7", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    let dir = tmp.path().join("suite");
    let r = KvRecord::parse(&std::fs::read_to_string(dir.join("report.kv")).unwrap()).unwrap();
    assert_eq!(r.get("seed"), Some("7"));
    assert_eq!(r.get("suite.total"), Some("10"));
    let lines = std::fs::read_to_string(dir.join("suite.txt")).unwrap();
    assert_eq!(lines.lines().count(), 10);
    let all = r.get("suite.passed") == Some("10");
    assert_eq!(o.status.success(), all, "{o:?}\n{lines}");
    if !all {
        assert_eq!(o.status.code(), Some(1));
    }
}
