use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wpi-lab"))
}

#[test]
fn unknown_symbol_exits_nonzero_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = lab().args(["decay-run", "--override", "symbol=biharmonic", "--out"]).arg(&out).output().unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("biharmonic"));
    let diag = std::fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(diag.contains("biharmonic"), "{diag}");
}

#[test]
fn passing_run_exits_zero_and_prints_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab().args(["regimes", "--seed", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS monotone"), "{text}");
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["seed"], 3);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        lab().args(["decay-run", "--override", "times.expected_slope=-3", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL slope"));
}

#[test]
fn compare_identical_runs() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let run =
            lab().args(["nash", "--override", "nash.fields=5", "--out"]).arg(dir.path().join(sub)).output().unwrap();
        assert!(run.status.success());
    }
    let out = lab().arg("compare").arg(dir.path().join("a")).arg(dir.path().join("b")).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "no differences");
}
