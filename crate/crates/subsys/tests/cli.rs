//! Command-line behaviour and exit codes.

use std::process::Command;

fn subsys(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_subsys"))
        .args(args)
        .env("SUBSYS_WORKERS", "1")
        .output()
        .unwrap()
}

fn temp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("subsys-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_writes_csv_and_sidecar() {
    let dir = temp_dir("run");
    let out = dir.join("r.csv");
    let o = subsys(&["run", "--size", "3", "--p", "0.002,0.004", "--trials", "64", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("toric,3,"));
    assert!(dir.join("r.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_accepts_a_json_config() {
    let dir = temp_dir("config");
    let cfg = dir.join("c.json");
    std::fs::write(
        &cfg,
        r#"{"family":"planar","sizes":[3],"group":null,"l":1,"schedule":{"homogeneous":{"word":"ZX"}},"parallelised":true,
            "gauge_fixing":true,"noise":"code-capacity","p":[0.05],"eta":"inf","rounds":null,"trials":50,"m":10,"seed":3,"output":null}"#,
    )
    .unwrap();
    let o = subsys(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().nth(1).unwrap().starts_with("planar,3,1,perfect/gf,true,code-capacity,0.05,inf,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn configuration_errors_exit_with_one() {
    for args in [
        &["run", "--size", "1"][..],
        &["run", "--p", "2"],
        &["run", "--schedule", "ZQ"],
        &["run", "--family", "hyperbolic"],
        &["run", "--trials", "many"],
        &["no-such-command"],
        &["solve-homomorphisms", "--r", "2", "--s", "4"],
    ] {
        let o = subsys(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = temp_dir("fit");
    let out = dir.join("r.csv");
    let o = subsys(&["run", "--size", "3", "--p", "0.002", "--trials", "16", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let o = subsys(&["fit", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let mut bad_worker = Command::new(env!("CARGO_BIN_EXE_subsys"));
    let o = bad_worker
        .args(["run", "--size", "3", "--trials", "1"])
        .env("SUBSYS_WORKERS", "zero")
        .output()
        .unwrap();
    assert_ne!(o.status.code(), Some(0));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn build_dumps_every_artifact() {
    for what in ["code", "circuit", "graph-x", "graph-z", "dem"] {
        let o = subsys(&["build", "--size", "2", "--what", what]);
        assert!(o.status.success(), "{what}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stdout.is_empty(), "{what}");
    }
    let o = subsys(&["enumerate-faults", "--size", "2", "--rounds", "1"]);
    assert!(o.status.success());
}

#[test]
fn solve_homomorphisms_lists_solutions() {
    let o = subsys(&["solve-homomorphisms", "--r", "4", "--s", "4"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n x y"));
    assert!(text.lines().any(|l| l == "4 1 1"));
}

#[test]
fn help_exits_with_zero() {
    assert_eq!(subsys(&["--help"]).status.code(), Some(0));
    assert_eq!(subsys(&["--version"]).status.code(), Some(0));
}
