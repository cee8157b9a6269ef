use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tissue-fem"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn tissue-fem")
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn list_names_every_scenario() {
    let out = run(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "free-contraction",
        "uniaxial",
        "equibiaxial-table",
        "cylinder-autoregulation",
    ] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn repeated_runs_write_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = simulate(dir, &["--scenario", "free-contraction"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("results.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# units: "));
    assert_eq!(text.lines().count(), 2 + 21);
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"converged\": true"));
}

#[test]
fn manifest_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    assert!(simulate(&first, &["--scenario", "uniaxial", "--mesh", "2,1,1"])
        .status
        .success());
    let manifest = fs::read_to_string(first.join("manifest.json")).unwrap();
    let config = config_of(&manifest);
    let path = tmp.path().join("config.json");
    fs::write(&path, config).unwrap();
    let second = tmp.path().join("second");
    let out = simulate(&second, &["--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(first.join("results.csv")).unwrap(),
        fs::read(second.join("results.csv")).unwrap()
    );
}

/// The `"config"` object of a pretty-printed manifest.
fn config_of(manifest: &str) -> String {
    let start = manifest.find("\"config\": {").unwrap() + "\"config\": ".len();
    let mut depth = 0;
    for (i, c) in manifest[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return manifest[start..=start + i].to_string();
                }
            }
            _ => {}
        }
    }
    panic!("unbalanced manifest");
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let out = run(&["verify", "--scenario", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert!(simulate(&dir, &["--scenario", "free-contraction"]).status.success());
    let config = config_of(&fs::read_to_string(dir.join("manifest.json")).unwrap());
    let bad = config.replacen('{', "{\n  \"colour\": 1,", 1);
    let path = tmp.path().join("bad.json");
    fs::write(&path, bad).unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn malformed_mesh_argument_is_rejected() {
    for mesh in ["2,2", "0,1,1", "a,b,c", "1,1,100000"] {
        let out = run(&["verify", "--mesh", mesh]);
        assert_eq!(out.status.code(), Some(2), "{mesh}");
    }
}

#[test]
fn solve_failure_exits_3_and_keeps_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert!(simulate(&dir, &["--scenario", "uniaxial"]).status.success());
    let config = config_of(&fs::read_to_string(dir.join("manifest.json")).unwrap())
        .replace("\"tolerance\": 1e-12", "\"tolerance\": 1e-300")
        .replace("\"max_iterations\": 100", "\"max_iterations\": 1");
    assert!(config.contains("1e-300"), "{config}");
    let path = tmp.path().join("strict.json");
    fs::write(&path, config).unwrap();
    let failed = tmp.path().join("failed");
    let out = simulate(&failed, &["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(failed.join("results.csv").exists());
    assert!(fs::read_to_string(failed.join("manifest.json"))
        .unwrap()
        .contains("\"converged\": false"));
}

#[test]
fn slab_verification_passes() {
    let out = run(&["verify", "--scenario", "free-contraction"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 10);
}

#[test]
fn verify_json_report() {
    let out = run(&["verify", "--scenario", "uniaxial", "--no-coupling", "--json"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"scenario\": \"uniaxial\""));
    assert!(text.contains("coupling=false"));
}
