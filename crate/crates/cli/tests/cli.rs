use std::fs;
use std::path::Path;
use std::process::Command;

fn run(cmd: &str, config: Option<&str>, dir: &Path, extra: &[&str]) -> (i32, String) {
    let out = dir.join("out");
    let mut c = Command::new(env!("CARGO_BIN_EXE_orlicz-var"));
    c.arg(cmd).arg("--out").arg(&out).args(extra);
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        c.arg("--config").arg(path);
    }
    let o = c.output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

#[test]
fn malformed_json_exits_4_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("psi", Some(r#"{"command": "psi", "params": "#), dir.path(), &[]);
    assert_eq!(code, 4);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn one_bad_entry_in_a_list_blocks_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"[{"command":"psi","params":{"kind":"power","p":2,"dim":2,"t_grid":[1]}},
                  {"command":"psi","params":{"kind":"power","p":2,"dim":5,"t_grid":[1]}}]"#;
    let (code, _) = run("psi", Some(cfg), dir.path(), &[]);
    assert_eq!(code, 4);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn inspect_expsquare_reports_indices() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = run(
        "nfunc-inspect",
        Some(r#"{"command":"nfunc-inspect","params":{"kind":"expsquare"}}"#),
        dir.path(),
        &[],
    );
    assert_eq!(code, 0);
    assert!(stdout.contains("ell = 2.000000"), "{stdout}");
    assert!(stdout.contains("m = inf"), "{stdout}");
    let summary = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert_eq!(summary, stdout);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 20_240_917);
    assert_eq!(manifest["config"]["params"]["kind"], "expsquare");
}

#[test]
fn psi_csv_is_quadratic_in_the_plane() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command":"psi","params":{"kind":"power","p":2,"dim":2,"t_grid":[0.5,1,2]}}"#;
    let (code, _) = run("psi", Some(cfg), dir.path(), &[]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("out/psi.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("t,psi_quadrature,psi_closed_form,ratio_to_phi"));
    for row in rows {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        // Φ = t²/2, so Ψ = π t² / 4
        let want = std::f64::consts::FRAC_PI_4 * f[0] * f[0];
        assert!((f[1] - want).abs() <= 1e-12 * want, "{row}");
        assert!((f[2] - want).abs() <= 1e-12 * want, "{row}");
    }
}

#[test]
fn psi_without_closed_form_leaves_the_column_blank() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command":"psi","params":{"kind":"expsquare","dim":1,"t_grid":[0.5]}}"#;
    assert_eq!(run("psi", Some(cfg), dir.path(), &[]).0, 0);
    let csv = fs::read_to_string(dir.path().join("out/psi.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "");
}

#[test]
fn solve_outputs_are_deterministic() {
    let cfg = r#"{"command":"solve","seed":7,"params":{"nfunction":{"kind":"power","p":3},
                  "gamma":0.25,"s":0.5,"grid":{"dim":1,"n":31},"uniqueness_starts":3}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", Some(cfg), a.path(), &["--jobs", "2"]).0, 0);
    assert_eq!(run("solve", Some(cfg), b.path(), &["--jobs", "2"]).0, 0);
    for f in ["solution.csv", "trace.csv", "certificates.json"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command":"solve","params":{"nfunction":{"kind":"power","p":2},
                  "gamma":0.5,"s":0.5,"grid":{"dim":1,"n":31},"max_iterations":2}}"#;
    let (code, stdout) = run("solve", Some(cfg), dir.path(), &[]);
    assert_eq!(code, 3, "{stdout}");
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn list_of_experiments_gets_one_directory_each() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"[{"command":"limit-study","params":{"nfunction":{"kind":"power","p":2},"gamma":0.5,
                    "grid":{"dim":1,"n":31},"s_values":[0.5,0.9,0.95,0.99]}},
                  {"command":"limit-study","params":{"nfunction":{"kind":"sumpower","p":2,"q":3},"gamma":0.5,
                    "grid":{"dim":1,"n":31},"s_values":[0.5,0.9,0.95,0.99]}}]"#;
    let (code, _) = run("limit-study", Some(cfg), dir.path(), &["--jobs", "2"]);
    assert_eq!(code, 0);
    for sub in ["00-limit-study", "01-limit-study"] {
        let csv = fs::read_to_string(dir.path().join("out").join(sub).join("limit_study.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
    }
}

#[test]
fn acceptance_subset_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command":"acceptance","params":{"smoke":true,"criteria":[2,6]}}"#;
    let (code, stdout) = run("acceptance", Some(cfg), dir.path(), &[]);
    assert_eq!(code, 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    let csv = fs::read_to_string(dir.path().join("out/acceptance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn command_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(
        "solve",
        Some(r#"{"command":"nfunc-inspect","params":{"kind":"expsquare"}}"#),
        dir.path(),
        &[],
    );
    assert_eq!(code, 4);
}
