use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nanoring(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanoring"))
        .args(args)
        .current_dir(dir)
        .env_remove("NANORING_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn spectrum_writes_one_row_per_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nanoring(&["spectrum", "--n", "8", "--d", "0.1", "--pol", "transverse", "-o", "s"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("s/modes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("N,d,phi,m,J_over_Gamma0,Gamma_over_Gamma0\n"));
    let manifest = json(&tmp.path().join("s/manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config"]["pol"], "transverse");
}

#[test]
fn scaling_fits_each_spacing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nanoring(&["scaling", "--manifold", "1", "--d", "0.05,0.1", "--n", "4..16", "-o", "sc"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let fits = json(&tmp.path().join("sc/fits.json"));
    let fits = fits["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 2);
    assert!(fits.iter().all(|f| f["xi"].as_f64().unwrap() > 0.0));
    let rows = fs::read_to_string(tmp.path().join("sc/scaling.csv")).unwrap().lines().count();
    let dropped = json(&tmp.path().join("sc/fits.json"))["dropped"].as_u64().unwrap() as usize;
    assert_eq!(rows - 1 + dropped, 2 * 13);
}

#[test]
fn disorder_writes_decay_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "disorder", "--n", "8", "--d", "0.4", "--kind", "radial", "--max-shift", "0.4d", "--realizations", "100", "--seed",
        "7", "-o", "dis",
    ];
    let out = nanoring(&args, tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("dis/decay.csv")).unwrap();
    assert!(csv.starts_with("t_Gamma0,value,kind\n"));
    let kinds: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(kinds.into_iter().collect::<Vec<_>>(), vec!["radial:0.4d", "unperturbed"]);
    assert_eq!(csv.lines().count(), 1 + 2 * 72);
    let summary = json(&tmp.path().join("dis/disorder.json"));
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["studies"][0]["n_realizations"], 100);
    assert!((summary["studies"][0]["max_shift"].as_f64().unwrap() - 0.16).abs() < 1e-12);
    assert_eq!(json(&tmp.path().join("dis/manifest.json"))["seed"], 7);
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["disorder", "--n", "6", "--d", "0.3", "--kind", "angular", "--max-shift", "0.1d,0.3d", "--realizations", "12"];
    for (dir, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let mut args = base.to_vec();
        args.extend(["--seed", "11", "--threads", threads, "-o", dir]);
        assert!(nanoring(&args, tmp.path()).status.success());
    }
    let a = csv_files(&tmp.path().join("a"));
    assert!(!a.is_empty());
    assert_eq!(a, csv_files(&tmp.path().join("b")));
    assert_eq!(a, csv_files(&tmp.path().join("c")));
    let echo = |dir: &str| {
        let mut v = json(&tmp.path().join(dir).join("config.json"));
        v.as_object_mut().unwrap().remove("output_dir");
        v
    };
    assert_eq!(echo("a"), echo("b"));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["field", "--n", "16", "--d", "0.25", "--layout", "lhc", "--map", "plane", "--resolution", "15,15", "-o", "first"];
    assert!(nanoring(&args, tmp.path()).status.success());
    let out = nanoring(&["run", "--config", "first/config.json", "-o", "second"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(csv_files(&tmp.path().join("first")), csv_files(&tmp.path().join("second")));
    let sidecar = json(&tmp.path().join("second/field.json"));
    assert_eq!(sidecar["kind"], "plane");
    assert_eq!(sidecar["n_sites"], 88);
}

#[test]
fn flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"command": "spectrum", "n": 5, "d": 0.2, "output_dir": "from-file"}"#).unwrap();
    let out = nanoring(&["spectrum", "--config", "cfg.json", "--n", "7"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("from-file/modes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert_eq!(json(&tmp.path().join("from-file/config.json"))["n"], "7");
}

#[test]
fn validate_reports_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"command": "disorder", "n": 8, "d": 0.4}"#).unwrap();
    let out = nanoring(&["validate", "--config", "cfg.json"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("OK"));
    assert!(text.contains("default injected: seed = 0"), "{text}");
    assert!(!tmp.path().join("nanoring-out").exists());
}

#[test]
fn validate_lists_offending_fields() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"command": "spectrum", "n": 8, "d": 0, "manifold": 3}"#).unwrap();
    let out = nanoring(&["validate", "--config", "cfg.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let text = stderr(&out);
    assert!(text.contains("d: must be positive"), "{text}");
    assert!(text.contains("manifold:"), "{text}");
}

#[test]
fn schema_violations_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), "{\n  \"n\": 8,\n  \"spacing\": 0.1\n}").unwrap();
    let out = nanoring(&["spectrum", "--config", "cfg.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown field `spacing`"));
    assert!(stderr(&out).contains("line 3"));
    assert_eq!(nanoring(&["spectrum", "--n", "8", "--d", "-0.1"], tmp.path()).status.code(), Some(1));
    assert_eq!(nanoring(&["spectrum", "--n", "8", "--d", "0.1", "--bogus"], tmp.path()).status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_with_two_and_keep_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    // a sphere through the ring sites puts a field point on site 0
    let radius = 0.1 / (2.0 * (std::f64::consts::PI / 8.0).sin());
    let r = format!("{radius:e}");
    let out = nanoring(&["field", "--n", "8", "--d", "0.1", "--radius", &r, "--resolution", "3,4", "-o", "bad"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let manifest = json(&tmp.path().join("bad/manifest.json"));
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].as_str().unwrap().contains("coincides"));
    assert!(tmp.path().join("bad/layout.json").exists());
}

#[test]
fn thread_variable_is_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nanoring"))
        .args(["spectrum", "--n", "4", "--d", "0.1"])
        .current_dir(tmp.path())
        .env("NANORING_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_nanoring"))
        .args(["spectrum", "--n", "4", "--d", "0.1"])
        .current_dir(tmp.path())
        .env("NANORING_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&tmp.path().join("nanoring-out/spectrum/manifest.json"))["threads"], 2);
}

#[test]
fn other_commands_run() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["angle-sweep", "--n", "6", "--d", "0.2", "--phi", "0..1.5:4", "-o", "as"],
        &["transport", "--n", "10", "--d", "0.1", "--pol", "tangential", "--m", "2", "--t-max", "5", "--n-times", "11", "-o", "tr"],
        &["efficiency", "--n", "10", "--d", "0.1", "--pol", "magic", "--x", "0.1,0.2", "-o", "ef"],
    ];
    for args in runs {
        let out = nanoring(args, tmp.path());
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(fs::read_to_string(tmp.path().join("as/angle_sweep.csv")).unwrap().lines().count(), 1 + 4 * 6);
    assert_eq!(fs::read_to_string(tmp.path().join("tr/transfer.csv")).unwrap().lines().count(), 1 + 2 * 11);
    assert!(tmp.path().join("tr/coupling_eta.csv").exists());
    assert_eq!(fs::read_to_string(tmp.path().join("ef/efficiency.csv")).unwrap().lines().count(), 3);
}
