use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gltop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gltop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn out_dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const BASE: &str = r#"
[params]
m = 1.0
g = 9.81
l = 0.1
i1 = 0.002
i3 = 0.001

[friction]
kind = "constant"
mu = 0.3
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, format!("{BASE}{body}")).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn upright_run_is_constant() {
    let dir = out_dir();
    let out = gltop(&["run", &config("upright.toml"), "--out-dir", dir.path().to_str().unwrap(), "-q"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let table = rows(dir.path().join("upright.csv"));
    assert_eq!(table[0].join(","), "t,theta,phidot,omega3,nux,nuy,E,gn,L3,Lz,LAz,vA");
    assert_eq!(table.len(), 102);
    for r in &table[1..] {
        assert_eq!(r[1..], table[1][1..]);
        assert!(r[1..6].iter().all(|c| c.is_empty()));
    }

    let report = json(dir.path().join("upright.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["convergence"]["limit"], "Upright");
    assert_eq!(report["convergence"]["t_converged"], 0.0);
    for k in ["max_abs_delta_l3", "max_energy_increase", "max_abs_vertical_tip_velocity"] {
        assert!(report["drifts"][k].as_f64().unwrap() <= 1e-15, "{k}");
    }
}

#[test]
fn frictionless_run_conserves_energy() {
    let dir = out_dir();
    let out = gltop(&["run", &config("frictionless.toml"), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let table = rows(dir.path().join("frictionless.csv"));
    let energy: Vec<f64> = table[1..].iter().map(|r| r[6].parse().unwrap()).collect();
    let e0 = energy[0];
    assert!(energy.iter().all(|e| (e - e0).abs() < 1e-8 * e0.abs()));
    let report = json(dir.path().join("frictionless.json"));
    assert!(report["drifts"]["max_energy_increase"].as_f64().unwrap() < 1e-8 * e0);
}

#[test]
fn csv_numbers_round_trip() {
    let dir = out_dir();
    let out = gltop(&["run", &config("tilted.toml"), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let table = rows(dir.path().join("tilted.csv"));
    assert_eq!(table.len(), 1002);
    for r in &table[1..] {
        for cell in r {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(&format!("{x:.16e}"), cell);
            assert_eq!(format!("{x:.16e}").parse::<f64>().unwrap(), x);
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let (a, b) = (out_dir(), out_dir());
    for d in [&a, &b] {
        assert!(gltop(&["run", &config("tilted.toml"), "--out-dir", d.path().to_str().unwrap()])
            .status
            .success());
    }
    for f in ["tilted.json", "tilted.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn report_goes_to_stdout_without_out_dir() {
    let dir = out_dir();
    let cfg = write_config(dir.path(), "c.toml", "[initial.euler]\ntheta = 0.5\nomega3 = 150.0\n[integrator]\nt_end = 0.1\n");
    let out = gltop(&["run", &cfg]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["termination"]["kind"], "TimeEnd");
    assert!(fs::read_dir(dir.path()).unwrap().count() == 1);
}

#[test]
fn config_errors_name_the_location() {
    let dir = out_dir();
    let cfg = write_config(dir.path(), "bad.toml", "[initial.euler]\ntheta = 0.5\nomega = 150.0\n");
    let out = gltop(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("omega") && err.contains("line"), "{err}");

    let cfg = write_config(dir.path(), "neg.toml", "[initial.euler]\ntheta = 0.5\nomega3 = 150.0\n");
    fs::write(&cfg, fs::read_to_string(&cfg).unwrap().replace("i1 = 0.002", "i1 = -0.002")).unwrap();
    let out = gltop(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("i1"));
}

#[test]
fn degenerate_start_fails() {
    // Slip along a tilted axis chosen so that the reaction-force denominator
    // vanishes.
    let (m, l, i1, mu, c) = (1.0f64, 0.1f64, 0.002f64, 0.3f64, 0.8f64);
    let s = (1.0 - c * c).sqrt();
    let va3 = -(i1 * i1 + m * l * l * i1 * (1.0 - c * c)) / (m * l * l * i1 * mu * c);
    let dir = out_dir();
    let body = format!(
        "[initial.vector]\nrdot = [{:e}, 0.0]\nmomentum = [0.0, 0.0, 0.0]\naxis = [{s:e}, 0.0, {c:e}]\n",
        va3 / s
    );
    let cfg = write_config(dir.path(), "deg.toml", &body);
    let out = gltop(&["run", &cfg, "-q"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("denominator"));
}

#[test]
fn check_passes_at_reference_parameters() {
    let dir = out_dir();
    let out = gltop(&["check", &config("check.toml"), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = json(dir.path().join("check.json"));
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["cross_chart", "conservation", "dissipation_identity", "lemma1_fixed_points", "lemma2_no_gn_zero"]
    );
}

#[test]
fn check_catches_corrupted_pivot_inertia() {
    let dir = out_dir();
    let out = gltop(&["check", &config("check_corrupted.toml"), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(dir.path().join("check_corrupted.json"));
    assert_eq!(report["passed"], false);
    let dissipation = report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "dissipation_identity")
        .unwrap();
    assert_eq!(dissipation["passed"], false);
}

#[test]
fn frictionless_check_adds_classical_limit() {
    let dir = out_dir();
    let text = fs::read_to_string(config("check.toml")).unwrap().replace("mu = 0.3", "mu = 0.0");
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, text).unwrap();
    let out = gltop(&["check", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "-q"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(dir.path().join("check.json"));
    let classical = report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "classical_limit")
        .unwrap();
    assert_eq!(classical["passed"], true);
}

#[test]
fn check_seed_flag_is_deterministic() {
    let dir = out_dir();
    let mut outputs = Vec::new();
    for (k, seed) in ["5", "5", "6"].iter().enumerate() {
        let d = dir.path().join(k.to_string());
        let out = gltop(&["check", &config("check.toml"), "--seed", seed, "--out-dir", d.to_str().unwrap(), "-q"]);
        assert!(out.status.success());
        outputs.push(fs::read_to_string(d.join("check.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0], outputs[2]);
    assert!(outputs[0].contains("\"seed\": 5"));
}

const SWEEP_RUN: &str = "[initial.euler]\ntheta = 0.3\nomega3 = 100.0\nnux = 0.05\n[integrator]\nt_end = 20.0\n";

#[test]
fn sweep_is_independent_of_parallelism() {
    let dir = out_dir();
    let mut summaries = Vec::new();
    for par in [1, 3] {
        let body = format!(
            "{SWEEP_RUN}[sweep]\nparallelism = {par}\n[[sweep.axes]]\npath = \"initial.euler.omega3\"\n\
             values = [65.099309, 108.498848, 151.898387]\n[[sweep.axes]]\npath = \"friction.mu\"\nvalues = [0.3, -0.1]\n"
        );
        let cfg = write_config(dir.path(), &format!("s{par}.toml"), &body);
        let d = dir.path().join(format!("o{par}"));
        let out = gltop(&["sweep", &cfg, "--out-dir", d.to_str().unwrap(), "-q"]);
        // The negative friction points fail in-row; the sweep still finishes.
        assert_eq!(out.status.code(), Some(2));
        assert!(!d.join("sweep.csv.partial").exists());
        summaries.push(fs::read_to_string(d.join("sweep.csv")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
    let lines: Vec<&str> = summaries[0].lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("index,initial.euler.omega3,friction.mu,la3,"));
    for (k, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{k},")));
        if k % 2 == 1 {
            assert!(line.contains("friction"), "{line}");
        } else {
            assert!(line.contains(",false,Inverted,"), "{line}");
        }
    }
}

#[test]
fn single_point_sweep_matches_run() {
    let dir = out_dir();
    let body = format!("{SWEEP_RUN}[sweep]\n[[sweep.axes]]\npath = \"initial.euler.omega3\"\nvalues = [100.0]\n");
    let cfg = write_config(dir.path(), "one.toml", &body);
    let d = dir.path().to_str().unwrap();
    assert!(gltop(&["sweep", &cfg, "--out-dir", d, "-q"]).status.success());
    assert!(gltop(&["run", &cfg, "--out-dir", d, "-q"]).status.success());
    let report = json(dir.path().join("report.json"));
    let row = &rows(dir.path().join("sweep.csv"))[1];
    assert_eq!(row[5], report["convergence"]["limit"].as_str().unwrap());
    let t: f64 = row[6].parse().unwrap();
    assert_eq!(t, report["convergence"]["t_converged"].as_f64().unwrap());
    let la3: f64 = row[2].parse().unwrap();
    assert_eq!(la3, report["stability"]["la3"].as_f64().unwrap());
}

#[test]
fn sweep_respects_cap() {
    let dir = out_dir();
    let body = format!(
        "{SWEEP_RUN}[sweep]\ncap = 3\n[[sweep.axes]]\npath = \"initial.euler.omega3\"\nvalues = [1.0, 2.0]\n\
         [[sweep.axes]]\npath = \"friction.mu\"\nvalues = [0.1, 0.2]\n"
    );
    let cfg = write_config(dir.path(), "cap.toml", &body);
    let out = gltop(&["sweep", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}
