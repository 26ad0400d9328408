use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spin_dce_cli::output::sha256_hex;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spin-dce"));
    c.env_remove("SPIN_DCE_WORKERS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let h = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (h, rows)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path().join("o");
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 1);
    assert_eq!(code(&run(&["quench", "--preset", "nope"], &o)), 1);
    let bad = run(&["quench", "--override", "homogeneous.colour=3"], &o);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("config"));
    assert_eq!(code(&run(&["quench", "--config", "/nonexistent/x.toml"], &o)), 1);
    assert_eq!(code(&run(&["entangle", "--shots", "1", "--tmsv-r", "0.1"], &o)), 1);
    let env = bin()
        .env("SPIN_DCE_WORKERS", "lots")
        .args(["quench", "--out"])
        .arg(&o)
        .output()
        .unwrap();
    assert_eq!(code(&env), 1);
}

#[test]
fn numerical_failures_exit_two() {
    let d = tempfile::tempdir().unwrap();
    // the modulation dips into the unstable window of the k = 0 mode
    let o = run(
        &[
            "quench",
            "--override",
            "schedule={kind = \"sinusoid\", mean = 20.0, amplitude = 18.0, frequency = 5.0, duration = 0.3}",
        ],
        &d.path().join("a"),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("homogeneous"));
    let o = run(
        &[
            "ground-state",
            "--override",
            "gpe.max_iterations=1",
            "--override",
            "grid.points=[16, 16, 16]",
            "--override",
            "gpe.allow_coarse=true",
        ],
        &d.path().join("b"),
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gpe"));
}

#[test]
fn manifest_lists_every_output_with_digest() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("q");
    let o = run(&["quench", "--preset", "quench-homogeneous"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "quench");
    assert_eq!(m["preset"], "quench-homogeneous");
    let files = m["outputs"].as_array().unwrap();
    let mut names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["quench.csv", "quench_checks.csv", "report.json"]);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    assert!(m["config"].as_str().unwrap().contains("[homogeneous]"));
}

#[test]
fn trivial_quench_has_zero_quasiparticle_columns() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("q");
    let o = run(
        &["quench", "--preset", "quench-homogeneous", "--override", "schedule.q_final=40"],
        &out,
    );
    assert_eq!(code(&o), 0);
    let (h, rows) = csv_rows(&out.join("quench.csv"));
    assert_eq!(h, ["t_s", "P", "S", "A", "n_plus", "n_minus"]);
    let n0: f64 = rows[0][4].parse().unwrap();
    for r in &rows {
        for c in &r[1..4] {
            assert!(c.parse::<f64>().unwrap().abs() < 1e-12, "{r:?}");
        }
        // only the static depletion remains
        assert!((r[4].parse::<f64>().unwrap() - n0).abs() < 1e-12);
        assert_eq!(r[4], r[5]);
    }
}

#[test]
fn quench_report_prefers_halved_large_qi_form() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("q");
    let o = run(
        &["quench", "--preset", "quench-homogeneous", "--override", "schedule.q_initial=5000"],
        &out,
    );
    assert_eq!(code(&o), 0);
    let r = json(&out.join("report.json"));
    assert_eq!(r["large_qi_form_selected"], "halved");
    assert!(r["oracle_max_rel_error"].as_f64().unwrap() < 1e-4);
    assert!(r["eq3_max_abs_error"].as_f64().unwrap() < 1e-6);
    assert!(r["max_casimir_error"].as_f64().unwrap() < 1e-7);
}

#[test]
fn tmsv_entangle_reports_closed_form_minimum() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("e");
    let o = run(&["entangle", "--tmsv-r", "0.1405", "--shots", "100000"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    let min = s["min_I"].as_f64().unwrap();
    assert!((min - 2.0 * (-0.281f64).exp()).abs() < 1e-12);
    assert!((min - 1.51).abs() < 1e-3);
    assert!((s["argmin_theta"].as_f64().unwrap() - 0.75 * std::f64::consts::PI).abs() < 1e-12);
    assert!(s["sigma_violation"].as_f64().unwrap() > 5.0);
    let (h, rows) = csv_rows(&out.join("entangle.csv"));
    assert_eq!(h, ["theta_rad", "V_plus", "V_minus", "V_d", "V_s", "I"]);
    assert_eq!(rows.len(), 181);
    let (h, _) = csv_rows(&out.join("entangle_mc.csv"));
    assert_eq!(&h[6..], ["se_V_d", "se_V_s", "se_I"]);
    assert!(fs::read_to_string(out.join("entangle.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn hold_time_column_follows_the_calibration() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("e");
    let o = run(
        &[
            "entangle", "--tmsv-r", "0.2", "--shots", "100", "--theta-steps", "5", "--override",
            "entangle.theta_offset=0.5", "--override", "entangle.theta_rate=2.0",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, _) = csv_rows(&out.join("entangle.csv"));
    assert_eq!(h.len(), 6);
    let (h, rows) = csv_rows(&out.join("hold_times.csv"));
    assert_eq!(h, ["theta_rad", "hold_s"]);
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let theta: f64 = r[0].parse().unwrap();
        let hold: f64 = r[1].parse().unwrap();
        assert!((0.5 + 2.0 * hold - theta).abs() < 1e-12);
    }
    let bad = run(&["entangle", "--tmsv-r", "0.2", "--override", "entangle.theta_rate=0.0"], &out);
    assert_eq!(code(&bad), 1);
}

#[test]
fn monte_carlo_output_is_reproducible_from_the_seed() {
    let d = tempfile::tempdir().unwrap();
    let args = ["entangle", "--tmsv-r", "0.3", "--shots", "2000", "--theta-steps", "9"];
    let read = |dir: &str, extra: &[&str]| {
        let out = d.path().join(dir);
        let mut a = args.to_vec();
        a.extend_from_slice(extra);
        assert_eq!(code(&run(&a, &out)), 0);
        fs::read(out.join("entangle_mc.csv")).unwrap()
    };
    let a = read("a", &["--workers", "1"]);
    let b = read("b", &["--workers", "3"]);
    let c = read("c", &["--seed", "7"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn interrupted_scan_resumes_from_checkpoint() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "scan", "--preset", "fig2b", "--f-min", "138", "--f-max", "146", "--steps", "9", "--override",
        "scan.checkpoint=\"ck.jsonl\"",
    ];
    let full = d.path().join("full");
    assert_eq!(code(&run(&args, &full)), 0);
    let want = fs::read(full.join("scan.csv")).unwrap();
    let ck = fs::read_to_string(full.join("ck.jsonl")).unwrap();
    assert_eq!(ck.lines().count(), 10);

    // keep the digest line, four points and half of the fifth
    let part = d.path().join("part");
    fs::create_dir_all(&part).unwrap();
    let lines: Vec<&str> = ck.lines().collect();
    let mut cut = lines[..5].join("\n") + "\n";
    cut.push_str(&lines[5][..lines[5].len() / 2]);
    fs::write(part.join("ck.jsonl"), cut).unwrap();
    assert_eq!(code(&run(&args, &part)), 0);
    assert_eq!(fs::read(part.join("scan.csv")).unwrap(), want);
    let resumed = fs::read_to_string(part.join("ck.jsonl")).unwrap();
    let parsed = resumed.lines().skip(1).filter(|l| serde_json::from_str::<Value>(l).is_ok()).count();
    assert_eq!(parsed, 9);

    // a different config starts over
    let other = d.path().join("other");
    fs::create_dir_all(&other).unwrap();
    fs::write(other.join("ck.jsonl"), &ck).unwrap();
    let mut a = args.to_vec();
    a.extend_from_slice(&["--override", "schedule.amplitude=40.0"]);
    assert_eq!(code(&run(&a, &other)), 0);
    let fresh = fs::read_to_string(other.join("ck.jsonl")).unwrap();
    assert_ne!(fresh.lines().next(), ck.lines().next());
    assert_eq!(fresh.lines().count(), 10);
}

#[test]
fn config_file_layers_between_preset_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[homogeneous]\nsamples = 11\ndensity = 50.0\n").unwrap();
    let out = d.path().join("q");
    let o = bin()
        .args(["quench", "--preset", "quench-homogeneous", "--config"])
        .arg(&cfg)
        .args(["--override", "homogeneous.density=80.0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&out.join("quench.csv"));
    assert_eq!(rows.len(), 11);
    let r = json(&out.join("report.json"));
    let n_u1 = r["n_u1_hz"].as_f64().unwrap();
    let per_density = n_u1 / 80.0;
    assert!((per_density - (-3.6091033465418176 / 100.0)).abs() < 1e-12);
}
