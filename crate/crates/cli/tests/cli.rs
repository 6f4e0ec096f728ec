use std::f64::consts::PI;
use std::fs;
use std::process::{Command, Output};

use cpcs_cli::config::{parse_config, PRESETS};

fn cpcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpcs")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn convert_units_prints_atomic_units() {
    let o = cpcs(&["convert-units", "2 eV", "--to", "au"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let v: f64 = text.split_whitespace().next().unwrap().parse().unwrap();
    assert!((v / 7.35e-2 - 1.0).abs() < 5e-3, "{text}");
}

#[test]
fn unknown_key_fails_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, PRESETS[1].1.replace("\"count\"", "\"repeat\": 3, \"count\"")).unwrap();
    let o = cpcs(&["--config", path.to_str().unwrap(), "scan"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("pulses.repeat"), "{}", stderr(&o));
}

#[test]
fn missing_config_and_bad_flags_fail() {
    assert!(!cpcs(&["scan"]).status.success());
    assert!(!cpcs(&["--config", "/nonexistent/x.json", "scan"]).status.success());
    assert!(!cpcs(&["frobnicate"]).status.success());
    let o = cpcs(&["--config", "fig2.json", "scan", "--coupling", "1 au"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("coupled-emitter"));
}

#[test]
fn scan_writes_hash_header_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cpcs(&["--config", "fig2.json", "--out", out, "scan", "--t-max", "1 fs"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let hash = parse_config(PRESETS[1].1)
        .unwrap()
        .modified(|r| r.numerics.delays.as_mut().unwrap().max = "1 fs".into())
        .unwrap()
        .hash();
    assert!(csv.starts_with(&format!("# config_hash={hash}\n")), "{csv}");
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "T_fs,c_Hz,f_Hz");
    assert_eq!(rows.len(), 1 + 5);
    for row in &rows[1..] {
        for field in row.split(',') {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 9, "{field}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scan.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], hash.as_str());
    assert!(summary["diagnostics"]["max_trace_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn precision_variable_changes_digits_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cpcs"))
        .args(["--config", "fig2.json", "--out", out, "scan", "--t-max", "0 fs"])
        .env("CPCS_PRECISION", "4")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let row = csv.lines().last().unwrap();
    assert!(row.starts_with("0.000e0,"), "{row}");
}

#[test]
fn spectrum_of_cosine_peaks_at_carrier() {
    let dir = tempfile::tempdir().unwrap();
    let w0 = 7.35e-2;
    let fs = 41.341373335;
    let mut csv = String::from("# config_hash=synthetic\nT_fs,c_Hz,f_Hz\n");
    for k in 0..881 {
        let t = 0.25 * k as f64;
        csv.push_str(&format!("{:e},{:e},{:e}\n", t, 1e5 * (1.0 + 0.3 * (w0 * t * fs).cos()), 5e6));
    }
    let input = dir.path().join("scan.csv");
    fs::write(&input, csv).unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cpcs(&["--out", out, "spectrum", "--in", input.to_str().unwrap(), "--channel", "c"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("spectrum_c.csv")).unwrap();
    assert!(text.starts_with("# config_hash=synthetic\n"));
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (f[0], f[2])
        })
        .collect();
    let (w_peak, _) = rows.iter().copied().fold((0.0, 0.0), |b, r| if r.1 > b.1 { r } else { b });
    let bin = 2.0 * PI / (881.0 * 0.25 * fs);
    assert!((w_peak - w0).abs() < bin, "{w_peak}");
}
