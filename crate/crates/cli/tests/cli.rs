use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn landscape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landscape")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header JSON and numeric rows (blank cells as NaN).
fn parse_csv(text: &str) -> (Value, Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let head = lines.next().unwrap().strip_prefix("# ").expect("versioned header");
    let head: Value = serde_json::from_str(head).unwrap();
    let cols = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| if c.is_empty() { f64::NAN } else { c.parse().unwrap() }).collect())
        .collect();
    (head, cols, rows)
}

fn read_csv(p: &Path) -> (Value, Vec<String>, Vec<Vec<f64>>) {
    parse_csv(&std::fs::read_to_string(p).unwrap())
}

#[test]
fn solve_without_drive_has_zero_flux() {
    let (head, cols, rows) = parse_csv(&stdout(&landscape(&["solve", "--f", "0", "--epsilon", "0.1", "--grid", "128"])));
    assert_eq!(head["J"], 0.0);
    assert_eq!(head["version"], 1);
    assert_eq!(cols, ["theta", "u", "log_u"]);
    assert_eq!(rows.len(), 128);
}

#[test]
fn fig2_peaks_grow_toward_the_saddle_node() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    stdout(&landscape(&["figures", "fig2", "--out-dir", d]));
    assert!(dir.path().join("fig2.svg").exists());
    let (_, cols, rows) = read_csv(&dir.path().join("fig2.csv"));
    assert_eq!(cols[1..], ["u0_f5", "u0_f2", "u0_f1.1", "u0_f1.05"]);
    let peaks: Vec<(f64, f64)> = (1..5)
        .map(|c| {
            rows.iter().map(|r| (r[0], r[c])).fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
        })
        .collect();
    // columns run f = 5, 2, 1.1, 1.05
    assert!(peaks.windows(2).all(|w| w[1].1 > w[0].1), "{peaks:?}");
    assert!(peaks.iter().all(|p| (p.0 - 0.25).abs() < 0.01), "{peaks:?}");
}

#[test]
fn flux_sweep_is_monotone_in_drive() {
    let out = stdout(&landscape(&["sweep", "--f-range", "1.01:5", "--epsilon", "1e-3", "--steps", "12", "--grid", "256"]));
    let (_, _, rows) = parse_csv(&out);
    assert_eq!(rows.len(), 12);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));
    let last = rows.last().unwrap();
    assert!((last[2] - 24f64.sqrt()).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    assert_eq!(landscape(&["solve", "--f", "1"]).status.code(), Some(2));
    assert_eq!(landscape(&["solve", "--f", "x"]).status.code(), Some(2));
    assert_eq!(landscape(&["rates", "--f", "2"]).status.code(), Some(3));
    let o = landscape(&["verify", "--torus-paths", "20"]);
    assert_eq!(o.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["all_passed"], false);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"f": 0.5, "epsilon": 0.1, "sin": "no"}"#).unwrap();
    let o = landscape(&["solve", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sin"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sys.json");
    std::fs::write(&p, r#"{"cos": [-0.15915494309189535], "f": 0.5, "epsilon": 0.1}"#).unwrap();
    let cfg = p.to_str().unwrap();
    let (a, _, _) = parse_csv(&stdout(&landscape(&["solve", "--config", cfg, "--grid", "64"])));
    let (b, _, _) = parse_csv(&stdout(&landscape(&["solve", "--f", "0.5", "--epsilon", "0.1", "--grid", "64"])));
    let (ja, jb) = (a["J"].as_f64().unwrap(), b["J"].as_f64().unwrap());
    assert!((ja - jb).abs() < 1e-12 * jb.abs());
    let (c, _, _) = parse_csv(&stdout(&landscape(&["solve", "--config", cfg, "--f", "0", "--grid", "64"])));
    assert_eq!(c["J"], 0.0);
}

#[test]
fn simulation_is_reproducible_across_thread_counts() {
    let args = ["simulate", "--f", "2", "--epsilon", "0.05", "--paths", "16", "--horizon", "2", "--seed", "9"];
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_landscape"))
            .args(args)
            .env("LANDSCAPE_THREADS", threads)
            .output()
            .unwrap();
        stdout(&o)
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn landscape_and_paste_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("v.svg");
    let out = stdout(&landscape(&["landscape", "--f", "0.5", "--grid", "512", "--svg", svg.to_str().unwrap()]));
    let (head, cols, rows) = parse_csv(&out);
    assert_eq!(head["regime"], "FIXED_POINTS");
    assert!((head["theta_star"][0].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-9);
    assert_eq!(cols, ["theta", "V", "Ustar", "C0"]);
    assert!(rows.iter().all(|r| r[3].is_nan()));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let out = stdout(&landscape(&["paste", "--wells", "3", "--f", "0.1", "--epsilon", "0.05", "--grid", "512"]));
    let (head, _, rows) = parse_csv(&out);
    assert!((head["defect"].as_f64().unwrap() + 0.1).abs() < 1e-8);
    assert_eq!(head["equilibrium"], false);
    assert_eq!(rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min), 0.0);
}

#[test]
fn rates_and_chain_json() {
    let r: Value = serde_json::from_str(&stdout(&landscape(&["rates", "--f", "0.5", "--epsilon", "0.05"]))).unwrap();
    assert_eq!(r["attractors"].as_array().unwrap().len(), 1);
    let b = r["barriers"][0][2].as_f64().unwrap();
    let exact = 3f64.sqrt() / (2.0 * std::f64::consts::PI) - 1.0 / 6.0;
    assert!((b - exact).abs() < 1e-9, "{b}");
    let c: Value =
        serde_json::from_str(&stdout(&landscape(&["chain", "--wells", "3", "--f", "0", "--epsilon", "0.05"]))).unwrap();
    assert_eq!(c["equilibrium"], true);
    let pi: f64 = c["pi"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((pi - 1.0).abs() < 1e-12);
}
