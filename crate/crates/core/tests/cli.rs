use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coherent_feedback::apparatus;
use coherent_feedback::cli::{RunManifest, EXIT_NUMERICAL, EXIT_OK, EXIT_OUTPUT, EXIT_VALIDATION};
use coherent_feedback::loop_algebra::{power_ratio_at, to_db, LoopEnvironment};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coherent-feedback"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn read_manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn sweep_of_reference_config() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sweep");
    let o = run(&["sweep", "--config", p(&fixture("reference.json")), "--out", p(&out)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));

    let manifest = read_manifest(&out);
    assert_eq!(manifest.command, "sweep");
    assert_eq!(manifest.outputs, ["open_loop.csv", "closed_loop.csv", "ratio.csv"]);
    for name in &manifest.outputs {
        assert!(std::fs::metadata(out.join(name)).unwrap().len() > 0);
    }

    let (header, rows) = read_csv(&out.join("ratio.csv"));
    assert_eq!(header, ["detuning_MHz", "power_ratio"]);
    assert_eq!(rows.len(), 1001);
    let (_, closed) = read_csv(&out.join("closed_loop.csv"));
    let (_, open) = read_csv(&out.join("open_loop.csv"));
    for i in 0..rows.len() {
        let c2 = closed[i][1].powi(2) + closed[i][2].powi(2);
        // at μ = 1 the ratio would equal |closed|²/open; at μ < 1 it
        // cannot fall below that coherent part
        assert!(rows[i][1] >= c2 / open[i][1] - 1e-12);
    }

    // the resonant row agrees with the model at the configured gain
    let centre = &rows[500];
    assert!(centre[0].abs() < 1e-9);
    let comp = apparatus::compensator(0.6648);
    let env = LoopEnvironment::new(0.84, 0.0).unwrap();
    let expected = power_ratio_at(&comp, &env, 0.0).unwrap();
    assert!((centre[1] - expected).abs() < 1e-12);
    assert!((to_db(centre[1]) + 7.3786).abs() < 1e-3);

    let min = rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min);
    assert!((to_db(min) + 7.4).abs() < 0.5, "min {} dB", to_db(min));
}

#[test]
fn geometry_config_sweeps_like_rate_config() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    let o = run(&[
        "sweep", "--config", p(&fixture("geometry.json")), "--out", p(&out),
        "--grid-min", "-9.3", "--grid-max", "9.3", "--grid-points", "101",
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out.join("ratio.csv"));
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0][0], -9.3);
    assert!(rows.iter().all(|r| r[1] < 1.0));
}

#[test]
fn zero_gain_ratio_is_unity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.json",
        r#"{"plant": {"gamma_p": 9.3, "k1": 0.3, "k4": 0.5},
            "compensator": {"eta_K": 0.0, "eta_gamma": 0.2},
            "environment": {"mu": 0.7, "phi": 1.0}}"#,
    );
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg), "--out", p(&out)])), EXIT_OK);
    let (_, rows) = read_csv(&out.join("ratio.csv"));
    assert!(rows.iter().all(|r| r[1] == 1.0));
}

#[test]
fn missing_gamma_p_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"plant": {"k1": 0.3, "k4": 0.3}}"#);
    for cmd in ["sweep", "synthesize"] {
        let o = run(&[cmd, "--config", p(&cfg), "--out", p(tmp.path())]);
        assert_eq!(code(&o), EXIT_VALIDATION);
        assert!(String::from_utf8_lossy(&o.stderr).contains("gamma_p"));
    }
    let o = run(&["emulate", "--config", p(&cfg), "--scenario", "lock", "--out", p(tmp.path())]);
    assert_eq!(code(&o), EXIT_VALIDATION);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma_p"));
}

#[test]
fn other_validation_failures() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&run(&["sweep", "--config", p(&missing)])), EXIT_VALIDATION);
    let cfg = write_config(tmp.path(), "mu.json", r#"{"plant": {"gamma_p": 9.3, "k1": 0.3, "k4": 0.3},
        "compensator": {"eta_K": 0.5, "eta_gamma": 0.0}, "environment": {"mu": 1.5}}"#);
    let o = run(&["sweep", "--config", p(&cfg), "--out", p(tmp.path())]);
    assert_eq!(code(&o), EXIT_VALIDATION);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu"));
    let o = run(&["sweep", "--config", p(&fixture("reference.json")), "--grid-points", "1", "--out", p(tmp.path())]);
    assert_eq!(code(&o), EXIT_VALIDATION);
    let o = run(&["emulate", "--config", p(&fixture("reference.json")), "--scenario", "bogus"]);
    assert_eq!(code(&o), EXIT_VALIDATION);
}

#[test]
fn pole_on_the_grid_is_a_numerical_error() {
    let tmp = TempDir::new().unwrap();
    // γ_c = 10 − 2(1 + 1) − 6 = 0 puts the compensator pole at s = 0
    let cfg = write_config(tmp.path(), "pole.json", r#"{"plant": {"gamma_p": 10.0, "k1": 1.0, "k4": 1.0},
        "compensator": {"eta_K": 0.5, "eta_gamma": -6.0}, "environment": {"mu": 0.9}}"#);
    let o = run(&[
        "sweep", "--config", p(&cfg), "--out", p(&tmp.path().join("o")),
        "--grid-min", "-1", "--grid-max", "1", "--grid-points", "3",
    ]);
    assert_eq!(code(&o), EXIT_NUMERICAL, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_directory() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["sweep", "--config", p(&fixture("reference.json")), "--out", p(&blocker)]);
    assert_eq!(code(&o), EXIT_OUTPUT);
}

fn synthesize(config: &Path, extra: &[&str]) -> Value {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["synthesize", "--config", p(config), "--out", p(tmp.path())];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_manifest(tmp.path()).outputs, ["synthesis.json"]);
    serde_json::from_str(&std::fs::read_to_string(tmp.path().join("synthesis.json")).unwrap()).unwrap()
}

#[test]
fn synthesize_ideal_reports_infinite_rejection() {
    let r = synthesize(&fixture("ideal.json"), &[]);
    assert!((r["eta_K_opt"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert_eq!(r["rejection_db"], "inf");
    assert!(r["band_metric"].is_null());
}

#[test]
fn synthesize_reference_against_gain_grid() {
    let r = synthesize(&fixture("reference.json"), &[]);
    let env = LoopEnvironment::new(0.84, 0.0).unwrap();
    let oracle = (0..=40_000)
        .map(|i| power_ratio_at(&apparatus::compensator(i as f64 * 1e-4), &env, 0.0).unwrap())
        .fold(f64::INFINITY, f64::min);
    let db = r["rejection_db"].as_f64().unwrap();
    assert!((db + to_db(oracle)).abs() < 1e-4, "{db} vs {}", -to_db(oracle));
    assert!((db - 7.4).abs() < 0.05);
    assert_eq!(r["phi_opt"].as_f64().unwrap(), 0.0);
}

#[test]
fn synthesize_band_flag_populates_band_metric() {
    let r = synthesize(&fixture("reference.json"), &["--band", "9.3"]);
    assert_eq!(r["band_edge"].as_f64(), Some(9.3));
    let sup = r["band_metric"].as_f64().unwrap();
    assert!(sup >= r["ratio_at_zero"].as_f64().unwrap() - 1e-12 && sup < 1.0);
    assert!(r["band_mean"].as_f64().unwrap() <= sup);
}

fn emulate(config: &Path, scenario: &str, out: &Path, extra: &[&str]) {
    let mut args = vec!["emulate", "--config", p(config), "--scenario", scenario, "--out", p(out)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_round_trip_through_the_cli() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "gen.json",
        r#"{"plant": {"gamma_p": 9.3, "k1": 0.33839327370474764, "k4": 0.33839327370474764},
            "compensator": {"eta_gamma": -0.6642857142857144},
            "environment": {"mu": 0.84},
            "emulation": {"detector_noise": 0.0}}"#,
    );
    let gen = tmp.path().join("gen");
    emulate(&cfg, "parametric", &gen, &[]);
    let (header, rows) = read_csv(&gen.join("parametric.csv"));
    assert_eq!(header, ["eta_K", "ratio_max", "ratio_min"]);
    assert_eq!(rows.len(), 12);

    let mut outputs = Vec::new();
    for name in ["fit1", "fit2"] {
        let out = tmp.path().join(name);
        let o = run(&[
            "fit", "--data", p(&gen.join("parametric.csv")),
            "--bounds", p(&fixture("fit_request.json")), "--out", p(&out),
        ]);
        assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("fit.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    let fit: Value = serde_json::from_slice(&outputs[0]).unwrap();
    let k = apparatus::coupler_rate();
    for (field, truth) in [("eta_gamma", apparatus::eta_gamma()), ("mu", 0.84), ("k1", k), ("k4", k)] {
        let got = fit[field].as_f64().unwrap();
        assert!(((got - truth) / truth).abs() < 0.01, "{field}: {got} vs {truth}");
    }

    let report_dir = tmp.path().join("report");
    let o = run(&[
        "report", "--fit", p(&tmp.path().join("fit1/fit.json")),
        "--measured", p(&fixture("measured.json")), "--out", p(&report_dir),
    ]);
    assert_eq!(code(&o), EXIT_OK);
    assert!(String::from_utf8_lossy(&o.stdout).contains("4/4 checks passed"));
}

#[test]
fn report_of_reference_values_passes() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "report", "--fit", p(&fixture("reference_fit.json")),
        "--measured", p(&fixture("measured.json")), "--out", p(tmp.path()),
    ]);
    assert_eq!(code(&o), EXIT_OK);
    let text = std::fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert_eq!(text.matches("[PASS]").count(), 4, "{text}");
    assert!(!text.contains("[FAIL]"));
    assert_eq!(read_manifest(tmp.path()).outputs, ["report.txt", "report.json"]);
}

#[test]
fn empty_dataset_is_rejected() {
    let tmp = TempDir::new().unwrap();
    for body in ["", "eta_K,ratio_max,ratio_min\n"] {
        let data = write_config(tmp.path(), "empty.csv", body);
        let o = run(&["fit", "--data", p(&data), "--bounds", p(&fixture("fit_request.json")), "--out", p(tmp.path())]);
        assert_eq!(code(&o), EXIT_VALIDATION);
    }
}

#[test]
fn lock_scenario_crossing_sits_on_the_power_minimum() {
    let tmp = TempDir::new().unwrap();
    emulate(&fixture("reference.json"), "LOCK", tmp.path(), &[]);
    let (header, rows) = read_csv(&tmp.path().join("lock.csv"));
    assert_eq!(header, ["phi_rad", "power_ratio", "error_signal"]);
    let imin = (0..rows.len()).min_by(|&a, &b| rows[a][1].total_cmp(&rows[b][1])).unwrap();
    let e = |i: usize| rows[i][2];
    // sign change of the error signal next to the minimum row
    assert!(e(imin - 1) < 0.0 && e(imin + 1) > 0.0);
    assert!(e(imin).abs() < e(imin - 1).abs() && e(imin).abs() < e(imin + 1).abs());
    // and no other interior crossing apart from the maximum at ±π
    let crossings: Vec<usize> = (0..rows.len() - 1)
        .filter(|&i| e(i) != 0.0 && e(i).signum() != e(i + 1).signum())
        .collect();
    assert!(crossings.iter().all(|&i| i == imin || i + 1 == imin), "{crossings:?}");
}

#[test]
fn swept_sine_sidebands_are_detectable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sb.json",
        r#"{"plant": {"gamma_p": 9.3, "k1": 0.33839327370474764, "k4": 0.33839327370474764},
            "compensator": {"eta_K": 0.6648, "eta_gamma": -0.6642857142857144},
            "environment": {"mu": 0.84},
            "emulation": {"noise_floor": 0.01, "sideband_offset": 30.0, "sideband_depth": 0.25,
                          "detector_noise": 0.0, "sample_count": 1201, "span": 60.0}}"#,
    );
    emulate(&cfg, "swept-sine", tmp.path(), &[]);
    let (header, rows) = read_csv(&tmp.path().join("swept_sine.csv"));
    assert_eq!(header, ["detuning_MHz", "open_loop_power", "closed_loop_power", "power_ratio"]);
    for col in [1, 2] {
        let peaks: Vec<f64> = (1..rows.len() - 1)
            .filter(|&i| rows[i][col] > rows[i - 1][col] && rows[i][col] > rows[i + 1][col])
            .map(|i| rows[i][0])
            .collect();
        assert_eq!(peaks.len(), 3, "column {col}: {peaks:?}");
        assert!(peaks[1].abs() < 1e-9);
        // the carrier's wing pulls each sideband peak slightly inward
        assert!(peaks[2] > 27.0 && peaks[2] <= 30.0, "{peaks:?}");
        assert!((peaks[0] + peaks[2]).abs() < 1e-9);
    }
}

#[test]
fn emulate_is_byte_identical_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for scenario in ["swept-sine", "phase-scan", "lock", "parametric"] {
        emulate(&fixture("reference.json"), scenario, &dirs[0], &["--seed", "11"]);
        emulate(&fixture("reference.json"), scenario, &dirs[1], &["--seed", "11"]);
        emulate(&fixture("reference.json"), scenario, &dirs[2], &["--seed", "12"]);
        let file = read_manifest(&dirs[0]).outputs[0].clone();
        for name in [file.as_str(), "manifest.json"] {
            assert_eq!(
                std::fs::read(dirs[0].join(name)).unwrap(),
                std::fs::read(dirs[1].join(name)).unwrap(),
                "{scenario}: {name}"
            );
        }
        if scenario != "lock" {
            assert_ne!(
                std::fs::read(dirs[0].join(&file)).unwrap(),
                std::fs::read(dirs[2].join(&file)).unwrap()
            );
        }
    }
}

#[test]
fn phase_scan_trace_has_reference_levels() {
    let tmp = TempDir::new().unwrap();
    emulate(&fixture("reference.json"), "phase_scan", tmp.path(), &[]);
    let (header, rows) = read_csv(&tmp.path().join("phase_scan.csv"));
    assert_eq!(header, ["sample", "phi_rad", "output_power", "open_loop_power", "noise_floor"]);
    let open = rows[0][3];
    let floor = rows[0][4];
    assert!(rows.iter().all(|r| r[3] == open && r[4] == floor));
    assert!(floor > 0.0 && floor < open);
    let min = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    assert!(min < 0.25 * open && max > open);
}

#[test]
fn manifest_digest_follows_input_bytes() {
    let tmp = TempDir::new().unwrap();
    let text = std::fs::read_to_string(fixture("reference.json")).unwrap();
    let digest = |body: &str, extra: &[&str]| {
        let cfg = write_config(tmp.path(), "c.json", body);
        let out = tmp.path().join("o");
        let mut args = vec!["sweep", "--config", p(&cfg), "--out", p(&out), "--grid-points", "11"];
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), EXIT_OK);
        read_manifest(&out).config_digest
    };
    let base = digest(&text, &[]);
    assert_eq!(base, digest(&text, &[]));
    assert_ne!(base, digest(&format!("{text} "), &[]));
    assert_ne!(base, digest(&text, &["--grid-max", "40"]));
}

#[test]
fn in_process_entry_point_matches_binary() {
    let tmp = TempDir::new().unwrap();
    let code = coherent_feedback::cli::run([
        "coherent-feedback", "synthesize", "--config", p(&fixture("ideal.json")), "--out", p(tmp.path()),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(coherent_feedback::cli::run(["coherent-feedback", "--version"]), EXIT_OK);
    assert_eq!(coherent_feedback::cli::run(["coherent-feedback", "sweep"]), EXIT_VALIDATION);
}
