//! End-to-end runs of the binary: demo configs, artifact contents, exit
//! codes, and validation reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_statesynth")
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("file exists")).expect("valid json")
}

fn write_cfg(dir: &Path, value: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Data rows of an emitted CSV (comment preamble and header stripped).
fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).expect("csv exists");
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().expect("header");
    assert!(header.chars().next().unwrap().is_alphabetic(), "header row: {header}");
    lines
        .map(|l| l.split(',').map(|v| if v.is_empty() { f64::NAN } else { v.parse().unwrap() }).collect())
        .collect()
}

#[test]
fn pi_pulse_demo_reaches_target_and_reruns_identically() {
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    let cfg = demo("pi_pulse.json");

    let first = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_a.path().to_str().unwrap()]);
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));

    let results = read_json(&out_a.path().join("results.json"));
    assert_eq!(results["schema_version"], 1);
    assert_eq!(results["status"], "ok");
    let fidelity = results["results"]["fidelity"].as_f64().unwrap();
    assert!(fidelity >= 0.999, "fidelity {fidelity}");
    assert!(out_a.path().join("control.csv").exists());
    assert!(out_a.path().join("iterations.csv").exists());

    let second = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_b.path().to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    assert_eq!(results, read_json(&out_b.path().join("results.json")), "same seed, same artifact");
}

#[test]
fn seed_flag_overrides_config_seed() {
    let out = tempfile::tempdir().unwrap();
    let cfg = demo("pi_pulse.json");
    let run1 = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code(&run1), 0);
    assert_eq!(read_json(&out.path().join("results.json"))["seed"], 99);
}

#[test]
fn regularization_only_drives_control_to_zero() {
    let out = tempfile::tempdir().unwrap();
    let cfg = demo("regularization_only.json");
    let result = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));

    let max_eta = csv_rows(&out.path().join("control.csv"))
        .iter()
        .map(|row| row[1].abs())
        .fold(0.0_f64, f64::max);
    assert!(max_eta < 1e-6, "control remains {max_eta:.3e}");
    assert!(out.path().join("snapshots.csv").exists());
}

#[test]
fn transmon_spectrum_emits_formula_comparison() {
    let out = tempfile::tempdir().unwrap();
    let cfg = demo("transmon_spectrum.json");
    let result = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));

    let rows = csv_rows(&out.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0].len(), 4, "numeric, formula, and error columns");
    for pair in rows.windows(2) {
        assert!(pair[1][1] > pair[0][1], "levels sorted ascending");
    }
    assert!(rows[0][3] < 0.01, "ground level matches the large-ratio formula");
    assert!(rows[1][3] < 0.01);
}

#[test]
fn fluxonium_spectrum_omits_formula_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &json!({
            "mode": "spectrum",
            "potential": {
                "kind": "fluxonium",
                "e_c": 1.0, "e_j": 4.0, "e_l": 0.8,
                "x_l": -12.0, "x_r": 12.0
            },
            "grid": {"x_l": -12.0, "x_r": 12.0, "j": 512},
            "spectrum": {"levels": 4}
        }),
    );
    let out = dir.path().join("out");
    let result = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    let rows = csv_rows(&out.join("spectrum.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].len(), 2, "no formula columns without a reference formula");
}

#[test]
fn open_boundary_demo_reports_small_reflection() {
    let out = tempfile::tempdir().unwrap();
    let cfg = demo("open_boundary_packet.json");
    let result = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));

    let results = read_json(&out.path().join("results.json"));
    let reflection = results["results"]["reflection_measure"].as_f64().unwrap();
    assert!(reflection < 1e-3, "reflection {reflection:.3e}");
    assert!(out.path().join("snapshots.csv").exists());

    let exterior = csv_rows(&out.path().join("exterior.csv"));
    assert_eq!(exterior.len(), 257);
    assert!(exterior.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn dirichlet_walls_keep_the_packet_inside() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &json!({
            "mode": "simulate",
            "grid": {"x_l": -8.0, "x_r": 8.0, "j": 768},
            "potential": {"kind": "free_window", "x_l": -8.0, "x_r": 8.0},
            "initial_state": {"kind": "gaussian", "x0": -4.0, "sigma": 0.5, "k0": 16.0},
            "boundary": "dirichlet",
            "horizon": {"t_total": 0.5625, "steps": 384},
            "signal": {"kind": "constant", "value": 0.0}
        }),
    );
    let out = dir.path().join("out");
    let result = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    let results = read_json(&out.join("results.json"));
    let reflection = results["results"]["reflection_measure"].as_f64().unwrap();
    assert!(reflection > 0.9, "walls kept only {reflection:.3}");
}

fn gradcheck_cfg(extra: Value) -> Value {
    let mut cfg = json!({
        "mode": "gradcheck",
        "grid": {"x_l": -8.0, "x_r": 8.0, "j": 96},
        "potential": {
            "kind": "harmonic_driven",
            "mass": 2.0, "omega": 1.0, "corrected": false,
            "x_l": -8.0, "x_r": 8.0, "eta_bounds": [-10.0, 10.0]
        },
        "initial_state": {"kind": "eigenstate", "index": 0},
        "target_state": {"kind": "eigenstate", "index": 1},
        "boundary": "dirichlet",
        "horizon": {"t_total": 1.0, "steps": 48},
        "cost": {"alpha": 1.0, "beta": 0.5, "p": 2.0, "q": 2.0},
        "control": {"kind": "piecewise_constant", "intervals": 8, "bounds": [-5.0, 5.0]},
        "seed": 1
    });
    if let Value::Object(extra) = extra {
        cfg.as_object_mut().unwrap().extend(extra);
    }
    cfg
}

#[test]
fn gradcheck_passes_and_reports_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &gradcheck_cfg(json!({})));
    let out = dir.path().join("out");
    let result = run(&["gradcheck", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));

    let report = read_json(&out.join("gradcheck.json"));
    let max_rel = report["results"]["max_rel_error"].as_f64().unwrap();
    assert!(max_rel < 1e-4, "max rel error {max_rel:.3e}");
    assert_eq!(report["results"]["passed"], true);
    assert_eq!(report["results"]["sweep"].as_array().unwrap().len(), 3);
    assert_eq!(report["results"]["entries"].as_array().unwrap().len(), 8);
}

#[test]
fn gradcheck_past_threshold_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &gradcheck_cfg(json!({"gradcheck": {"eps": [1.0]}})));
    let out = dir.path().join("out");
    let result = run(&["gradcheck", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&result), 4, "stderr: {}", stderr(&result));
    let report = read_json(&out.join("gradcheck.json"));
    assert_eq!(report["results"]["passed"], false);
}

#[test]
fn validation_reports_every_problem_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &json!({
            "mode": "solve",
            "grid": {"x_l": -1.0, "x_r": 1.0, "j": 2},
            "potential": {"kind": "free_window", "x_l": -1.0, "x_r": 1.0},
            "initial_state": {"kind": "gaussian", "x0": 0.0, "sigma": 0.1, "k0": 0.0},
            "target_state": {"kind": "gaussian", "x0": 0.2, "sigma": 0.1, "k0": 0.0},
            "horizon": {"t_total": 0.0, "steps": 0},
            "cost": {"alpha": 1.0},
            "control": {"kind": "piecewise_constant", "intervals": 4}
        }),
    );
    let result = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&result), 2);
    let err = stderr(&result);
    assert!(err.contains("grid.j"), "names the grid field: {err}");
    assert!(err.contains("horizon.t_total"), "names the horizon: {err}");
    assert!(err.contains("horizon.steps"), "names the step count: {err}");
}

#[test]
fn unknown_potential_lists_registered_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &json!({
            "mode": "spectrum",
            "potential": {"kind": "foo"},
            "grid": {"j": 64}
        }),
    );
    let result = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&result), 2);
    let err = stderr(&result);
    for kind in ["free_window", "harmonic_driven", "transmon", "fluxonium"] {
        assert!(err.contains(kind), "lists {kind}: {err}");
    }
}

#[test]
fn zero_step_simulation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &json!({
            "mode": "simulate",
            "grid": {"x_l": -4.0, "x_r": 4.0, "j": 64},
            "potential": {"kind": "free_window", "x_l": -4.0, "x_r": 4.0},
            "initial_state": {"kind": "gaussian", "x0": 0.0, "sigma": 0.5, "k0": 0.0},
            "horizon": {"t_total": 1.0, "steps": 0},
            "signal": {"kind": "constant", "value": 0.0}
        }),
    );
    let result = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("horizon.steps"));
}

#[test]
fn subcommand_must_match_declared_mode() {
    let dir = tempfile::tempdir().unwrap();
    let result = run(&[
        "spectrum",
        "--config",
        demo("pi_pulse.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("mode"));
}

#[test]
fn periodic_potential_cannot_be_time_stepped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &json!({
            "mode": "simulate",
            "grid": {"j": 128},
            "potential": {"kind": "transmon", "e_c": 0.25, "e_j": 12.5},
            "initial_state": {"kind": "eigenstate", "index": 0},
            "horizon": {"t_total": 1.0, "steps": 16},
            "signal": {"kind": "constant", "value": 0.0}
        }),
    );
    let result = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("spectrum-only"), "stderr: {}", stderr(&result));
}

#[test]
fn artifacts_carry_version_and_config_echo() {
    let out = tempfile::tempdir().unwrap();
    let cfg = demo("transmon_spectrum.json");
    let result = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&result), 0);

    let csv = std::fs::read_to_string(out.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with(&format!("# version: {}\n", env!("CARGO_PKG_VERSION"))));
    assert!(csv.lines().nth(2).unwrap().starts_with("# config: "));

    let results = read_json(&out.path().join("results.json"));
    assert_eq!(results["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(results["config"]["potential"]["kind"], "transmon");
}
