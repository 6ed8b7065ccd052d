use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const DEMO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/demo1d.json");

fn qwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwave")).args(args).env_remove("QWAVE_OUT_DIR").output().unwrap()
}

fn write_scenario(dir: &Path, name: &str, scenario: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(scenario).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn simulate(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qwave(&args)
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

/// `time,dof,value` rows of a snapshot file.
fn snapshots(dir: &Path) -> Vec<(f64, usize, f64)> {
    let mut reader = csv::Reader::from_path(dir.join("snapshots.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["time", "dof", "value"]);
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect()
}

fn field_at(rows: &[(f64, usize, f64)], t: f64) -> Vec<f64> {
    rows.iter().filter(|r| r.0 == t).map(|r| r.2).collect()
}

fn line_scenario(nodes: usize, final_time: f64) -> Value {
    json!({
        "grid": { "dimension": 1, "bounds": [[0.0, 1.0]], "nodes": [nodes] },
        "material": { "model": { "type": "constant", "medium": { "rho": 1.0, "c": 1.0 } } },
        "times": { "final": final_time }
    })
}

#[test]
fn demo_reproduces_the_monolithic_loss() {
    let tmp = TempDir::new().unwrap();
    let out = simulate(Path::new(DEMO), tmp.path(), &[]);
    assert_ok(&out);
    let m = read_json(&tmp.path().join("measurement_receivers.json"));
    let rel = m["reference"]["relative_difference"].as_f64().unwrap();
    assert!(rel <= 1e-6, "relative difference {rel}");
    assert!(m["stacks"].as_u64().unwrap() > 1);
    let manifest = read_json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["scaling"]["speedup"], "quadratic");
    assert_eq!(manifest["hamiltonian"]["sparsity"], 2);
    assert!(manifest["hamiltonian"]["max_norm"].as_f64().unwrap() > 0.0);
    assert_eq!(manifest["register"]["qubits"], 12);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        assert_ok(&simulate(Path::new(DEMO), dir.path(), &["--shots", "2000", "--seed", "11"]));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn empty_scenario_stays_zero() {
    let tmp = TempDir::new().unwrap();
    for engine in ["quantum", "leapfrog"] {
        let mut s = line_scenario(16, 0.5);
        s["engine"] = json!(engine);
        s["times"]["snapshots"] = json!([0.0, 0.25]);
        let path = write_scenario(tmp.path(), "zero.json", &s);
        let out_dir = tmp.path().join(engine);
        assert_ok(&simulate(&path, &out_dir, &[]));
        let rows = snapshots(&out_dir);
        assert_eq!(rows.len(), 3 * 31);
        assert!(rows.iter().all(|r| r.2 == 0.0));
        let energy = fs::read_to_string(out_dir.join("energy.csv")).unwrap();
        let mut lines = energy.lines();
        assert_eq!(lines.next(), Some("time,energy"));
        assert!(lines.all(|l| l.ends_with(",0e0")), "{energy}");
    }
}

#[test]
fn invalid_scenarios_exit_with_one_and_write_nothing() {
    let tmp = TempDir::new().unwrap();
    let mut s = line_scenario(16, 0.5);
    s["sources"] = json!([{ "node": 99, "signal": { "type": "ricker", "center": 0.1, "frequency": 5.0 }, "t_start": 0.0, "t_end": 0.2 }]);
    let path = write_scenario(tmp.path(), "bad.json", &s);
    let out_dir = tmp.path().join("out");
    let out = simulate(&path, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sources[0].node"));
    assert!(!out_dir.exists());

    let mut s = line_scenario(16, 0.5);
    s["material"] = json!({ "model": { "type": "tabulated", "file": "missing.csv" } });
    let path = write_scenario(tmp.path(), "missing.json", &s);
    let out = simulate(&path, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let mut s = line_scenario(16, 0.5);
    s["measurements"] = json!([{ "name": "all", "subspace": { "ranges": [[0, 31]] }, "estimator": { "mode": "shots", "shots": 100 } }]);
    let path = write_scenario(tmp.path(), "noseed.json", &s);
    let out = simulate(&path, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!out_dir.exists());

    let out = simulate(&tmp.path().join("nope.json"), &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_suites_report_and_reject_unknown_names() {
    let out = qwave(&["verify", "symmetry"]);
    assert_ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("pass") && !table.contains("FAIL"), "{table}");
    let out = qwave(&["verify", "estimator"]);
    assert_ok(&out);
    let out = qwave(&["verify", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(qwave(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn environment_names_the_default_output_directory() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(tmp.path(), "s.json", &line_scenario(8, 0.1));
    let target = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_qwave"))
        .args(["simulate", "--scenario", path.to_str().unwrap()])
        .env("QWAVE_OUT_DIR", &target)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(target.join("manifest.json").exists());
}

#[test]
fn shot_overrides_reach_the_estimator() {
    let tmp = TempDir::new().unwrap();
    let mut s = line_scenario(32, 0.3);
    s["initial"] = json!({ "type": "gaussian", "center": [0.5], "width": 0.05 });
    s["measurements"] = json!([{ "name": "left", "subspace": { "ranges": [[0, 16]] } }]);
    let path = write_scenario(tmp.path(), "s.json", &s);
    assert_ok(&qwave(&["measure", "--scenario", path.to_str().unwrap(), "--out", tmp.path().join("exact").to_str().unwrap()]));
    assert_ok(&qwave(&[
        "measure", "--scenario", path.to_str().unwrap(), "--out", tmp.path().join("shots").to_str().unwrap(),
        "--shots", "4000", "--seed", "5",
    ]));
    let exact = read_json(&tmp.path().join("exact/measurement_left.json"));
    let shots = read_json(&tmp.path().join("shots/measurement_left.json"));
    assert_eq!(exact["shots"], 0);
    assert_eq!(shots["shots"], 4000);
    let (e, v, se) = (exact["value"].as_f64().unwrap(), shots["value"].as_f64().unwrap(), shots["stderr"].as_f64().unwrap());
    assert!(se > 0.0 && (v - e).abs() < 5.0 * se, "{v} vs {e} +- {se}");
    assert!(!tmp.path().join("shots/snapshots.csv").exists());
}

#[test]
fn initcircuit_writes_a_gate_list() {
    let tmp = TempDir::new().unwrap();
    let s = json!({
        "initcircuit": {
            "radial": 8, "center": [0.0, 0.0], "radial_step": 0.2, "components": 4,
            "field": { "radial": [1.0, -0.5], "tangential": [0.0, 0.3], "scalars": [[0.2, 1.0]] }
        }
    });
    let path = write_scenario(tmp.path(), "c.json", &s);
    let out_dir = tmp.path().join("out");
    assert_ok(&qwave(&["initcircuit", "--scenario", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    let report = read_json(&out_dir.join("initcircuit.json"));
    assert!(1.0 - report["fidelity"].as_f64().unwrap() < 1e-10);
    assert_eq!(report["field_evaluations"], 8);
    let circuit = read_json(&out_dir.join("circuit.json"));
    assert_eq!(circuit["num_qubits"], 2 + 3 + 3);
    let gates = circuit["gates"].as_array().unwrap();
    let rotations: Vec<f64> =
        gates.iter().filter(|g| g["kind"] == "controlled_rotation").map(|g| g["angle"].as_f64().unwrap()).collect();
    assert_eq!(rotations.len(), 3);
    assert!(gates.iter().all(|g| g["qubits"].as_array().is_some()));
    assert!(out_dir.join("circuit_state.csv").exists() && out_dir.join("circuit_state.json").exists());
}

#[test]
fn presim_reports_slices() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    assert_ok(&qwave(&["presim", "--scenario", DEMO, "--out", out_dir.to_str().unwrap()]));
    let report = read_json(&out_dir.join("presim.json"));
    let source = &report["sources"][0];
    assert_eq!(source["slices"].as_array().unwrap().len(), source["windows"]["count"].as_u64().unwrap() as usize);
    let slices = fs::read_to_string(out_dir.join("slices.csv")).unwrap();
    assert!(slices.starts_with("source,slice,t_end,dof,value\n"));
    assert_eq!(report["stacks"], 8);
}

#[test]
fn leapfrog_and_quantum_engines_agree() {
    let tmp = TempDir::new().unwrap();
    let mut s = line_scenario(101, 0.4);
    s["initial"] = json!({ "type": "gaussian", "center": [0.4], "width": 0.06 });
    s["boundaries"] = json!([{ "side": "left", "kind": "dirichlet" }, { "side": "right", "kind": "neumann" }]);
    let path = write_scenario(tmp.path(), "q.json", &s);
    assert_ok(&simulate(&path, &tmp.path().join("q"), &[]));
    s["engine"] = json!("leapfrog");
    s["times"]["dt"] = json!(0.001);
    let path = write_scenario(tmp.path(), "l.json", &s);
    assert_ok(&simulate(&path, &tmp.path().join("l"), &[]));
    let (q, l) = (field_at(&snapshots(&tmp.path().join("q")), 0.4), field_at(&snapshots(&tmp.path().join("l")), 0.4));
    let err: f64 = q.iter().zip(&l).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(err < 1e-3 * norm, "{err} vs {norm}");
    assert_eq!(q[0], 0.0);
}

#[test]
fn dirichlet_values_are_imposed() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("left.csv"), "time,value\n0,0\n0.1,1\n1,1\n").unwrap();
    let mut s = line_scenario(33, 0.5);
    s["engine"] = json!("leapfrog");
    s["boundaries"] = json!([{ "side": "left", "kind": "dirichlet", "values": "left.csv" }]);
    s["times"]["snapshots"] = json!([0.05]);
    let path = write_scenario(tmp.path(), "bc.json", &s);
    let out_dir = tmp.path().join("out");
    assert_ok(&simulate(&path, &out_dir, &[]));
    let rows = snapshots(&out_dir);
    assert_eq!(field_at(&rows, 0.05)[0], 0.5);
    let last = field_at(&rows, 0.5);
    assert_eq!(last[0], 1.0);
    assert!(last[5] > 0.5, "interior pressure {}", last[5]);

    // The quantum engine cannot carry boundary data.
    s["engine"] = json!("quantum");
    let path = write_scenario(tmp.path(), "bcq.json", &s);
    assert_eq!(simulate(&path, &tmp.path().join("q"), &[]).status.code(), Some(1));
}

#[test]
fn exported_state_resumes_the_evolution() {
    let tmp = TempDir::new().unwrap();
    let mut s = line_scenario(41, 0.3);
    s["material"] = json!({ "model": { "type": "piecewise", "background": { "rho": 1.0, "c": 1.0 },
        "regions": [{ "within": { "shape": "ball", "center": [0.7], "radius": 0.1 }, "medium": { "rho": 2.0, "c": 0.5 } }] } });
    s["initial"] = json!({ "type": "gaussian", "center": [0.3], "width": 0.05 });
    let first = write_scenario(tmp.path(), "first.json", &s);
    assert_ok(&simulate(&first, &tmp.path().join("a"), &[]));
    s["times"]["final"] = json!(0.5);
    let whole = write_scenario(tmp.path(), "whole.json", &s);
    assert_ok(&simulate(&whole, &tmp.path().join("whole"), &[]));
    s["times"]["final"] = json!(0.2);
    s["initial"] = json!({ "type": "state", "file": "a/state.csv" });
    let resumed = write_scenario(tmp.path(), "resumed.json", &s);
    assert_ok(&simulate(&resumed, &tmp.path().join("b"), &[]));
    let (a, b) = (field_at(&snapshots(&tmp.path().join("whole")), 0.5), field_at(&snapshots(&tmp.path().join("b")), 0.2));
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn tabulated_inputs_match_their_closed_forms() {
    let tmp = TempDir::new().unwrap();
    let mut table = String::from("x,rho,c\n");
    // Samples on every velocity midpoint, so nearest-sample lookup has no ties.
    for k in 0..=80 {
        let x = k as f64 / 80.0;
        table += &format!("{x},{},{}\n", if x < 0.5 { 1.0 } else { 2.0 }, if x < 0.5 { 1.0 } else { 0.5 });
    }
    fs::write(tmp.path().join("medium.csv"), table).unwrap();
    let mut signal = String::from("time,value\n");
    for k in 0..=100 {
        let t = k as f64 * 0.002;
        signal += &format!("{t},{}\n", (std::f64::consts::PI * t / 0.2).sin().powi(2));
    }
    fs::write(tmp.path().join("signal.csv"), signal).unwrap();

    let mut s = line_scenario(41, 0.3);
    s["engine"] = json!("leapfrog");
    s["material"] = json!({ "model": { "type": "tabulated", "file": "medium.csv" } });
    s["sources"] = json!([{ "position": [0.25], "signal": { "type": "tabulated", "file": "signal.csv" }, "t_start": 0.0, "t_end": 0.2 }]);
    let path = write_scenario(tmp.path(), "tab.json", &s);
    assert_ok(&simulate(&path, &tmp.path().join("tab"), &[]));

    s["material"] = json!({ "model": { "type": "piecewise", "background": { "rho": 1.0, "c": 1.0 },
        "regions": [{ "within": { "shape": "box", "min": [0.5], "max": [1.0] }, "medium": { "rho": 2.0, "c": 0.5 } }] } });
    let path = write_scenario(tmp.path(), "pw.json", &s);
    assert_ok(&simulate(&path, &tmp.path().join("pw"), &[]));
    for file in ["operator_a.csv", "operator_b.csv"] {
        assert_eq!(fs::read(tmp.path().join("tab").join(file)).unwrap(), fs::read(tmp.path().join("pw").join(file)).unwrap());
    }
    let rows = snapshots(&tmp.path().join("tab"));
    assert!(field_at(&rows, 0.3).iter().any(|v| v.abs() > 1e-3));
}

#[test]
fn operator_triplets_are_antisymmetric() {
    let tmp = TempDir::new().unwrap();
    let s = json!({
        "grid": { "dimension": 2, "bounds": [[0.0, 1.0], [0.0, 0.5]], "nodes": [6, 4] },
        "material": { "model": { "type": "constant", "medium": { "rho": 1.3, "c": 0.7 } } },
        "times": { "final": 0.1 }
    });
    let path = write_scenario(tmp.path(), "s.json", &s);
    assert_ok(&simulate(&path, tmp.path(), &[]));
    let mut reader = csv::Reader::from_path(tmp.path().join("operator_a.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["row", "col", "value"]);
    let entries: Vec<(usize, usize, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect();
    assert!(!entries.is_empty());
    for &(r, c, v) in &entries {
        assert!(entries.iter().any(|&(r2, c2, v2)| r2 == c && c2 == r && v2 == -v));
    }
}
