use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn wavemap(args: &[&str], cfg: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wavemap"));
    cmd.arg("--deterministic").args(args);
    if let Some(c) = cfg {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn geodesic(eps: &[f64], out: &str) -> Value {
    json!({
        "target": "sphere", "target_dim": 3, "preset": "geodesic", "k": 1.0, "speed": 0.3,
        "eps": eps, "n": 1, "nx": 16, "nt": 40, "dt": 0.4, "time_scale": "rescaled",
        "output_dir": out,
    })
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn passing_solve_exits_zero_and_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &geodesic(&[0.2], "out"));
    let out = wavemap(&["solve"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let leg = tmp.path().join("out/eps_0.2");
    for f in ["report.json", "trace.csv", "bounds.csv", "residuals.json", "field.json", "field.bin", "cauchy.json"] {
        assert!(leg.join(f).is_file(), "{f}");
    }
    let trace = fs::read_to_string(leg.join("trace.csv")).unwrap();
    assert!(trace.starts_with('#'));
    assert_eq!(trace.lines().nth(1), Some("t,L,H,K,Kprime,D,E,grad,r"));
    assert_eq!(trace.lines().count(), 2 + 41);
    let report: Value = serde_json::from_str(&fs::read_to_string(leg.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["wall_time"], json!(0.0));
}

#[test]
fn failed_bound_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = geodesic(&[0.5, 0.25], "out");
    v["speed"] = json!(1.5);
    v["dt"] = json!(0.5);
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = wavemap(&["sweep"], Some(&cfg));
    assert_eq!(out.status.code(), Some(1));
    assert!(tmp.path().join("out/sweep.csv").is_file());
}

#[test]
fn malformed_configs_exit_two_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad_dt = geodesic(&[0.2], "out");
    bad_dt["dt"] = json!(-0.1);
    let mut bad_eps = geodesic(&[0.2], "out");
    bad_eps["eps"] = json!([0.9]);
    let mut unknown = geodesic(&[0.2], "out");
    unknown["colour"] = json!("red");
    for (i, v) in [bad_dt, bad_eps, unknown].iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), v);
        assert_eq!(wavemap(&["solve"], Some(&cfg)).status.code(), Some(2), "case {i}");
    }
    let garbled = tmp.path().join("g.json");
    fs::write(&garbled, "{ not json").unwrap();
    assert_eq!(wavemap(&["solve"], Some(&garbled)).status.code(), Some(2));
    assert_eq!(wavemap(&["solve"], Some(&tmp.path().join("missing.json"))).status.code(), Some(2));
    let single = write_config(tmp.path(), "s.json", &geodesic(&[0.2], "out"));
    assert_eq!(wavemap(&["sweep"], Some(&single)).status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unconverged_solve_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = geodesic(&[0.2], "out");
    v["max_iter"] = json!(1);
    let cfg = write_config(tmp.path(), "c.json", &v);
    assert_eq!(wavemap(&["solve"], Some(&cfg)).status.code(), Some(3));
}

#[test]
fn constant_data_has_zero_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let v = json!({
        "target": "so", "target_dim": 3, "preset": "constant", "eps": [0.4, 0.2],
        "n": 2, "nx": 8, "nt": 20, "dt": 0.6, "time_scale": "rescaled", "output_dir": "out",
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = wavemap(&["sweep"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(tmp.path().join("out/eps_0.2/trace.csv")).unwrap();
    for line in trace.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(cells[1..8].iter().all(|c| *c == "0"), "{line}");
    }
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let cfg = write_config(tmp.path(), &format!("{run}.json"), &geodesic(&[0.4, 0.2], run));
        assert_eq!(wavemap(&["sweep"], Some(&cfg)).status.code(), Some(0));
        trees.push(tree(&tmp.path().join(run)));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for threads in ["1", "3"] {
        let cfg = write_config(tmp.path(), &format!("t{threads}.json"), &geodesic(&[0.2], threads));
        let out = wavemap(&["--threads", threads, "solve"], Some(&cfg));
        assert_eq!(out.status.code(), Some(0));
        trees.push(tree(&tmp.path().join(threads)));
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn verify_reproduces_the_stored_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = geodesic(&[0.2], "out");
    v["target"] = json!("so");
    let cfg = write_config(tmp.path(), "c.json", &v);
    assert_eq!(wavemap(&["solve"], Some(&cfg)).status.code(), Some(0));
    let leg = tmp.path().join("out/eps_0.2");
    let field = leg.join("field.json");
    let out = wavemap(&["verify", "--field", field.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["residuals.json", "bounds.csv", "trace.csv"] {
        assert_eq!(fs::read(leg.join(f)).unwrap(), fs::read(leg.join("verify").join(f)).unwrap(), "{f}");
    }
    let missing = tmp.path().join("nope.json");
    assert_eq!(wavemap(&["verify", "--field", missing.to_str().unwrap()], None).status.code(), Some(2));
}
