//! End-to-end runs of the `wdsflow` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wdsflow_cli::format::NativeFile;

const INP: &str = "\
[JUNCTIONS]
 J1  10  20
 J2  12  15
 J3  11  10
[RESERVOIRS]
 R1  80
[PIPES]
 P1  R1  J1  800  300  110
 P2  J1  J2  500  200  100
 P3  J2  J3  400  150  100
 P4  J1  J3  600  200  100
[OPTIONS]
 Units CMH
[END]
";

fn wdsflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdsflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn catalog_instance_solves_verified() {
    let o = wdsflow(&["solve", "pump-rings", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verified"], true);
    assert!(v["max_edge_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn classify_reports_class() {
    let o = wdsflow(&["classify", "pump-cycles23"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("cycles       6"), "{s}");
    assert!(s.contains("solver       hybrid"), "{s}");
}

#[test]
fn input_errors_exit_5() {
    assert_eq!(code(&wdsflow(&["solve", "no-such-network"])), 5);
    assert_eq!(code(&wdsflow(&["solve", "pump-rings", "--big-m=-3"])), 5);
    assert_eq!(
        code(&wdsflow(&["solve", "pump-rings", "--solver", "nope"])),
        5
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.inp",
        &INP.replace(" P4  J1  J3", " P4  J1  J9"),
    );
    let o = wdsflow(&["convert", &bad, dir.path().join("x.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("J9"));
}

#[test]
fn tiny_budget_exits_4() {
    let o = wdsflow(&[
        "solve", "grid3x3", "--solver", "miqcqp", "--budget", "0.0001", "--seed", "2",
    ]);
    assert_eq!(
        code(&o),
        4,
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn pump_outside_its_range_exits_3() {
    // Every unit of demand passes the bridge pump, far above its 1500 m3/h limit.
    let dir = tempfile::tempdir().unwrap();
    let gen = wdsflow(&[
        "gen",
        "pump-mesh",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&gen), 0);
    let path = stdout(&gen).trim().to_string();
    let mut file = NativeFile::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for (id, v) in file.injections.iter_mut() {
        *v = if id == "1" { 8000.0 } else { -1000.0 };
    }
    std::fs::write(&path, file.to_text()).unwrap();
    let o = wdsflow(&["solve", &path, "--solver", "miqcqp"]);
    assert_eq!(
        code(&o),
        3,
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn convert_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "net.inp", INP);
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    assert_eq!(code(&wdsflow(&["convert", &src, a.to_str().unwrap()])), 0);
    assert_eq!(code(&wdsflow(&["convert", &src, b.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = wdsflow(&["solve", a.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // Mass balance at J1: inflow from P1 feeds the 20 m3/h demand and P2, P4.
    let f = |id: &str| v["flows"][id].as_f64().unwrap();
    assert!((f("P1") - 45.0).abs() < 1e-6);
    assert!((f("P1") - f("P2") - f("P4") - 20.0).abs() < 1e-6);
    assert!((v["pressures"]["R1"].as_f64().unwrap() - 80.0).abs() < 1e-12);
}

#[test]
fn generated_instances_recover_truth() {
    let dir = tempfile::tempdir().unwrap();
    for net in ["pump-rings", "pump-cycles23"] {
        let o = wdsflow(&[
            "gen",
            net,
            "-n",
            "3",
            "--seed",
            "5",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        for path in stdout(&o).lines() {
            let truth: Value = serde_json::from_str(
                &std::fs::read_to_string(Path::new(path).with_extension("truth.json")).unwrap(),
            )
            .unwrap();
            let (network, _) = NativeFile::parse(&std::fs::read_to_string(path).unwrap())
                .unwrap()
                .load()
                .unwrap();
            let s = wdsflow(&["solve", path, "--json"]);
            assert_eq!(code(&s), 0, "{path}");
            let v: Value = serde_json::from_str(&stdout(&s)).unwrap();
            let tf: Vec<f64> = truth["flows"]
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect();
            let th: Vec<f64> = truth["pressures"]
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect();
            let fs = tf.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            let hs = th.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            for (e, t) in network.edges().iter().zip(&tf) {
                let got = v["flows"][&e.id].as_f64().unwrap();
                assert!(
                    (got - t).abs() <= 1e-4 * fs,
                    "{path} {}: {got} vs {t}",
                    e.id
                );
            }
            for (n, t) in network.nodes().iter().zip(&th) {
                let got = v["pressures"][&n.id].as_f64().unwrap();
                assert!(
                    (got - t).abs() <= 1e-4 * hs,
                    "{path} {}: {got} vs {t}",
                    n.id
                );
            }
        }
    }
}

fn bench_json(dir: &Path, tag: &str) -> Value {
    let out = dir.join(format!("{tag}.json"));
    let o = wdsflow(&[
        "bench",
        "pump-rings",
        "-n",
        "6",
        "--threads",
        "1",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(out.with_extension("gaps.csv").exists());
    assert!(out.with_extension("records.csv").exists());
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

fn strip_seconds(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("seconds");
            m.remove("median_seconds");
            m.values_mut().for_each(strip_seconds);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_seconds),
        _ => {}
    }
}

#[test]
fn bench_report_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = bench_json(dir.path(), "a");
    let mut b = bench_json(dir.path(), "b");
    assert_eq!(a["schema"], 1);
    assert_eq!(a["network"], "pump-rings");
    assert_eq!(a["solver"], "miqcqp");
    assert_eq!(a["summary"]["instances"], 6);
    assert_eq!(a["records"].as_array().unwrap().len(), 6);
    for r in a["records"].as_array().unwrap() {
        for key in [
            "index",
            "outcome",
            "seconds",
            "max_gap",
            "flow_error",
            "pressure_error",
            "solver",
        ] {
            assert!(r.get(key).is_some(), "record lacks {key}");
        }
    }
    strip_seconds(&mut a);
    strip_seconds(&mut b);
    assert_eq!(a, b);
}

#[test]
fn export_conic_prints_model() {
    let o = wdsflow(&["export-conic", "mesh40"]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).is_empty());
    let o = wdsflow(&["export-conic", "pump-rings", "--big-m", "80"]);
    assert_eq!(code(&o), 0);
}
