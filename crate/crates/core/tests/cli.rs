use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str], out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rayleigh-watch"));
    c.args(args);
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn json_error(o: &Output) -> Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
    serde_json::from_str(err.trim()).unwrap()
}

#[test]
fn shear_completes_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--preset", "shear", "--t-end", "1"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["stop_reason"], "reached-t-end");
    assert_eq!(r["certification_passed"], true);
}

#[test]
fn paper_remark_collapses_before_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--preset", "paper-remark", "--t-end", "2"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    let stop = r["stop_reason"].as_str().unwrap();
    assert!(stop == "rayleigh-collapse" || stop == "resolution-loss", "{stop}");
    assert!(r["t_stop"].as_f64().unwrap() < 2.0);
    assert!((r["pole_estimate"].as_f64().unwrap() - 1.0288).abs() < 1e-4);

    // the manifest is complete and the report command agrees
    let manifest: Vec<String> = serde_json::from_value(r["manifest"].clone()).unwrap();
    for f in ["series.csv", "report.json", "snapshots/0000.json", "snapshots/0000.f64"] {
        assert!(manifest.iter().any(|m| m == f), "{f} missing from {manifest:?}");
    }
    for m in &manifest {
        assert!(dir.path().join(m).is_file(), "{m}");
    }
    let snap: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("snapshots/0000.json")).unwrap()).unwrap();
    assert_eq!(snap["fields"][0]["shape"], serde_json::json!([128, 513]));
    assert_eq!(fs::metadata(dir.path().join("snapshots/0000.f64")).unwrap().len(), 8 * 128 * 513);
    let rep = Command::new(env!("CARGO_BIN_EXE_rayleigh-watch"))
        .args(["report", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(rep.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&rep.stdout).contains("pole estimate 1.02879"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = cli(&["run", "--preset", "even-x", "--nx", "32", "--ny", "65", "--t-end", "0.2"], Some(d));
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());
    let r = report(&a);
    assert!(r["initial"]["E1"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn malformed_config_exits_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("truncated.json", r#"{"schema_version": 1, "preset": "shear""#),
        ("unknown-key.json", r#"{"schema_version": 1, "preset": "shear", "nxx": 3}"#),
        ("bad-expr.json", r#"{"schema_version": 1, "system": "hydrostatic", "initial": {"omega": "2*y +"}}"#),
        ("negative-dt.json", r#"{"schema_version": 1, "preset": "shear", "dt": -0.1}"#),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        let o = cli(&["run", "--config", path.to_str().unwrap()], Some(&dir.path().join("out")));
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert_eq!(json_error(&o)["error"], "config", "{name}");
    }
    let o = cli(&["run", "--preset", "no-such-preset"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(json_error(&o)["message"].as_str().unwrap().contains("no-such-preset"));
    let o = cli(&["run"], None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_error(&o)["error"], "usage");
}

#[test]
fn inline_semilagrangian_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sl.json");
    fs::write(
        &cfg,
        r#"{
  "schema_version": 1,
  "name": "inline-sl",
  "system": "semilagrangian-1d",
  "initial": {"v": ["0.2*sin(2*pi*x)*(2*a - 1)"], "ha": "1 - 0.3*cos(2*pi*x)*(2*a - 1)", "project_flux": true},
  "grid": {"nx": 32, "na": 33},
  "dt": 0.002,
  "t_end": 0.1,
  "snapshot_every": 10
}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = cli(&["run", "--config", cfg.to_str().unwrap()], Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["system"], "semilagrangian-1d");
    assert_eq!(r["samples"], 51);
    let e1 = r["initial"]["E1"].as_f64().unwrap();
    assert!((r["pole_estimate"].as_f64().unwrap() - 1.0 / e1).abs() < 1e-12);
    assert!(out.join("snapshots/0050.f64").is_file());
    let header = fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(header.starts_with("t,E1,E2,entropy,kinetic,bccLHS"));
}

#[test]
fn log_mean_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("values.csv");
    fs::write(&path, "value,weight\n1,0.5\n4,0.5\n").unwrap();
    let o = cli(&["log-mean", "--values", path.to_str().unwrap(), "--p-list", "1,0.1,0.001"], None);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["geometric_mean"].as_f64().unwrap() - 2.0).abs() < 1e-14);
    assert!((v["norms"][0].as_f64().unwrap() - 2.5).abs() < 1e-14);
    assert_eq!(v["monotone"], true);

    fs::write(&path, "1\n-2\n").unwrap();
    let o = cli(&["log-mean", "--values", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_error(&o)["error"], "runtime");
}

#[test]
fn verify_dictionary_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dict.json");
    let out = dir.path().join("dict");
    fs::write(
        &cfg,
        format!(
            r#"{{"schema_version": 1, "preset": "sl-pinned", "dictionary": {{"levels": [[8, 17, 17], [16, 33, 33]], "t_eval": 0.05}}, "out": {}}}"#,
            serde_json::to_string(out.to_str().unwrap()).unwrap()
        ),
    )
    .unwrap();
    let o = cli(&["verify-dictionary", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d: Value = serde_json::from_str(&fs::read_to_string(out.join("dictionary.json")).unwrap()).unwrap();
    assert_eq!(d["study"]["levels"].as_array().unwrap().len(), 2);
    assert_eq!(d["study"]["orders"].as_object().unwrap().len(), 9);
}
