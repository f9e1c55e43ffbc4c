// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tweezer"));
    c.env_remove("TWEEZER_OUT");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|_| panic!("stdout not JSON: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn sample_configs_validate_cleanly() {
    let mut n = 0;
    for e in std::fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            let o = bin().arg("validate").arg(&p).output().unwrap();
            assert!(o.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
            assert_eq!(json(&o)["diagnostics"].as_array().unwrap().len(), 0, "{}", p.display());
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn empty_and_invalid_configs_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let o = bin().arg("validate").arg(&empty).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["diagnostics"].as_array().unwrap().len(), 2);

    let small = dir.path().join("p2.json");
    std::fs::write(&small, r#"{"schema_version":1,"system":{"kind":"infinite","p":2,"epsilon":0.07,"nu0":0.4}}"#).unwrap();
    let o = bin().args(["design", "-c"]).arg(&small).arg("-o").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn weak_pinning_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("weak.json");
    std::fs::write(&f, r#"{"schema_version":1,"system":{"kind":"infinite","p":6,"epsilon":0.07,"nu0":0.05}}"#).unwrap();
    let o = bin().arg("validate").arg(&f).output().unwrap();
    assert!(o.status.success());
    let d = json(&o)["diagnostics"].as_array().unwrap().clone();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0]["level"], "warning");
}

#[test]
fn design_is_deterministic_and_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("infinite_p6.json");
    let run = |out: &Path, force: bool| {
        let mut c = bin();
        c.args(["design", "-c"]).arg(&cfg).arg("-o").arg(out);
        if force {
            c.arg("--force");
        }
        c.output().unwrap()
    };
    let a = dir.path().join("a");
    let o = run(&a, false);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    let df = r["report"]["delta_f"].as_f64().unwrap();
    assert!((df - 5.7e-4).abs() < 0.2 * 5.7e-4);
    for f in ["manifest.json", "result.json", "chi.csv"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "design");
    assert_eq!(manifest["config"]["system"]["p"], 6);

    assert_eq!(run(&a, false).status.code(), Some(1));
    assert!(run(&a, true).status.success());

    let b = dir.path().join("b");
    assert!(run(&b, false).status.success());
    assert_eq!(std::fs::read(a.join("result.json")).unwrap(), std::fs::read(b.join("result.json")).unwrap());
}

#[test]
fn switch_from_flags_and_output_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["switch", "--p", "4", "--epsilon", "0.07", "--nu0", "0.4", "--tau-s", "1000"])
        .env("TWEEZER_OUT", dir.path().join("sw"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert!((r["sqrt_k"].as_f64().unwrap() - 8.0).abs() < 1.0);
    assert!(dir.path().join("sw/manifest.json").exists());
}

#[test]
fn feasibility_writes_table_and_scans() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["feasibility", "-c"]).arg(configs().join("feasibility.json")).arg("-o").arg(dir.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("feasibility.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(dir.path().join("scan_Ba138.csv").exists());
}

#[test]
fn modes_and_bands_commands() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("small.json");
    std::fs::write(
        &f,
        r#"{"schema_version":1,"system":{"kind":"finite","n_ions":24,"n_buffer":3,"epsilon":0.07,"p":6,
            "pinning":{"kind":"uniform","nu0":0.4}}}"#,
    )
    .unwrap();
    let o = bin().args(["modes", "-c"]).arg(&f).arg("-o").arg(dir.path().join("m")).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["freqs"].as_array().unwrap().len(), 24);

    let o = bin().args(["bands", "-c"]).arg(&f).arg("-o").arg(dir.path().join("b")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = bin().args(["bands", "-c"]).arg(configs().join("infinite_p6.json")).arg("-o").arg(dir.path().join("b2")).output().unwrap();
    assert!(o.status.success());
    assert_eq!(json(&o)["centers"].as_array().unwrap().len(), 6);
}
