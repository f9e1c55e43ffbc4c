// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

use std::process::Command;

fn compile(lang: &str) {
    let dir = env!("CARGO_MANIFEST_DIR");
    let out = std::env::temp_dir().join(format!("tg_client_{lang}_{}.o", std::process::id()));
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-c", "-x", lang])
        .arg(format!("{dir}/tests/c/client.c"))
        .arg(format!("-I{dir}/include"))
        .arg("-o")
        .arg(&out)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "client failed to compile as {lang}"),
        Err(e) => panic!("cannot run cc: {e}"),
    }
    let _ = std::fs::remove_file(out);
}

#[test]
fn header_compiles_as_c() {
    compile("c");
}
