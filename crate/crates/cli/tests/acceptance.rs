//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1–8 run in-process through the library's reproduction suite;
//! criterion 9 runs the `repro` subcommand twice and compares the output
//! directories byte for byte.

use pdapprox::repro::{run_all, ReproConfig};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("read"))
        })
        .collect()
}

fn determinism() -> (bool, String) {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut status = Vec::new();
    for run in ["first", "second"] {
        let out = tmp.path().join(run);
        let res = Command::new(env!("CARGO_BIN_EXE_pdapprox"))
            .args(["repro", "--no-timestamp", "--out"])
            .arg(&out)
            .output()
            .expect("spawn pdapprox");
        status.push(res.status.code());
    }
    let a = read_dir_bytes(&tmp.path().join("first"));
    let b = read_dir_bytes(&tmp.path().join("second"));
    let files: Vec<&String> = a.keys().collect();
    let identical = !a.is_empty() && a == b;
    let same_status = status[0] == status[1];
    (
        identical && same_status,
        format!("{} files compared {:?}, exit statuses {:?}", files.len(), files, status),
    )
}

fn main() -> ExitCode {
    let outcomes = match run_all(&ReproConfig::default()) {
        Ok(o) => o,
        Err(e) => {
            println!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut all = true;
    for o in &outcomes {
        println!("{}", o.line());
        all &= o.passed;
    }
    let (ok, detail) = determinism();
    println!(
        "criterion 9 {}: repro run twice yields byte-identical outputs ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    all &= ok;
    if all {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
