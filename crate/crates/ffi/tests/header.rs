//! Compiles C code against the generated header and static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

/// Builds the static library in its own target directory; cargo does not
/// produce `staticlib` outputs for test builds, and the outer build
/// directory is locked while tests run.
fn static_library() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let target = exe.ancestors().nth(3).unwrap().join("c-link");
    let status = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "-p", "pbcoreset-ffi", "--lib"])
        .args(["--config", "profile.dev.package.\"*\".opt-level=0", "--config", "profile.dev.debug=0"])
        .arg("--target-dir")
        .arg(&target)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .status()
        .expect("cargo runs");
    assert!(status.success());
    target.join("debug").join("libpbcoreset_ffi.a")
}

#[test]
fn header_is_valid_c() {
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header_dir().join("pbcoreset.h"))
        .output()
        .expect("cc available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include "pbcoreset.h"

int main(void) {
    double z[3] = {1.5, 0.2, -0.3};
    double s[3];
    if (pbc_project(z, 3, 2, s) != PBC_STATUS_OK) return 1;
    if (s[0] != 1.0 || s[2] != 0.0) return 2;

    double x[8] = {-1.0, -1.1, -1.2, -0.9, 1.0, 1.1, 1.2, 0.9};
    uint32_t y[8] = {0, 0, 0, 0, 1, 1, 1, 1};
    PbcDataset *ds = NULL;
    if (pbc_dataset_new(x, y, 8, 1, 2, &ds) != PBC_STATUS_OK) return 3;

    PbcSelectionConfig cfg = pbc_selection_config_default();
    cfg.budget = 2;
    cfg.outer_iters = 20;
    cfg.outer_step = 0.1;
    cfg.learner = PBC_LEARNER_RIDGE;
    cfg.l2 = 0.1;
    PbcSelection *sel = NULL;
    if (pbc_run_selection(ds, NULL, &cfg, &sel) != PBC_STATUS_OK) return 4;
    size_t idx[2];
    if (pbc_selection_coreset(sel, idx, 2) != PBC_STATUS_OK) return 5;

    cfg.budget = 100;
    PbcSelection *bad = NULL;
    if (pbc_run_selection(ds, NULL, &cfg, &bad) != PBC_STATUS_CONFIG) return 6;
    if (pbc_last_error() == NULL) return 7;

    printf("%zu %zu\n", idx[0], idx[1]);
    pbc_selection_free(sel);
    pbc_dataset_free(ds);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    let lib = static_library();
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror"])
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("cc available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let printed = String::from_utf8(run.stdout).unwrap();
    assert_eq!(printed.split_whitespace().count(), 2);
}
