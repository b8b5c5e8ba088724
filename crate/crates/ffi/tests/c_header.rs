//! Compiles and runs a C program against the generated header and the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "subdiff.h"

int main(void) {
    SubdiffSpace *space = NULL;
    SubdiffIntegrand *f = NULL;
    double w[2] = {1.0, 2.0};
    double x = 0.5, v = 0.0;
    if (subdiff_space_from_weights(w, 2, &space) != SUBDIFF_STATUS_OK) return 1;
    if (subdiff_integrand_new("separable_quadratic", "{\"centers\": {\"t0\": 0, \"t1\": 1}}", &f) != SUBDIFF_STATUS_OK) return 2;
    if (subdiff_integral_value(space, f, &x, 1, &v) != SUBDIFF_STATUS_OK) return 3;
    if (fabs(v - 0.75) > 1e-15) return 4;
    if (subdiff_integrand_new("missing", NULL, &f) != SUBDIFF_STATUS_CONFIG) return 5;
    if (strstr(subdiff_last_error(), "missing") == NULL) return 6;
    subdiff_integrand_free(f);
    subdiff_space_free(space);
    printf("%s %.2f\n", subdiff_version(), v);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/c_header-<hash>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libsubdiff_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "{cc} failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.trim(), format!("{} 0.75", env!("CARGO_PKG_VERSION")));
}
