//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "wavecnet.h"

int main(void) {
    WcWavelet *w = NULL;
    if (wc_wavelet_new("db2", &w) != WcStatus_Ok) return 10;
    double x[16], ll[16], lh[16], hl[16], hh[16], back[64], img[64];
    for (int i = 0; i < 64; i++) img[i] = sin(0.3 * i);
    if (wc_dwt2d(w, img, 8, 8, WcBoundary_Periodic, ll, lh, hl, hh) != WcStatus_Ok) return 11;
    if (wc_idwt2d(w, ll, lh, hl, hh, 8, 8, WcBoundary_Periodic, back) != WcStatus_Ok) return 12;
    for (int i = 0; i < 64; i++) if (fabs(back[i] - img[i]) > 1e-10) return 13;
    (void)x;
    uint64_t d = 0, r = 0;
    if (wc_madd(4, 4, 1, &d, &r) != WcStatus_Ok || d != 336 || r != 339) return 14;
    WcWavelet *bad = NULL;
    if (wc_wavelet_new("nope", &bad) != WcStatus_UnknownWavelet || wc_last_error() == NULL) return 15;
    wc_wavelet_free(w);
    printf("ok %s\n", wc_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler on PATH");
        return;
    }
    // `cargo test` only builds the rlib; produce the static library too
    let status =
        Command::new(env!("CARGO")).args(["build", "--quiet", "-p", "wavecnet-ffi", "--lib"]).status().unwrap();
    assert!(status.success(), "building the static library failed");
    let lib = target_dir().join("libwavecnet_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
