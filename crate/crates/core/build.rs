// Links Clarabel's dense LAPACK calls against reference LAPACK/BLAS.
//
// The system OpenBLAS autodetects a kernel whose dpotrf fails on matrices
// larger than 32 on some AVX-512 hosts, so it is not used.

use std::env;
use std::path::{Path, PathBuf};
use std::process::Command;

fn dir_from_env_or(var: &str, default: &str) -> PathBuf {
    println!("cargo:rerun-if-env-changed={var}");
    env::var_os(var).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(default))
}

fn main() {
    let lapack = dir_from_env_or("POLYCERT_LAPACK_DIR", "/usr/lib/x86_64-linux-gnu/lapack");
    let blas = dir_from_env_or("POLYCERT_BLAS_DIR", "/usr/lib/x86_64-linux-gnu/blas");
    for (dir, lib) in [(&lapack, "liblapack.a"), (&blas, "libblas.a")] {
        if !dir.join(lib).exists() {
            panic!("{lib} not found in {}; set POLYCERT_LAPACK_DIR / POLYCERT_BLAS_DIR", dir.display());
        }
    }
    println!("cargo:rustc-link-search=native={}", lapack.display());
    println!("cargo:rustc-link-search=native={}", blas.display());
    println!("cargo:rustc-link-lib=static=lapack");
    println!("cargo:rustc-link-lib=static=blas");

    let cc = env::var("CC").unwrap_or_else(|_| "cc".into());
    if let Ok(out) = Command::new(cc).arg("-print-file-name=libgfortran.so").output() {
        let p = String::from_utf8_lossy(&out.stdout).trim().to_string();
        if let Some(parent) = Path::new(&p).parent().filter(|d| d.is_absolute()) {
            println!("cargo:rustc-link-search=native={}", parent.display());
        }
    }
    println!("cargo:rustc-link-lib=dylib=gfortran");
    println!("cargo:rustc-link-lib=dylib=m");
}
