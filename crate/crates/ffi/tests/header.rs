use std::path::PathBuf;
use std::process::Command;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(manifest().join("include/dioph_lab.h")).unwrap();
    let src = std::fs::read_to_string(manifest().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 10);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("DIOPH_STATUS_OK = 0"));
}

// Compiles a small C program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap().to_path_buf();
    if !lib_dir.join("libdioph_lab_ffi.so").exists() {
        eprintln!("shared library not built; skipping");
        return;
    }
    let exe = std::env::temp_dir().join(format!("dioph-smoke-{}", std::process::id()));
    let status = Command::new(cc)
        .arg(manifest().join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest().join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .args(["-ldioph_lab_ffi", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    std::fs::remove_file(&exe).ok();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
