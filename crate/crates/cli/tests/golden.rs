//! Byte-for-byte regression of every figure recipe against stored CSVs.
//!
//! Set `WGARRAY_UPDATE_GOLDEN=1` to rewrite the stored files.

use std::path::PathBuf;
use std::process::Command;

const FIGURES: [&str; 16] = [
    "1a", "1b", "1c", "2a", "2b", "2c", "2d", "3", "4a", "4b", "5a", "5b", "6a", "6b", "7a", "7b",
];

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check(id: &str) {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_wgarray"))
        .args(["figure", id, "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let name = format!("figure_{id}.csv");
    let fresh = std::fs::read(dir.path().join(&name)).unwrap();
    let stored = golden_dir().join(&name);
    if std::env::var_os("WGARRAY_UPDATE_GOLDEN").is_some() {
        std::fs::write(&stored, &fresh).unwrap();
        return;
    }
    let expected = std::fs::read(&stored).unwrap_or_else(|e| panic!("{}: {e}", stored.display()));
    assert!(
        fresh == expected,
        "{name} differs from the stored golden file"
    );
}

#[test]
fn every_figure_matches_its_golden_file() {
    for id in FIGURES {
        check(id);
    }
}
