//! Helpers for the acceptance suite in `tests/acceptance.rs`.

use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_fit(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Workspace root, two levels above this crate.
pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Path to the `breathingbox` binary of the profile the running test was
/// built with, building it through cargo when it is missing.
pub fn cli_binary() -> io::Result<PathBuf> {
    let exe = std::env::current_exe()?;
    // target/<profile>/deps/<test binary>
    let profile_dir = exe
        .parent()
        .and_then(Path::parent)
        .ok_or_else(|| io::Error::other("unexpected test binary location"))?;
    let bin = profile_dir.join(format!("breathingbox{}", std::env::consts::EXE_SUFFIX));
    if !bin.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let mut cmd = Command::new(cargo);
        cmd.args(["build", "-p", "breathingbox", "--bin", "breathingbox"]);
        if profile_dir.file_name().is_some_and(|n| n == "release") {
            cmd.arg("--release");
        }
        let status = cmd.current_dir(workspace_root()).status()?;
        if !status.success() || !bin.exists() {
            return Err(io::Error::other("could not build the breathingbox binary"));
        }
    }
    Ok(bin)
}
