#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use hdlloop_core::ToolchainConfig;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn on_path(name: &str) -> bool {
    std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).any(|d| d.join(name).is_file()))
        .unwrap_or(false)
}

/// Icarus if installed, else the Verilator shims in `tools/`, else `None`.
pub fn real_toolchain(workdir: &Path) -> Option<ToolchainConfig> {
    let mut cfg = ToolchainConfig::new(workdir);
    cfg.compile_timeout = Duration::from_secs(120);
    cfg.sim_timeout = Duration::from_secs(30);
    if on_path("iverilog") && on_path("vvp") {
        return Some(cfg);
    }
    if ["verilator", "verilator-cli"].iter().any(|v| on_path(v)) {
        let tools = workspace_root().join("tools");
        cfg.compiler_command = tools.join("verilator-iverilog").display().to_string();
        cfg.runtime_command = tools.join("run-artifact").display().to_string();
        return Some(cfg);
    }
    eprintln!("no Verilog simulator found; skipping");
    None
}
