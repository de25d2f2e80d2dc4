// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// SHA-256 of the effective configuration text.
    config_sha256: String,
    seed: u64,
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// `dir/manifest.json` for directory outputs, `<file>.manifest.json` next to
/// file outputs.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join(MANIFEST_FILE)
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

pub fn write_manifest(out: &Path, command: &str, config_text: &str, seed: u64) -> Result<()> {
    let m = Manifest {
        format_version: acdiff_core::FORMAT_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_sha256: config_hash(config_text),
        seed,
    };
    fs::write(manifest_path(out), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}
