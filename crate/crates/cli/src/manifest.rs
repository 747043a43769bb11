//! Run manifests: one `manifest.txt` per invocation, written before
//! any other artifact so partially completed runs stay attributable.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rhythm_core::signal::write_atomic;

use crate::CliError;

/// What produced the artifacts in an output directory.
pub struct RunManifest {
    pub command: String,
    /// Input files and directories as given on the command line.
    pub config_paths: Vec<PathBuf>,
    /// Always recorded, defaulted or not.
    pub seed: u64,
    pub tool_version: String,
    pub started_unix_s: u64,
}

impl RunManifest {
    pub fn new(command: &str, config_paths: &[&Path], seed: u64) -> Self {
        Self {
            command: command.into(),
            config_paths: config_paths.iter().map(|p| p.to_path_buf()).collect(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_unix_s: unix_now(),
        }
    }

    /// Serialises to `<out_dir>/manifest.txt`, stamping the write time.
    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let mut text = String::new();
        text.push_str(&format!("command={}\n", self.command));
        text.push_str(&format!("seed={}\n", self.seed));
        text.push_str(&format!("tool_version={}\n", self.tool_version));
        text.push_str(&format!("started_unix_s={}\n", self.started_unix_s));
        text.push_str(&format!("written_unix_s={}\n", unix_now()));
        for p in &self.config_paths {
            text.push_str(&format!("config={}\n", p.display()));
        }
        write_atomic(&out_dir.join("manifest.txt"), text.as_bytes())?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
