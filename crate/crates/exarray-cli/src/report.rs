//! Run reporting: pass/fail check lines with CSV row provenance, and the
//! reproducibility manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use crate::config::{fnv64, ExperimentConfig};

/// Collects check outcomes and manifest lines over one run, then writes
/// `manifest.txt` into the output directory.
pub struct RunReport {
    started: Instant,
    config_lines: Vec<(String, String)>,
    extra: Vec<(String, String)>,
    checks: Vec<CheckLine>,
    files: Vec<(PathBuf, u64)>,
    check_enabled: bool,
}

struct CheckLine {
    name: String,
    passed: bool,
    detail: String,
    rows: String,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunReport {
            started: Instant::now(),
            config_lines: config.manifest_lines(),
            extra: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
            check_enabled: config.check,
        }
    }

    /// Records a derived quantity worth echoing (seeds, estimates, paths).
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    /// Records a check outcome; `rows` names the CSV rows backing the claim.
    pub fn check(&mut self, name: &str, passed: bool, detail: String, rows: String) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!("[{verdict}] {name} — {detail} ({rows})");
        self.checks.push(CheckLine { name: name.to_string(), passed, detail, rows });
    }

    /// Registers an emitted file and fingerprints its bytes.
    pub fn attach(&mut self, path: &Path) -> Result<()> {
        let bytes =
            std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        self.files.push((path.to_path_buf(), fnv64(&bytes)));
        Ok(())
    }

    /// True when all checks pass or checking is disabled.
    pub fn passed(&self) -> bool {
        !self.check_enabled || self.checks.iter().all(|c| c.passed)
    }

    pub fn write_manifest(&self, out_dir: &Path) -> Result<PathBuf> {
        let mut text = String::new();
        for (key, value) in &self.config_lines {
            text.push_str(&format!("{key}={value}\n"));
        }
        text.push_str(&format!("artifact_version={}\n", env!("CARGO_PKG_VERSION")));
        for (key, value) in &self.extra {
            text.push_str(&format!("{key}={value}\n"));
        }
        for (path, hash) in &self.files {
            let name = path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default();
            text.push_str(&format!("file={name}\n"));
            text.push_str(&format!("file_hash.{name}={hash:016x}\n"));
        }
        for check in &self.checks {
            text.push_str(&format!(
                "check.{}={} detail=({}) rows=({})\n",
                check.name,
                if check.passed { "pass" } else { "fail" },
                check.detail,
                check.rows
            ));
        }
        text.push_str(&format!("checks_enabled={}\n", self.check_enabled));
        text.push_str(&format!("overall={}\n", if self.passed() { "pass" } else { "fail" }));
        text.push_str(&format!("wall_clock_ms={}\n", self.started.elapsed().as_millis()));
        let path = out_dir.join("manifest.txt");
        std::fs::write(&path, text)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(path)
    }
}
