use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of the resolved config; keys are sorted by serde_json's
/// default map, so the text is canonical.
pub fn run_id(command: &str, config: &serde_json::Value) -> String {
    sha256_hex(format!("{command}\n{config}").as_bytes())
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Check { name: name.into(), value, limit: format!("<= {max:e}"), pass: value <= max }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check { name: name.into(), value, limit: format!("{target} +/- {tol}"), pass: (value - target).abs() <= tol }
    }

    pub fn holds(name: &str, value: f64, ok: bool, what: &str) -> Self {
        Check { name: name.into(), value, limit: what.into(), pass: ok }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub run_id: String,
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<Check>,
    pub timings: Vec<(String, f64)>,
}

/// A run directory that records every file written into it.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<OutputFile>,
    timings: Vec<(String, f64)>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(RunDir { root, outputs: Vec::new(), timings: Vec::new(), started: Instant::now() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.retain(|o| o.file != name);
        self.outputs.push(OutputFile { file: name.into(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    pub fn mark(&mut self, stage: &str) {
        self.timings.push((stage.into(), self.started.elapsed().as_secs_f64()));
    }

    pub fn outputs(&self) -> &[OutputFile] {
        &self.outputs
    }

    pub fn finish(mut self, command: &str, config: serde_json::Value, checks: Vec<Check>) -> Result<Manifest, CliError> {
        self.mark("total");
        let mut outputs = self.outputs.clone();
        outputs.sort_by(|a, b| a.file.cmp(&b.file));
        let m = Manifest {
            run_id: run_id(command, &config),
            command: command.into(),
            version: format!("qfluct {}", env!("CARGO_PKG_VERSION")),
            config,
            outputs,
            checks,
            timings: self.timings.clone(),
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(m)
    }
}
