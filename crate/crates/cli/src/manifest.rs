use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::Serialize;
use serde_json::Value;

use turing_crn::Tolerances;

use crate::model::InputFile;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: u32,
    pub command: String,
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub params: Value,
    pub tolerances: Tolerances,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, params: Value, tolerances: Tolerances, inputs: Vec<InputFile>) -> Self {
        RunManifest {
            format: 1,
            command: command.to_string(),
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
            params,
            tolerances,
            inputs,
            outputs: Vec::new(),
        }
    }
}

/// Where command output goes: stdout, or files under `--out`.
pub struct Sink {
    dir: Option<PathBuf>,
    manifest: RunManifest,
}

impl Sink {
    pub fn new(dir: Option<&Path>, manifest: RunManifest) -> Result<Self, CliError> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::Input(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
            manifest,
        })
    }

    pub fn to_dir(&self) -> bool {
        self.dir.is_some()
    }

    /// Writes `contents` to `name` under the output directory, or to stdout
    /// when `echo` is set and there is no directory.
    pub fn emit(&mut self, name: &str, contents: &str, echo: bool) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                self.manifest.outputs.push(name.to_string());
            }
            None if echo => {
                let mut out = std::io::stdout().lock();
                out.write_all(contents.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
            }
            None => {}
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> &mut Value {
        &mut self.manifest.params
    }

    pub fn finish(self) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
            let path = d.join(MANIFEST_FILE);
            std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}
