use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::fail::{CliResult, Failure};

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub flag: String,
    pub path: PathBuf,
    /// First 64 bits of the SHA-256 of the file contents, hex encoded.
    pub digest: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub timings: serde_json::Value,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            argv: std::env::args().collect(),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: serde_json::Value::Null,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn add_input(&mut self, flag: &str, path: &Path) -> CliResult<()> {
        self.inputs.push(InputFile {
            flag: flag.into(),
            path: path.to_path_buf(),
            digest: digest64(path).map_err(|e| Failure::arg(format!("{flag}: {}: {e}", path.display())))?,
        });
        Ok(())
    }
}

pub fn digest64(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    Ok(hash[..8].iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::arg(format!("--out: {}: {e}", path.display())))
}
