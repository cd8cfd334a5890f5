//! Run manifests: resolved arguments plus size and SHA-256 of every input and
//! output. No timestamps or host details, so reruns write identical bytes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::Cli;
use crate::error::{CliResult, Context};

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    kb_version: &'a str,
    seed: u64,
    args: &'a Cli,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

fn digest(path: &Path) -> CliResult<FileDigest> {
    let data = std::fs::read(path).at(path)?;
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes: data.len() as u64,
        sha256: hex::encode(Sha256::digest(&data)),
    })
}

/// Files read and written by one run.
#[derive(Debug, Default)]
pub struct Run {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub kb_version: Option<String>,
}

impl Run {
    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    /// Write the manifest to `path`.
    pub fn write(&self, cli: &Cli, path: &Path) -> CliResult<()> {
        let m = Manifest {
            tool: "readmit",
            version: env!("CARGO_PKG_VERSION"),
            kb_version: self.kb_version.as_deref().unwrap_or(""),
            seed: cli.seed,
            args: cli,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<CliResult<_>>()?,
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<CliResult<_>>()?,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        std::fs::write(path, text).at(path)
    }
}

/// Manifest path for a single-file output: `<file>.manifest.json`.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
