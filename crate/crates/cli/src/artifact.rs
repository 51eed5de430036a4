//! JSON artifacts: every file carries the schema version, the command, the full
//! run configuration and a hash of its inputs.

use std::fs;
use std::path::{Path, PathBuf};

use reifen::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const SCHEMA_VERSION: &str = "reifen.artifact/1";

#[derive(Debug, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub schema_version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    /// SHA-256 of the input file, or of the generator parameters for `gen`.
    pub input_sha256: &'a str,
    pub result: T,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_json<T: Serialize>(path: &Path, artifact: &Artifact<'_, T>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(artifact).map_err(|e| Failure::output(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::output(path, e))
}

/// `dir/stem.ext` for `path = dir/stem.*`.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}
