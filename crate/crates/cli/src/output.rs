//! Atomic file output and the result envelope.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const RESULT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "ddkf";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Write to a temporary file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Schema(format!("JSON encoding: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the compact JSON encoding of `value`.
pub fn json_sha256<T: Serialize + ?Sized>(value: &T) -> CliResult<String> {
    let bytes = serde_json::to_vec(value).map_err(|e| CliError::Schema(format!("JSON encoding: {e}")))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool { name: TOOL_NAME, version: TOOL_VERSION };

/// `result.json`: the deterministic payload plus its hash and a creation time
/// that is not covered by the hash.
#[derive(Debug, Clone, Serialize)]
pub struct ResultEnvelope {
    pub schema_version: u32,
    pub command: String,
    pub created_unix: u64,
    pub payload_sha256: String,
    pub payload: serde_json::Value,
}

impl ResultEnvelope {
    pub fn new<T: Serialize>(command: &str, payload: &T) -> CliResult<Self> {
        let payload = serde_json::to_value(payload).map_err(|e| CliError::Schema(format!("JSON encoding: {e}")))?;
        Ok(Self {
            schema_version: RESULT_SCHEMA_VERSION,
            command: command.to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            payload_sha256: json_sha256(&payload)?,
            payload,
        })
    }
}
