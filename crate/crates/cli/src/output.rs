//! Output-directory conventions: one manifest per run, an error record on
//! failure, and deterministic JSON/CSV writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_RECORD: &str = "error.json";
pub const TOOL_NAME: &str = "gradmatch";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::input(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::input(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// `status` is `"ok"`, `"running"` or `"error"`; `config` is the
    /// resolved configuration, or `null` if it could not be read.
    pub fn write_manifest(&self, command: &str, config: Value, status: &str) -> Result<(), CliError> {
        self.write_json(
            MANIFEST,
            &json!({
                "tool": TOOL_NAME,
                "version": TOOL_VERSION,
                "command": command,
                "status": status,
                "config": config,
            }),
        )
    }

    pub fn write_error(&self, err: &CliError) -> Result<(), CliError> {
        self.write_json(
            ERROR_RECORD,
            &json!({
                "kind": err.kind(),
                "exit_code": err.exit_code(),
                "message": err.to_string(),
            }),
        )
    }
}

/// Comma-separated rows under `header`. Floats use Rust's shortest
/// round-trip formatting.
pub fn csv_table<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.as_ref().join(","));
    }
    out
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("invalid JSON in {}: {e}", path.display())))
}
