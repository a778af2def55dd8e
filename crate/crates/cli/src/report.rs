use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::RunError;

/// Bumped whenever a scenario gains, loses or renames a check.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_owned(),
            passed: measured <= tolerance,
            measured,
            comparison: Comparison::AtMost,
            tolerance,
            detail: None,
        }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.to_owned(),
            passed: measured >= threshold,
            measured,
            comparison: Comparison::AtLeast,
            tolerance: threshold,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} {}: {:e} {op} {:e}", self.name, self.measured, self.tolerance);
        if let Some(d) = &self.detail {
            s.push_str(&format!(" ({d})"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Owns the output directory of one run and records every file written.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    header: Option<String>,
    files: Vec<String>,
}

impl OutputSink {
    /// `header` is written as a leading `# ...` line of every CSV file.
    pub fn new(dir: &Path, header: Option<String>) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_owned(), header, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_csv<F>(&mut self, name: &str, body: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut Vec<u8>) -> stosszahl_core::Result<()>,
    {
        let mut buf = Vec::new();
        if let Some(h) = &self.header {
            writeln!(buf, "# {h}").expect("write to memory");
        }
        body(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_owned());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
