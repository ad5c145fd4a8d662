//! CSV emission with a trailing completeness manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::CliError;

/// Shortest decimal text that parses back to the same `f64`; scientific
/// notation outside `[1e-5, 1e16)`.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Rows of one CSV file, written in insertion order.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    header: Vec<&'static str>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Writes `dir/<name>.csv` ending in
    /// `# complete=<bool> version=<semver> config_hash=<hex>`.
    pub fn write(
        &self,
        dir: &Path,
        complete: bool,
        config_hash: &str,
    ) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(self.file_name());
        let mut text = self.header.join(",");
        text.push('\n');
        for r in &self.rows {
            text.push_str(r);
            text.push('\n');
        }
        text.push_str(&manifest(complete, config_hash));
        text.push('\n');
        let mut f = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn manifest(complete: bool, config_hash: &str) -> String {
    format!(
        "# complete={complete} version={} config_hash={config_hash}",
        env!("CARGO_PKG_VERSION")
    )
}
