//! CSV tables, the run manifest and the output directory.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const CSV_SCHEMA: &str = "anderson-csv/v1";
pub const MANIFEST_SCHEMA: &str = "anderson-manifest/v1";

/// A table with a fixed header. The first line written is always the
/// schema comment.
pub struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(cells.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = format!("# schema: {CSV_SCHEMA}/{}\n{}\n", self.name, self.header.join(","));
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip representation, so reruns are byte-identical.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedEntry {
    pub replica: usize,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: &'static str,
    pub subcommand: String,
    pub config: Value,
    pub config_hash: String,
    pub version: String,
    pub timestamp: u64,
    pub seeds: Vec<SeedEntry>,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

pub fn config_hash(subcommand: &str, canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(subcommand.as_bytes());
    h.update([0u8]);
    h.update(canonical.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Output directory that remembers every file written to it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.root.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(bytes)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_table(&mut self, table: &Table) -> io::Result<PathBuf> {
        let name = format!("{}.csv", table.name);
        self.write_bytes(&name, table.render().as_bytes())
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn write_manifest(&mut self, manifest: &RunManifest) -> io::Result<PathBuf> {
        let text = serde_json::to_string_pretty(manifest).expect("manifest serialises");
        let path = self.root.join("manifest.json");
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Little-endian dump: `u64 rows, u64 cols`, then `f64` values row-major.
pub fn f64_matrix_le(rows: &[Vec<f64>]) -> Vec<u8> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(16 + 8 * rows.len() * cols);
    out.extend((rows.len() as u64).to_le_bytes());
    out.extend((cols as u64).to_le_bytes());
    for r in rows {
        for v in r {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_starts_with_schema_line() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![num(0.1), num(2.0)]);
        let s = t.render();
        assert_eq!(s.lines().next().unwrap(), "# schema: anderson-csv/v1/demo");
        assert_eq!(s.lines().nth(2).unwrap(), "0.1,2.0");
    }

    #[test]
    fn hash_depends_on_subcommand() {
        assert_ne!(config_hash("tail", "{}"), config_hash("bump", "{}"));
        assert_eq!(config_hash("tail", "{}").len(), 64);
    }

    #[test]
    fn binary_dump_layout() {
        let b = f64_matrix_le(&[vec![1.0, 2.0]]);
        assert_eq!(b.len(), 32);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 2.0);
    }
}
