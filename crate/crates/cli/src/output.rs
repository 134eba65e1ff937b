//! Output files: every file opens with a comment naming the tool version,
//! the seed and the manifest hash.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub seed: u64,
    pub hash: String,
}

impl Header {
    pub fn new(seed: u64, hash: impl Into<String>) -> Self {
        Self { seed, hash: hash.into() }
    }

    pub fn text(&self) -> String {
        format!("lipflow {TOOL_VERSION} seed={} manifest={}", self.seed, self.hash)
    }

    pub fn csv_comment(&self) -> String {
        format!("# {}\n", self.text())
    }

    pub fn xml_comment(&self) -> String {
        format!("<!-- {} -->\n", self.text())
    }
}

/// Header line, column names, then rows. Floats use the shortest
/// representation that reads back exactly.
pub fn render_csv(header: &Header, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!("{}{body}", header.csv_comment())
}

/// Collects rendered files and writes them in one go, so that nothing is
/// created when an earlier step fails.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, String)>,
}

impl OutputSet {
    pub fn add(&mut self, rel: impl Into<PathBuf>, contents: String) {
        self.files.push((rel.into(), contents));
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, rel: &str) -> Option<&str> {
        self.files.iter().find(|(p, _)| p == Path::new(rel)).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, contents) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}
