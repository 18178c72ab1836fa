use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;

use super::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub documents: Vec<Document>,
    /// Non-blank lines that failed to parse.
    pub malformed: usize,
    /// 1-based line numbers of the malformed lines.
    pub malformed_lines: Vec<usize>,
}

/// Reads every parseable record of a line-delimited document file, in file order.
///
/// Malformed lines are counted, not fatal. A file without a single valid record is
/// an [`Error::EmptyCorpus`].
pub fn load_documents(path: impl AsRef<Path>) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut report = LoadReport::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match Document::from_json_line(&line) {
            Ok(doc) => report.documents.push(doc),
            Err(e) => {
                warn!("{}:{}: skipping malformed record: {e}", path.display(), idx + 1);
                report.malformed += 1;
                report.malformed_lines.push(idx + 1);
            }
        }
    }
    if report.documents.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf(), report.malformed));
    }
    Ok(report)
}

/// Appends documents to `path`, creating it if needed. Existing records are never
/// rewritten. An empty slice leaves the file untouched.
pub fn store_documents(docs: &[Document], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    if docs.is_empty() {
        return Ok(0);
    }
    let mut buf = String::new();
    for d in docs {
        buf.push_str(&d.to_json_line());
        buf.push('\n');
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    // One write per batch so concurrent readers only ever see whole batches or a
    // torn final line, which the loader counts as malformed.
    file.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))?;
    Ok(docs.len())
}

/// Single-writer append-only store that keeps document ids unique.
#[derive(Debug)]
pub struct DocumentStore {
    path: PathBuf,
    ids: HashSet<String>,
}

impl DocumentStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut ids = HashSet::new();
        if path.exists() {
            match load_documents(&path) {
                Ok(report) => ids.extend(report.documents.into_iter().map(|d| d.id)),
                Err(Error::EmptyCorpus(..)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(DocumentStore { path, ids })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    /// Appends a batch. The whole batch is refused if any id is already stored or
    /// repeated inside the batch.
    pub fn append(&mut self, docs: &[Document]) -> Result<usize> {
        let mut fresh = HashSet::with_capacity(docs.len());
        for d in docs {
            if self.ids.contains(&d.id) || !fresh.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        let n = store_documents(docs, &self.path)?;
        self.ids.extend(docs.iter().map(|d| d.id.clone()));
        Ok(n)
    }
}
