use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::ReportError;

/// A line that failed to parse; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parsed records plus the lines that could not be read.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonlRead<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

impl<T> JsonlRead<T> {
    /// Records, or the first bad line as an error.
    pub fn into_strict(self, path: &Path) -> Result<Vec<T>, ReportError> {
        match self.errors.into_iter().next() {
            None => Ok(self.records),
            Some(e) => Err(ReportError::Parse { path: path.to_path_buf(), line: e.line, message: e.message }),
        }
    }
}

pub fn to_jsonl_line<T: Serialize>(record: &T) -> Result<String, serde_json::Error> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    Ok(line)
}

/// Writes one JSON object per line, replacing the file.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ReportError> {
    let mut w = JsonlWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlRead<T>, ReportError> {
    let file = File::open(path).map_err(|e| ReportError::io(path, e))?;
    let mut out = JsonlRead { records: Vec::new(), errors: Vec::new() };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ReportError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.records.push(r),
            Err(e) => out.errors.push(LineError { line: n + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

/// Streaming writer; each record is flushed so partial output survives a
/// crash.
pub struct JsonlWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<JsonlWriter, ReportError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| ReportError::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| ReportError::io(path, e))?;
        Ok(JsonlWriter { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), ReportError> {
        let line = to_jsonl_line(record).map_err(|e| ReportError::Json(e.to_string()))?;
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| ReportError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), ReportError> {
        self.out.flush().map_err(|e| ReportError::io(&self.path, e))
    }
}
