//! Newline-delimited JSON files for catalogs and bulk event logs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::StoreError;
use crate::domain::{Catalog, Property};

/// Writes one JSON record per line and returns the record count.
pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<usize, StoreError> {
    let file = File::create(path).map_err(|e| StoreError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| StoreError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| StoreError::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| StoreError::io(path, e))?;
    Ok(n)
}

/// Reads a JSONL file, skipping blank lines. Parse failures name the line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|err| StoreError::CorruptSegment {
            path: path.display().to_string(),
            line: i + 1,
            message: err.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Loads a catalog written as one property per line.
pub fn load_catalog(path: &Path) -> Result<Catalog, StoreError> {
    let properties: Vec<Property> = read_jsonl(path)?;
    Catalog::new(properties).map_err(|e| StoreError::InvalidCatalog(e.to_string()))
}

pub fn save_catalog(path: &Path, catalog: &Catalog) -> Result<usize, StoreError> {
    write_jsonl(path, catalog.properties())
}
