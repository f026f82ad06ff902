//! Shared CSV plumbing for the input schemas.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Deserializes every record, checking the header carries `required` columns.
/// Returned row numbers are 1-based file lines (the header is line 1).
pub(crate) fn read_rows<T, R>(reader: R, required: &[&str]) -> Result<Vec<(usize, T)>>
where
    T: DeserializeOwned,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|col| !headers.iter().any(|h| h == *col))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "missing column(s) {}",
            missing.join(", ")
        )));
    }
    let mut out = Vec::new();
    for record in rdr.deserialize::<T>() {
        match record {
            Ok(row) => out.push((out.len() + 2, row)),
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(out.len() + 2);
                return Err(Error::parse(line, e.to_string()));
            }
        }
    }
    Ok(out)
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn writer_to_string<F>(headers: &[&str], fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(headers)?;
    fill(&mut wtr)?;
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Schema(format!("csv flush: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
