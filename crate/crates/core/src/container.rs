//! Newline-delimited JSON container shared by datasets, histories and results.
//!
//! The first line is a header `{"format":"<kind>","version":N}`; every later
//! non-empty line is one JSON record. Files are UTF-8.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
}

pub fn write_records<W: Write, T: Serialize>(mut out: W, kind: &str, records: &[T]) -> Result<()> {
    let header = Header {
        format: kind.to_string(),
        version: VERSION,
    };
    let write = |out: &mut W, line: String| out.write_all(line.as_bytes()).and_then(|_| out.write_all(b"\n"));
    write(&mut out, serde_json::to_string(&header)?).map_err(|e| Error::io("<stream>", e))?;
    for r in records {
        write(&mut out, serde_json::to_string(r)?).map_err(|e| Error::io("<stream>", e))?;
    }
    out.flush().map_err(|e| Error::io("<stream>", e))
}

pub fn write_file<T: Serialize>(path: &Path, kind: &str, records: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(BufWriter::new(f), kind, records).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Raw record lines with their 1-based line numbers, after header validation.
pub fn read_lines<R: BufRead>(input: R, kind: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = input.lines().enumerate();
    let header_line = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io("<stream>", e))?,
        None => return Err(Error::Contract(format!("empty {kind} file: missing header"))),
    };
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::Contract(format!("bad {kind} header: {e}")))?;
    if header.format != kind {
        return Err(Error::Contract(format!(
            "expected a `{kind}` file, found `{}`",
            header.format
        )));
    }
    if header.version != VERSION {
        return Err(Error::Contract(format!(
            "unsupported {kind} version {} (this build reads {VERSION})",
            header.version
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read_records<R: BufRead, T: DeserializeOwned>(input: R, kind: &str) -> Result<Vec<T>> {
    read_lines(input, kind)?
        .into_iter()
        .map(|(n, l)| {
            serde_json::from_str(&l).map_err(|e| Error::Contract(format!("{kind} line {n}: {e}")))
        })
        .collect()
}

pub fn read_file<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(f), kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: f64,
        b: String,
    }

    #[test]
    fn round_trip_and_kind_check() {
        let rows = vec![Row { a: 0.1, b: "x".into() }, Row { a: -3.0, b: "y".into() }];
        let mut buf = Vec::new();
        write_records(&mut buf, "rows", &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"format\":\"rows\",\"version\":1}\n"));
        let back: Vec<Row> = read_records(buf.as_slice(), "rows").unwrap();
        assert_eq!(back, rows);
        assert!(read_records::<_, Row>(buf.as_slice(), "other").is_err());
        assert!(read_records::<_, Row>(&b""[..], "rows").is_err());
    }
}
