//! Line-delimited JSON snapshots. One record per line, each line tagged with
//! the schema version and a record kind; fields keep declaration order.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: schema version {found}, expected {SCHEMA_VERSION}")]
    Version { line: usize, found: u32 },
    #[error("line {line}: record kind `{found}`, expected `{expected}`")]
    Kind { line: usize, found: String, expected: String },
}

#[derive(Serialize)]
struct OutLine<'a, T> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    record: &'a T,
}

#[derive(Deserialize)]
struct InLine<T> {
    schema_version: u32,
    kind: String,
    #[serde(flatten)]
    record: T,
}

pub fn write_line<W: Write, T: Serialize>(w: &mut W, kind: &str, record: &T) -> std::io::Result<()> {
    let line = OutLine { schema_version: SCHEMA_VERSION, kind, record };
    serde_json::to_writer(&mut *w, &line)?;
    w.write_all(b"\n")
}

pub fn write_records<'a, W, T, I>(w: &mut W, kind: &str, records: I) -> std::io::Result<()>
where
    W: Write,
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    for r in records {
        write_line(w, kind, r)?;
    }
    Ok(())
}

pub fn to_string<'a, T, I>(kind: &str, records: I) -> String
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut buf = Vec::new();
    write_records(&mut buf, kind, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Reads every non-blank line, checking version and kind.
pub fn read_records<R: BufRead, T: DeserializeOwned>(r: R, kind: &str) -> Result<Vec<T>, SnapshotError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: InLine<T> =
            serde_json::from_str(&line).map_err(|source| SnapshotError::Parse { line: i + 1, source })?;
        if parsed.schema_version != SCHEMA_VERSION {
            return Err(SnapshotError::Version { line: i + 1, found: parsed.schema_version });
        }
        if parsed.kind != kind {
            return Err(SnapshotError::Kind { line: i + 1, found: parsed.kind, expected: kind.into() });
        }
        out.push(parsed.record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Rec {
        b: u32,
        a: String,
    }

    #[test]
    fn keeps_field_order_and_tags() {
        let s = to_string("rec", &[Rec { b: 2, a: "x".into() }]);
        assert_eq!(s, "{\"schema_version\":1,\"kind\":\"rec\",\"b\":2,\"a\":\"x\"}\n");
        let back: Vec<Rec> = read_records(s.as_bytes(), "rec").unwrap();
        assert_eq!(back, vec![Rec { b: 2, a: "x".into() }]);
    }

    #[test]
    fn rejects_wrong_version_and_kind() {
        let bad = "{\"schema_version\":9,\"kind\":\"rec\",\"b\":2,\"a\":\"x\"}\n";
        assert!(matches!(read_records::<_, Rec>(bad.as_bytes(), "rec"), Err(SnapshotError::Version { .. })));
        let s = to_string("rec", &[Rec { b: 2, a: "x".into() }]);
        assert!(matches!(read_records::<_, Rec>(s.as_bytes(), "node"), Err(SnapshotError::Kind { .. })));
    }
}
