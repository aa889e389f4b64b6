use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{BsflError, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| BsflError::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV with a header row taken from `header` (used even when `rows` is
/// empty).
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| BsflError::InvalidInput(format!("csv flush: {e}")))
}

pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

fn csv_err(e: csv::Error) -> BsflError {
    BsflError::InvalidInput(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u64,
        b: Option<f64>,
        c: String,
    }

    #[test]
    fn header_only_when_empty() {
        let bytes = csv_bytes::<Row>(&["a", "b", "c"], &[]).unwrap();
        assert_eq!(bytes, b"a,b,c\n");
    }

    #[test]
    fn none_is_empty_cell() {
        let rows = [Row { a: 1, b: None, c: "0;2".into() }, Row { a: 2, b: Some(0.5), c: "x".into() }];
        let text = String::from_utf8(csv_bytes(&["a", "b", "c"], &rows).unwrap()).unwrap();
        assert_eq!(text, "a,b,c\n1,,0;2\n2,0.5,x\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
