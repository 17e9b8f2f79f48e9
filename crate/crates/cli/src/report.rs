use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("cannot serialize report for {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// Path of the JSON report that accompanies a CSV file.
pub fn json_sibling(out: &Path) -> PathBuf {
    match out.extension() {
        Some(ext) if ext == "csv" => out.with_extension("json"),
        _ => {
            let mut s = out.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        }
    }
}

/// Writes a header and rows; an empty row set yields a header-only file.
pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<(), ReportError> {
    let csv_err = |source| ReportError::Csv { path: path.display().to_string(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| ReportError::Json { path: path.display().to_string(), source })?;
    w.write_all(b"\n").map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row<'a> {
        id: u64,
        label: &'a str,
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(json_sibling(Path::new("a/out.csv")), Path::new("a/out.json"));
        assert_eq!(json_sibling(Path::new("out")), Path::new("out.json"));
    }

    #[test]
    fn empty_and_quoted_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv::<Row>(&path, &["id", "label"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "id,label\n");
        write_csv(&path, &["id", "label"], &[Row { id: 1, label: "a,b" }]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "id,label\n1,\"a,b\"\n");
    }
}
