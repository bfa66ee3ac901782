//! Dataset manifests: UTF-8 TSV, one `line_id<TAB>image_path<TAB>transcript`
//! record per line, with an optional fourth `split` column.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetEntry {
    pub line_id: String,
    pub image_path: PathBuf,
    pub transcript: String,
    pub split: Option<String>,
}

impl DatasetEntry {
    pub fn new(line_id: impl Into<String>, image_path: impl Into<PathBuf>, transcript: impl Into<String>) -> Self {
        Self {
            line_id: line_id.into(),
            image_path: image_path.into(),
            transcript: transcript.into(),
            split: None,
        }
    }

    /// Lines without a split column count as training lines.
    pub fn is_train(&self) -> bool {
        self.split.as_deref().is_none_or(|s| s == "train")
    }
}

/// Read a manifest. Relative image paths are resolved against the
/// manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base).map_err(|reason| Error::Format { path: path.to_path_buf(), reason })
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<DatasetEntry>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(format!("line {}: expected 3 or 4 tab-separated fields, got {}", no + 1, fields.len()));
        }
        if fields[0].is_empty() {
            return Err(format!("line {}: empty line_id", no + 1));
        }
        let image = Path::new(fields[1]);
        out.push(DatasetEntry {
            line_id: fields[0].to_string(),
            image_path: if image.is_absolute() { image.to_path_buf() } else { base.join(image) },
            transcript: fields[2].to_string(),
            split: fields.get(3).map(|s| s.to_string()),
        });
    }
    Ok(out)
}

/// Write entries in the three- or four-column form. Image paths are written
/// as given.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[DatasetEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for e in entries {
        for (name, field) in [("line_id", e.line_id.as_str()), ("transcript", e.transcript.as_str())] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("{name} of {:?} contains a tab or line break", e.line_id),
                });
            }
        }
        write!(buf, "{}\t{}\t{}", e.line_id, e.image_path.display(), e.transcript)?;
        if let Some(split) = &e.split {
            write!(buf, "\t{split}")?;
        }
        buf.push(b'\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let text = "a\timg/a.png\thello world\nb\t/abs/b.png\tx\tvalid\n\n";
        let entries = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].image_path, PathBuf::from("/data/img/a.png"));
        assert_eq!(entries[0].transcript, "hello world");
        assert!(entries[0].is_train());
        assert_eq!(entries[1].image_path, PathBuf::from("/abs/b.png"));
        assert!(!entries[1].is_train());
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_manifest("only\ttwo\n", Path::new("")).is_err());
        assert!(parse_manifest("\tx.png\tt\n", Path::new("")).is_err());
    }

    #[test]
    fn writer_refuses_tabs() {
        let dir = tempfile::tempdir().unwrap();
        let bad = DatasetEntry::new("a", "a.png", "x\ty");
        assert!(write_manifest(dir.path().join("m.tsv"), &[bad]).is_err());
        let good = DatasetEntry::new("a", "a.png", "x y");
        write_manifest(dir.path().join("m.tsv"), &[good]).unwrap();
        let back = read_manifest(dir.path().join("m.tsv")).unwrap();
        assert_eq!(back[0].image_path, dir.path().join("a.png"));
    }
}
