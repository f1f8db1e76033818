//! Versioned CSV and JSON files.
//!
//! CSV files start with a `# format_version: X.Y` line followed by the header row;
//! JSON files carry a top-level `format_version`. Readers reject other major versions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use crate::config::FORMAT_VERSION;
use crate::error::CliError;

const CSV_TAG: &str = "# format_version: ";

fn major(v: &str) -> Option<&str> {
    let m = v.split('.').next()?;
    (!m.is_empty() && m.chars().all(|c| c.is_ascii_digit())).then_some(m)
}

pub fn check_version(found: &str) -> Result<(), CliError> {
    match (major(found), major(FORMAT_VERSION)) {
        (Some(a), Some(b)) if a == b => Ok(()),
        _ => Err(CliError::Validation(format!("format version {found:?} is not compatible with {FORMAT_VERSION}"))),
    }
}

/// Rows of string cells under a fixed header.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{CSV_TAG}{FORMAT_VERSION}")?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let version = first
            .trim_end()
            .strip_prefix(CSV_TAG)
            .ok_or_else(|| CliError::Validation(format!("{}: missing format version line", path.display())))?;
        check_version(version)?;
        let mut r = csv::ReaderBuilder::new().from_reader(reader);
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}

/// Cell formatting: shortest round-trip decimal.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_json(path: &Path, mut value: Value) -> Result<(), CliError> {
    if let Value::Object(map) = &mut value {
        map.insert("format_version".into(), Value::String(FORMAT_VERSION.into()));
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    match value.get("format_version").and_then(Value::as_str) {
        Some(v) => check_version(v)?,
        None => return Err(CliError::Validation(format!("{}: missing format_version", path.display()))),
    }
    Ok(value)
}

/// JSON numbers cannot hold non-finite values; those become strings.
pub fn jnum(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(format!("{v}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.1), num(1e-300)]);
        t.push(vec![num(-2.0), "x,y".into()]);
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# format_version: 1.0\na,b\n0.1,1e-300\n"));
        assert!(!text.contains('\r'));
        let back = Table::read(&path).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.rows[0][1].parse::<f64>().unwrap(), 1e-300);

        std::fs::write(&path, text.replace("1.0", "2.0")).unwrap();
        assert!(matches!(Table::read(&path), Err(CliError::Validation(_))));
    }

    #[test]
    fn json_version_is_stamped_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        write_json(&path, serde_json::json!({"x": jnum(f64::INFINITY)})).unwrap();
        let v = read_json(&path).unwrap();
        assert_eq!(v["x"], "inf");
        std::fs::write(&path, r#"{"format_version": "3.1"}"#).unwrap();
        assert!(read_json(&path).is_err());
        assert!(check_version("1.9").is_ok());
        assert!(check_version("10.0").is_err());
        assert!(check_version("x").is_err());
    }
}
