//! CSV and report emission.
//!
//! Numbers are written with 17 significant digits in scientific notation so a
//! value read back is bit-identical. Lines end in `\n` regardless of platform.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRAJECTORY: &[&str] = &["t", "x", "u", "v", "v_x"];
pub const FRONT: &[&str] = &["t", "left_pos", "right_pos", "theta"];
pub const WAVE: &[&str] = &["x", "U", "V", "V_x", "envelope_lo", "envelope_hi"];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// `v` with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// A named table ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file_name: impl Into<String>, columns: &[&str]) -> Self {
        Table { file_name: file_name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{}: row has {} cells, schema has {}",
                self.file_name,
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Write `rows` under `columns` to `path`.
pub fn write_csv(rows: impl IntoIterator<Item = Vec<Cell>>, columns: &[&str], path: &Path) -> Result<()> {
    let mut t = Table::new(path.display().to_string(), columns);
    for r in rows {
        t.push(r)?;
    }
    write_bytes(path, &t.to_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("front.csv", FRONT);
        t.push(vec![0.5.into(), Cell::Empty, 2.0.into(), 0.5.into()]).unwrap();
        assert!(t.push(vec![1.0.into()]).is_err());
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(text, "t,left_pos,right_pos,theta\n5.0000000000000000e-1,,2.0000000000000000e0,5.0000000000000000e-1\n");
    }

    #[test]
    fn text_is_quoted_when_needed() {
        let mut t = Table::new("x.csv", &["name", "value"]);
        t.push(vec!["a,b".into(), 1usize.into()]).unwrap();
        assert!(String::from_utf8(t.to_bytes()).unwrap().ends_with("\"a,b\",1\n"));
    }

    #[test]
    fn write_reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = write_csv(Vec::<Vec<Cell>>::new(), FRONT, &blocker.join("a.csv")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
