use std::io::Read;
use std::path::Path;

use super::{IotError, Result};

/// A header row plus string cells. Empty cells are missing values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        Table { headers, rows }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.rows.get(row).and_then(|r| r.get(col)).map(|s| s.trim()).filter(|s| !s.is_empty())
    }

    /// Reads delimiter-separated UTF-8 text with a mandatory header row.
    pub fn read_delimited(reader: impl Read, delimiter: u8) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).flexible(true).has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, rows })
    }

    /// Loads a delimited text file, or a columnar file when the extension
    /// is `.parquet`.
    pub fn from_path(path: impl AsRef<Path>, delimiter: u8) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("parquet")) {
            let table = crate::workspace::read_columnar(path).map_err(|e| IotError::Table(e.to_string()))?;
            return Ok(table.to_text_table());
        }
        Self::read_delimited(std::fs::File::open(path)?, delimiter)
    }

    pub fn write_delimited(&self, writer: impl std::io::Write, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_semicolon_files_with_ragged_rows() {
        let t = Table::read_delimited("a;b;c\n1;2;3\n4;5\n".as_bytes(), b';').unwrap();
        assert_eq!(t.headers, ["a", "b", "c"]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.cell(1, 2), None);
        assert_eq!(t.cell(0, 1), Some("2"));
    }
}
