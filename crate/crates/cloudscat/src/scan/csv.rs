//! Deterministic CSV tables: comma separation, LF line endings, numeric
//! fields rendered with 17 significant digits so that parse -> emit is
//! the identity on both bytes and values.

use crate::error::{Error, Result};

/// One numeric field, 17 significant digits.
pub fn format_field(v: f64) -> String {
    debug_assert!(v.is_finite(), "CSV fields must be finite, got {v}");
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match the header"
        );
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|v| format_field(*v)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("csv: missing header line".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .map(|f| {
                    f.parse::<f64>().map_err(|e| {
                        Error::Config(format!("csv line {}: bad field '{f}': {e}", idx + 2))
                    })
                })
                .collect();
            let row = row?;
            if row.len() != columns.len() {
                return Err(Error::Config(format!(
                    "csv line {}: {} fields, header has {}",
                    idx + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}
