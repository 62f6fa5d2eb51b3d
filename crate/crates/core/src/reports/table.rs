use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::util::{fmt_measure, parse_measure};

/// A numeric CSV table. `inf` and empty fields are read back as infinity
/// and NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|&v| fmt_measure(v)).collect();
            writeln!(out, "{}", fields.join(",")).expect("writing to a String");
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: 1,
                message: "missing header".into(),
            })?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Option<Vec<f64>> = line.split(',').map(parse_measure).collect();
            let row = row
                .filter(|r| r.len() == header.len())
                .ok_or_else(|| Error::Parse {
                    path: source.to_string(),
                    line: i + 2,
                    message: format!("expected {} numeric fields", header.len()),
                })?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}
