//! CSV input and output.
//!
//! Inputs are read by header name so column order is free; every number is
//! written with `{:.16e}` so repeated runs are byte-identical.

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Numeric columns of a headed CSV file.
pub struct Table {
    origin: String,
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: std::io::Read>(reader: R, origin: &str) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Parse(format!("{origin}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            // Line 1 is the header.
            let line = i + 2;
            let rec = rec.map_err(|e| CliError::Parse(format!("{origin}: line {line}: {e}")))?;
            let mut row = Vec::with_capacity(headers.len());
            for (col, field) in headers.iter().zip(rec.iter()) {
                let v: f64 = field.parse().map_err(|_| {
                    CliError::Parse(format!("{origin}: line {line}: column `{col}`: cannot parse `{field}` as a number"))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        Ok(Self { origin: origin.to_string(), headers, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    pub fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let k = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Parse(format!("{}: missing column `{name}`", self.origin)))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Reject columns that are neither required nor optional.
    pub fn expect(&self, required: &[&str], optional: &[&str]) -> CliResult<()> {
        for name in required {
            self.column(name)?;
        }
        if let Some(extra) = self.headers.iter().find(|h| !required.contains(&h.as_str()) && !optional.contains(&h.as_str())) {
            return Err(CliError::Parse(format!("{}: unexpected column `{extra}`", self.origin)));
        }
        Ok(())
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a header plus numeric rows.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Parse(format!("csv: {e}"));
    out.write_record(header).map_err(io)?;
    for row in rows {
        out.write_record(row.iter().map(|&v| fmt(v))).map_err(io)?;
    }
    let bytes = out.into_inner().map_err(|e| CliError::Parse(format!("csv: {e}")))?;
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_bad_column() {
        let data = "phi_rad,counts,integration_s\n0.0,10,1\n0.1,ten,1\n";
        let err = Table::from_reader(data.as_bytes(), "fringe.csv").err().unwrap().to_string();
        assert!(err.contains("line 3") && err.contains("`counts`"), "{err}");
    }

    #[test]
    fn missing_and_extra_columns() {
        let t = Table::from_reader("phi_rad,counts\n0,1\n".as_bytes(), "x").unwrap();
        let err = t.expect(&["phi_rad", "counts", "integration_s"], &[]).unwrap_err().to_string();
        assert!(err.contains("`integration_s`"), "{err}");
        let t = Table::from_reader("a,b\n0,1\n".as_bytes(), "x").unwrap();
        assert!(t.expect(&["a"], &[]).unwrap_err().to_string().contains("`b`"));
    }

    #[test]
    fn format_is_stable() {
        assert_eq!(fmt(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt(-2.5), "-2.5000000000000000e0");
    }
}
