//! Rectangular result tables and their CSV form.
//!
//! The first line is `# units: u1,u2,...` (one unit per column), the second
//! the column names; values use 17 significant digits so they read back
//! bit-for-bit.

use serde::Serialize;

use crate::error::{Error, Result};

const UNITS_PREFIX: &str = "# units: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        ResultTable {
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Config(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Units must be non-empty and free of commas and line breaks, since they
    /// share one comment line.
    pub fn to_csv(&self) -> Result<String> {
        if let Some(c) = self
            .columns
            .iter()
            .find(|c| c.unit.is_empty() || c.unit.contains([',', '\n', '\r']))
        {
            return Err(Error::Config(format!("column '{}' has unit {:?}", c.name, c.unit)));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .map_err(csv_error)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        let units: Vec<&str> = self.columns.iter().map(|c| c.unit.as_str()).collect();
        let mut out = format!("{UNITS_PREFIX}{}\n", units.join(","));
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?);
        Ok(out)
    }

    /// Reads the output of [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let units = first
            .strip_prefix(UNITS_PREFIX)
            .ok_or_else(|| Error::Config("missing '# units:' header line".into()))?;
        let units: Vec<&str> = if units.is_empty() {
            Vec::new()
        } else {
            units.split(',').collect()
        };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
        let names: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if names.len() != units.len() {
            return Err(Error::Config(format!(
                "{} units for {} columns",
                units.len(),
                names.len()
            )));
        }
        let mut table = ResultTable {
            columns: names
                .into_iter()
                .zip(units)
                .map(|(name, unit)| Column {
                    name,
                    unit: unit.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        };
        for record in r.records() {
            let record = record.map_err(csv_error)?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad value '{f}': {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}
