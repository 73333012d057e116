use std::path::Path;

use crate::error::{Error, Result};

/// Columnar numeric observations with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some((name, col)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n_rows) {
            return Err(Error::Dimension(format!(
                "column `{name}` has {} rows, expected {n_rows}",
                col.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::Invalid(format!("duplicate column `{a}`")));
            }
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Reads a CSV file with a header row of column names.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Invalid(format!(
                        "{}: row {}, column `{}`: `{field}` is not a number",
                        path.display(),
                        line + 2,
                        names[c]
                    ))
                })?;
                columns[c].push(v);
            }
        }
        Self::new(names, columns)
    }

    /// Writes all columns at full precision.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for i in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c[i].to_string()))?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_and_ragged_columns() {
        assert!(Dataset::new(vec!["a".into(), "b".into()], vec![vec![1.0], vec![]]).is_err());
        let d = Dataset::new(vec!["a".into()], vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(d.column("b"), Err(Error::MissingColumn(_))));
        assert_eq!(d.column("a").unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let vals = vec![0.1 + 0.2, -1e-300, 1.0 / 3.0, 12345.678901234567];
        let d = Dataset::new(vec!["x".into()], vec![vals]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, buf).unwrap();
        assert_eq!(Dataset::read_csv(&p).unwrap(), d);
    }
}
