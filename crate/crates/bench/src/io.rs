//! CSV tables (header row, first column time) and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{BenchError, Result};

/// Named numeric columns of equal length. The first column is time.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(time_name: &str, time: Vec<f64>) -> Self {
        Self {
            names: vec![time_name.to_string()],
            columns: vec![time],
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(BenchError::Data(format!(
                "column {name} has {} rows, table has {}",
                values.len(),
                self.len()
            )));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(BenchError::Data(format!("duplicate column {name}")));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.push(name, values)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn time(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| BenchError::Data(format!("missing column {name}")))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        Self::from_reader(file).map_err(|e| match e {
            BenchError::Data(m) => BenchError::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| BenchError::Data(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.is_empty() || names.iter().all(|n| n.is_empty()) {
            return Err(BenchError::Data("missing header row".into()));
        }
        let mut columns = vec![Vec::new(); names.len()];
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| BenchError::Data(e.to_string()))?;
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    BenchError::Data(format!("row {}: {field:?} is not a number", line + 2))
                })?;
                columns[j].push(v);
            }
        }
        let mut table = Table::new(&names[0], columns.remove(0));
        for (name, col) in names[1..].iter().zip(columns) {
            table.push(name, col)?;
        }
        Ok(table)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.names).map_err(|e| BenchError::Io(e.to_string()))?;
        for i in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| c[i].to_string()))
                .map_err(|e| BenchError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }
}

/// Write to a temporary file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| BenchError::Io(e.to_string()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::Io(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = Table::new("time", vec![0.0, 0.5, 1.0])
            .with("a", vec![1.5, -2.0, 1e-300])
            .unwrap()
            .with("b", vec![f64::NAN, 3.0, 0.1 + 0.2])
            .unwrap();
        let back = Table::from_reader(t.to_csv_string().unwrap().as_bytes()).unwrap();
        assert_eq!(back.names(), t.names());
        assert_eq!(back.column("a").unwrap(), t.column("a").unwrap());
        assert!(back.column("b").unwrap()[0].is_nan());
        assert_eq!(back.column("b").unwrap()[2], 0.1 + 0.2);
    }

    #[test]
    fn bad_cells_are_data_errors() {
        let err = Table::from_reader("time,y\n0,1\n1,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BenchError::Data(_)));
        let err = Table::from_reader("time,y\n0,1\n1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BenchError::Data(_)));
        assert!(Table::new("t", vec![0.0]).column("nope").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
