use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::crypto::Digest;

/// Where a table came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub scenario: String,
    pub config_digest: Digest,
    pub seed: u64,
    pub version: String,
    /// Origin of the parking population, e.g. `synthetic` or a trace path.
    pub source: String,
}

impl Provenance {
    pub fn new(scenario: &str, config_digest: Digest, seed: u64, source: String) -> Self {
        Self {
            scenario: scenario.to_string(),
            config_digest,
            seed,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            source,
        }
    }
}

/// Named columns of preformatted cells plus their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub provenance: Provenance,
}

/// Formats a float with the shortest representation that round-trips.
pub fn cell(x: f64) -> String {
    format!("{x}")
}

impl ResultTable {
    pub fn new(columns: &[&str], provenance: Provenance) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), provenance }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the column schema");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses column `name` as floats.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV cells are UTF-8")
    }

    pub fn write_provenance<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        let p = &self.provenance;
        writeln!(w, "scenario = {}", p.scenario)?;
        writeln!(w, "config_digest = {}", p.config_digest)?;
        writeln!(w, "seed = {}", p.seed)?;
        writeln!(w, "version = {}", p.version)?;
        writeln!(w, "source = {}", p.source)?;
        writeln!(w, "rows = {}", self.rows.len())?;
        writeln!(w, "columns = {}", self.columns.join(","))?;
        writeln!(w, "csv_digest = {}", Digest::of(self.to_csv_string().as_bytes()))?;
        Ok(())
    }

    /// Writes `<scenario>.csv` and `provenance.txt` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.provenance.scenario));
        self.write_csv(fs::File::create(&csv_path)?)?;
        self.write_provenance(fs::File::create(dir.join("provenance.txt"))?)?;
        Ok(csv_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_provenance() {
        let mut t = ResultTable::new(&["a", "b"], Provenance::new("demo", Digest::ZERO, 3, "synthetic".into()));
        t.push(vec![cell(0.1), cell(2.0)]);
        assert_eq!(t.to_csv_string(), "a,b\n0.1,2\n");
        assert_eq!(t.floats("b"), Some(vec![2.0]));
        let mut p = Vec::new();
        t.write_provenance(&mut p).unwrap();
        let p = String::from_utf8(p).unwrap();
        assert!(p.contains("seed = 3\n") && p.contains("source = synthetic\n"));
    }
}
