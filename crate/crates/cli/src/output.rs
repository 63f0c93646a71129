//! CSV emission with `#` metadata lines and the config echo.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::CliError;

/// Output directory plus the provenance stamped on every file.
pub struct OutputDir {
    pub dir: PathBuf,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    /// Creates `dir` and writes `<command>.config.toml` into it.
    pub fn create(dir: &Path, command: &str, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let echo = config.echo();
        let echo_path = dir.join(format!("{command}.config.toml"));
        fs::write(&echo_path, &echo)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash: config.hash(),
            seed: config.mc.seed,
            written: vec![echo_path],
        })
    }

    pub fn table(&self, name: &str) -> Table {
        Table { name: name.to_string(), meta: Vec::new(), header: Vec::new(), rows: Vec::new() }
    }

    pub fn write(&mut self, table: &Table) -> Result<PathBuf, CliError> {
        let path = self.dir.join(&table.name);
        let mut buf: Vec<u8> = Vec::new();
        writeln!(buf, "# command: {}", self.command)?;
        writeln!(buf, "# config_sha256: {}", self.config_hash)?;
        writeln!(buf, "# seed: {}", self.seed)?;
        for (k, v) in &table.meta {
            writeln!(buf, "# {k}: {v}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&table.header)?;
            for r in &table.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf)?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// One CSV file held in memory until written.
pub struct Table {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn header(&mut self, cols: &[&str]) -> &mut Self {
        self.header = cols.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

/// Shortest round-trip representation, so files are identical across runs.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Reads a CSV written by [`OutputDir::write`] (or any CSV with `#` comments).
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}
