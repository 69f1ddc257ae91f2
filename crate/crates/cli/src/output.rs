use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;

/// Shortest round-trip text for a float; exponent form at extreme magnitudes.
pub fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:?}")
    }
}

/// Writes CSV tables and run metadata into one directory. Every table starts
/// with a comment line carrying the config hash and seed.
pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    seed: u64,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, hash: String, seed: u64) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            seed,
            written: Vec::new(),
        })
    }

    pub fn table(&mut self, name: &str, header: &[String], rows: &[Vec<String>], notes: &[(&str, String)]) -> CliResult<()> {
        let path = self.dir.join(name);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "# config_sha256={} seed={}", self.hash, self.seed)?;
        for (k, v) in notes {
            writeln!(file, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn metadata<C: Serialize>(&mut self, command: &str, config: &C, results: Value) -> CliResult<()> {
        let meta = serde_json::json!({
            "command": command,
            "config_sha256": self.hash,
            "seed": self.seed,
            "config": config,
            "tables": self.written,
            "results": results,
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        std::fs::write(self.dir.join("metadata.json"), text + "\n")?;
        Ok(())
    }
}

pub fn strings<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Vec<String> {
    items.into_iter().map(Into::into).collect()
}
