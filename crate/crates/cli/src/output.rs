use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Output directory plus the provenance every artifact carries.
pub struct Sink {
    pub dir: PathBuf,
    pub hash: String,
    pub seed: u64,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, hash: String, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            seed,
            written: Vec::new(),
        })
    }

    pub fn meta(&self) -> Value {
        json!({
            "config_hash": self.hash,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    /// CSV with a provenance comment line.
    pub fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut s = String::new();
        let _ = writeln!(s, "# config_hash={} seed={}", self.hash, self.seed);
        let _ = writeln!(s, "{header}");
        for r in rows {
            let _ = writeln!(s, "{r}");
        }
        self.write(name, &s)
    }

    /// JSON object `{meta, ...body}`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let mut v = serde_json::to_value(body).map_err(|e| CliError::Numeric(e.to_string()))?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("meta".into(), self.meta());
            }
            None => v = json!({ "meta": self.meta(), "value": v }),
        }
        let text =
            serde_json::to_string_pretty(&v).map_err(|e| CliError::Numeric(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

/// Shortest round-trip formatting, with `-0` written as `0`.
pub fn num(v: f64) -> String {
    format!("{:?}", v + 0.0)
}
