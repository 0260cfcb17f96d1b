//! File emission: versioned JSON documents and plain CSV tables.

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct Outputs {
    dir: PathBuf,
    timestamp: bool,
}

impl Outputs {
    pub fn create(dir: &Path, timestamp: bool) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("--out: cannot create {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            timestamp,
        })
    }

    /// Writes `body` with `schema` (and `generated_at` unless suppressed)
    /// added at the top level.
    pub fn json(&self, name: &str, schema: &str, body: Value) -> Result<PathBuf> {
        let mut doc = match body {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        doc.insert("schema".into(), Value::String(schema.into()));
        if self.timestamp {
            doc.insert(
                "generated_at".into(),
                Value::String(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
            );
        }
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Shortest round-trip decimal.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
