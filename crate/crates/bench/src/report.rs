//! Report assembly: provenance-tagged cells, config hashing, and the JSON,
//! aligned-text and CSV writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use exosim::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// A numeric report value with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Cell {
    /// Produced by this run; carries the hash of the configuration behind it.
    Computed { value: f64, unit: &'static str, config_hash: String },
    /// Published value, stored verbatim for comparison only.
    Reference { value: f64, unit: &'static str },
}

impl Cell {
    pub fn value(&self) -> f64 {
        match self {
            Cell::Computed { value, .. } | Cell::Reference { value, .. } => *value,
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, Cell::Reference { .. })
    }
}

/// Hands out computed cells stamped with one config hash.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub hash: String,
}

impl Stamp {
    pub fn cell(&self, value: f64, unit: &'static str) -> Cell {
        Cell::Computed { value, unit, config_hash: self.hash.clone() }
    }

    pub fn opt(&self, value: Option<f64>, unit: &'static str) -> Option<Cell> {
        value.map(|v| self.cell(v, unit))
    }
}

pub fn reference(value: f64, unit: &'static str) -> Cell {
    Cell::Reference { value, unit }
}

/// SHA-256 of the canonical JSON of `config` followed by any extra inputs.
pub fn config_hash<T: Serialize>(config: &T, extra: &[&[u8]]) -> Result<String> {
    let json = serde_json::to_vec(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let mut h = Sha256::new();
    h.update(&json);
    for e in extra {
        h.update((e.len() as u64).to_le_bytes());
        h.update(e);
    }
    Ok(hex(&h.finalize()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    pub warnings: Vec<String>,
}

/// Everything one command writes.
#[derive(Debug, Clone)]
pub struct Report {
    pub meta: Metadata,
    pub results: Value,
    pub text: String,
    /// `(file name, contents)` of plot-ready CSV data.
    pub csv: Vec<(String, String)>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            metadata: &'a Metadata,
            results: &'a Value,
        }
        let mut s = serde_json::to_string_pretty(&Out { metadata: &self.meta, results: &self.results })
            .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} / {}\nconfig {}  seed {}\n",
            self.meta.command, self.meta.scenario, self.meta.config_hash, self.meta.seed
        );
        if let Some(t) = self.meta.timestamp_unix {
            let _ = writeln!(s, "timestamp {t}");
        }
        s.push('\n');
        s.push_str(&self.text);
        for w in &self.meta.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    /// Write `report.json`, `report.txt` and the CSV files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut files = vec![
            ("report.json".to_string(), self.to_json()?),
            ("report.txt".to_string(), self.to_text()),
        ];
        files.extend(self.csv.iter().cloned());
        let mut written = Vec::with_capacity(files.len());
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Four significant digits, or `-` for a missing value.
pub fn num(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(v) if v == 0.0 || !v.is_finite() => format!("{v}"),
        Some(v) => {
            let digits = (3 - v.abs().log10().floor() as i32).clamp(0, 6) as usize;
            format!("{v:.digits$}")
        }
    }
}

/// Columns padded to their widest entry; the first column is left-aligned.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
    }
    out
}

/// CSV text from a header and rows of numbers.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| exosim::lti::sim::fmt_sci(*v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
