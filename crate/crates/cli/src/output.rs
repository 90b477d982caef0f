//! Text artifacts: full-precision numbers, CSV/JSON-lines tables, manifests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

/// 17 significant digits; `null` for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => num(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => num(*v),
            Cell::Text(s) => serde_json::to_string(s).expect("strings serialize"),
        }
    }
}

/// Header plus rows, written as CSV or as one JSON object per line.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                out += &self.header.join(",");
                out.push('\n');
                for row in &self.rows {
                    out += &row.iter().map(Cell::csv).collect::<Vec<_>>().join(",");
                    out.push('\n');
                }
            }
            Format::Jsonl => {
                for row in &self.rows {
                    out += &json_object(self.header.iter().copied().zip(row.iter()));
                    out.push('\n');
                }
            }
        }
        out
    }
}

pub fn json_object<'a>(fields: impl Iterator<Item = (&'a str, &'a Cell)>) -> String {
    let body: Vec<String> = fields.map(|(k, v)| format!("\"{k}\":{}", v.json())).collect();
    format!("{{{}}}", body.join(","))
}

/// Collects the files of one command invocation and writes its manifest.
pub struct Artifacts {
    dir: PathBuf,
    command: &'static str,
    started: u64,
    files: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Artifacts {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), command, started: unix_now(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let mut w = self.create(name)?;
        w.write_all(contents.as_bytes())?;
        w.flush()?;
        Ok(self.path(name))
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    /// Writes `<command>.manifest.json` next to the data files.
    pub fn finish<P: Serialize>(self, master_seed: Option<u64>, parameters: &P) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            master_seed,
            started_unix: self.started,
            finished_unix: unix_now(),
            parameters: serde_json::to_value(parameters)?,
            files: self.files.clone(),
        };
        let path = self.path(&self.manifest_name());
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub master_seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub parameters: serde_json::Value,
    pub files: Vec<String>,
}
