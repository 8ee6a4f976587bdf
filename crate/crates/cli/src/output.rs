use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{output_path, ExperimentConfig, Format};

pub const BUILD_ID: &str = env!("SCTPERC_BUILD_ID");

/// Writes result files into one directory, each stamped with the build id
/// and the resolved configuration (which carries the seed).
pub struct Sink {
    dir: PathBuf,
    header: Value,
}

/// A table cell.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing(Option<()>),
}

impl Cell {
    fn plain(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x}"),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing(_) => "NaN".into(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing(None), Cell::Num)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl Sink {
    pub fn new(dir: &Path, config: &ExperimentConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let header = json!({ "build": BUILD_ID, "config": config });
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
        })
    }

    fn create(&self, name: &Path) -> anyhow::Result<(PathBuf, BufWriter<File>)> {
        let path = output_path(&self.dir, name)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(f)))
    }

    /// One JSON document {build, config, result}.
    pub fn json(&self, name: &Path, result: &impl Serialize) -> anyhow::Result<PathBuf> {
        let (path, mut w) = self.create(name)?;
        let mut doc = self.header.clone();
        doc["result"] = serde_json::to_value(result)?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    /// A header line followed by one JSON object per record.
    pub fn jsonl<T: Serialize>(
        &self,
        name: &Path,
        records: &[T],
        summary: &impl Serialize,
    ) -> anyhow::Result<PathBuf> {
        let (path, mut w) = self.create(name)?;
        let mut head = self.header.clone();
        head["summary"] = serde_json::to_value(summary)?;
        serde_json::to_writer(&mut w, &head)?;
        writeln!(w)?;
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// A table in the requested format. CSV and dat files carry the header
    /// and `extra` as `#` comment lines.
    pub fn table(
        &self,
        name: &Path,
        format: Format,
        columns: &[&str],
        rows: &[Vec<Cell>],
        extra: &impl Serialize,
    ) -> anyhow::Result<PathBuf> {
        if format == Format::Json {
            let rows: Vec<serde_json::Map<String, Value>> = rows
                .iter()
                .map(|r| {
                    columns
                        .iter()
                        .map(|c| c.to_string())
                        .zip(r.iter().map(|x| json!(x)))
                        .collect()
                })
                .collect();
            return self.json(
                name,
                &json!({ "summary": extra, "columns": columns, "rows": rows }),
            );
        }
        let (path, mut w) = self.create(name)?;
        writeln!(w, "# build: {BUILD_ID}")?;
        writeln!(
            w,
            "# config: {}",
            serde_json::to_string(&self.header["config"])?
        )?;
        writeln!(w, "# summary: {}", serde_json::to_string(extra)?)?;
        match format {
            Format::Csv => {
                let mut cw = csv::Writer::from_writer(&mut w);
                cw.write_record(columns)?;
                for r in rows {
                    cw.write_record(r.iter().map(Cell::plain))?;
                }
                cw.flush()?;
            }
            Format::Dat => {
                writeln!(w, "# {}", columns.join(" "))?;
                for r in rows {
                    let line: Vec<String> = r.iter().map(Cell::plain).collect();
                    writeln!(w, "{}", line.join(" "))?;
                }
            }
            Format::Json => unreachable!(),
        }
        w.flush()?;
        Ok(path)
    }
}
