use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pc,
    Simulate,
    Analyze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Walk,
    Cluster,
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Tail,
    ThetaScan,
    Scaling,
    CountClusters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Dat,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Dat => "dat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Walk,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    LogLog,
    SemiLog,
}

/// Everything that determines an experiment's output. Flags and the JSON
/// config file share this shape; flags win field by field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// simulate: what to sample.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// analyze: which table to produce.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Percolation parameter; defaults to p_c(α) where that makes sense.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Comma-separated p values (theta-scan).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of samples (walks, clusters or cones).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Series truncation tolerance (pc).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Walk length cap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Exploration step cap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    /// Exploration height cap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_level: Option<i64>,
    /// Cap on generated map vertices per sample.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_vertices: Option<usize>,
    /// cluster: compare each finished cluster with a BFS on the same map.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couple: Option<bool>,
    /// Cone depth.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Generations a subtree must stay wide (cone).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wideness_depth: Option<u32>,
    /// Comma-separated start levels (count-clusters).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<u32>>,
    /// Levels a cluster must climb (count-clusters).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    /// Tail fit range and number of points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    /// tail: where samples come from when no input file is given.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    /// scaling: ratio of the two scales.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<u64>,
    /// tail: file of samples, one per line (first CSV column).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Output file name inside the output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($f:ident),*) => {
        ExperimentConfig { $($f: $flags.$f.or($file.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("malformed config {}: {e}", path.display())).into())
    }

    /// Field-wise merge; values present in `self` (the flags) win.
    pub fn over(self, file: ExperimentConfig) -> Self {
        let flags = self;
        overlay!(flags, file; command, mode, task, alpha, p, p_grid, seed, n, tol, horizon, max_steps,
            max_level, max_vertices, couple, depth, wideness_depth, h, r, n_min, n_max, points, axis, source,
            factor, input, output, format)
    }
}

/// Output file path: `name` must stay inside `dir`.
pub fn output_path(dir: &Path, name: &Path) -> anyhow::Result<PathBuf> {
    use std::path::Component;
    if name
        .components()
        .any(|c| !matches!(c, Component::Normal(_)))
    {
        return Err(UsageError(format!(
            "output {} must be a relative path without '..'",
            name.display()
        ))
        .into());
    }
    Ok(dir.join(name))
}
