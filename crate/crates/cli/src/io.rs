//! Files the CLI reads and writes: numeric CSV, function CSV, run echoes.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use otmap_core::fda::{FunctionSample, Grid};
use otmap_core::model::{FORMAT_VERSION, LIBRARY_VERSION};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Reads a header-less CSV of numbers into an `n × d` matrix.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let rows = read_rows(path)?;
    to_matrix(path, rows)
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e))?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Parse(format!(
                        "{}: line {}, column {}: `{field}` is not a number",
                        path.display(),
                        line + 1,
                        col + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn to_matrix(path: &Path, rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let Some(width) = rows.first().map(Vec::len) else {
        return Err(CliError::Parse(format!("{}: no rows", path.display())));
    };
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(CliError::Parse(format!(
            "{}: line {} has {} fields, expected {width}",
            path.display(),
            i + 1,
            rows[i].len()
        )));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect())
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::output(path, e))?;
    for r in m.rows() {
        w.write_record(r.iter().map(|v| format!("{v:e}")))
            .map_err(|e| CliError::output(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// `rows × cols` shape of a planar function file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSidecar {
    pub rows: usize,
    pub cols: usize,
}

/// Function data. Without a sidecar the first CSV row holds the abscissae;
/// with one every row is a flattened planar grid.
pub fn read_functions(path: &Path, sidecar: Option<&Path>) -> Result<FunctionSample> {
    let mut rows = read_rows(path)?;
    let grid = match sidecar {
        Some(sc) => {
            let s: PlaneSidecar = serde_json::from_str(&fs::read_to_string(sc)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", sc.display())))?;
            Grid::Plane { rows: s.rows, cols: s.cols }
        }
        None => {
            if rows.len() < 2 {
                return Err(CliError::Parse(format!(
                    "{}: expected a grid row followed by at least one function",
                    path.display()
                )));
            }
            Grid::Line { points: rows.remove(0) }
        }
    };
    let values = to_matrix(path, rows)?;
    Ok(FunctionSample::new(grid, values)?)
}

pub fn write_functions(path: &Path, fs_: &FunctionSample) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::output(path, e))?;
    if let Grid::Line { points } = fs_.grid() {
        w.write_record(points.iter().map(|v| format!("{v:e}")))
            .map_err(|e| CliError::output(path, e))?;
    }
    for r in fs_.values().rows() {
        w.write_record(r.iter().map(|v| format!("{v:e}")))
            .map_err(|e| CliError::output(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InputChecksum {
    pub path: String,
    pub sha256: String,
}

/// Resolved-configuration echo written next to every output.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunEcho<C> {
    pub command: String,
    pub library_version: String,
    pub format_version: u32,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<InputChecksum>,
    pub config: C,
}

impl<C: Serialize> RunEcho<C> {
    pub fn new(command: &str, seed: u64, threads: usize, inputs: &[&Path], config: C) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputChecksum {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            command: command.to_string(),
            library_version: LIBRARY_VERSION.to_string(),
            format_version: FORMAT_VERSION,
            seed,
            threads,
            inputs,
            config,
        })
    }
}

/// `dir/stem.suffix` for an output `path` with stem `stem`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Wall-clock seconds, kept out of every reproducible artifact.
pub fn write_timing(path: &Path, seconds: f64) -> Result<()> {
    write_json(&sibling(path, "timing.json"), &serde_json::json!({ "wall_seconds": seconds }))
}
