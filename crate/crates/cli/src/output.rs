use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Full double precision; NaN is written as an empty (missing) field.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_num(*v)))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a, C: Serialize> {
    subcommand: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: &'a C,
    outputs: Vec<OutputEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `<first output>.manifest.json` and returns its path.
pub fn write_manifest<C: Serialize>(
    subcommand: &str,
    seed: Option<u64>,
    config: &C,
    outputs: &[&Path],
) -> Result<PathBuf, CliError> {
    let entries = outputs
        .iter()
        .map(|p| {
            Ok(OutputEntry {
                path: p.to_path_buf(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = RunManifest {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        outputs: entries,
    };
    let mut name = outputs[0].as_os_str().to_owned();
    name.push(".manifest.json");
    let path = PathBuf::from(name);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}
