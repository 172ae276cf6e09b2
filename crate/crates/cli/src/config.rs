use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use subflow::bernstein::{BernsteinSpec, CustomTail};
use subflow::semigroup::SemigroupSpec;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FamilyName {
    Stable,
    Tempered,
    Drift,
    Custom,
}

/// On-disk spec: `family`, `alpha`, `theta`, `a`, `b`, `tail_file`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    family: FamilyName,
    alpha: Option<f64>,
    theta: Option<f64>,
    #[serde(default)]
    a: f64,
    #[serde(default)]
    b: f64,
    tail_file: Option<PathBuf>,
}

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{}: {msg}", path.display()))
}

fn need(v: Option<f64>, name: &str, path: &Path) -> Result<f64, CliError> {
    v.ok_or_else(|| parse_err(path, format!("missing `{name}`")))
}

pub fn load_spec(path: &Path) -> Result<BernsteinSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| parse_err(path, e))?;
    let raw: SpecFile = toml::from_str(&text).map_err(|e| parse_err(path, e))?;
    let family = match raw.family {
        FamilyName::Stable => BernsteinSpec::stable(need(raw.alpha, "alpha", path)?),
        FamilyName::Tempered => BernsteinSpec::tempered(
            need(raw.alpha, "alpha", path)?,
            need(raw.theta, "theta", path)?,
        ),
        FamilyName::Drift => BernsteinSpec::drift(0.0, 0.0),
        FamilyName::Custom => {
            let rel = raw
                .tail_file
                .as_ref()
                .ok_or_else(|| parse_err(path, "custom family needs `tail_file`"))?;
            let file = path.parent().unwrap_or(Path::new(".")).join(rel);
            let cols = read_columns(&file, 2)?;
            let tail = CustomTail::new(cols[0].clone(), cols[1].clone())?;
            BernsteinSpec::custom(0.0, 0.0, tail)
        }
    };
    Ok(family.with_killing(raw.a).with_drift(raw.b))
}

/// [`load_spec`] that also rejects specs with violations.
pub fn load_valid_spec(path: &Path) -> Result<BernsteinSpec, CliError> {
    let spec = load_spec(path)?;
    let v = subflow::bernstein::validate(&spec);
    if !v.is_empty() {
        let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return Err(subflow::Error::SpecInvalid(list.join("; ")).into());
    }
    Ok(spec)
}

pub fn load_semigroup(path: &Path) -> Result<SemigroupSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| parse_err(path, e))?;
    let sg: SemigroupSpec = toml::from_str(&text).map_err(|e| parse_err(path, e))?;
    sg.validate()?;
    Ok(sg)
}

/// Reads a headered CSV of numbers; returns the last `want` columns.
pub fn read_columns(path: &Path, want: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e))?;
    let mut cols = vec![Vec::new(); want];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        if rec.len() < want {
            return Err(parse_err(
                path,
                format!("row {} has {} fields, need {want}", line + 2, rec.len()),
            ));
        }
        let skip = rec.len() - want;
        for (c, field) in rec.iter().skip(skip).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, format!("row {}: `{field}` is not a number", line + 2))
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// `lo:hi:n` → `n + 1` equispaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let (lo, hi, n) = parse_range(s)?;
    Ok((0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect())
}

pub fn parse_range(s: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::Parse(format!("grid `{s}` is not lo:hi:n with lo < hi and n >= 1"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Parse(format!("{what}: `{p}` is not valid")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_lists() {
        assert_eq!(
            parse_grid("0:1:4").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(parse_grid("1:0:4").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_list::<u32>("1, 2", "orders").unwrap(), vec![1, 2]);
    }
}
