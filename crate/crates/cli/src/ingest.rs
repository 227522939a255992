//! Reading angle/covariate tables into a [`Dataset`].

use std::collections::BTreeSet;
use std::path::Path;

use axcirc::Dataset;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AngleUnit {
    Degrees,
    Radians,
}

impl AngleUnit {
    pub fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_radians(),
            AngleUnit::Radians => v,
        }
    }

    pub fn from_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_degrees(),
            AngleUnit::Radians => v,
        }
    }
}

/// A categorical covariate expanded into indicator columns against a
/// reference level, written `column:REFERENCE`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Categorical {
    pub column: String,
    pub reference: String,
}

impl std::str::FromStr for Categorical {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some((c, r)) if !c.is_empty() && !r.is_empty() => {
                Ok(Categorical { column: c.to_string(), reference: r.to_string() })
            }
            _ => Err(format!("expected COLUMN:REFERENCE, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub circular: String,
    pub axial: String,
    pub unit: AngleUnit,
    pub covariates: Vec<String>,
    pub categorical: Vec<Categorical>,
    pub delimiter: u8,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    /// Names of the covariate columns after the intercept.
    pub covariate_names: Vec<String>,
    /// Source line of every retained row.
    pub lines: Vec<u64>,
    /// Source lines of rows dropped for missing values.
    pub dropped: Vec<u64>,
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "nan" | "null")
}

fn column(headers: &csv::StringRecord, name: &str) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::Data(format!("column {name:?} not found in header")))
}

/// Reads a delimited table with a header row. Angles are reduced modulo
/// their period after unit conversion; rows with a missing value in any
/// used column are dropped and reported.
pub fn ingest(path: &Path, cfg: &IngestConfig) -> CliResult<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let ix = column(&headers, &cfg.circular)?;
    let iy = column(&headers, &cfg.axial)?;
    let numeric: Vec<usize> = cfg.covariates.iter().map(|c| column(&headers, c)).collect::<CliResult<_>>()?;
    let categorical: Vec<usize> =
        cfg.categorical.iter().map(|c| column(&headers, &c.column)).collect::<CliResult<_>>()?;

    struct Row {
        line: u64,
        x: f64,
        y: f64,
        numeric: Vec<f64>,
        levels: Vec<String>,
    }
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let used = [ix, iy].into_iter().chain(numeric.iter().copied()).chain(categorical.iter().copied());
        if used.clone().any(|i| record.get(i).is_none_or(is_missing)) {
            dropped.push(line);
            continue;
        }
        let parse = |i: usize| -> CliResult<f64> {
            let s = &record[i];
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Data(format!("line {line}: column {:?}: cannot parse {s:?} as a number", &headers[i]))
            })
        };
        rows.push(Row {
            line,
            x: parse(ix)?,
            y: parse(iy)?,
            numeric: numeric.iter().map(|&i| parse(i)).collect::<CliResult<_>>()?,
            levels: categorical.iter().map(|&i| record[i].to_string()).collect(),
        });
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no complete data rows", path.display())));
    }

    let mut names: Vec<String> = cfg.covariates.clone();
    let mut dummies: Vec<Vec<String>> = Vec::new();
    for (k, cat) in cfg.categorical.iter().enumerate() {
        let levels: BTreeSet<&str> = rows.iter().map(|r| r.levels[k].as_str()).collect();
        if !levels.contains(cat.reference.as_str()) {
            return Err(CliError::Data(format!(
                "reference level {:?} does not occur in column {:?}",
                cat.reference, cat.column
            )));
        }
        let others: Vec<String> = levels.into_iter().filter(|l| *l != cat.reference).map(str::to_string).collect();
        names.extend(others.iter().map(|l| format!("{}={l}", cat.column)));
        dummies.push(others);
    }

    let x: Vec<f64> = rows.iter().map(|r| cfg.unit.to_radians(r.x)).collect();
    let y: Vec<f64> = rows.iter().map(|r| cfg.unit.to_radians(r.y)).collect();
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = r.numeric.clone();
            for (k, levels) in dummies.iter().enumerate() {
                v.extend(levels.iter().map(|l| f64::from(u8::from(*l == r.levels[k]))));
            }
            v
        })
        .collect();
    let dataset = Dataset::from_radians(&x, &y, &z)?;
    Ok(Ingested { dataset, covariate_names: names, lines: rows.iter().map(|r| r.line).collect(), dropped })
}
