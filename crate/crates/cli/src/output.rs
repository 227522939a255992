//! Result files: `result.json` and the tabular `.csv` artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use axcirc::bootstrap::{BootstrapResult, IntervalRow};
use axcirc::mixture::{ModelSelection, SelectionRow};
use axcirc::{Family, FitResult, MixtureModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Writes a header and rows of preformatted fields.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Angle in `(-period/2, period/2]`.
pub fn signed(t: f64, period: f64) -> f64 {
    if t > period / 2.0 {
        t - period
    } else {
        t
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComponentEstimate {
    pub class: usize,
    pub proportion: f64,
    pub mu_circ: f64,
    /// Circular location in (-π, π].
    pub mu_circ_signed: f64,
    pub kappa_circ: f64,
    pub mu_ax: f64,
    pub kappa_ax: f64,
    pub rho: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub class: usize,
    pub covariate: String,
    pub value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub effective: usize,
    pub level: f64,
    pub low_success_warning: bool,
}

/// Contents of `result.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultFile {
    pub command: String,
    pub seed: u64,
    pub n: usize,
    pub dropped_lines: Vec<u64>,
    pub covariates: Vec<String>,
    pub circular_family: Family,
    pub axial_family: Family,
    pub components: usize,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub restarts_used: usize,
    pub failed_starts: usize,
    pub loglik_decreases: usize,
    pub ridge_used: bool,
    pub estimates: Vec<ComponentEstimate>,
    pub coefficients: Vec<CoefficientEstimate>,
    pub loglik_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
    /// The fitted model in reloadable form.
    pub model: MixtureModel,
}

/// Covariate labels with the intercept first.
pub fn coefficient_labels(names: &[String]) -> Vec<String> {
    std::iter::once("intercept".to_string()).chain(names.iter().cloned()).collect()
}

impl ResultFile {
    pub fn new(command: &str, seed: u64, fit: &FitResult, covariates: &[String], dropped: &[u64]) -> Self {
        let props = fit.class_proportions();
        let labels = coefficient_labels(covariates);
        let (cf, af) = fit.model.families();
        ResultFile {
            command: command.to_string(),
            seed,
            n: fit.n,
            dropped_lines: dropped.to_vec(),
            covariates: covariates.to_vec(),
            circular_family: cf,
            axial_family: af,
            components: fit.model.n_components(),
            loglik: fit.loglik,
            bic: fit.bic,
            n_params: fit.n_params,
            converged: fit.converged,
            iterations: fit.iterations,
            restarts_used: fit.restarts_used,
            failed_starts: fit.failed_starts,
            loglik_decreases: fit.loglik_decreases,
            ridge_used: fit.ridge_used,
            estimates: fit
                .model
                .components
                .iter()
                .enumerate()
                .map(|(k, c)| ComponentEstimate {
                    class: k + 1,
                    proportion: props[k],
                    mu_circ: c.circular.mu(),
                    mu_circ_signed: signed(c.circular.mu(), std::f64::consts::TAU),
                    kappa_circ: c.circular.kappa(),
                    mu_ax: c.axial.mu(),
                    kappa_ax: c.axial.kappa(),
                    rho: c.rho.value(),
                })
                .collect(),
            coefficients: fit
                .model
                .coefficients
                .rows()
                .iter()
                .enumerate()
                .flat_map(|(k, row)| {
                    row.iter().zip(&labels).map(move |(v, l)| CoefficientEstimate {
                        class: k + 2,
                        covariate: l.clone(),
                        value: *v,
                    })
                })
                .collect(),
            loglik_trace: fit.loglik_trace.clone(),
            bootstrap: None,
            model: fit.model.clone(),
        }
    }
}

pub fn read_model(path: &Path) -> CliResult<MixtureModel> {
    #[derive(Deserialize)]
    struct ModelOnly {
        model: MixtureModel,
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let m: ModelOnly = serde_json::from_str(&text)?;
    Ok(m.model)
}

pub fn write_classification(path: &Path, fit: &FitResult, lines: &[u64]) -> CliResult<()> {
    let j = fit.model.n_components();
    let mut header = vec!["row".to_string(), "line".to_string()];
    header.extend((1..=j).map(|k| format!("p{k}")));
    header.push("class".into());
    let rows = (0..fit.n).map(|i| {
        let mut r = vec![(i + 1).to_string(), lines.get(i).map_or(String::new(), u64::to_string)];
        r.extend(fit.responsibilities.row(i).iter().map(|v| num(*v)));
        r.push((fit.classification[i] + 1).to_string());
        r
    });
    write_csv(path, &header, rows)
}

pub fn write_selection(path: &Path, sel: &ModelSelection) -> CliResult<()> {
    let header: Vec<String> =
        ["circular", "axial", "J", "loglik", "bic", "n_params", "best", "error"].map(String::from).to_vec();
    let rows = sel.rows.iter().enumerate().map(|(i, r): (usize, &SelectionRow)| {
        vec![
            r.circular.code().to_string(),
            r.axial.code().to_string(),
            r.components.to_string(),
            opt(r.loglik),
            opt(r.bic),
            r.n_params.to_string(),
            u8::from(i == sel.best).to_string(),
            r.error.clone().unwrap_or_default(),
        ]
    });
    write_csv(path, &header, rows)
}

/// Replaces the numeric covariate index in `beta[j][c]` with its label.
pub fn label_parameter(name: &str, labels: &[String]) -> String {
    if let Some(rest) = name.strip_prefix("beta[") {
        if let Some((class, c)) = rest.split_once("][") {
            if let Some(idx) = c.strip_suffix(']').and_then(|c| c.parse::<usize>().ok()) {
                if let Some(l) = labels.get(idx) {
                    return format!("beta[{class}][{l}]");
                }
            }
        }
    }
    name.to_string()
}

pub fn write_intervals(path: &Path, boot: &BootstrapResult, covariates: &[String]) -> CliResult<()> {
    let labels = coefficient_labels(covariates);
    let header: Vec<String> = ["parameter", "estimate", "lower", "upper"].map(String::from).to_vec();
    let rows = boot
        .intervals
        .iter()
        .map(|r: &IntervalRow| vec![label_parameter(&r.name, &labels), num(r.estimate), num(r.lower), num(r.upper)]);
    write_csv(path, &header, rows)
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
