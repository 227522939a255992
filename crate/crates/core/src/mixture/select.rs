//! Fitting a grid of family pairs and component counts and ranking by BIC.

use rayon::prelude::*;
use serde::Serialize;

use super::{fit, Dataset, FitConfig, FitResult};
use crate::directional::Family;
use crate::error::{Error, Result};

/// One cell of the selection grid.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionRow {
    pub circular: Family,
    pub axial: Family,
    pub components: usize,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub n_params: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ModelSelection {
    pub rows: Vec<SelectionRow>,
    /// Index into `rows` of the BIC-minimizing fit.
    pub best: usize,
    pub best_fit: FitResult,
}

/// Fits every `(family pair, J)` combination. Failed cells are recorded in
/// the table and do not abort the search.
pub fn select_model(
    data: &Dataset,
    families: &[(Family, Family)],
    components: &[usize],
    cfg: &FitConfig,
) -> Result<ModelSelection> {
    if families.is_empty() || components.is_empty() {
        return Err(Error::Domain("the selection grid is empty".into()));
    }
    let cells: Vec<((Family, Family), usize)> =
        families.iter().flat_map(|f| components.iter().map(move |&j| (*f, j))).collect();
    let fits: Vec<Result<FitResult>> = cells.par_iter().map(|&(f, j)| fit(data, f, j, cfg)).collect();
    let q1 = data.n_covariates();
    let mut rows = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, FitResult)> = None;
    for (idx, ((f, j), r)) in cells.into_iter().zip(fits).enumerate() {
        let n_params = super::n_params(j.max(1), q1);
        match r {
            Ok(res) => {
                rows.push(SelectionRow {
                    circular: f.0,
                    axial: f.1,
                    components: j,
                    loglik: Some(res.loglik),
                    bic: Some(res.bic),
                    n_params,
                    error: None,
                });
                if best.as_ref().is_none_or(|b| res.bic < b.1.bic) {
                    best = Some((idx, res));
                }
            }
            Err(e) => rows.push(SelectionRow {
                circular: f.0,
                axial: f.1,
                components: j,
                loglik: None,
                bic: None,
                n_params,
                error: Some(e.to_string()),
            }),
        }
    }
    let (best, best_fit) = best.ok_or_else(|| Error::FitFailure {
        attempts: rows.len(),
        last: rows.iter().rev().find_map(|r| r.error.clone()).unwrap_or_default(),
    })?;
    Ok(ModelSelection { rows, best, best_fit })
}
