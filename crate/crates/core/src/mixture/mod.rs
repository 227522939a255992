//! Mixtures of circular–axial densities whose mixing weights follow a
//! multinomial logit in the covariates (class 1 is the reference class).

mod em;
mod init;
mod logit;
mod select;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circula::{ComponentParams, PreparedComponent};
use crate::directional::{AxialAngle, CircularAngle, Family};
use crate::error::{Error, Result};

pub use em::{fit, m_step_theta, FitConfig, FitResult};
pub use logit::{concomitant_objective, m_step_beta, LogitFit};
pub use select::{select_model, ModelSelection, SelectionRow};

/// Observations `(x_i, y_i, z_i)`; every `z_i` starts with the intercept 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    circular: Vec<CircularAngle>,
    axial: Vec<AxialAngle>,
    covariates: DMatrix<f64>,
}

impl Dataset {
    /// Builds a dataset from angle columns and covariate rows that already
    /// include the leading intercept.
    pub fn new(circular: Vec<CircularAngle>, axial: Vec<AxialAngle>, covariates: Vec<Vec<f64>>) -> Result<Self> {
        let n = circular.len();
        if n == 0 {
            return Err(Error::Degenerate("dataset has no rows".into()));
        }
        if axial.len() != n || covariates.len() != n {
            return Err(Error::Dimension(format!(
                "{} circular, {} axial and {} covariate rows",
                n,
                axial.len(),
                covariates.len()
            )));
        }
        let p = covariates[0].len();
        if p == 0 {
            return Err(Error::Dimension("covariate rows must contain the intercept".into()));
        }
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!("row {i} has {} covariates, expected {p}", row.len())));
            }
            if row[0] != 1.0 {
                return Err(Error::Domain(format!("row {i}: leading covariate must be the intercept 1")));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("row {i}: covariate {v} is not finite")));
            }
        }
        let covariates = DMatrix::from_fn(n, p, |i, j| covariates[i][j]);
        Ok(Dataset { circular, axial, covariates })
    }

    /// Builds a dataset from angles (radians) and covariates without the
    /// intercept, which is prepended.
    pub fn from_radians(x: &[f64], y: &[f64], covariates: &[Vec<f64>]) -> Result<Self> {
        let rows = if covariates.is_empty() {
            vec![vec![1.0]; x.len()]
        } else {
            covariates.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect()
        };
        Dataset::new(
            x.iter().map(|&v| CircularAngle::new(v)).collect(),
            y.iter().map(|&v| AxialAngle::new(v)).collect(),
            rows,
        )
    }

    pub fn len(&self) -> usize {
        self.circular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circular.is_empty()
    }

    /// Covariate dimension including the intercept (`q + 1`).
    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn circular(&self) -> &[CircularAngle] {
        &self.circular
    }

    pub fn axial(&self) -> &[AxialAngle] {
        &self.axial
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.covariates.row(i).iter().copied().collect()
    }

    pub(crate) fn x_values(&self) -> Vec<f64> {
        self.circular.iter().map(|a| a.value()).collect()
    }

    pub(crate) fn y_values(&self) -> Vec<f64> {
        self.axial.iter().map(|a| a.value()).collect()
    }
}

/// Multinomial-logit coefficients: row `j - 2` holds `β_j` for classes
/// `j = 2..J`; class 1 is the reference with `β_1 ≡ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficients")]
pub struct ConcomitantCoefficients {
    n_covariates: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawCoefficients {
    n_covariates: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawCoefficients> for ConcomitantCoefficients {
    type Error = Error;

    fn try_from(r: RawCoefficients) -> Result<Self> {
        ConcomitantCoefficients::new(r.rows, r.n_covariates)
    }
}

impl ConcomitantCoefficients {
    pub fn new(rows: Vec<Vec<f64>>, n_covariates: usize) -> Result<Self> {
        if n_covariates == 0 {
            return Err(Error::Dimension("coefficients need at least the intercept column".into()));
        }
        for (k, r) in rows.iter().enumerate() {
            if r.len() != n_covariates {
                return Err(Error::Dimension(format!(
                    "coefficient row {} has {} entries, expected {n_covariates}",
                    k + 2,
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("coefficient row {} is not finite", k + 2)));
            }
        }
        Ok(ConcomitantCoefficients { n_covariates, rows })
    }

    pub fn zeros(n_classes: usize, n_covariates: usize) -> Self {
        ConcomitantCoefficients { n_covariates, rows: vec![vec![0.0; n_covariates]; n_classes.saturating_sub(1)] }
    }

    pub fn n_classes(&self) -> usize {
        self.rows.len() + 1
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    /// `β_j` for class `j` (1-based); the reference class returns zeros.
    pub fn beta(&self, class: usize) -> Vec<f64> {
        if class <= 1 {
            vec![0.0; self.n_covariates]
        } else {
            self.rows[class - 2].clone()
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n_covariates {
            return Err(Error::Dimension(format!(
                "covariate vector has length {}, coefficients expect {}",
                z.len(),
                self.n_covariates
            )));
        }
        Ok(())
    }

    /// Log mixing weights, stabilized by shifting the largest linear predictor to zero.
    pub fn ln_weights(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let mut eta = Vec::with_capacity(self.n_classes());
        eta.push(0.0);
        for r in &self.rows {
            eta.push(r.iter().zip(z).map(|(b, v)| b * v).sum());
        }
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
        Ok(eta.into_iter().map(|e| e - lse).collect())
    }
}

/// Mixing weights `π_j(z)` of the reference-class multinomial logit.
pub fn mixing_weights(coeffs: &ConcomitantCoefficients, z: &[f64]) -> Result<Vec<f64>> {
    coeffs.check_dim(z)?;
    let mut eta = Vec::with_capacity(coeffs.n_classes());
    eta.push(0.0);
    for r in &coeffs.rows {
        eta.push(r.iter().zip(z).map(|(b, v)| b * v).sum::<f64>());
    }
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Ok(w)
}

/// `J` components sharing one (circular, axial) family pair plus the
/// concomitant coefficients of their mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct MixtureModel {
    pub components: Vec<ComponentParams>,
    pub coefficients: ConcomitantCoefficients,
}

#[derive(Deserialize)]
struct RawModel {
    components: Vec<ComponentParams>,
    coefficients: ConcomitantCoefficients,
}

impl TryFrom<RawModel> for MixtureModel {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        MixtureModel::new(r.components, r.coefficients)
    }
}

impl MixtureModel {
    pub fn new(components: Vec<ComponentParams>, coefficients: ConcomitantCoefficients) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain("a mixture needs at least one component".into()));
        }
        if coefficients.n_classes() != components.len() {
            return Err(Error::Dimension(format!(
                "{} components but coefficients for {} classes",
                components.len(),
                coefficients.n_classes()
            )));
        }
        let fam = components[0].families();
        if components.iter().any(|c| c.families() != fam) {
            return Err(Error::Domain("all components must share the same family pair".into()));
        }
        Ok(MixtureModel { components, coefficients })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn families(&self) -> (Family, Family) {
        self.components[0].families()
    }

    /// Free parameters: five per component plus `(J-1)(q+1)` coefficients.
    pub fn n_params(&self) -> usize {
        n_params(self.n_components(), self.coefficients.n_covariates())
    }

    /// Relabels the components so that new class `k` is old class
    /// `perm[k]`, re-expressing the coefficients against the new reference.
    pub fn permuted(&self, perm: &[usize]) -> Result<MixtureModel> {
        let j = self.n_components();
        let mut seen = vec![false; j];
        if perm.len() != j || perm.iter().any(|&p| p >= j || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Domain(format!("{perm:?} is not a permutation of {j} labels")));
        }
        let components = perm.iter().map(|&p| self.components[p]).collect();
        let base = self.coefficients.beta(perm[0] + 1);
        let rows = perm[1..]
            .iter()
            .map(|&p| self.coefficients.beta(p + 1).iter().zip(&base).map(|(a, b)| a - b).collect())
            .collect();
        MixtureModel::new(components, ConcomitantCoefficients::new(rows, self.coefficients.n_covariates)?)
    }

    pub(crate) fn prepare(&self) -> Vec<PreparedComponent> {
        self.components.iter().map(|c| c.prepare()).collect()
    }
}

pub fn n_params(n_components: usize, n_covariates: usize) -> usize {
    5 * n_components + (n_components - 1) * n_covariates
}

/// Bayesian information criterion `-2 logL + k ln n`.
pub fn bic(loglik: f64, n_params: usize, n: usize) -> f64 {
    -2.0 * loglik + n_params as f64 * (n as f64).ln()
}

/// Mixture density `Σ_j π_j(z) f(x, y; θ_j)`.
pub fn mixture_density(model: &MixtureModel, x: CircularAngle, y: AxialAngle, z: &[f64]) -> Result<f64> {
    let w = mixing_weights(&model.coefficients, z)?;
    Ok(model.components.iter().zip(&w).map(|(c, w)| w * crate::circula::joint_density(c, x, y)).sum())
}

/// `n × J` matrix of `ln f(x_i, y_i; θ_j)`.
pub(crate) fn ln_component_densities(prepared: &[PreparedComponent], data: &Dataset) -> DMatrix<f64> {
    let n = data.len();
    let mut out = DMatrix::zeros(n, prepared.len());
    for (j, comp) in prepared.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = comp.ln_density(data.circular[i].value(), data.axial[i].value());
        }
    }
    out
}

/// `n × J` matrix of `ln π_j(z_i)`.
pub(crate) fn ln_mixing_matrix(coeffs: &ConcomitantCoefficients, data: &Dataset) -> Result<DMatrix<f64>> {
    if coeffs.n_covariates != data.n_covariates() {
        return Err(Error::Dimension(format!(
            "data has {} covariates, coefficients expect {}",
            data.n_covariates(),
            coeffs.n_covariates
        )));
    }
    let n = data.len();
    let j = coeffs.n_classes();
    let mut out = DMatrix::zeros(n, j);
    let mut eta = vec![0.0; j];
    for i in 0..n {
        for (k, r) in coeffs.rows.iter().enumerate() {
            eta[k + 1] = r.iter().enumerate().map(|(c, b)| b * data.covariates[(i, c)]).sum();
        }
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
        for k in 0..j {
            out[(i, k)] = eta[k] - lse;
        }
    }
    Ok(out)
}

/// Posterior class probabilities and log-likelihood from log densities and
/// log weights, computed row-wise in log space.
pub(crate) fn posterior(ln_dens: &DMatrix<f64>, ln_mix: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (n, j) = ln_dens.shape();
    let mut resp = DMatrix::zeros(n, j);
    let mut ll = 0.0;
    let mut row = vec![0.0; j];
    for i in 0..n {
        for k in 0..j {
            row[k] = ln_dens[(i, k)] + ln_mix[(i, k)];
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Numerical { row: i, message: format!("log density {m}") });
        }
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        for k in 0..j {
            resp[(i, k)] = (row[k] - m).exp() / s;
        }
        ll += m + s.ln();
    }
    if !ll.is_finite() {
        return Err(Error::Numerical { row: n, message: "log-likelihood is not finite".into() });
    }
    Ok((resp, ll))
}

/// `Σ_i ln Σ_j π_j(z_i) f(x_i, y_i; θ_j)`.
pub fn log_likelihood(model: &MixtureModel, data: &Dataset) -> Result<f64> {
    let ln_dens = ln_component_densities(&model.prepare(), data);
    let ln_mix = ln_mixing_matrix(&model.coefficients, data)?;
    Ok(posterior(&ln_dens, &ln_mix)?.1)
}

/// E step: `n × J` responsibilities `û_ij`.
pub fn e_step(model: &MixtureModel, data: &Dataset) -> Result<DMatrix<f64>> {
    let ln_dens = ln_component_densities(&model.prepare(), data);
    let ln_mix = ln_mixing_matrix(&model.coefficients, data)?;
    Ok(posterior(&ln_dens, &ln_mix)?.0)
}

/// MAP labels (0-based) from responsibilities.
pub fn classify(responsibilities: &DMatrix<f64>) -> Vec<usize> {
    responsibilities
        .row_iter()
        .map(|r| {
            r.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best }).0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circula::CopulaCorrelation;
    use crate::directional::MarginalSpec;
    use std::f64::consts::PI;

    fn component(mc: f64, kc: f64, ma: f64, ka: f64, r: f64) -> ComponentParams {
        ComponentParams::new(
            MarginalSpec::new(Family::VonMisesCircular, mc, kc).unwrap(),
            MarginalSpec::new(Family::VonMisesAxial, ma, ka).unwrap(),
            CopulaCorrelation::new(r).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn weights_examples() {
        let c = ConcomitantCoefficients::zeros(3, 3);
        for w in mixing_weights(&c, &[1.0, 0.2, 1.0]).unwrap() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = ConcomitantCoefficients::new(vec![vec![-2.41, 0.55, 2.17]], 3).unwrap();
        let w = mixing_weights(&c, &[1.0, 0.0, 0.0]).unwrap();
        assert!((w[1] - 0.082_413_318_127_912_79).abs() < 1e-12);
        assert!(mixing_weights(&c, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn weights_saturate_without_overflow() {
        let c = ConcomitantCoefficients::new(vec![vec![1e4, 0.0], vec![-1e4, 0.0]], 2).unwrap();
        let w = mixing_weights(&c, &[1.0, 0.0]).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-12 && w.iter().all(|v| v.is_finite()));
        let lw = c.ln_weights(&[1.0, 0.0]).unwrap();
        assert!(lw.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn uniform_independence_loglik() {
        let comp = ComponentParams::new(
            MarginalSpec::uniform(Family::VonMisesCircular),
            MarginalSpec::uniform(Family::VonMisesAxial),
            CopulaCorrelation::ZERO,
        )
        .unwrap();
        let model = MixtureModel::new(vec![comp], ConcomitantCoefficients::zeros(1, 1)).unwrap();
        let data = Dataset::from_radians(&[0.1, 2.0, 5.0], &[0.3, 1.0, 3.0], &[]).unwrap();
        let ll = log_likelihood(&model, &data).unwrap();
        assert!((ll - 3.0 * -(2.0 * PI * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_components_split_evenly() {
        let c = component(1.0, 2.0, 0.5, 2.0, 0.3);
        let model = MixtureModel::new(vec![c, c], ConcomitantCoefficients::zeros(2, 1)).unwrap();
        let data = Dataset::from_radians(&[0.1, 2.0, 5.0], &[0.3, 1.0, 3.0], &[]).unwrap();
        let r = e_step(&model, &data).unwrap();
        assert!(r.iter().all(|v| (v - 0.5).abs() < 1e-15));
        let single = MixtureModel::new(vec![c], ConcomitantCoefficients::zeros(1, 1)).unwrap();
        let a = mixture_density(&model, CircularAngle::new(1.0), AxialAngle::new(0.4), &[1.0]).unwrap();
        let b = mixture_density(&single, CircularAngle::new(1.0), AxialAngle::new(0.4), &[1.0]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn permutation_reexpresses_reference() {
        let comps = vec![
            component(1.0, 2.0, 0.5, 2.0, 0.3),
            component(4.0, 5.0, 2.0, 3.0, -0.2),
            component(2.5, 1.0, 1.0, 1.0, 0.0),
        ];
        let coeffs = ConcomitantCoefficients::new(vec![vec![0.4, -1.0], vec![-0.3, 0.7]], 2).unwrap();
        let model = MixtureModel::new(comps, coeffs).unwrap();
        let data = Dataset::from_radians(
            &[0.5, 3.0, 4.2, 6.0],
            &[0.1, 2.0, 1.1, 3.1],
            &[vec![0.3], vec![-1.2], vec![2.0], vec![0.0]],
        )
        .unwrap();
        let ll = log_likelihood(&model, &data).unwrap();
        let p = model.permuted(&[2, 0, 1]).unwrap();
        assert!((log_likelihood(&p, &data).unwrap() - ll).abs() < 1e-9);
        let back = p.permuted(&[1, 2, 0]).unwrap();
        for (a, b) in back.coefficients.rows().iter().flatten().zip(model.coefficients.rows().iter().flatten()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(model.permuted(&[0, 0, 1]).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], vec![], vec![]).is_err());
        let x = vec![CircularAngle::new(1.0)];
        let y = vec![AxialAngle::new(1.0)];
        assert!(Dataset::new(x.clone(), y.clone(), vec![vec![2.0]]).is_err());
        assert!(Dataset::new(x.clone(), y.clone(), vec![vec![1.0, f64::NAN]]).is_err());
        assert!(Dataset::new(x, y, vec![vec![1.0, 0.5]]).is_ok());
    }
}
