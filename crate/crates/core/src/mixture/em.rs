//! EM with inference functions for margins in the M step.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::initial_responsibilities;
use super::logit::m_step_beta;
use super::{bic, classify, ln_mixing_matrix, n_params, posterior, ConcomitantCoefficients, Dataset, MixtureModel};
use crate::circula::{ln_circula_density, ComponentParams, CopulaSample};
use crate::directional::{weighted_mle, Family};
use crate::error::{Error, Result};

const COLLAPSE_MASS: f64 = 1e-8;
const DECREASE_TOL: f64 = 1e-8;
const STABLE_ITERATIONS: usize = 3;

/// EM settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Data-driven initializations (k-means and perturbed k-means).
    pub restarts: usize,
    /// Relative log-likelihood change regarded as stationary.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Iterations every start runs before only the best `finalists` are
    /// continued; 0 runs every start to convergence.
    pub screen_iterations: usize,
    pub finalists: usize,
    /// Additional starting models, run ahead of the data-driven starts.
    #[serde(skip)]
    pub warm_starts: Vec<MixtureModel>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 20,
            tol: 1e-8,
            max_iter: 500,
            seed: 0,
            screen_iterations: 10,
            finalists: 3,
            warm_starts: Vec::new(),
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts + self.warm_starts.len() == 0 {
            return Err(Error::Domain("at least one initialization is required".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 || self.finalists == 0 {
            return Err(Error::Domain("max_iter and finalists must be positive".into()));
        }
        Ok(())
    }
}

/// A fitted mixture with its diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MixtureModel,
    pub loglik: f64,
    /// Log-likelihood after every E step of the selected start.
    pub loglik_trace: Vec<f64>,
    /// `n × J` posterior class probabilities under `model`.
    pub responsibilities: DMatrix<f64>,
    /// 0-based MAP labels.
    pub classification: Vec<usize>,
    pub bic: f64,
    pub n_params: usize,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Initializations attempted.
    pub restarts_used: usize,
    /// Initializations abandoned after a collapse or numerical failure.
    pub failed_starts: usize,
    /// Iterations whose log-likelihood fell by more than 1e-8.
    pub loglik_decreases: usize,
    /// Whether any concomitant M step needed the ridge fallback.
    pub ridge_used: bool,
}

impl FitResult {
    /// Estimated marginal class proportions `p_j = Σ_i û_ij / n`.
    pub fn class_proportions(&self) -> Vec<f64> {
        self.responsibilities.column_iter().map(|c| c.sum() / self.n as f64).collect()
    }
}

/// Per-component marginal MLEs followed by the copula correlation with
/// both marginals fixed. Also returns the `n × J` log densities under the
/// new parameters.
fn theta_step(
    u: &DMatrix<f64>,
    data: &Dataset,
    families: (Family, Family),
) -> Result<(Vec<ComponentParams>, DMatrix<f64>)> {
    let x = data.x_values();
    let y = data.y_values();
    let n = data.len();
    let mut comps = Vec::with_capacity(u.ncols());
    let mut ln_dens = DMatrix::zeros(n, u.ncols());
    for j in 0..u.ncols() {
        let w: Vec<f64> = u.column(j).iter().copied().collect();
        let mass: f64 = w.iter().sum();
        if mass.is_nan() || mass <= COLLAPSE_MASS {
            return Err(Error::ComponentCollapse { component: j + 1, mass });
        }
        let circ = weighted_mle(families.0, &x, &w)?;
        let ax = weighted_mle(families.1, &y, &w)?;
        let (pc, pa) = (circ.prepare(), ax.prepare());
        let us: Vec<f64> = x.iter().map(|&t| pc.cdf(t)).collect();
        let vs: Vec<f64> = y.iter().map(|&t| pa.cdf(t)).collect();
        let rho = CopulaSample::new(&us, &vs, &w)?.maximize();
        for i in 0..n {
            ln_dens[(i, j)] = ln_circula_density(rho, us[i], vs[i]) + pc.ln_pdf(x[i]) + pa.ln_pdf(y[i]);
        }
        comps.push(ComponentParams::new(circ, ax, rho)?);
    }
    Ok((comps, ln_dens))
}

/// IFM M step for the component parameters given responsibilities.
pub fn m_step_theta(u: &DMatrix<f64>, data: &Dataset, families: (Family, Family)) -> Result<Vec<ComponentParams>> {
    if u.nrows() != data.len() || u.ncols() == 0 {
        return Err(Error::Dimension(format!("{}×{} responsibilities for {} rows", u.nrows(), u.ncols(), data.len())));
    }
    Ok(theta_step(u, data, families)?.0)
}

/// One EM trajectory.
struct Run {
    model: MixtureModel,
    ln_dens: DMatrix<f64>,
    resp: DMatrix<f64>,
    loglik: f64,
    trace: Vec<f64>,
    best: Option<(MixtureModel, DMatrix<f64>, f64)>,
    stable: usize,
    decreases: usize,
    ridge: bool,
    converged: bool,
}

impl Run {
    fn from_model(model: MixtureModel, data: &Dataset) -> Result<Run> {
        let prepared = model.prepare();
        let ln_dens = super::ln_component_densities(&prepared, data);
        Run::start(model, ln_dens, data, false)
    }

    fn from_responsibilities(u: &DMatrix<f64>, data: &Dataset, families: (Family, Family)) -> Result<Run> {
        let (comps, ln_dens) = theta_step(u, data, families)?;
        let beta = m_step_beta(u, data, &ConcomitantCoefficients::zeros(u.ncols(), data.n_covariates()))?;
        let model = MixtureModel::new(comps, beta.coefficients)?;
        Run::start(model, ln_dens, data, beta.ridge)
    }

    fn start(model: MixtureModel, ln_dens: DMatrix<f64>, data: &Dataset, ridge: bool) -> Result<Run> {
        let ln_mix = ln_mixing_matrix(&model.coefficients, data)?;
        let (resp, loglik) = posterior(&ln_dens, &ln_mix)?;
        Ok(Run {
            model,
            ln_dens,
            resp,
            loglik,
            trace: vec![loglik],
            best: None,
            stable: 0,
            decreases: 0,
            ridge,
            converged: false,
        })
    }

    fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    fn step(&mut self, data: &Dataset, tol: f64) -> Result<()> {
        let families = self.model.families();
        let beta = m_step_beta(&self.resp, data, &self.model.coefficients)?;
        let (comps, ln_dens) = theta_step(&self.resp, data, families)?;
        let model = MixtureModel::new(comps, beta.coefficients)?;
        let ln_mix = ln_mixing_matrix(&model.coefficients, data)?;
        let (resp, loglik) = posterior(&ln_dens, &ln_mix)?;
        self.ridge |= beta.ridge;
        if loglik < self.loglik - DECREASE_TOL {
            self.decreases += 1;
        }
        if (loglik - self.loglik).abs() <= tol * self.loglik.abs() {
            self.stable += 1;
        } else {
            self.stable = 0;
        }
        self.converged = self.stable >= STABLE_ITERATIONS;
        let prev = std::mem::replace(&mut self.model, model);
        let prev_resp = std::mem::replace(&mut self.resp, resp);
        let prev_ll = self.loglik;
        if loglik < prev_ll && self.best.as_ref().is_none_or(|b| prev_ll > b.2) {
            // kept only to honour the no-worse-than-start guarantee
            self.best = Some((prev, prev_resp, prev_ll));
        }
        self.ln_dens = ln_dens;
        self.loglik = loglik;
        self.trace.push(loglik);
        Ok(())
    }

    fn advance(&mut self, data: &Dataset, tol: f64, until: usize) -> Result<()> {
        while !self.converged && self.iterations() < until {
            self.step(data, tol)?;
        }
        Ok(())
    }

    /// The final state, or the best state visited if the final
    /// log-likelihood fell below the starting one.
    fn result_state(self) -> (MixtureModel, DMatrix<f64>, f64, Run) {
        match self.best {
            Some((ref m, ref r, ll)) if self.loglik < self.trace[0] => {
                let (m, r) = (m.clone(), r.clone());
                (m, r, ll, self)
            }
            _ => (self.model.clone(), self.resp.clone(), self.loglik, self),
        }
    }
}

fn check_inputs(data: &Dataset, families: (Family, Family), j: usize) -> Result<()> {
    if j == 0 {
        return Err(Error::Domain("the number of components must be at least 1".into()));
    }
    if data.len() <= j {
        return Err(Error::Degenerate(format!("{} observations cannot support {j} components", data.len())));
    }
    if !families.0.is_circular() || families.1.is_circular() {
        return Err(Error::Domain(format!("{} / {} is not a (circular, axial) family pair", families.0, families.1)));
    }
    Ok(())
}

fn start_run(data: &Dataset, families: (Family, Family), j: usize, cfg: &FitConfig, index: usize) -> Result<Run> {
    if index < cfg.warm_starts.len() {
        let m = &cfg.warm_starts[index];
        if m.n_components() != j || m.families() != families {
            return Err(Error::Dimension("warm start does not match the requested model".into()));
        }
        return Run::from_model(m.clone(), data);
    }
    if j == 1 {
        return Run::from_responsibilities(&DMatrix::from_element(data.len(), 1, 1.0), data, families);
    }
    let r = index - cfg.warm_starts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(r as u64);
    let u = initial_responsibilities(data, j, r, &mut rng);
    Run::from_responsibilities(&u, data, families)
}

/// Fits a `J`-component mixture by EM from several initializations and
/// keeps the one with the highest log-likelihood.
pub fn fit(data: &Dataset, families: (Family, Family), j: usize, cfg: &FitConfig) -> Result<FitResult> {
    check_inputs(data, families, j)?;
    cfg.validate()?;
    let starts = if j == 1 { cfg.warm_starts.len() + 1 } else { cfg.warm_starts.len() + cfg.restarts };
    let screen = if cfg.screen_iterations > 0 && starts > cfg.finalists { cfg.screen_iterations } else { cfg.max_iter };
    let first: Vec<Result<Run>> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut run = start_run(data, families, j, cfg, s)?;
            run.advance(data, cfg.tol, screen.min(cfg.max_iter))?;
            Ok(run)
        })
        .collect();

    let mut failed = 0;
    let mut last_error = String::new();
    let mut alive: Vec<(usize, Run)> = Vec::new();
    for (s, r) in first.into_iter().enumerate() {
        match r {
            Ok(run) => alive.push((s, run)),
            Err(e) => {
                failed += 1;
                last_error = e.to_string();
            }
        }
    }
    if screen < cfg.max_iter {
        alive.sort_by(|a, b| b.1.loglik.total_cmp(&a.1.loglik).then(a.0.cmp(&b.0)));
        alive.truncate(cfg.finalists);
        let continued: Vec<(usize, Result<Run>)> = alive
            .into_par_iter()
            .map(|(s, mut run)| {
                let r = run.advance(data, cfg.tol, cfg.max_iter).map(|_| run);
                (s, r)
            })
            .collect();
        alive = Vec::new();
        for (s, r) in continued {
            match r {
                Ok(run) => alive.push((s, run)),
                Err(e) => {
                    failed += 1;
                    last_error = e.to_string();
                }
            }
        }
    }

    let mut best: Option<(MixtureModel, DMatrix<f64>, f64, Run)> = None;
    for (_, run) in alive {
        let state = run.result_state();
        if best.as_ref().is_none_or(|b| state.2 > b.2) {
            best = Some(state);
        }
    }
    let (model, responsibilities, loglik, run) =
        best.ok_or(Error::FitFailure { attempts: starts, last: last_error })?;
    let k = n_params(j, data.n_covariates());
    Ok(FitResult {
        classification: classify(&responsibilities),
        bic: bic(loglik, k, data.len()),
        n_params: k,
        n: data.len(),
        converged: run.converged,
        iterations: run.iterations(),
        restarts_used: starts,
        failed_starts: failed,
        loglik_decreases: run.decreases,
        ridge_used: run.ridge,
        loglik_trace: run.trace,
        model,
        responsibilities,
        loglik,
    })
}
