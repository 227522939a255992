//! Parametric bootstrap with equal-tail percentile intervals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circula::RHO_MAX;
use crate::directional::{periodic_distance, reduce, Family};
use crate::error::{Error, Result};
use crate::mixture::{fit, Dataset, FitConfig, FitResult, MixtureModel};
use crate::simstudy::simulate_dataset;
use std::f64::consts::{PI, TAU};

const MAX_ALIGN_COMPONENTS: usize = 8;

/// Permutation `perm` such that `candidate.permuted(&perm)` best matches
/// `reference`: new class `k` is candidate class `perm[k]`.
///
/// Matching cost is the sum over classes of the circular location distance
/// plus twice the axial location distance; all `J!` orders are searched.
pub fn align_labels(reference: &MixtureModel, candidate: &MixtureModel) -> Result<Vec<usize>> {
    let j = reference.n_components();
    if candidate.n_components() != j {
        return Err(Error::Dimension(format!("{j} reference components, {} candidate", candidate.n_components())));
    }
    if j > MAX_ALIGN_COMPONENTS {
        return Err(Error::Domain(format!("alignment supports at most {MAX_ALIGN_COMPONENTS} components")));
    }
    let cost: Vec<Vec<f64>> = reference
        .components
        .iter()
        .map(|r| {
            candidate
                .components
                .iter()
                .map(|c| {
                    periodic_distance(r.circular.mu(), c.circular.mu(), TAU)
                        + 2.0 * periodic_distance(r.axial.mu(), c.axial.mu(), PI)
                })
                .collect()
        })
        .collect();
    let mut perm: Vec<usize> = (0..j).collect();
    let mut best = (f64::INFINITY, perm.clone());
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(k, &m)| cost[k][m]).sum();
        if c < best.0 - 1e-12 {
            best = (c, p.to_vec());
        }
    });
    Ok(best.1)
}

// lexicographic enumeration keeps ties resolved toward the identity
fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p[k..=i].rotate_right(1);
        permute(p, k + 1, visit);
        p[k..=i].rotate_left(1);
    }
}

/// Admissible range of a model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterKind {
    Location { period: f64 },
    Bounded { lower: f64, upper: f64 },
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInfo {
    pub name: String,
    pub kind: ParameterKind,
}

/// Names and ranges of the flattened parameter vector: for each class the
/// circular location and concentration, axial location and concentration
/// and copula correlation, then the coefficient rows of classes `2..J`.
pub fn parameter_info(model: &MixtureModel) -> Vec<ParameterInfo> {
    let mut out = Vec::new();
    for (k, c) in model.components.iter().enumerate() {
        let j = k + 1;
        let (fc, fa) = (c.circular.family(), c.axial.family());
        out.push(ParameterInfo {
            name: format!("mu_circ[{j}]"),
            kind: ParameterKind::Location { period: fc.period() },
        });
        out.push(ParameterInfo { name: format!("kappa_circ[{j}]"), kind: concentration(fc) });
        out.push(ParameterInfo { name: format!("mu_ax[{j}]"), kind: ParameterKind::Location { period: fa.period() } });
        out.push(ParameterInfo { name: format!("kappa_ax[{j}]"), kind: concentration(fa) });
        out.push(ParameterInfo {
            name: format!("rho[{j}]"),
            kind: ParameterKind::Bounded { lower: -RHO_MAX, upper: RHO_MAX },
        });
    }
    for (k, row) in model.coefficients.rows().iter().enumerate() {
        for c in 0..row.len() {
            out.push(ParameterInfo { name: format!("beta[{}][{c}]", k + 2), kind: ParameterKind::Free });
        }
    }
    out
}

fn concentration(f: Family) -> ParameterKind {
    ParameterKind::Bounded { lower: 0.0, upper: f.kappa_max() }
}

/// Flattened parameters in the order of [`parameter_info`].
pub fn parameter_vector(model: &MixtureModel) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &model.components {
        out.extend([c.circular.mu(), c.circular.kappa(), c.axial.mu(), c.axial.kappa(), c.rho.value()]);
    }
    out.extend(model.coefficients.rows().iter().flatten());
    out
}

/// Hazen quantile: the `p` quantile interpolates linearly between order
/// statistics placed at `(i - 0.5) / n`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 * p + 0.5).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} must lie in (0, 1)")));
    }
    Ok(())
}

/// Equal-tail interval from the `(1-level)/2` and `(1+level)/2` sample quantiles.
pub fn et_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if samples.len() < 2 {
        return Err(Error::Domain(format!("{} samples; at least 2 are required", samples.len())));
    }
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("sample {v} is not finite")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok((quantile(&s, a), quantile(&s, 1.0 - a)))
}

/// Equal-tail interval for a location on a circle of the given period.
///
/// Samples are unwrapped onto the arc of one period centred at `center`,
/// the quantiles are taken there, and the endpoints reduced back to
/// `[0, period)`. An interval with `lower > upper` spans the origin; one
/// covering the whole circle is returned as `(0, period)`.
pub fn circular_et_interval(samples: &[f64], level: f64, center: f64, period: f64) -> Result<(f64, f64)> {
    let unwrapped: Vec<f64> = samples.iter().map(|&s| unwrap_near(s, center, period)).collect();
    let (lo, hi) = et_interval(&unwrapped, level)?;
    if hi - lo >= period {
        return Ok((0.0, period));
    }
    Ok((reduce(lo, period), reduce(hi, period)))
}

/// The representative of `t` in `(center - period/2, center + period/2]`.
pub fn unwrap_near(t: f64, center: f64, period: f64) -> f64 {
    let d = reduce(t - center, period);
    if d > period / 2.0 {
        center + d - period
    } else {
        center + d
    }
}

/// Whether `value` lies in the closed arc running counterclockwise from
/// `lower` to `upper`.
pub fn arc_contains(lower: f64, upper: f64, value: f64, period: f64) -> bool {
    if upper - lower >= period {
        return true;
    }
    let span = reduce(upper - lower, period);
    reduce(value - lower, period) <= span
}

/// Interval for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalRow {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub kind: ParameterKind,
}

/// Bootstrap settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    /// Data-driven restarts added to the warm start in each refit.
    pub restarts: usize,
    pub fit: FitConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replicates: 1000, level: 0.95, seed: 0, restarts: 4, fit: FitConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub intervals: Vec<IntervalRow>,
    pub level: f64,
    pub requested: usize,
    /// Replicates whose refit succeeded.
    pub effective: usize,
    /// Fewer than 80% of the replicates succeeded.
    pub low_success_warning: bool,
    /// Alignment permutation per replicate, `None` for failed refits.
    pub permutations: Vec<Option<Vec<usize>>>,
    /// Aligned parameter vectors of the successful replicates.
    pub replicates: Vec<Vec<f64>>,
}

/// Seed for the `index`-th child stream of `seed`.
pub(crate) fn child_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1 << 32));
    rand::Rng::random(&mut rng)
}

/// Refits the model to datasets simulated from the fitted parameters with
/// the observed covariates held fixed, aligns labels to the original fit,
/// and forms equal-tail intervals per parameter.
pub fn parametric_bootstrap(fitted: &FitResult, data: &Dataset, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    check_level(cfg.level)?;
    if cfg.replicates < 2 {
        return Err(Error::Domain("at least 2 bootstrap replicates are required".into()));
    }
    if fitted.n != data.len() {
        return Err(Error::Dimension("fit and dataset sizes differ".into()));
    }
    let model = &fitted.model;
    let (families, j) = (model.families(), model.n_components());
    let z: Vec<Vec<f64>> = (0..data.len()).map(|i| data.covariate_row(i)).collect();
    let outcomes: Vec<Option<(Vec<usize>, Vec<f64>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let (sim, _) = simulate_dataset(model, &z, &mut rng).ok()?;
            let fc = FitConfig {
                restarts: cfg.restarts,
                seed: child_seed(cfg.seed, b as u64),
                warm_starts: vec![model.clone()],
                ..cfg.fit.clone()
            };
            let refit = fit(&sim, families, j, &fc).ok()?;
            let perm = align_labels(model, &refit.model).ok()?;
            let aligned = refit.model.permuted(&perm).ok()?;
            Some((perm, parameter_vector(&aligned)))
        })
        .collect();
    let info = parameter_info(model);
    let estimate = parameter_vector(model);
    let replicates: Vec<Vec<f64>> = outcomes.iter().flatten().map(|o| o.1.clone()).collect();
    let effective = replicates.len();
    if effective < 2 {
        return Err(Error::FitFailure {
            attempts: cfg.replicates,
            last: "fewer than 2 replicate refits succeeded".into(),
        });
    }
    let mut intervals = Vec::with_capacity(info.len());
    for (p, inf) in info.into_iter().enumerate() {
        let samples: Vec<f64> = replicates.iter().map(|r| r[p]).collect();
        let (lower, upper) = match inf.kind {
            ParameterKind::Location { period } => circular_et_interval(&samples, cfg.level, estimate[p], period)?,
            ParameterKind::Bounded { lower, upper } => {
                let (a, b) = et_interval(&samples, cfg.level)?;
                (a.clamp(lower, upper), b.clamp(lower, upper))
            }
            ParameterKind::Free => et_interval(&samples, cfg.level)?,
        };
        intervals.push(IntervalRow { name: inf.name, estimate: estimate[p], lower, upper, kind: inf.kind });
    }
    Ok(BootstrapResult {
        intervals,
        level: cfg.level,
        requested: cfg.replicates,
        effective,
        low_success_warning: (effective as f64) < 0.8 * cfg.replicates as f64,
        permutations: outcomes.into_iter().map(|o| o.map(|o| o.0)).collect(),
        replicates,
    })
}
