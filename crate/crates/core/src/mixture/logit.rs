//! Weighted multinomial logistic regression with fractional targets.

use nalgebra::{DMatrix, DVector};

use super::{ConcomitantCoefficients, Dataset};
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-6;
// standardized-scale coefficient magnitude treated as divergence
const DIVERGENCE: f64 = 50.0;

/// Outcome of the concomitant M step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub coefficients: ConcomitantCoefficients,
    /// The unpenalized problem separated or diverged and the ridge-penalized
    /// objective was maximized instead.
    pub ridge: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Affine map between original and centered/scaled covariates.
struct Standardizer {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn new(z: &DMatrix<f64>) -> Self {
        let (n, p) = z.shape();
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for c in 1..p {
            let col = z.column(c);
            let m = col.sum() / n as f64;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            if sd > 1e-12 {
                center[c] = m;
                scale[c] = sd;
            }
        }
        Standardizer { center, scale }
    }

    fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z.clone();
        for c in 1..z.ncols() {
            for v in out.column_mut(c).iter_mut() {
                *v = (*v - self.center[c]) / self.scale[c];
            }
        }
        out
    }

    fn to_standard(&self, beta: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = beta.iter().zip(&self.scale).map(|(b, s)| b * s).collect();
        b[0] = beta[0] + (1..beta.len()).map(|c| beta[c] * self.center[c]).sum::<f64>();
        b
    }

    fn to_original(&self, beta: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        b[0] = beta[0] - (1..beta.len()).map(|c| b[c] * self.center[c]).sum::<f64>();
        b
    }
}

struct Problem<'a> {
    z: &'a DMatrix<f64>,
    u: &'a DMatrix<f64>,
    classes: usize,
    penalty: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        (self.classes - 1) * self.z.ncols()
    }

    fn probabilities(&self, beta: &DVector<f64>, i: usize, out: &mut [f64]) {
        let p = self.z.ncols();
        out[0] = 0.0;
        for k in 1..self.classes {
            out[k] = (0..p).map(|c| beta[(k - 1) * p + c] * self.z[(i, c)]).sum();
        }
        let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    fn objective(&self, beta: &DVector<f64>) -> f64 {
        let p = self.z.ncols();
        let mut eta = vec![0.0; self.classes];
        let mut q = 0.0;
        for i in 0..self.z.nrows() {
            for k in 1..self.classes {
                eta[k] = (0..p).map(|c| beta[(k - 1) * p + c] * self.z[(i, c)]).sum();
            }
            let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
            for (k, e) in eta.iter().enumerate() {
                let w = self.u[(i, k)];
                if w > 0.0 {
                    q += w * (e - lse);
                }
            }
        }
        q - self.penalty * beta.norm_squared()
    }

    /// Gradient and negative Hessian of the objective.
    fn derivatives(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.z.ncols();
        let d = self.dim();
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        let mut pi = vec![0.0; self.classes];
        for i in 0..self.z.nrows() {
            self.probabilities(beta, i, &mut pi);
            let total: f64 = (0..self.classes).map(|k| self.u[(i, k)]).sum();
            for k in 1..self.classes {
                let r = self.u[(i, k)] - total * pi[k];
                for c in 0..p {
                    g[(k - 1) * p + c] += r * self.z[(i, c)];
                }
                for l in k..self.classes {
                    let w = total * pi[k] * (if k == l { 1.0 } else { 0.0 } - pi[l]);
                    for c in 0..p {
                        for e in 0..p {
                            h[((k - 1) * p + c, (l - 1) * p + e)] += w * self.z[(i, c)] * self.z[(i, e)];
                        }
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        g -= 2.0 * self.penalty * beta;
        for a in 0..d {
            h[(a, a)] += 2.0 * self.penalty;
        }
        (g, h)
    }

    /// Damped Newton ascent; returns the iterate, iteration count, and
    /// whether the gradient criterion was met without divergence.
    fn solve(&self, start: DVector<f64>) -> (DVector<f64>, usize, bool) {
        let mut beta = start;
        let mut q = self.objective(&beta);
        for it in 0..MAX_ITER {
            let (g, h) = self.derivatives(&beta);
            if g.amax() < GRAD_TOL {
                return (beta, it, true);
            }
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    let mut reg = h;
                    let shift = 1e-8 * (1.0 + reg.diagonal().amax());
                    for a in 0..reg.nrows() {
                        reg[(a, a)] += shift;
                    }
                    match reg.cholesky() {
                        Some(ch) => ch.solve(&g),
                        None => g.clone(),
                    }
                }
            };
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let cand = &beta + t * &step;
                let qc = self.objective(&cand);
                if qc >= q {
                    moved = qc > q || cand != beta;
                    beta = cand;
                    q = qc;
                    break;
                }
                t *= 0.5;
            }
            if beta.amax() > DIVERGENCE {
                return (beta, it + 1, false);
            }
            if !moved {
                // no ascent direction left at machine precision
                let (g, _) = self.derivatives(&beta);
                return (beta, it + 1, g.amax() < 1e3 * GRAD_TOL);
            }
        }
        (beta, MAX_ITER, false)
    }
}

fn validate(u: &DMatrix<f64>, data: &Dataset, warm: &ConcomitantCoefficients) -> Result<()> {
    if u.nrows() != data.len() {
        return Err(Error::Dimension(format!("{} responsibility rows for {} observations", u.nrows(), data.len())));
    }
    if u.ncols() != warm.n_classes() || warm.n_covariates() != data.n_covariates() {
        return Err(Error::Dimension("warm start does not match responsibilities and covariates".into()));
    }
    for (i, row) in u.row_iter().enumerate() {
        if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!("row {i}: responsibilities must be nonnegative")));
        }
        if (row.sum() - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("row {i}: responsibilities sum to {}", row.sum())));
        }
    }
    Ok(())
}

/// `Q(β) = Σ_i Σ_j û_ij ln π_j(z_i; β)`.
pub fn concomitant_objective(u: &DMatrix<f64>, data: &Dataset, coeffs: &ConcomitantCoefficients) -> Result<f64> {
    let ln_mix = super::ln_mixing_matrix(coeffs, data)?;
    if ln_mix.shape() != u.shape() {
        return Err(Error::Dimension("responsibilities do not match coefficients".into()));
    }
    Ok(u.iter().zip(ln_mix.iter()).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum())
}

/// Maximizes the concomitant part of the expected complete-data
/// log-likelihood by Newton's method on standardized covariates.
///
/// If the problem is separated or Newton fails to converge, the objective
/// is penalized by `1e-6·‖β‖²` and `ridge` is set in the result.
pub fn m_step_beta(u: &DMatrix<f64>, data: &Dataset, warm: &ConcomitantCoefficients) -> Result<LogitFit> {
    validate(u, data, warm)?;
    let classes = u.ncols();
    if classes == 1 {
        return Ok(LogitFit { coefficients: warm.clone(), ridge: false, iterations: 0, converged: true });
    }
    let std = Standardizer::new(data.covariates());
    let z = std.apply(data.covariates());
    let start = DVector::from_iterator((classes - 1) * z.ncols(), warm.rows().iter().flat_map(|r| std.to_standard(r)));
    let mut problem = Problem { z: &z, u, classes, penalty: 0.0 };
    let (mut beta, mut iterations, mut converged) = problem.solve(start.clone());
    let mut ridge = false;
    if !converged || !beta.iter().all(|v| v.is_finite()) {
        problem.penalty = RIDGE;
        let clipped = start.map(|v| v.clamp(-DIVERGENCE, DIVERGENCE));
        let (b, it, c) = problem.solve(clipped);
        beta = b;
        iterations += it;
        converged = c;
        ridge = true;
    }
    let p = z.ncols();
    let rows = (0..classes - 1).map(|k| std.to_original(&beta.as_slice()[k * p..(k + 1) * p])).collect();
    Ok(LogitFit { coefficients: ConcomitantCoefficients::new(rows, p)?, ridge, iterations, converged })
}
