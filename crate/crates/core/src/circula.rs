//! The circula built from the uniparametric bivariate wrapped Cauchy on the
//! torus, and the circular–axial density it induces.
//!
//! With `u = F_circ(x)` and `v = F_axial(y)` the joint density is
//! `c_ρ(u, v) f_circ(x) f_axial(y)` where
//!
//! ```text
//! c_ρ(u, v) = (1 - ρ²) / (1 + ρ² - 2|ρ| cos 2πu cos 2πv - 2ρ sin 2πu sin 2πv)
//! ```

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::directional::{reduce, AxialAngle, CircularAngle, Family, MarginalSpec, PreparedMarginal};
use crate::error::{Error, Result};
use crate::optim::bracketed_maximize;

/// Largest admissible `|ρ|`; the copula degenerates at `|ρ| = 1`.
pub const RHO_MAX: f64 = 1.0 - 1e-6;

/// Probabilities are kept strictly below one before scaling by 2π.
const U_MAX: f64 = 1.0 - 1e-15;

/// Copula correlation `ρ`, stored clamped to `[-RHO_MAX, RHO_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CopulaCorrelation(f64);

impl CopulaCorrelation {
    pub const ZERO: CopulaCorrelation = CopulaCorrelation(0.0);

    /// Accepts any `ρ ∈ [-1, 1]`; values beyond `RHO_MAX` in magnitude are clamped.
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho.abs() <= 1.0) {
            return Err(Error::Domain(format!("copula correlation {rho} outside [-1, 1]")));
        }
        Ok(CopulaCorrelation(rho.clamp(-RHO_MAX, RHO_MAX)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CopulaCorrelation {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        CopulaCorrelation::new(v)
    }
}

impl From<CopulaCorrelation> for f64 {
    fn from(r: CopulaCorrelation) -> f64 {
        r.0
    }
}

/// A point on the torus `[0, 2π)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub delta1: f64,
    pub delta2: f64,
}

impl TorusPoint {
    pub fn new(delta1: f64, delta2: f64) -> Self {
        TorusPoint { delta1: reduce(delta1, TAU), delta2: reduce(delta2, TAU) }
    }
}

#[inline]
fn kernel(rho: f64, a: f64, b: f64) -> f64 {
    // a = cos δ1 cos δ2, b = sin δ1 sin δ2
    1.0 + rho * rho - 2.0 * rho.abs() * a - 2.0 * rho * b
}

/// Uniparametric bivariate wrapped Cauchy density on the torus.
pub fn bwc_density(rho: CopulaCorrelation, p: TorusPoint) -> f64 {
    let r = rho.0;
    let (s1, c1) = p.delta1.sin_cos();
    let (s2, c2) = p.delta2.sin_cos();
    (1.0 - r * r) / (4.0 * PI * PI * kernel(r, c1 * c2, s1 * s2))
}

/// Copula density `c_ρ(u, v)` on the unit square.
pub fn circula_density(rho: CopulaCorrelation, u: f64, v: f64) -> f64 {
    let r = rho.0;
    let (s1, c1) = (TAU * u).sin_cos();
    let (s2, c2) = (TAU * v).sin_cos();
    (1.0 - r * r) / kernel(r, c1 * c2, s1 * s2)
}

/// `ln c_ρ(u, v)`.
pub fn ln_circula_density(rho: CopulaCorrelation, u: f64, v: f64) -> f64 {
    let r = rho.0;
    let (s1, c1) = (TAU * u).sin_cos();
    let (s2, c2) = (TAU * v).sin_cos();
    (1.0 - r * r).ln() - kernel(r, c1 * c2, s1 * s2).ln()
}

#[derive(Deserialize)]
struct RawComponent {
    circular: MarginalSpec,
    axial: MarginalSpec,
    rho: CopulaCorrelation,
}

/// Parameters of one circular–axial component: circular marginal, axial
/// marginal and copula correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent")]
pub struct ComponentParams {
    pub circular: MarginalSpec,
    pub axial: MarginalSpec,
    pub rho: CopulaCorrelation,
}

impl TryFrom<RawComponent> for ComponentParams {
    type Error = Error;

    fn try_from(r: RawComponent) -> Result<Self> {
        ComponentParams::new(r.circular, r.axial, r.rho)
    }
}

impl ComponentParams {
    pub fn new(circular: MarginalSpec, axial: MarginalSpec, rho: CopulaCorrelation) -> Result<Self> {
        if !circular.family().is_circular() {
            return Err(Error::Domain(format!("{} is not a circular family", circular.family())));
        }
        if axial.family().is_circular() {
            return Err(Error::Domain(format!("{} is not an axial family", axial.family())));
        }
        Ok(ComponentParams { circular, axial, rho })
    }

    pub fn families(&self) -> (Family, Family) {
        (self.circular.family(), self.axial.family())
    }

    pub fn prepare(&self) -> PreparedComponent {
        PreparedComponent { circular: self.circular.prepare(), axial: self.axial.prepare(), rho: self.rho }
    }
}

/// Circular–axial density `c_ρ(F_circ(x), F_axial(y)) f_circ(x) f_axial(y)`.
pub fn joint_density(theta: &ComponentParams, x: CircularAngle, y: AxialAngle) -> f64 {
    let (x, y) = (x.value(), y.value());
    circula_density(theta.rho, theta.circular.cdf(x), theta.axial.cdf(y)) * theta.circular.pdf(x) * theta.axial.pdf(y)
}

/// Conditional law of the second torus coordinate given the first under
/// [`bwc_density`]: a circular wrapped Cauchy centred at `sign(ρ) δ1` with
/// concentration `|ρ|`.
pub fn conditional_wc(rho: CopulaCorrelation, delta1: f64) -> MarginalSpec {
    let r = rho.0;
    if r == 0.0 {
        return MarginalSpec::uniform(Family::WrappedCauchyCircular);
    }
    MarginalSpec::new(Family::WrappedCauchyCircular, r.signum() * delta1, r.abs())
        .expect("|rho| < 1 is a valid wrapped Cauchy concentration")
}

/// Draws one `(x, y)` pair: `y` by inverse transform of the axial marginal,
/// then the circular coordinate from the wrapped Cauchy conditional on the
/// torus, mapped back through the circular inverse cdf.
pub fn sample_pair<R: Rng + ?Sized>(theta: &ComponentParams, rng: &mut R) -> (CircularAngle, AxialAngle) {
    let nu: f64 = rng.random();
    let y = theta.axial.inv_cdf(nu).expect("nu in [0, 1)");
    let delta1 = TAU * nu;
    let delta2 = conditional_wc(theta.rho, delta1).sample(rng);
    let x = theta.circular.inv_cdf((delta2 / TAU).min(U_MAX)).expect("scaled angle in [0, 1)");
    (CircularAngle::new(x), AxialAngle::new(y))
}

/// A component with prepared marginals for repeated evaluation and sampling.
#[derive(Debug, Clone)]
pub struct PreparedComponent {
    pub circular: PreparedMarginal,
    pub axial: PreparedMarginal,
    pub rho: CopulaCorrelation,
}

impl PreparedComponent {
    pub fn ln_density(&self, x: f64, y: f64) -> f64 {
        ln_circula_density(self.rho, self.circular.cdf(x), self.axial.cdf(y))
            + self.circular.ln_pdf(x)
            + self.axial.ln_pdf(y)
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        circula_density(self.rho, self.circular.cdf(x), self.axial.cdf(y)) * self.circular.pdf(x) * self.axial.pdf(y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (CircularAngle, AxialAngle) {
        let nu: f64 = rng.random();
        let y = self.axial.inv_cdf(nu).expect("nu in [0, 1)");
        let delta2 = conditional_wc(self.rho, TAU * nu).sample(rng);
        let x = self.circular.inv_cdf((delta2 / TAU).min(U_MAX)).expect("scaled angle in [0, 1)");
        (CircularAngle::new(x), AxialAngle::new(y))
    }
}

/// Copula-scale observations `(cos 2πu cos 2πv, sin 2πu sin 2πv)` with their weights.
pub(crate) struct CopulaSample {
    terms: Vec<(f64, f64, f64)>,
    total: f64,
}

impl CopulaSample {
    pub(crate) fn new(us: &[f64], vs: &[f64], weights: &[f64]) -> Result<Self> {
        if us.len() != vs.len() || us.len() != weights.len() {
            return Err(Error::Dimension("pairs and weights differ in length".into()));
        }
        let mut terms = Vec::with_capacity(us.len());
        let mut total = 0.0;
        for ((&u, &v), &w) in us.iter().zip(vs).zip(weights) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Domain(format!("weight {w} is not a nonnegative finite number")));
            }
            if w == 0.0 {
                continue;
            }
            let (s1, c1) = (TAU * u).sin_cos();
            let (s2, c2) = (TAU * v).sin_cos();
            terms.push((c1 * c2, s1 * s2, w));
            total += w;
        }
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Degenerate("all weights are zero".into()));
        }
        Ok(CopulaSample { terms, total })
    }

    pub(crate) fn loglik(&self, rho: f64) -> f64 {
        let mut acc = self.total * (1.0 - rho * rho).ln();
        for &(a, b, w) in &self.terms {
            acc -= w * kernel(rho, a, b).ln();
        }
        acc
    }

    pub(crate) fn maximize(&self) -> CopulaCorrelation {
        let (rho, _) = bracketed_maximize(|r| self.loglik(r), -RHO_MAX, RHO_MAX, 41, 1e-8);
        CopulaCorrelation(rho.clamp(-RHO_MAX, RHO_MAX))
    }
}

/// `Σ w_i ln c_ρ(u_i, v_i)`.
pub fn copula_loglik(rho: CopulaCorrelation, us: &[f64], vs: &[f64], weights: &[f64]) -> Result<f64> {
    Ok(CopulaSample::new(us, vs, weights)?.loglik(rho.0))
}

/// Maximizes `Σ w_i ln c_ρ(u_i, v_i)` over `ρ ∈ [-RHO_MAX, RHO_MAX]`.
pub fn rho_mle_from_uniforms(us: &[f64], vs: &[f64], weights: &[f64]) -> Result<CopulaCorrelation> {
    Ok(CopulaSample::new(us, vs, weights)?.maximize())
}

/// Second IFM stage: the copula correlation maximizing the weighted copula
/// log-likelihood with both marginals held fixed.
pub fn weighted_rho_mle(
    pairs: &[(CircularAngle, AxialAngle)],
    weights: &[f64],
    circular: &MarginalSpec,
    axial: &MarginalSpec,
) -> Result<CopulaCorrelation> {
    let (pc, pa) = (circular.prepare(), axial.prepare());
    let us: Vec<f64> = pairs.iter().map(|(x, _)| pc.cdf(x.value())).collect();
    let vs: Vec<f64> = pairs.iter().map(|(_, y)| pa.cdf(y.value())).collect();
    rho_mle_from_uniforms(&us, &vs, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rho(r: f64) -> CopulaCorrelation {
        CopulaCorrelation::new(r).unwrap()
    }

    #[test]
    fn bwc_examples() {
        let p = TorusPoint::new(1.3, 4.0);
        assert!((bwc_density(rho(0.0), p) - 1.0 / (4.0 * PI * PI)).abs() < 1e-16);
        let at0 = bwc_density(rho(0.5), TorusPoint::new(0.0, 0.0));
        assert!((at0 - 3.0 / (4.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn circula_examples() {
        assert_eq!(circula_density(rho(0.0), 0.3, 0.8), 1.0);
        let v = circula_density(rho(0.7), 0.25, 0.25);
        assert!((v - 0.51 / 0.09).abs() < 1e-12);
        let w = circula_density(rho(-0.7), 0.25, 0.75);
        assert!((w - v).abs() < 1e-12);
    }

    #[test]
    fn circula_is_scaled_bwc() {
        for &r in &[-0.8, -0.2, 0.4, 0.95] {
            for i in 0..10 {
                let (u, v) = (i as f64 * 0.097, 0.9 - i as f64 * 0.083);
                let a = circula_density(rho(r), u, v);
                let b = 4.0 * PI * PI * bwc_density(rho(r), TorusPoint::new(TAU * u, TAU * v));
                assert!((a - b).abs() < 1e-10 * a);
            }
        }
    }

    #[test]
    fn correlation_clamped_and_validated() {
        assert_eq!(rho(1.0).value(), RHO_MAX);
        assert_eq!(rho(-1.0).value(), -RHO_MAX);
        assert!(CopulaCorrelation::new(1.01).is_err());
        assert!(CopulaCorrelation::new(f64::NAN).is_err());
    }

    #[test]
    fn component_family_kinds_checked() {
        let c = MarginalSpec::uniform(Family::VonMisesCircular);
        let a = MarginalSpec::uniform(Family::VonMisesAxial);
        assert!(ComponentParams::new(c, a, rho(0.1)).is_ok());
        assert!(ComponentParams::new(a, c, rho(0.1)).is_err());
        assert!(ComponentParams::new(c, c, rho(0.1)).is_err());
    }

    #[test]
    fn conditional_examples() {
        assert!(conditional_wc(rho(0.0), 2.0).is_uniform());
        let c = conditional_wc(rho(0.6), 1.2);
        assert!((c.mu() - 1.2).abs() < 1e-15 && (c.kappa() - 0.6).abs() < 1e-15);
        let n = conditional_wc(rho(-0.6), 1.2);
        assert!((n.mu() - (TAU - 1.2)).abs() < 1e-12 && (n.kappa() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn rho_mle_rejects_zero_weights() {
        assert!(matches!(rho_mle_from_uniforms(&[0.1, 0.2], &[0.3, 0.4], &[0.0, 0.0]), Err(Error::Degenerate(_))));
    }
}
