//! Univariate circular and axial families: von Mises and wrapped Cauchy on
//! the circle `[0, 2π)` and their wrapped versions on the semicircle `[0, π)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::nelder_mead_maximize;
use crate::quadrature::{gauss_legendre_low, integrate};
use crate::special::{bessel_i0, bessel_ratio, bessel_ratio_derivative, inverse_bessel_ratio, KAPPA_MAX_VM};

pub use crate::special::KAPPA_MAX_VM as VM_KAPPA_MAX;

/// Largest wrapped Cauchy concentration reachable by estimation.
pub const WC_KAPPA_MAX: f64 = 1.0 - 1e-6;

/// Reduces `t` into `[0, period)`.
#[inline]
pub fn reduce(t: f64, period: f64) -> f64 {
    let r = t.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Shortest distance between two angles with the given period.
#[inline]
pub fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = reduce(a - b, period);
    d.min(period - d)
}

/// A direction in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct CircularAngle(f64);

impl CircularAngle {
    pub fn new(radians: f64) -> Self {
        CircularAngle(reduce(radians, TAU))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for CircularAngle {
    fn from(v: f64) -> Self {
        CircularAngle::new(v)
    }
}

impl From<CircularAngle> for f64 {
    fn from(a: CircularAngle) -> f64 {
        a.0
    }
}

/// An orientation (undirected line) in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct AxialAngle(f64);

impl AxialAngle {
    pub fn new(radians: f64) -> Self {
        AxialAngle(reduce(radians, PI))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for AxialAngle {
    fn from(v: f64) -> Self {
        AxialAngle::new(v)
    }
}

impl From<AxialAngle> for f64 {
    fn from(a: AxialAngle) -> f64 {
        a.0
    }
}

/// The four marginal families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Circular von Mises.
    #[serde(rename = "VM")]
    VonMisesCircular,
    /// Circular wrapped Cauchy.
    #[serde(rename = "WC")]
    WrappedCauchyCircular,
    /// Axial von Mises (von Mises wrapped onto the semicircle).
    #[serde(rename = "AX")]
    VonMisesAxial,
    /// Axial wrapped Cauchy.
    #[serde(rename = "AXWC")]
    WrappedCauchyAxial,
}

impl Family {
    pub const ALL: [Family; 4] =
        [Family::VonMisesCircular, Family::WrappedCauchyCircular, Family::VonMisesAxial, Family::WrappedCauchyAxial];

    pub fn period(self) -> f64 {
        if self.is_circular() {
            TAU
        } else {
            PI
        }
    }

    pub fn is_circular(self) -> bool {
        matches!(self, Family::VonMisesCircular | Family::WrappedCauchyCircular)
    }

    pub fn is_von_mises(self) -> bool {
        matches!(self, Family::VonMisesCircular | Family::VonMisesAxial)
    }

    pub fn kappa_max(self) -> f64 {
        if self.is_von_mises() {
            KAPPA_MAX_VM
        } else {
            WC_KAPPA_MAX
        }
    }

    /// Short code: `VM`, `WC`, `AX` or `AXWC`.
    pub fn code(self) -> &'static str {
        match self {
            Family::VonMisesCircular => "VM",
            Family::WrappedCauchyCircular => "WC",
            Family::VonMisesAxial => "AX",
            Family::WrappedCauchyAxial => "AXWC",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "VM" | "VMCIRC" => Ok(Family::VonMisesCircular),
            "WC" | "WCCIRC" => Ok(Family::WrappedCauchyCircular),
            "AX" | "VMAX" => Ok(Family::VonMisesAxial),
            "AXWC" | "WCAX" => Ok(Family::WrappedCauchyAxial),
            other => Err(Error::Domain(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: Family,
    mu: f64,
    kappa: f64,
}

/// A fully specified marginal law: family, location and concentration.
///
/// The location is reduced modulo the family period on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct MarginalSpec {
    family: Family,
    mu: f64,
    kappa: f64,
}

impl TryFrom<RawSpec> for MarginalSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        MarginalSpec::new(r.family, r.mu, r.kappa)
    }
}

impl From<MarginalSpec> for RawSpec {
    fn from(s: MarginalSpec) -> Self {
        RawSpec { family: s.family, mu: s.mu, kappa: s.kappa }
    }
}

impl MarginalSpec {
    pub fn new(family: Family, mu: f64, kappa: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Domain(format!("{family}: location must be finite, got {mu}")));
        }
        let ok = kappa.is_finite()
            && kappa >= 0.0
            && if family.is_von_mises() { kappa <= KAPPA_MAX_VM } else { kappa < 1.0 };
        if !ok {
            let range = if family.is_von_mises() { "[0, 500]" } else { "[0, 1)" };
            return Err(Error::Domain(format!("{family}: concentration {kappa} outside {range}")));
        }
        Ok(MarginalSpec { family, mu: reduce(mu, family.period()), kappa })
    }

    /// The uniform law of the family's support.
    pub fn uniform(family: Family) -> Self {
        MarginalSpec { family, mu: 0.0, kappa: 0.0 }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn period(&self) -> f64 {
        self.family.period()
    }

    pub fn is_uniform(&self) -> bool {
        self.kappa == 0.0
    }

    pub fn pdf(&self, t: f64) -> f64 {
        Normalizer::new(self).pdf(self, t)
    }

    pub fn ln_pdf(&self, t: f64) -> f64 {
        Normalizer::new(self).ln_pdf(self, t)
    }

    /// `F(t) = ∫_0^t f`, with `t` reduced into `[0, period)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let p = self.period();
        let t = reduce(t, p);
        if self.is_uniform() {
            return t / p;
        }
        match self.family {
            Family::WrappedCauchyCircular => wc_cdf(t, self.mu, self.kappa),
            Family::WrappedCauchyAxial => wc_cdf(2.0 * t, 2.0 * self.mu, self.kappa * self.kappa),
            _ => {
                let norm = Normalizer::new(self);
                let f = |s: f64| norm.pdf(self, s);
                integrate(&f, 0.0, t).value.clamp(0.0, 1.0)
            }
        }
    }

    /// Inverse cdf on `[0, 1)`; the result lies in `[0, period)`.
    pub fn inv_cdf(&self, u: f64) -> Result<f64> {
        check_probability(u)?;
        let p = self.period();
        if self.is_uniform() {
            return Ok(u * p);
        }
        Ok(match self.family {
            Family::WrappedCauchyCircular => wc_inv_cdf(u, self.mu, self.kappa),
            Family::WrappedCauchyAxial => 0.5 * wc_inv_cdf(u, 2.0 * self.mu, self.kappa * self.kappa),
            _ => self.vm_inv_cdf(u),
        })
    }

    // Bisection on incrementally integrated mass down to a 1e-6 bracket, then
    // Newton with the density as derivative.
    fn vm_inv_cdf(&self, u: f64) -> f64 {
        let p = self.period();
        let norm = Normalizer::new(self);
        let f = |s: f64| norm.pdf(self, s);
        let (mut lo, mut hi) = (0.0, p);
        let mut f_lo = 0.0;
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            let f_mid = f_lo + integrate(&f, lo, mid).value;
            if f_mid <= u {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        let base = (lo, f_lo);
        let (mut a, mut b) = (lo, hi);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..60 {
            let g = base.1 + integrate(&f, base.0, t).value - u;
            if g.abs() < 1e-15 {
                break;
            }
            if g > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let mut next = t - g / f(t);
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            let step = (next - t).abs();
            t = next;
            if step < 1e-15 * p {
                break;
            }
        }
        reduce(t, p)
    }

    /// Draws one angle by inverse-transform sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.inv_cdf(u).expect("uniform draw lies in [0, 1)")
    }

    /// Precomputes the normalizing constant and, for von Mises families, a
    /// cumulative table that makes repeated cdf / inverse-cdf calls cheap.
    pub fn prepare(&self) -> PreparedMarginal {
        PreparedMarginal::new(*self)
    }

    /// `Σ w_i log f(t_i)`.
    pub fn weighted_loglik(&self, data: &[f64], weights: &[f64]) -> f64 {
        let norm = Normalizer::new(self);
        data.iter().zip(weights).filter(|(_, &w)| w > 0.0).map(|(&t, &w)| w * norm.ln_pdf(self, t)).sum()
    }

    /// Same law with the location re-expressed in `(-period/2, period/2]`.
    pub fn signed_mu(&self) -> f64 {
        let p = self.period();
        if self.mu > 0.5 * p {
            self.mu - p
        } else {
            self.mu
        }
    }
}

fn check_probability(u: f64) -> Result<()> {
    if (0.0..1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {u} outside [0, 1)")))
    }
}

/// Cached normalization of a spec (`1 / (2π I0)` etc.).
#[derive(Debug, Clone, Copy)]
struct Normalizer {
    scale: f64,
    ln_scale: f64,
}

impl Normalizer {
    fn new(spec: &MarginalSpec) -> Self {
        let k = spec.kappa;
        let scale = match spec.family {
            Family::VonMisesCircular => 1.0 / (TAU * bessel_i0(k)),
            Family::VonMisesAxial => 1.0 / (PI * bessel_i0(k)),
            Family::WrappedCauchyCircular => (1.0 - k * k) / TAU,
            Family::WrappedCauchyAxial => (1.0 - k.powi(4)) / PI,
        };
        Normalizer { scale, ln_scale: scale.ln() }
    }

    #[inline]
    fn pdf(&self, s: &MarginalSpec, t: f64) -> f64 {
        let k = s.kappa;
        if k == 0.0 {
            return 1.0 / s.period();
        }
        let d = t - s.mu;
        match s.family {
            Family::VonMisesCircular => self.scale * (k * d.cos()).exp(),
            Family::VonMisesAxial => self.scale * (k * d.cos()).cosh(),
            Family::WrappedCauchyCircular => self.scale / (1.0 + k * k - 2.0 * k * d.cos()),
            Family::WrappedCauchyAxial => {
                let k2 = k * k;
                self.scale / (1.0 + k2 * k2 - 2.0 * k2 * (2.0 * d).cos())
            }
        }
    }

    #[inline]
    fn ln_pdf(&self, s: &MarginalSpec, t: f64) -> f64 {
        let k = s.kappa;
        if k == 0.0 {
            return -s.period().ln();
        }
        let d = t - s.mu;
        match s.family {
            Family::VonMisesCircular => self.ln_scale + k * d.cos(),
            Family::VonMisesAxial => self.ln_scale + ln_cosh(k * d.cos()),
            Family::WrappedCauchyCircular => self.ln_scale - (1.0 + k * k - 2.0 * k * d.cos()).ln(),
            Family::WrappedCauchyAxial => {
                let k2 = k * k;
                self.ln_scale - (1.0 + k2 * k2 - 2.0 * k2 * (2.0 * d).cos()).ln()
            }
        }
    }
}

#[inline]
fn ln_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Continuous antiderivative of the circular wrapped Cauchy density
/// centred at zero; increases by one per turn.
fn wc_antiderivative(theta: f64, c: f64) -> f64 {
    let k = ((theta + PI) / TAU).floor();
    let w = theta - TAU * k;
    let half = 0.5 * w;
    k + (c * half.sin()).atan2(half.cos()) / PI
}

/// Closed-form circular wrapped Cauchy cdf from 0 to `t ∈ [0, 2π]`.
pub(crate) fn wc_cdf(t: f64, mu: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return t / TAU;
    }
    let c = (1.0 + rho) / (1.0 - rho);
    (wc_antiderivative(t - mu, c) - wc_antiderivative(-mu, c)).clamp(0.0, 1.0)
}

pub(crate) fn wc_inv_cdf(u: f64, mu: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return u * TAU;
    }
    let c = (1.0 + rho) / (1.0 - rho);
    let h = u + wc_antiderivative(-mu, c);
    let k = (h + 0.5).floor();
    let g = h - k;
    let w = 2.0 * ((PI * g).tan() / c).atan();
    reduce(w + TAU * k + mu, TAU)
}

const TABLE_PANELS: usize = 256;

/// A marginal with cached normalizer and, for von Mises families, a table
/// of cumulative mass at equally spaced nodes.
#[derive(Debug, Clone)]
pub struct PreparedMarginal {
    spec: MarginalSpec,
    norm: Normalizer,
    table: Option<CdfTable>,
}

#[derive(Debug, Clone)]
struct CdfTable {
    width: f64,
    cumulative: Vec<f64>,
    // every panel is resolved by the low-order rule
    low_order: bool,
}

impl PreparedMarginal {
    pub fn new(spec: MarginalSpec) -> Self {
        let norm = Normalizer::new(&spec);
        let table = (spec.family.is_von_mises() && !spec.is_uniform()).then(|| {
            let width = spec.period() / TABLE_PANELS as f64;
            let f = |s: f64| norm.pdf(&spec, s);
            let build = |panel: &dyn Fn(f64, f64) -> f64| {
                let mut cumulative = Vec::with_capacity(TABLE_PANELS + 1);
                let mut acc = 0.0;
                cumulative.push(0.0);
                for k in 0..TABLE_PANELS {
                    let a = k as f64 * width;
                    acc += panel(a, a + width);
                    cumulative.push(acc);
                }
                cumulative
            };
            // the density is normalized, so the total exposes any panel the
            // low-order rule fails to resolve
            let cumulative = build(&|a, b| gauss_legendre_low(&f, a, b));
            if (cumulative[TABLE_PANELS] - 1.0).abs() < 1e-12 {
                CdfTable { width, cumulative, low_order: true }
            } else {
                CdfTable { width, cumulative: build(&|a, b| integrate(&f, a, b).value), low_order: false }
            }
        });
        PreparedMarginal { spec, norm, table }
    }

    pub fn spec(&self) -> &MarginalSpec {
        &self.spec
    }

    #[inline]
    pub fn pdf(&self, t: f64) -> f64 {
        self.norm.pdf(&self.spec, t)
    }

    #[inline]
    pub fn ln_pdf(&self, t: f64) -> f64 {
        self.norm.ln_pdf(&self.spec, t)
    }

    fn partial(&self, table: &CdfTable, k: usize, t: f64) -> f64 {
        let a = k as f64 * table.width;
        let f = |s: f64| self.norm.pdf(&self.spec, s);
        if table.low_order {
            gauss_legendre_low(&f, a, t)
        } else {
            integrate(&f, a, t).value
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let s = &self.spec;
        let p = s.period();
        let t = reduce(t, p);
        match &self.table {
            None => s.cdf(t),
            Some(table) => {
                let k = ((t / table.width) as usize).min(TABLE_PANELS - 1);
                (table.cumulative[k] + self.partial(table, k, t)).clamp(0.0, 1.0)
            }
        }
    }

    pub fn inv_cdf(&self, u: f64) -> Result<f64> {
        check_probability(u)?;
        let table = match &self.table {
            None => return self.spec.inv_cdf(u),
            Some(t) => t,
        };
        let k = table.cumulative[1..TABLE_PANELS].partition_point(|&c| c <= u);
        let (mut a, mut b) = (k as f64 * table.width, (k + 1) as f64 * table.width);
        let (fa, fb) = (table.cumulative[k], table.cumulative[k + 1]);
        let mut t = if fb > fa { a + (u - fa) / (fb - fa) * (b - a) } else { 0.5 * (a + b) };
        t = t.clamp(a, b);
        for _ in 0..60 {
            let g = fa + self.partial(table, k, t) - u;
            if g.abs() < 1e-15 {
                break;
            }
            if g > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let mut next = t - g / self.pdf(t);
            if !(next >= a && next <= b) {
                next = 0.5 * (a + b);
            }
            let step = (next - t).abs();
            t = next;
            if step < 1e-15 * table.width || b - a < 1e-15 {
                break;
            }
        }
        Ok(reduce(t, self.spec.period()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.inv_cdf(u).expect("uniform draw lies in [0, 1)")
    }
}

fn validate_weighted(data: &[f64], weights: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Degenerate("no observations".into()));
    }
    if data.len() != weights.len() {
        return Err(Error::Dimension(format!("{} angles but {} weights", data.len(), weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Domain(format!("weight {w} is not a nonnegative finite number")));
    }
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate("all weights are zero".into()));
    }
    Ok(total)
}

/// Weighted resultant `(Σ w cos(m t), Σ w sin(m t))` divided by `Σ w`.
fn weighted_resultant(data: &[f64], weights: &[f64], m: f64, total: f64) -> (f64, f64) {
    let (mut c, mut s) = (0.0, 0.0);
    for (&t, &w) in data.iter().zip(weights) {
        let (sn, cs) = (m * t).sin_cos();
        c += w * cs;
        s += w * sn;
    }
    (c / total, s / total)
}

/// Weighted maximum-likelihood estimate of a marginal law.
///
/// Angles are reduced modulo the family period. Concentrations are capped
/// at [`VM_KAPPA_MAX`] and [`WC_KAPPA_MAX`].
pub fn weighted_mle(family: Family, data: &[f64], weights: &[f64]) -> Result<MarginalSpec> {
    let total = validate_weighted(data, weights)?;
    let p = family.period();
    let data: Vec<f64> = data.iter().map(|&t| reduce(t, p)).collect();
    match family {
        Family::VonMisesCircular => {
            let (c, s) = weighted_resultant(&data, weights, 1.0, total);
            let r = c.hypot(s).min(1.0);
            let mu = if r > 0.0 { s.atan2(c) } else { 0.0 };
            MarginalSpec::new(family, mu, inverse_bessel_ratio(r))
        }
        Family::WrappedCauchyCircular => {
            let (mu, rho) = wrapped_cauchy_mle(&data, weights, total, WC_KAPPA_MAX);
            MarginalSpec::new(family, mu, rho)
        }
        Family::WrappedCauchyAxial => {
            let doubled: Vec<f64> = data.iter().map(|&t| 2.0 * t).collect();
            let (mu2, rho2) = wrapped_cauchy_mle(&doubled, weights, total, WC_KAPPA_MAX * WC_KAPPA_MAX);
            MarginalSpec::new(family, 0.5 * mu2, rho2.sqrt().min(WC_KAPPA_MAX))
        }
        Family::VonMisesAxial => {
            let (mu, kappa) = axial_von_mises_mle(&data, weights, total);
            MarginalSpec::new(family, mu, kappa)
        }
    }
}

/// Kent–Tyler fixed point for the wrapped Cauchy in the parameterization
/// `η = 2ρ/(1+ρ²) e^{iμ}`, where the density is proportional to
/// `sqrt(1-|η|²) / (1 - η·u)`.
fn wrapped_cauchy_mle(data: &[f64], weights: &[f64], total: f64, rho_cap: f64) -> (f64, f64) {
    let units: Vec<(f64, f64)> = data
        .iter()
        .map(|&t| {
            let (s, c) = t.sin_cos();
            (c, s)
        })
        .collect();
    let eta_cap = 2.0 * rho_cap / (1.0 + rho_cap * rho_cap);
    let (mut e1, mut e2) = (0.0_f64, 0.0_f64);
    let mut converged = false;
    for _ in 0..200 {
        let (mut sw, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for ((c, s), &w) in units.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let wi = w / (1.0 - e1 * c - e2 * s);
            sw += wi;
            s1 += wi * c;
            s2 += wi * s;
        }
        let (mut n1, mut n2) = (s1 / sw, s2 / sw);
        let norm = n1.hypot(n2);
        let capped = norm > eta_cap;
        if capped {
            n1 *= eta_cap / norm;
            n2 *= eta_cap / norm;
        }
        let step = (n1 - e1).hypot(n2 - e2);
        e1 = n1;
        e2 = n2;
        if step < 1e-13 || (capped && step < 1e-9) {
            converged = true;
            break;
        }
    }
    let to_params = |e1: f64, e2: f64| -> (f64, f64) {
        let m = e1.hypot(e2).min(eta_cap);
        if m == 0.0 {
            return (0.0, 0.0);
        }
        let rho = ((1.0 - (1.0 - m * m).sqrt()) / m).min(rho_cap);
        (reduce(e2.atan2(e1), TAU), rho)
    };
    let (mu, rho) = to_params(e1, e2);
    if converged {
        return (mu, rho);
    }
    // Direct search fallback on (μ, atanh-scaled ρ).
    let objective = |mu: f64, rho: f64| -> f64 {
        let mut acc = total * ((1.0 - rho * rho) / TAU).ln();
        for (&t, &w) in data.iter().zip(weights) {
            if w > 0.0 {
                acc -= w * (1.0 + rho * rho - 2.0 * rho * (t - mu).cos()).ln();
            }
        }
        acc
    };
    let z_cap = rho_cap.atanh();
    let (best, _) = nelder_mead_maximize(
        |p: &[f64]| objective(p[0], p[1].clamp(0.0, z_cap).tanh()),
        &[mu, rho.atanh().min(z_cap)],
        &[0.1, 0.1],
        2000,
        1e-14,
    );
    let cand = (reduce(best[0], TAU), best[1].clamp(0.0, z_cap).tanh());
    if objective(cand.0, cand.1) >= objective(mu, rho) {
        cand
    } else {
        (mu, rho)
    }
}

const AXIAL_LN_KAPPA_MIN: f64 = -6.0;

struct AxialEval {
    value: f64,
    grad: [f64; 2],
    hess: [f64; 3],
}

/// Objective, gradient and Hessian of the weighted axial von Mises
/// log-likelihood in the coordinates `(μ, s = ln κ)`. Observations are
/// given as `(cos y, sin y, weight)`.
fn axial_vm_eval(obs: &[(f64, f64, f64)], total: f64, mu: f64, s: f64, derivs: bool) -> AxialEval {
    let kappa = s.exp();
    let (sm, cm) = mu.sin_cos();
    let (mut val, mut g_mu, mut g_k, mut h_mm, mut h_mk, mut h_kk) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &(cy, sy, w) in obs {
        let c = cy * cm + sy * sm;
        let sn = sy * cm - cy * sm;
        let a = kappa * c;
        let e = (-2.0 * a.abs()).exp();
        val += w * (a.abs() + e.ln_1p());
        if derivs {
            let th = a.signum() * (1.0 - e) / (1.0 + e);
            let sech2 = 1.0 - th * th;
            g_mu += w * kappa * th * sn;
            g_k += w * th * c;
            h_mm += w * (kappa * kappa * sech2 * sn * sn - kappa * th * c);
            h_mk += w * (th * sn + kappa * sech2 * c * sn);
            h_kk += w * sech2 * c * c;
        }
    }
    val -= total * (std::f64::consts::LN_2 + (PI * bessel_i0(kappa)).ln());
    if !derivs {
        return AxialEval { value: val, grad: [0.0; 2], hess: [0.0; 3] };
    }
    g_k -= total * bessel_ratio(kappa);
    h_kk -= total * bessel_ratio_derivative(kappa);
    let g_s = kappa * g_k;
    let h_ss = kappa * kappa * h_kk + kappa * g_k;
    let h_ms = kappa * h_mk;
    AxialEval { value: val, grad: [g_mu, g_s], hess: [h_mm, h_ms, h_ss] }
}

const AXIAL_GRID: usize = 8;

/// Bounded Newton ascent with backtracking from the doubled-angle moment
/// estimate and, when it differs, the best location on a coarse grid.
fn axial_von_mises_mle(data: &[f64], weights: &[f64], total: f64) -> (f64, f64) {
    let s_hi = KAPPA_MAX_VM.ln();
    let s_lo = AXIAL_LN_KAPPA_MIN;
    let obs: Vec<(f64, f64, f64)> = data
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(&y, &w)| {
            let (s, c) = y.sin_cos();
            (c, s, w)
        })
        .collect();
    let (c2, s2) = weighted_resultant(data, weights, 2.0, total);
    let r2 = c2.hypot(s2);
    let mu_moment = reduce(0.5 * s2.atan2(c2), PI);
    let s0 = inverse_bessel_ratio(r2).max(1e-3).ln().clamp(s_lo, s_hi);
    let mut starts = vec![(mu_moment, s0)];
    let grid_best = (0..AXIAL_GRID)
        .map(|q| (q as f64 + 0.5) * PI / AXIAL_GRID as f64)
        .map(|m| (m, axial_vm_eval(&obs, total, m, s0, false).value))
        .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    if periodic_distance(grid_best.0, mu_moment, PI) > PI / AXIAL_GRID as f64 {
        starts.push((grid_best.0, s0));
    }

    let mut best: Option<(f64, f64, f64)> = None;
    for (mu0, sv0) in starts {
        let (mut mu, mut s) = (mu0, sv0);
        let mut cur = axial_vm_eval(&obs, total, mu, s, true);
        for _ in 0..100 {
            let [g_m, g_s] = cur.grad;
            let [h_mm, h_ms, h_ss] = cur.hess;
            let det = h_mm * h_ss - h_ms * h_ms;
            let (mut d_m, mut d_s) = if h_mm < 0.0 && det > 0.0 {
                (-(h_ss * g_m - h_ms * g_s) / det, -(-h_ms * g_m + h_mm * g_s) / det)
            } else {
                let scale_m = 1.0 / (h_mm.abs() + total * 1e-3);
                let scale_s = 1.0 / (h_ss.abs() + total * 1e-3);
                (g_m * scale_m, g_s * scale_s)
            };
            // keep the log-concentration inside its box
            if (s >= s_hi && d_s > 0.0) || (s <= s_lo && d_s < 0.0) {
                d_s = 0.0;
            }
            let max_step = d_m.abs().max(d_s.abs());
            if max_step > 1.0 {
                d_m /= max_step;
                d_s /= max_step;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let nm = mu + t * d_m;
                let ns = (s + t * d_s).clamp(s_lo, s_hi);
                let v = axial_vm_eval(&obs, total, nm, ns, false).value;
                if v >= cur.value {
                    accepted = Some((nm, ns));
                    break;
                }
                t *= 0.5;
            }
            let Some((nm, ns)) = accepted else { break };
            let moved = (nm - mu).abs().max((ns - s).abs());
            mu = nm;
            s = ns;
            cur = axial_vm_eval(&obs, total, mu, s, true);
            if moved < 1e-11 || cur.grad[0].abs().max(cur.grad[1].abs()) < 1e-10 * total {
                break;
            }
        }
        if best.is_none_or(|b| cur.value > b.2) {
            best = Some((mu, s, cur.value));
        }
    }
    let (mu, s, _) = best.expect("at least one start");
    (reduce(mu, PI), s.exp().min(KAPPA_MAX_VM))
}
