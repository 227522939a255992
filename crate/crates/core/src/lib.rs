//! Copula-based bivariate distributions for mixed circular–axial data and
//! finite mixtures of them with covariate-dependent mixing weights.
//!
//! * [`directional`]: von Mises and wrapped Cauchy laws on the circle and
//!   the semicircle.
//! * [`circula`]: the periodic copula built from the bivariate wrapped
//!   Cauchy and the induced circular–axial density.
//! * [`mixture`]: mixtures with multinomial-logit concomitant weights,
//!   fitted by EM with inference functions for margins.
//! * [`bootstrap`]: parametric bootstrap with equal-tail intervals.
//! * [`simstudy`]: simulation and parameter-recovery studies.

pub mod bootstrap;
pub mod circula;
pub mod directional;
pub mod error;
pub mod mixture;
pub mod optim;
pub mod quadrature;
pub mod simstudy;
pub mod special;

pub use circula::{ComponentParams, CopulaCorrelation, TorusPoint};
pub use directional::{AxialAngle, CircularAngle, Family, MarginalSpec, PreparedMarginal};
pub use error::{Error, Result};
pub use mixture::{ConcomitantCoefficients, Dataset, FitConfig, FitResult, MixtureModel};
