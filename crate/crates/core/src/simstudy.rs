//! Simulation from fitted or hypothesized mixtures and parameter-recovery
//! studies over replicated datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    align_labels, child_seed, circular_et_interval, et_interval, parameter_info, parameter_vector, unwrap_near,
    ParameterKind,
};
use crate::circula::{ComponentParams, CopulaCorrelation};
use crate::directional::{Family, MarginalSpec};
use crate::error::{Error, Result};
use crate::mixture::{fit, mixing_weights, ConcomitantCoefficients, Dataset, FitConfig, MixtureModel};

/// Law of one simulated covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum CovariateSpec {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

impl CovariateSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            CovariateSpec::Normal { mean, sd } if mean.is_finite() && sd.is_finite() && sd >= 0.0 => Ok(()),
            CovariateSpec::Bernoulli { p } if (0.0..=1.0).contains(&p) => Ok(()),
            other => Err(Error::Domain(format!("invalid covariate law {other:?}"))),
        }
    }
}

/// Covariate rows with the leading intercept.
pub fn generate_covariates<R: Rng + ?Sized>(specs: &[CovariateSpec], n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    for s in specs {
        s.validate()?;
    }
    let mut rows = vec![Vec::with_capacity(specs.len() + 1); n];
    for row in &mut rows {
        row.push(1.0);
        for s in specs {
            row.push(match *s {
                CovariateSpec::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
                CovariateSpec::Bernoulli { p } => {
                    f64::from(u8::from(Bernoulli::new(p).expect("validated").sample(rng)))
                }
            });
        }
    }
    Ok(rows)
}

/// Draws a class for every covariate row from the mixing weights and then
/// an observation from that class. Labels are 0-based.
pub fn simulate_dataset<R: Rng + ?Sized>(
    truth: &MixtureModel,
    z: &[Vec<f64>],
    rng: &mut R,
) -> Result<(Dataset, Vec<usize>)> {
    let prepared: Vec<_> = truth.components.iter().map(|c| c.prepare()).collect();
    let mut x = Vec::with_capacity(z.len());
    let mut y = Vec::with_capacity(z.len());
    let mut labels = Vec::with_capacity(z.len());
    for row in z {
        let w = mixing_weights(&truth.coefficients, row)?;
        let mut u: f64 = rng.random();
        let mut label = w.len() - 1;
        for (k, wk) in w.iter().enumerate() {
            if u < *wk {
                label = k;
                break;
            }
            u -= wk;
        }
        let (a, b) = prepared[label].sample(rng);
        x.push(a);
        y.push(b);
        labels.push(label);
    }
    Ok((Dataset::new(x, y, z.to_vec())?, labels))
}

/// A data-generating truth together with the design of a recovery study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub model: MixtureModel,
    pub n: usize,
    pub covariates: Vec<CovariateSpec>,
    pub replicas: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("sample size {} is below 2", self.n)));
        }
        if self.model.coefficients.n_covariates() != self.covariates.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} covariate laws for coefficients of length {}",
                self.covariates.len(),
                self.model.coefficients.n_covariates()
            )));
        }
        for c in &self.covariates {
            c.validate()?;
        }
        Ok(())
    }

    /// The dataset of replica `r`, with 0-based true labels.
    pub fn simulate(&self, replica: usize) -> Result<(Dataset, Vec<usize>)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica as u64);
        let z = generate_covariates(&self.covariates, self.n, &mut rng)?;
        simulate_dataset(&self.model, &z, &mut rng)
    }
}

fn component(circ: (Family, f64, f64), ax: (Family, f64, f64), rho: f64) -> ComponentParams {
    ComponentParams::new(
        MarginalSpec::new(circ.0, circ.1, circ.2).expect("valid truth"),
        MarginalSpec::new(ax.0, ax.1, ax.2).expect("valid truth"),
        CopulaCorrelation::new(rho).expect("valid truth"),
    )
    .expect("valid truth")
}

/// The eight simulation truths (four family pairs, two and three classes)
/// with `n = 600`, 50 replicas, and covariates N(0, sd 2) and Bernoulli(0.5).
pub fn default_scenarios() -> Vec<Scenario> {
    use Family::*;
    type Comp = ((f64, f64), (f64, f64), f64);
    let make = |name: &str, fams: (Family, Family), comps: &[Comp], beta: &[[f64; 3]]| {
        let components = comps.iter().map(|&(c, a, r)| component((fams.0, c.0, c.1), (fams.1, a.0, a.1), r)).collect();
        let coefficients =
            ConcomitantCoefficients::new(beta.iter().map(|b| b.to_vec()).collect(), 3).expect("valid truth");
        Scenario {
            name: name.to_string(),
            model: MixtureModel::new(components, coefficients).expect("valid truth"),
            n: 600,
            covariates: vec![CovariateSpec::Normal { mean: 0.0, sd: 2.0 }, CovariateSpec::Bernoulli { p: 0.5 }],
            replicas: 50,
            seed: 20_240_601,
        }
    };
    let vm_ax = (VonMisesCircular, VonMisesAxial);
    let vm_axwc = (VonMisesCircular, WrappedCauchyAxial);
    let wc_ax = (WrappedCauchyCircular, VonMisesAxial);
    let wc_axwc = (WrappedCauchyCircular, WrappedCauchyAxial);
    vec![
        make(
            "VM-AX J=2",
            vm_ax,
            &[((1.0, 2.0), (0.5, 2.0), -0.45), ((5.0, 6.0), (2.0, 5.0), 0.6)],
            &[[-2.41, 0.55, 2.17]],
        ),
        make(
            "VM-AX J=3",
            vm_ax,
            &[((1.0, 3.0), (0.5, 2.0), -0.45), ((5.0, 5.0), (2.0, 5.0), 0.6), ((3.0, 10.0), (1.5, 9.0), 0.1)],
            &[[-0.09, 0.64, 0.12], [1.32, 1.17, -2.93]],
        ),
        make(
            "VM-AXWC J=2",
            vm_axwc,
            &[((1.0, 3.0), (0.5, 0.3), -0.45), ((5.0, 5.0), (2.0, 0.55), 0.6)],
            &[[-0.86, 0.23, 0.37]],
        ),
        make(
            "VM-AXWC J=3",
            vm_axwc,
            &[((1.0, 2.0), (0.5, 0.3), -0.45), ((5.0, 6.0), (2.0, 0.7), 0.6), ((3.0, 10.0), (1.5, 0.9), 0.1)],
            &[[-0.86, 0.37, 0.54], [0.23, -0.07, -0.19]],
        ),
        make(
            "WC-AX J=2",
            wc_ax,
            &[((1.0, 0.3), (0.5, 2.0), -0.45), ((5.0, 0.9), (2.0, 5.0), 0.6)],
            &[[-1.26, 3.67, 0.69]],
        ),
        make(
            "WC-AX J=3",
            wc_ax,
            &[((1.0, 0.3), (0.5, 2.0), -0.45), ((5.0, 0.9), (2.0, 5.0), 0.6), ((3.0, 0.5), (1.5, 9.0), 0.1)],
            &[[-0.09, 0.64, 0.12], [1.32, 1.17, -2.93]],
        ),
        make(
            "WC-AXWC J=2",
            wc_axwc,
            &[((1.0, 0.3), (0.5, 0.3), -0.45), ((5.0, 0.9), (2.0, 0.7), 0.6)],
            &[[-0.86, 0.23, 0.37]],
        ),
        make(
            "WC-AXWC J=3",
            wc_axwc,
            &[((1.0, 0.3), (0.5, 0.3), -0.45), ((5.0, 0.9), (2.0, 0.55), 0.6), ((3.0, 0.5), (1.5, 0.9), 0.1)],
            &[[-0.86, 0.37, 0.54], [0.23, -0.07, -0.19]],
        ),
    ]
}

/// Across-replica summary of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Outcome of one replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub accuracy: Option<f64>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub loglik_decreases: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub scenario: String,
    pub parameters: Vec<RecoveryRow>,
    pub replicas: Vec<ReplicaOutcome>,
    pub median_accuracy: f64,
    pub failures: usize,
    /// More than 5% of the replicas failed to fit.
    pub failure_warning: bool,
}

/// Fraction of points whose MAP label equals the true label.
pub fn accuracy(estimated: &[usize], truth: &[usize]) -> f64 {
    let hits = estimated.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Simulates every replica of the scenario, fits it at the true family pair
/// and number of classes, aligns the estimate to the truth, and summarizes
/// the parameter estimates and classification accuracy.
pub fn run_recovery_study(scenario: &Scenario, cfg: &FitConfig) -> Result<RecoveryReport> {
    scenario.validate()?;
    let truth = &scenario.model;
    let (families, j) = (truth.families(), truth.n_components());
    let results: Vec<(ReplicaOutcome, Option<Vec<f64>>)> = (0..scenario.replicas)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<(f64, Vec<f64>, crate::mixture::FitResult)> {
                let (data, labels) = scenario.simulate(r)?;
                let fc = FitConfig { seed: child_seed(scenario.seed, r as u64), ..cfg.clone() };
                let res = fit(&data, families, j, &fc)?;
                let perm = align_labels(truth, &res.model)?;
                let aligned = res.model.permuted(&perm)?;
                let mut inverse = vec![0; j];
                for (k, &p) in perm.iter().enumerate() {
                    inverse[p] = k;
                }
                let relabeled: Vec<usize> = res.classification.iter().map(|&c| inverse[c]).collect();
                Ok((accuracy(&relabeled, &labels), parameter_vector(&aligned), res))
            };
            match run() {
                Ok((acc, params, res)) => (
                    ReplicaOutcome {
                        replica: r,
                        accuracy: Some(acc),
                        loglik: Some(res.loglik),
                        converged: res.converged,
                        loglik_decreases: res.loglik_decreases,
                        error: None,
                    },
                    Some(params),
                ),
                Err(e) => (
                    ReplicaOutcome {
                        replica: r,
                        accuracy: None,
                        loglik: None,
                        converged: false,
                        loglik_decreases: 0,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let estimates: Vec<&Vec<f64>> = results.iter().filter_map(|r| r.1.as_ref()).collect();
    let failures = results.len() - estimates.len();
    let truth_vec = parameter_vector(truth);
    let mut parameters = Vec::new();
    for (p, info) in parameter_info(truth).into_iter().enumerate() {
        let t = truth_vec[p];
        let samples: Vec<f64> = estimates.iter().map(|e| e[p]).collect();
        let row = match (info.kind, samples.len()) {
            (_, 0) => RecoveryRow { name: info.name, truth: t, mean: f64::NAN, lower: f64::NAN, upper: f64::NAN },
            (ParameterKind::Location { period }, n) => {
                let unwrapped: Vec<f64> = samples.iter().map(|&s| unwrap_near(s, t, period)).collect();
                let mean = unwrapped.iter().sum::<f64>() / n as f64;
                let (lower, upper) =
                    if n >= 2 { circular_et_interval(&samples, 0.95, t, period)? } else { (mean, mean) };
                RecoveryRow { name: info.name, truth: t, mean, lower, upper }
            }
            (_, n) => {
                let mean = samples.iter().sum::<f64>() / n as f64;
                let (lower, upper) = if n >= 2 { et_interval(&samples, 0.95)? } else { (mean, mean) };
                RecoveryRow { name: info.name, truth: t, mean, lower, upper }
            }
        };
        parameters.push(row);
    }
    let replicas: Vec<ReplicaOutcome> = results.into_iter().map(|r| r.0).collect();
    let accs: Vec<f64> = replicas.iter().filter_map(|r| r.accuracy).collect();
    Ok(RecoveryReport {
        scenario: scenario.name.clone(),
        parameters,
        median_accuracy: median(&accs),
        failures,
        failure_warning: failures as f64 > 0.05 * scenario.replicas as f64,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_labels() {
        let s = &default_scenarios()[0];
        let one = MixtureModel::new(vec![s.model.components[0]], ConcomitantCoefficients::zeros(1, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = generate_covariates(&s.covariates, 50, &mut rng).unwrap();
        let (data, labels) = simulate_dataset(&one, &z, &mut rng).unwrap();
        assert_eq!(data.len(), 50);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn saturated_weights_choose_second_class() {
        let s = &default_scenarios()[0];
        let m = MixtureModel::new(
            s.model.components.clone(),
            ConcomitantCoefficients::new(vec![vec![20.0, 0.0, 0.0]], 3).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = generate_covariates(&s.covariates, 500, &mut rng).unwrap();
        let (_, labels) = simulate_dataset(&m, &z, &mut rng).unwrap();
        assert!(labels.iter().filter(|&&l| l == 1).count() >= 499);
    }

    #[test]
    fn label_share_matches_mean_weight() {
        let s = &default_scenarios()[0];
        let (data, labels) = s.simulate(0).unwrap();
        let expected: f64 = (0..data.len())
            .map(|i| mixing_weights(&s.model.coefficients, &data.covariate_row(i)).unwrap()[1])
            .sum::<f64>()
            / data.len() as f64;
        let share = labels.iter().filter(|&&l| l == 1).count() as f64 / data.len() as f64;
        assert!((share - expected).abs() < 0.05);
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = &default_scenarios()[3];
        assert_eq!(s.simulate(4).unwrap(), s.simulate(4).unwrap());
        assert_ne!(s.simulate(4).unwrap().0, s.simulate(5).unwrap().0);
    }

    #[test]
    fn scenario_validation() {
        let mut s = default_scenarios()[0].clone();
        s.n = 1;
        assert!(s.validate().is_err());
        let mut s = default_scenarios()[0].clone();
        s.covariates.pop();
        assert!(s.validate().is_err());
        assert!(
            generate_covariates(&[CovariateSpec::Bernoulli { p: 1.5 }], 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err()
        );
    }

    #[test]
    fn accuracy_and_median() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]), 0.75);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
