//! Circula copula, joint densities and the pair sampler.

use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use axcirc::circula::{
    bwc_density, circula_density, conditional_wc, copula_loglik, joint_density, sample_pair, weighted_rho_mle,
};
use axcirc::{AxialAngle, CircularAngle, ComponentParams, CopulaCorrelation, Family, MarginalSpec, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const RHOS: [f64; 5] = [-0.7, -0.3, 0.0, 0.3, 0.7];

fn rho(r: f64) -> CopulaCorrelation {
    CopulaCorrelation::new(r).unwrap()
}

fn component(circ: Family, ax: Family, r: f64) -> ComponentParams {
    let kc = if circ.is_von_mises() { 2.5 } else { 0.6 };
    let ka = if ax.is_von_mises() { 4.0 } else { 0.5 };
    ComponentParams::new(MarginalSpec::new(circ, 1.0, kc).unwrap(), MarginalSpec::new(ax, 0.5, ka).unwrap(), rho(r))
        .unwrap()
}

fn pairs() -> [(Family, Family); 4] {
    use Family::*;
    [
        (VonMisesCircular, VonMisesAxial),
        (VonMisesCircular, WrappedCauchyAxial),
        (WrappedCauchyCircular, VonMisesAxial),
        (WrappedCauchyCircular, WrappedCauchyAxial),
    ]
}

fn torus_sum(f: impl Fn(f64, f64) -> f64, px: f64, py: f64, m: usize) -> f64 {
    let (hx, hy) = (px / m as f64, py / m as f64);
    let mut total = 0.0;
    for i in 0..m {
        for k in 0..m {
            total += f(i as f64 * hx, k as f64 * hy);
        }
    }
    total * hx * hy
}

#[test]
fn copula_integrates_to_one_with_uniform_margins() {
    for r in [-0.9, -0.5, 0.0, 0.4, 0.9] {
        let c = |u: f64, v: f64| circula_density(rho(r), u, v);
        assert_abs_diff_eq!(torus_sum(c, 1.0, 1.0, 600), 1.0, epsilon = 1e-10);
        for u in [0.05, 0.3, 0.77] {
            let m = (0..4000).map(|k| c(u, k as f64 / 4000.0)).sum::<f64>() / 4000.0;
            assert_abs_diff_eq!(m, 1.0, epsilon = 1e-10);
        }
    }
}

#[test]
fn joint_densities_integrate_to_one() {
    for (circ, ax) in pairs() {
        for r in RHOS {
            let p = component(circ, ax, r).prepare();
            let total = torus_sum(|x, y| p.density(x, y), TAU, PI, 500);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
    }
}

#[test]
fn prepared_and_direct_joint_densities_agree() {
    for (circ, ax) in pairs() {
        let theta = component(circ, ax, 0.55);
        let p = theta.prepare();
        for (x, y) in [(0.1, 0.2), (3.0, 1.5), (6.0, 3.0)] {
            let d = joint_density(&theta, CircularAngle::new(x), AxialAngle::new(y));
            assert_abs_diff_eq!(p.density(x, y), d, epsilon = 1e-11 * d.max(1.0));
            assert_abs_diff_eq!(p.ln_density(x, y), d.ln(), epsilon = 1e-10);
        }
    }
}

#[test]
fn copula_is_periodic_on_every_edge() {
    for r in RHOS {
        for i in 0..10 {
            let t = (i as f64 + 0.5) / 10.0;
            assert_abs_diff_eq!(circula_density(rho(r), 0.0, t), circula_density(rho(r), 1.0, t), epsilon = 1e-8);
            assert_abs_diff_eq!(circula_density(rho(r), t, 0.0), circula_density(rho(r), t, 1.0), epsilon = 1e-8);
        }
    }
}

#[test]
fn zero_correlation_factorizes() {
    for (circ, ax) in pairs() {
        let theta = component(circ, ax, 0.0);
        for (x, y) in [(0.4, 0.1), (2.0, 2.9)] {
            let d = joint_density(&theta, CircularAngle::new(x), AxialAngle::new(y));
            assert_abs_diff_eq!(d, theta.circular.pdf(x) * theta.axial.pdf(y), epsilon = 1e-14);
        }
    }
}

#[test]
fn torus_conditional_is_wrapped_cauchy() {
    for r in [-0.9, -0.6, -0.3, 0.3, 0.6, 0.9] {
        for i in 0..12 {
            let d1 = i as f64 * 0.5;
            for k in 0..12 {
                let d2 = k as f64 * 0.53;
                let ratio = bwc_density(rho(r), TorusPoint::new(d1, d2)) * TAU;
                let cond = conditional_wc(rho(r), d1).pdf(d2);
                assert!((ratio - cond).abs() <= 1e-12 * cond.max(1.0), "{r} {d1} {d2}");
            }
        }
    }
}

// cell probabilities of the copula on a k x k grid by tensor midpoint sums
fn cell_probabilities(r: f64, k: usize, sub: usize) -> Vec<f64> {
    let h = 1.0 / (k * sub) as f64;
    let mut p = vec![0.0; k * k];
    for a in 0..k * sub {
        for b in 0..k * sub {
            let c = circula_density(rho(r), (a as f64 + 0.5) * h, (b as f64 + 0.5) * h);
            p[(a / sub) * k + b / sub] += c * h * h;
        }
    }
    p
}

#[test]
fn pair_sampler_matches_cell_probabilities() {
    let k = 10;
    for (idx, (circ, ax)) in pairs().into_iter().enumerate() {
        let theta = component(circ, ax, 0.6);
        let probs = cell_probabilities(0.6, k, 40);
        let mut counts = vec![0usize; k * k];
        let mut rng = ChaCha8Rng::seed_from_u64(31 + idx as u64);
        let n = 40_000;
        for _ in 0..n {
            let (x, y) = sample_pair(&theta, &mut rng);
            let u = (theta.circular.cdf(x.value()) * k as f64).floor().min((k - 1) as f64) as usize;
            let v = (theta.axial.cdf(y.value()) * k as f64).floor().min((k - 1) as f64) as usize;
            counts[u * k + v] += 1;
        }
        let stat: f64 =
            counts.iter().zip(&probs).map(|(&c, &q)| (c as f64 - n as f64 * q).powi(2) / (n as f64 * q)).sum();
        let pv = 1.0 - ChiSquared::new((k * k - 1) as f64).unwrap().cdf(stat);
        assert!(pv > 1e-3, "{circ}-{ax}: p = {pv}");
    }
}

#[test]
fn sampled_marginals_keep_their_laws() {
    for (idx, (circ, ax)) in pairs().into_iter().enumerate() {
        let theta = component(circ, ax, -0.8);
        let p = theta.prepare();
        let mut rng = ChaCha8Rng::seed_from_u64(71 + idx as u64);
        let bins = 20;
        let (mut cu, mut cv) = (vec![0usize; bins], vec![0usize; bins]);
        let n = 20_000;
        for _ in 0..n {
            let (x, y) = p.sample(&mut rng);
            cu[((theta.circular.cdf(x.value()) * bins as f64) as usize).min(bins - 1)] += 1;
            cv[((theta.axial.cdf(y.value()) * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let e = n as f64 / bins as f64;
        let chi = ChiSquared::new((bins - 1) as f64).unwrap();
        for c in [cu, cv] {
            let stat: f64 = c.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
            assert!(1.0 - chi.cdf(stat) > 1e-3, "{circ}-{ax}: {stat}");
        }
    }
}

#[test]
fn rho_mle_matches_a_fine_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (idx, (circ, ax)) in pairs().into_iter().enumerate() {
        for r in [-0.6, 0.2, 0.85] {
            let theta = component(circ, ax, r);
            let data: Vec<_> = (0..400).map(|_| sample_pair(&theta, &mut rng)).collect();
            let w: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
            let est = weighted_rho_mle(&data, &w, &theta.circular, &theta.axial).unwrap().value();
            let us: Vec<f64> = data.iter().map(|(x, _)| theta.circular.cdf(x.value())).collect();
            let vs: Vec<f64> = data.iter().map(|(_, y)| theta.axial.cdf(y.value())).collect();
            let grid = (0..2001)
                .map(|g| -0.999 + 1.998 * g as f64 / 2000.0)
                .max_by(|a, b| {
                    let la = copula_loglik(rho(*a), &us, &vs, &w).unwrap();
                    let lb = copula_loglik(rho(*b), &us, &vs, &w).unwrap();
                    la.total_cmp(&lb)
                })
                .unwrap();
            assert!((est - grid).abs() < 1e-3, "pair {idx} rho {r}: {est} vs {grid}");
        }
    }
}

#[test]
fn correlation_bounds_are_enforced() {
    assert!(CopulaCorrelation::new(1.5).is_err());
    assert_eq!(CopulaCorrelation::new(1.0).unwrap().value(), axcirc::circula::RHO_MAX);
    assert!(CopulaCorrelation::new(f64::NAN).is_err());
    assert!(CopulaCorrelation::new(-axcirc::circula::RHO_MAX).is_ok());
}
