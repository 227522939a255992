//! Grids behind density contour plots, marginal curves and rose diagrams.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use axcirc::{Dataset, FitResult};

use crate::error::CliResult;
use crate::output::{num, write_csv};

/// Cell-centred grid of `m` points on `[0, period)`.
pub fn grid(m: usize, period: f64) -> Vec<f64> {
    (0..m).map(|k| (k as f64 + 0.5) * period / m as f64).collect()
}

/// Component densities on an `m × m` grid over `[0, 2π) × [0, π)` and the
/// mixture weighted by the estimated class proportions.
pub fn contour_rows(fit: &FitResult, m: usize) -> Vec<(f64, f64, Vec<f64>, f64)> {
    let comps: Vec<_> = fit.model.components.iter().map(|c| c.prepare()).collect();
    let p = fit.class_proportions();
    let mut rows = Vec::with_capacity(m * m);
    for &x in &grid(m, TAU) {
        for &y in &grid(m, PI) {
            let d: Vec<f64> = comps.iter().map(|c| c.density(x, y)).collect();
            let mix = d.iter().zip(&p).map(|(a, b)| a * b).sum();
            rows.push((x, y, d, mix));
        }
    }
    rows
}

pub fn write_contours(path: &Path, fit: &FitResult, m: usize) -> CliResult<()> {
    let j = fit.model.n_components();
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend((1..=j).map(|k| format!("density{k}")));
    header.extend(["mixture".to_string(), "log_mixture".to_string()]);
    let rows = contour_rows(fit, m).into_iter().map(|(x, y, d, mix)| {
        let mut r = vec![num(x), num(y)];
        r.extend(d.into_iter().map(num));
        r.push(num(mix));
        r.push(num(mix.ln()));
        r
    });
    write_csv(path, &header, rows)
}

pub fn write_marginals(path: &Path, fit: &FitResult, m: usize) -> CliResult<()> {
    let j = fit.model.n_components();
    let p = fit.class_proportions();
    let mut header = vec!["kind".to_string(), "angle".to_string()];
    header.extend((1..=j).map(|k| format!("class{k}")));
    header.push("mixture".into());
    let mut rows = Vec::with_capacity(2 * m);
    for (kind, period) in [("circular", TAU), ("axial", PI)] {
        let specs: Vec<_> =
            fit.model.components.iter().map(|c| if kind == "circular" { c.circular } else { c.axial }).collect();
        for t in grid(m, period) {
            let d: Vec<f64> = specs.iter().map(|s| s.pdf(t)).collect();
            let mix: f64 = d.iter().zip(&p).map(|(a, b)| a * b).sum();
            let mut r = vec![kind.to_string(), num(t)];
            r.extend(d.into_iter().map(num));
            r.push(num(mix));
            rows.push(r);
        }
    }
    write_csv(path, &header, rows)
}

/// Counts of angles in `bins` equal arcs of `[0, period)`.
pub fn rose_counts(angles: &[f64], bins: usize, period: f64) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &a in angles {
        let k = ((a / period * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

pub fn write_rose(path: &Path, data: &Dataset, circular_bins: usize, axial_bins: usize) -> CliResult<()> {
    let header: Vec<String> = ["kind", "bin", "lower", "upper", "count"].map(String::from).to_vec();
    let mut rows = Vec::new();
    let x: Vec<f64> = data.circular().iter().map(|a| a.value()).collect();
    let y: Vec<f64> = data.axial().iter().map(|a| a.value()).collect();
    for (kind, angles, bins, period) in [("circular", &x, circular_bins, TAU), ("axial", &y, axial_bins, PI)] {
        if bins == 0 {
            continue;
        }
        let w = period / bins as f64;
        for (k, c) in rose_counts(angles, bins, period).into_iter().enumerate() {
            rows.push(vec![
                kind.to_string(),
                (k + 1).to_string(),
                num(k as f64 * w),
                num((k + 1) as f64 * w),
                c.to_string(),
            ]);
        }
    }
    write_csv(path, &header, rows)
}
