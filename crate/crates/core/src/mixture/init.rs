//! Starting partitions for EM.

use nalgebra::DMatrix;
use rand::Rng;

use super::Dataset;

const LLOYD_ITER: usize = 100;

/// Points embedded on the torus as `(cos x, sin x, cos 2y, sin 2y)`.
fn embed(data: &Dataset) -> Vec<[f64; 4]> {
    data.circular()
        .iter()
        .zip(data.axial())
        .map(|(x, y)| {
            let (s1, c1) = x.value().sin_cos();
            let (s2, c2) = (2.0 * y.value()).sin_cos();
            [c1, s1, c2, s2]
        })
        .collect()
}

fn dist2(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn nearest(p: &[f64; 4], centers: &[[f64; 4]]) -> (usize, f64) {
    centers.iter().enumerate().map(|(k, c)| (k, dist2(p, c))).fold((0, f64::INFINITY), |best, cur| {
        if cur.1 < best.1 {
            cur
        } else {
            best
        }
    })
}

/// k-means++ seeding.
fn seed_centers<R: Rng + ?Sized>(pts: &[[f64; 4]], k: usize, rng: &mut R) -> Vec<[f64; 4]> {
    let mut centers = vec![pts[rng.random_range(0..pts.len())]];
    let mut d: Vec<f64> = pts.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = pts.len() - 1;
            for (i, w) in d.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..pts.len())
        };
        centers.push(pts[next]);
        for (di, p) in d.iter_mut().zip(pts) {
            *di = di.min(dist2(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Hard labels from Lloyd iterations in the embedding.
pub(crate) fn kmeans<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Vec<usize> {
    let pts = embed(data);
    let mut centers = seed_centers(&pts, k, rng);
    let mut labels = vec![usize::MAX; pts.len()];
    for _ in 0..LLOYD_ITER {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(&pts) {
            let (j, _) = nearest(p, &centers);
            changed |= *l != j;
            *l = j;
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 4]; k];
        let mut counts = vec![0usize; k];
        for (l, p) in labels.iter().zip(&pts) {
            counts[*l] += 1;
            for d in 0..4 {
                sums[*l][d] += p[d];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].map(|s| s / counts[j] as f64);
            } else {
                centers[j] = pts[rng.random_range(0..pts.len())];
            }
        }
    }
    labels
}

/// Initial responsibilities for start `index`: the first start is a plain
/// k-means partition; later starts blend a freshly seeded k-means
/// partition with a random multinomial draw per row.
pub(crate) fn initial_responsibilities<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    index: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let labels = kmeans(data, k, rng);
    let mut u = DMatrix::from_fn(data.len(), k, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
    if index > 0 {
        const NOISE: f64 = 0.3;
        for i in 0..data.len() {
            let draw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
            let s: f64 = draw.iter().sum();
            for j in 0..k {
                u[(i, j)] = (1.0 - NOISE) * u[(i, j)] + NOISE * draw[j] / s;
            }
        }
    }
    u
}
