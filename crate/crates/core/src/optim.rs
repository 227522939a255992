//! Small derivative-free optimizers used by the estimators.

/// Maximizes `f` on `[lo, hi]` with Brent's method (golden-section steps
/// combined with parabolic interpolation). Returns `(argmax, max)`.
pub fn brent_maximize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = -f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = -f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

/// Grid scan over `[lo, hi]` followed by Brent refinement in the bracket
/// around the best grid point. Guards against the multimodal objectives
/// that a plain Brent search can get trapped in.
pub fn bracketed_maximize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    let grid = grid.max(3);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    let mut best_k = 0;
    for k in 0..grid {
        let t = if k == grid - 1 { hi } else { lo + k as f64 * step };
        let v = f(t);
        if v > best.1 {
            best = (t, v);
            best_k = k;
        }
    }
    let a = lo + best_k.saturating_sub(1) as f64 * step;
    let b = (lo + (best_k + 1) as f64 * step).min(hi);
    let refined = brent_maximize(&mut f, a, b, tol);
    // Brent never evaluates the bracket endpoints; keep the grid point if it wins.
    if refined.1 >= best.1 {
        refined
    } else {
        best
    }
}

/// Nelder–Mead maximization of `f` from `start` with initial simplex edge `scale`.
pub fn nelder_mead_maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    scale: &[f64],
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += scale[i];
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| -f(p)).collect();
    let mut evals = dim + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[dim] - vals[0]).abs() <= ftol * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|p| p[k]).sum::<f64>() / dim as f64).collect();
        let towards = |coef: f64| -> Vec<f64> {
            (0..dim).map(|k| centroid[k] + coef * (simplex[dim][k] - centroid[k])).collect()
        };
        let reflected = towards(-1.0);
        let fr = -f(&reflected);
        evals += 1;
        if fr < vals[0] {
            let expanded = towards(-2.0);
            let fe = -f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[dim] = expanded;
                vals[dim] = fe;
            } else {
                simplex[dim] = reflected;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            simplex[dim] = reflected;
            vals[dim] = fr;
        } else {
            let contracted = if fr < vals[dim] { towards(-0.5) } else { towards(0.5) };
            let fc = -f(&contracted);
            evals += 1;
            if fc < vals[dim].min(fr) {
                simplex[dim] = contracted;
                vals[dim] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=dim {
                    for (s, b) in simplex[i].iter_mut().zip(&best) {
                        *s = b + 0.5 * (*s - b);
                    }
                    vals[i] = -f(&simplex[i]);
                    evals += 1;
                }
            }
        }
    }
    let best = (0..=dim).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    (simplex[best].clone(), -vals[best])
}
