//! Composite adaptive Gauss–Legendre quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of Gauss–Legendre nodes per panel.
pub const GL_NODES: usize = 64;

/// Nodes of the low-order rule for short panels of analytic integrands.
pub const GL_LOW_NODES: usize = 16;

/// Absolute agreement required between a panel and its two halves.
pub const PANEL_TOL: f64 = 1e-12;

const MAX_DEPTH: u32 = 40;

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn legendre_rule(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_NODES))
}

fn low_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_LOW_NODES))
}

/// Single-panel Gauss–Legendre estimate of `int_a^b f`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    apply(rule(), f, a, b)
}

/// As [`gauss_legendre`] with the low-order rule.
pub fn gauss_legendre_low<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    apply(low_rule(), f, a, b)
}

fn apply<F: Fn(f64) -> f64>(r: &Rule, f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in r.nodes.iter().zip(&r.weights) {
        s += w * f(mid + half * x);
    }
    s * half
}

/// Result of an adaptive integration: the value and whether the first
/// panel was already resolved (no subdivision was needed).
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub single_panel: bool,
}

/// Adaptive composite Gauss–Legendre quadrature of `f` over `[a, b]`.
///
/// A panel is accepted when its estimate agrees with the sum over its two
/// halves to within `PANEL_TOL`; otherwise both halves are refined.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Integral {
    if a == b {
        return Integral { value: 0.0, single_panel: true };
    }
    let whole = gauss_legendre(f, a, b);
    let mut single = true;
    let value = refine(f, a, b, whole, 0, &mut single);
    Integral { value, single_panel: single }
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, depth: u32, single: &mut bool) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m);
    let right = gauss_legendre(f, m, b);
    if (left + right - whole).abs() <= PANEL_TOL || depth >= MAX_DEPTH {
        return left + right;
    }
    *single = false;
    refine(f, a, m, left, depth + 1, single) + refine(f, m, b, right, depth + 1, single)
}
