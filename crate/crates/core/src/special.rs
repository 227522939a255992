//! Modified Bessel functions of the first kind by ascending power series.

/// Largest von Mises concentration accepted anywhere in the crate.
pub const KAPPA_MAX_VM: f64 = 500.0;

const SERIES_REL_TOL: f64 = 1e-16;
const SERIES_MAX_TERMS: usize = 5000;

/// `I_0(kappa)` from its power series `sum (kappa^2/4)^k / (k!)^2`.
pub fn bessel_i0(kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < SERIES_REL_TOL * sum {
            break;
        }
    }
    sum
}

/// `I_1(kappa)` from `(kappa/2) sum (kappa^2/4)^k / (k! (k+1)!)`.
pub fn bessel_i1(kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        sum += term;
        if term < SERIES_REL_TOL * sum {
            break;
        }
    }
    0.5 * kappa * sum
}

pub fn ln_bessel_i0(kappa: f64) -> f64 {
    bessel_i0(kappa).ln()
}

/// Mean resultant length of a von Mises law, `A(kappa) = I_1(kappa) / I_0(kappa)`.
pub fn bessel_ratio(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    bessel_i1(kappa) / bessel_i0(kappa)
}

/// Derivative `A'(kappa) = 1 - A/kappa - A^2`.
pub fn bessel_ratio_derivative(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.5;
    }
    let a = bessel_ratio(kappa);
    1.0 - a / kappa - a * a
}

/// Solves `A(kappa) = r` for `kappa` in `[0, KAPPA_MAX_VM]`.
///
/// Safeguarded Newton: the iterate is kept inside a shrinking bracket and
/// falls back to bisection whenever a Newton step leaves it.
pub fn inverse_bessel_ratio(r: f64) -> f64 {
    if r.is_nan() || r <= 0.0 {
        return 0.0;
    }
    if r >= bessel_ratio(KAPPA_MAX_VM) {
        return KAPPA_MAX_VM;
    }
    // Best & Fisher starting value.
    let mut kappa = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    };
    let (mut lo, mut hi) = (0.0, KAPPA_MAX_VM);
    kappa = kappa.clamp(lo, hi);
    for _ in 0..200 {
        let a = bessel_ratio(kappa);
        let g = a - r;
        if g > 0.0 {
            hi = kappa;
        } else {
            lo = kappa;
        }
        let d = bessel_ratio_derivative(kappa);
        let mut next = kappa - g / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - kappa).abs();
        kappa = next;
        if step < 1e-10 || hi - lo < 1e-12 {
            break;
        }
    }
    kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // I_0(k) = (1/pi) int_0^pi exp(k cos t) dt, by a fine trapezoid rule.
    fn i0_by_quadrature(kappa: f64) -> f64 {
        let n = 20_000;
        let h = PI / n as f64;
        let mut s = 0.5 * ((kappa).exp() + (-kappa).exp());
        for i in 1..n {
            s += (kappa * (i as f64 * h).cos()).exp();
        }
        s * h / PI
    }

    #[test]
    fn i0_matches_quadrature() {
        for &k in &[0.0, 0.3, 1.0, 2.0, 4.0, 10.0, 50.0] {
            let a = bessel_i0(k);
            let b = i0_by_quadrature(k);
            assert!(((a - b) / b).abs() < 1e-12, "k={k}: {a} vs {b}");
        }
        // frozen: I0(2) = 2.279585302336067
        assert!((bessel_i0(2.0) - 2.279_585_302_336_067).abs() < 1e-14);
    }

    #[test]
    fn i0_is_finite_at_cap() {
        let v = bessel_i0(KAPPA_MAX_VM);
        assert!(v.is_finite() && v > 1e200);
        assert!(bessel_ratio(KAPPA_MAX_VM) < 1.0);
    }

    #[test]
    fn ratio_inverse_round_trip() {
        for &k in &[1e-3, 0.1, 0.7, 2.0, 6.0, 40.0, 300.0] {
            let r = bessel_ratio(k);
            let back = inverse_bessel_ratio(r);
            assert!((back - k).abs() < 1e-7 * k.max(1.0), "{k} -> {back}");
        }
        assert_eq!(inverse_bessel_ratio(0.0), 0.0);
        assert_eq!(inverse_bessel_ratio(0.99999999), KAPPA_MAX_VM);
    }
}
