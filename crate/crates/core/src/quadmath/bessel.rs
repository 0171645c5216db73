use crate::error::{Error, Result};

use super::MAX_DEGREE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// `j_l`, regular at the origin.
    First,
    /// `y_l`, irregular at the origin.
    Second,
}

/// Spherical Bessel function `j_l(x)` or `y_l(x)` for `x > 0`.
///
/// `j_l` uses Miller's downward recurrence when `x < l` and the upward
/// recurrence otherwise; `y_l` always recurs upwards.
pub fn sph_bessel(kind: BesselKind, l: usize, x: f64) -> Result<f64> {
    if l > MAX_DEGREE {
        return Err(Error::Domain(format!("Bessel order {l} exceeds {MAX_DEGREE}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("spherical Bessel argument must be positive, got {x}")));
    }
    let mut table = vec![0.0; l + 1];
    match kind {
        BesselKind::First => {
            if x < l as f64 {
                miller_downward(x, &mut table);
            } else {
                upward_j(x, &mut table);
            }
        }
        BesselKind::Second => sph_bessel_y_table(x, &mut table),
    }
    Ok(table[l])
}

/// Fills `out[l] = j_l(x)` for `l < out.len()`; `x > 0` is assumed.
pub fn sph_bessel_j_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    if x < (out.len() - 1) as f64 {
        miller_downward(x, out);
    } else {
        upward_j(x, out);
    }
}

/// Fills `out[l] = y_l(x)` for `l < out.len()`; `x > 0` is assumed.
pub fn sph_bessel_y_table(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    let (s, c) = x.sin_cos();
    out[0] = -c / x;
    if n == 1 {
        return;
    }
    out[1] = -c / (x * x) - s / x;
    for l in 1..n - 1 {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
}

/// Derivatives `f_l'(x)` from a table of `f_0..f_{n}`; fills `n` entries of `out`.
///
/// Uses `f_l' = f_{l-1} - (l+1) f_l / x` and `f_0' = -f_1`, so `values` must hold
/// one more order than `out`.
pub fn sph_bessel_derivatives(x: f64, values: &[f64], out: &mut [f64]) {
    debug_assert!(values.len() > out.len());
    if out.is_empty() {
        return;
    }
    out[0] = -values[1];
    for l in 1..out.len() {
        out[l] = values[l - 1] - (l + 1) as f64 / x * values[l];
    }
}

fn upward_j(x: f64, out: &mut [f64]) {
    let n = out.len();
    let (s, c) = x.sin_cos();
    out[0] = s / x;
    if n == 1 {
        return;
    }
    out[1] = s / (x * x) - c / x;
    for l in 1..n - 1 {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
}

const RESCALE_ABOVE: f64 = 1e200;

fn miller_downward(x: f64, out: &mut [f64]) {
    let lmax = out.len() - 1;
    let start = lmax + 16 + x.ceil() as usize;
    let mut above = 0.0;
    let mut current = 1e-300;
    for k in (1..=start).rev() {
        let below = (2 * k + 1) as f64 / x * current - above;
        above = current;
        current = below;
        // `current` now holds the unnormalized f_{k-1}
        if k - 1 <= lmax {
            out[k - 1] = current;
        }
        if current.abs() > RESCALE_ABOVE {
            above /= RESCALE_ABOVE;
            current /= RESCALE_ABOVE;
            for v in out[(k - 1).min(lmax)..].iter_mut() {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    // j0 = sin x / x vanishes at multiples of pi; normalise on whichever of j0, j1 is larger
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let f1 = if lmax >= 1 { out[1] } else { above };
    let scale = if j0.abs() >= j1.abs() { j0 / out[0] } else { j1 / f1 };
    for v in out.iter_mut() {
        *v *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Ascending series j_l(x) = x^l / (2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1)).
    fn j_series(l: usize, x: f64) -> f64 {
        let mut double_factorial = 1.0;
        for k in 0..=l {
            double_factorial *= (2 * k + 1) as f64;
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -0.5 * x * x / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        x.powi(l as i32) / double_factorial * sum
    }

    #[test]
    fn closed_form_zeros() {
        assert!(sph_bessel(BesselKind::First, 0, PI).unwrap().abs() < 1e-14);
        assert!(sph_bessel(BesselKind::Second, 0, PI / 2.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn small_argument_against_series() {
        let v = sph_bessel(BesselKind::First, 5, 0.1).unwrap();
        let oracle = j_series(5, 0.1);
        assert!(((v - oracle) / oracle).abs() < 1e-12, "{v} vs {oracle}");
    }

    #[test]
    fn series_agreement_over_orders() {
        for l in 0..=12 {
            for &x in &[1e-3, 0.05, 0.7, 2.0, 5.5, 9.0] {
                let v = sph_bessel(BesselKind::First, l, x).unwrap();
                let oracle = j_series(l, x);
                let tol = 1e-12 * oracle.abs().max(1e-300) + 1e-15 * (1.0 / x).min(1.0);
                assert!((v - oracle).abs() <= tol.max(1e-13 * oracle.abs()), "l={l} x={x}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn tiny_argument_high_order_no_overflow() {
        let v = sph_bessel(BesselKind::First, 40, 1e-3).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        let mut t = vec![0.0; 65];
        sph_bessel_j_table(1e-6, &mut t);
        assert!(t.iter().all(|v| v.is_finite()));
        assert!((t[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wronskian() {
        let mut j = vec![0.0; 10];
        let mut y = vec![0.0; 10];
        let mut dj = vec![0.0; 9];
        let mut dy = vec![0.0; 9];
        for i in 0..200 {
            let x = 0.1 + (50.0 - 0.1) * i as f64 / 199.0;
            sph_bessel_j_table(x, &mut j);
            sph_bessel_y_table(x, &mut y);
            sph_bessel_derivatives(x, &j, &mut dj);
            sph_bessel_derivatives(x, &y, &mut dy);
            for l in 0..=8 {
                let w = j[l] * dy[l] - dj[l] * y[l];
                let expected = 1.0 / (x * x);
                assert!(((w - expected) / expected).abs() < 1e-10, "l={l} x={x} w={w}");
            }
        }
    }

    #[test]
    fn recurrence_consistency() {
        for kind in [BesselKind::First, BesselKind::Second] {
            for l in 1..8 {
                for &x in &[0.3, 1.7, 4.0, 12.5, 33.0] {
                    let f = |n| sph_bessel(kind, n, x).unwrap();
                    let lhs = (2 * l + 1) as f64 * f(l) / x;
                    let rhs = f(l - 1) + f(l + 1);
                    let scale = lhs.abs().max(f(l - 1).abs()).max(f(l + 1).abs());
                    assert!((lhs - rhs).abs() <= 1e-10 * scale, "{kind:?} l={l} x={x}");
                }
            }
        }
    }

    #[test]
    fn table_matches_scalar_path() {
        let mut t = vec![0.0; 13];
        for &x in &[0.2, 3.0, 11.9, 12.0, 40.0] {
            sph_bessel_j_table(x, &mut t);
            for (l, v) in t.iter().enumerate() {
                let s = sph_bessel(BesselKind::First, l, x).unwrap();
                assert!((v - s).abs() <= 1e-12 * s.abs().max(1e-12), "l={l} x={x}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(sph_bessel(BesselKind::First, 0, 0.0).is_err());
        assert!(sph_bessel(BesselKind::Second, 2, -1.0).is_err());
    }
}
