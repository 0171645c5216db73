use crate::error::{Error, Result};

use super::MAX_DEGREE;

/// Legendre polynomial `P_l(x)` by the three-term upward recurrence.
pub fn legendre_p(l: usize, x: f64) -> Result<f64> {
    if l > MAX_DEGREE {
        return Err(Error::Domain(format!("Legendre degree {l} exceeds {MAX_DEGREE}")));
    }
    if !(x.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("Legendre argument {x} outside [-1, 1]")));
    }
    let x = x.clamp(-1.0, 1.0);
    let (mut prev, mut cur) = (1.0, x);
    if l == 0 {
        return Ok(prev);
    }
    for k in 1..l {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Fills `out[l] = P_l(x)` for `l < out.len()`. No argument checks.
#[inline]
pub fn legendre_table(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n == 1 {
        return;
    }
    out[1] = x;
    for k in 1..n - 1 {
        out[k + 1] = ((2 * k + 1) as f64 * x * out[k] - k as f64 * out[k - 1]) / (k + 1) as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Explicit coefficients of P_6: (231x^6 - 315x^4 + 105x^2 - 5) / 16.
    fn p6_explicit(x: f64) -> f64 {
        let x2 = x * x;
        (((231.0 * x2 - 315.0) * x2 + 105.0) * x2 - 5.0) / 16.0
    }

    #[test]
    fn low_orders() {
        assert_eq!(legendre_p(0, 0.3).unwrap(), 1.0);
        assert!((legendre_p(2, 0.5).unwrap() + 0.125).abs() < 1e-15);
        assert!((legendre_p(6, 0.9).unwrap() - p6_explicit(0.9)).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(legendre_p(3, 1.0 + 1e-9).is_err());
        assert!(legendre_p(3, 1.0 + 1e-13).is_ok());
        assert!(legendre_p(65, 0.1).is_err());
        assert!(legendre_p(3, f64::NAN).is_err());
    }

    #[test]
    fn table_matches_scalar() {
        let mut t = [0.0; 12];
        legendre_table(-0.37, &mut t);
        for (l, v) in t.iter().enumerate() {
            assert!((v - legendre_p(l, -0.37).unwrap()).abs() < 1e-15);
        }
    }
}
