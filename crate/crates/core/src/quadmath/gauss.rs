use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{legendre_table, MAX_GL_ORDER};

/// Nodes and positive weights of a quadrature rule on `interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `n`-point Gauss-Legendre rule on `[lo, hi]`, exact for polynomials of degree `2n - 1`.
///
/// Nodes come from Newton iteration on `P_n` started at the asymptotic cosine guesses.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_GL_ORDER {
        return Err(Error::Domain(format!("Gauss-Legendre order {n} outside 1..={MAX_GL_ORDER}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
    }
    let (reference_nodes, reference_weights) = reference_rule(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(QuadratureRule {
        nodes: reference_nodes.iter().map(|x| mid + half * x).collect(),
        weights: reference_weights.iter().map(|w| half * w).collect(),
        interval: (lo, hi),
    })
}

/// Composite rule: `n_per_panel` Gauss-Legendre points on each of `panels` equal panels.
pub fn gauss_legendre_panels(
    n_per_panel: usize,
    panels: usize,
    lo: f64,
    hi: f64,
) -> Result<QuadratureRule> {
    if panels == 0 {
        return Err(Error::Domain("composite rule needs at least one panel".into()));
    }
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(n_per_panel * panels);
    let mut weights = Vec::with_capacity(n_per_panel * panels);
    for k in 0..panels {
        let a = lo + k as f64 * width;
        let b = if k + 1 == panels { hi } else { a + width };
        let rule = gauss_legendre(n_per_panel, a, b)?;
        nodes.extend(rule.nodes);
        weights.extend(rule.weights);
    }
    Ok(QuadratureRule { nodes, weights, interval: (lo, hi) })
}

fn reference_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut p = vec![0.0; n + 1];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            legendre_table(x, &mut p);
            derivative = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
            let dx = p[n] / derivative;
            x -= dx;
            if dx.abs() < 1e-15 {
                legendre_table(x, &mut p);
                derivative = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        // guesses run from +1 downwards; store ascending and mirror
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Interval-halving trapezoid with Richardson (Romberg) extrapolation.
    fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        let mut rows: Vec<Vec<f64>> = vec![vec![0.5 * (b - a) * (f(a) + f(b))]];
        for k in 1..25 {
            let n = 1usize << k;
            let h = (b - a) / n as f64;
            let mid: f64 = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
            let mut row = vec![0.5 * rows[k - 1][0] + h * mid];
            for j in 1..=k {
                let factor = 4f64.powi(j as i32);
                row.push((factor * row[j - 1] - rows[k - 1][j - 1]) / (factor - 1.0));
            }
            let done = (row[k] - rows[k - 1][k - 1]).abs() < 1e-15;
            rows.push(row);
            if done {
                break;
            }
        }
        *rows.last().unwrap().last().unwrap()
    }

    #[test]
    fn two_point_rule() {
        let r = gauss_legendre(2, -1.0, 1.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + s).abs() < 1e-15 && (r.nodes[1] - s).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_to_degree_fifteen() {
        let r = gauss_legendre(8, -1.0, 1.0).unwrap();
        assert!((r.integrate(|x| x.powi(14)) - 2.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_against_romberg() {
        let r = gauss_legendre(64, 0.0, 3.0).unwrap();
        let oracle = romberg(|x| (-x * x).exp(), 0.0, 3.0);
        assert!((r.integrate(|x| (-x * x).exp()) - oracle).abs() < 1e-12);
    }

    #[test]
    fn rule_invariants() {
        for &n in &[1usize, 2, 3, 7, 64, 199, 512] {
            let r = gauss_legendre(n, -2.0, 5.0).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes[0] > -2.0 && r.nodes[n - 1] < 5.0);
            assert!((r.weights.iter().sum::<f64>() - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(513, 0.0, 1.0).is_err());
        assert!(gauss_legendre(4, 1.0, 1.0).is_err());
    }

    #[test]
    fn panels_cover_interval() {
        let r = gauss_legendre_panels(16, 5, 1.0, 11.0).unwrap();
        assert_eq!(r.len(), 80);
        assert!((r.integrate(|x| x.sin()) - (1f64.cos() - 11f64.cos())).abs() < 1e-13);
    }
}
