use num_complex::Complex64;

/// Natural cubic splines of several complex profiles sharing one set of knots.
#[derive(Debug, Clone)]
pub struct SplineSet {
    knots: Vec<f64>,
    values: Vec<Vec<Complex64>>,
    second: Vec<Vec<Complex64>>,
    /// `(x0, 1/h)` when the knots are equally spaced, for O(1) interval lookup.
    uniform: Option<(f64, f64)>,
}

impl SplineSet {
    /// `knots` strictly increasing, every profile of the same length as `knots`.
    pub fn new(knots: Vec<f64>, profiles: Vec<Vec<Complex64>>) -> Self {
        let n = knots.len();
        assert!(n >= 2, "spline needs at least two knots");
        let second = profiles
            .iter()
            .map(|y| {
                assert_eq!(y.len(), n);
                natural_second_derivatives(&knots, y)
            })
            .collect();
        let h = (knots[n - 1] - knots[0]) / (n - 1) as f64;
        let uniform = knots
            .iter()
            .enumerate()
            .all(|(i, &x)| (x - (knots[0] + i as f64 * h)).abs() <= 1e-12 * h * n as f64)
            .then_some((knots[0], 1.0 / h));
        Self { knots, values: profiles, second, uniform }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn profiles(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Evaluates every profile at `x` (clamped to the knot range) into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [Complex64]) {
        let n = self.knots.len();
        let k = match self.uniform {
            Some((x0, inv_h)) => (((x - x0) * inv_h).max(0.0) as usize).min(n - 2),
            None => self.knots.partition_point(|&t| t <= x).clamp(1, n - 1) - 1,
        };
        let h = self.knots[k + 1] - self.knots[k];
        let a = (self.knots[k + 1] - x) / h;
        let b = 1.0 - a;
        let ca = (a * a * a - a) * h * h / 6.0;
        let cb = (b * b * b - b) * h * h / 6.0;
        for ((o, y), m) in out.iter_mut().zip(&self.values).zip(&self.second) {
            *o = y[k] * a + y[k + 1] * b + m[k] * ca + m[k + 1] * cb;
        }
    }

    pub fn eval(&self, index: usize, x: f64) -> Complex64 {
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        self.eval_into(x, &mut out);
        out[index]
    }
}

fn natural_second_derivatives(x: &[f64], y: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut m = vec![zero; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations; the matrix is real.
    let mut diag = vec![0.0; n];
    let mut rhs = vec![zero; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 2..n - 1 {
        let h = x[i] - x[i - 1];
        let factor = h / diag[i - 1];
        diag[i] -= factor * h;
        let prev = rhs[i - 1];
        rhs[i] -= prev * factor;
    }
    for i in (1..n - 1).rev() {
        let upper = if i + 1 < n - 1 { (x[i + 1] - x[i]) * m[i + 1] } else { zero };
        m[i] = (rhs[i] - upper) / diag[i];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_smooth_data() {
        let knots: Vec<f64> = (0..400).map(|i| (i as f64 * 0.025).powf(1.1)).collect();
        let f = |x: f64| Complex64::new((1.3 * x).sin(), (0.7 * x).cos() * (-0.1 * x).exp());
        let set = SplineSet::new(knots.clone(), vec![knots.iter().map(|&x| f(x)).collect()]);
        for &x in &knots {
            assert!((set.eval(0, x) - f(x)).norm() < 1e-13);
        }
        // interior probes, away from the natural end conditions
        for i in 0..200 {
            let x = 1.0 + 8.0 * (i as f64 + 0.37) / 200.0;
            assert!((set.eval(0, x) - f(x)).norm() < 5e-7, "x={x}");
        }
    }
}
