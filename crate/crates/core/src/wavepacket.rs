//! Two colliding Gaussian packets of unit mass.
//!
//! Momentum amplitude of particle `alpha` (mean momentum `±p0 z`):
//! `(det A / pi^3)^{1/4} exp(-(p - p0_a)^T A (p - p0_a) / 2) e^{i p . q0_a}` with
//! `q0_1 = +q0/2 z`, `q0_2 = -q0/2 z`. The translation factor places particle 1
//! at `z = -q0/2` heading for `+z`, and particle 2 mirrored. With equal masses
//! (`mu_1 = mu_2 = 1/2`) the product splits into a CM Gaussian in
//! `P = p1 + p2` and a relative one in `p = (p1 - p2)/2`; the Jacobian is one.
//! Position amplitudes use the unitary `(2 pi)^{-3/2}` Fourier convention, so
//! `r = r1 - r2` starts near `-q0 z` and drifts with velocity `2 p0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketPair {
    /// Diagonal of the momentum-space quadratic form `A`.
    pub a: Vec3,
    pub p0: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    /// Starts at `-q0/2`, moves along `+z`.
    First,
    /// Starts at `+q0/2`, moves along `-z`.
    Second,
}

impl PacketPair {
    pub fn new(a: Vec3, p0: f64, q0: f64) -> Result<Self> {
        if a.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Domain(format!("packet widths must be positive, got {a:?}")));
        }
        if !(p0 >= 0.0) || !p0.is_finite() || !(q0 >= 0.0) || !q0.is_finite() {
            return Err(Error::Domain(format!("p0 and q0 must be finite and >= 0, got {p0}, {q0}")));
        }
        Ok(Self { a, p0, q0 })
    }

    /// The partial-wave pipeline assumes rotational symmetry about `z`.
    pub fn require_axial(&self) -> Result<()> {
        if self.a[0] != self.a[1] {
            return Err(Error::Unsupported(format!(
                "a_x = a_y is required by the axially reduced pipeline, got {:?}",
                self.a
            )));
        }
        Ok(())
    }

    /// Same packet with every width parameter multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.a.map(|x| x * s), self.p0, self.q0)
    }

    pub fn momentum_dispersion(&self) -> f64 {
        dispersion(&self.a)
    }

    /// Largest per-axis standard deviation of the relative momentum.
    pub fn relative_width_max(&self) -> f64 {
        let a_min = self.a.iter().cloned().fold(f64::INFINITY, f64::min);
        0.5 / a_min.sqrt()
    }

    /// Per-axis position standard deviation of one particle at `t`.
    pub fn single_position_spread(&self, t_over_m: f64) -> Vec3 {
        self.a.map(|a| ((a * a + t_over_m * t_over_m) / (2.0 * a)).sqrt())
    }

    fn det(&self) -> f64 {
        self.a.iter().product()
    }
}

fn dispersion(a: &Vec3) -> f64 {
    (a.iter().map(|x| 0.25 / x).sum::<f64>()).sqrt()
}

/// Relative-momentum dispersion `sqrt((1/a_x + 1/a_y + 1/a_z) / 4)`.
pub fn momentum_dispersion(a: Vec3) -> Result<f64> {
    if a.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("packet widths must be positive, got {a:?}")));
    }
    Ok(dispersion(&a))
}

/// `int exp(-alpha p^2 + b p - c) dp` for `Re alpha > 0`.
#[inline]
fn gaussian_integral(alpha: Complex64, b: Complex64, c: f64) -> Complex64 {
    (PI / alpha).sqrt() * (b * b / (4.0 * alpha) - c).exp()
}

const INV_TWO_PI_32: f64 = 0.063_493_635_934_240_97; // (2 pi)^{-3/2}

/// CM amplitude in momentum space, `(det A / 8 pi^3)^{1/4} exp(-P^T A P / 4)` at `t = 0`.
pub fn cm_momentum_amplitude(pair: &PacketPair, big_p: Vec3) -> f64 {
    let q: f64 = (0..3).map(|i| pair.a[i] * big_p[i] * big_p[i]).sum();
    (pair.det() / (8.0 * PI.powi(3))).powf(0.25) * (-0.25 * q).exp()
}

/// Relative amplitude in momentum space at `t = 0`, translation phase included.
pub fn relative_momentum_amplitude(pair: &PacketPair, p: Vec3) -> Complex64 {
    let d = [p[0], p[1], p[2] - pair.p0];
    let q: f64 = (0..3).map(|i| pair.a[i] * d[i] * d[i]).sum();
    let norm = (8.0 * pair.det() / PI.powi(3)).powf(0.25);
    Complex64::from_polar(norm * (-q).exp(), p[2] * pair.q0)
}

/// Single-particle momentum amplitude at `t = 0`.
pub fn single_momentum_amplitude(pair: &PacketPair, which: Particle, p: Vec3) -> Complex64 {
    let (sign, shift) = match which {
        Particle::First => (1.0, 0.5 * pair.q0),
        Particle::Second => (-1.0, -0.5 * pair.q0),
    };
    let d = [p[0], p[1], p[2] - sign * pair.p0];
    let q: f64 = (0..3).map(|i| pair.a[i] * d[i] * d[i]).sum();
    let norm = (pair.det() / PI.powi(3)).powf(0.25);
    Complex64::from_polar(norm * (-0.5 * q).exp(), p[2] * shift)
}

/// Freely propagating CM amplitude `Phi(R, t)`.
pub fn cm_amplitude(pair: &PacketPair, big_r: Vec3, t_over_m: f64) -> Complex64 {
    let mut out = Complex64::new(INV_TWO_PI_32 * (pair.det() / (8.0 * PI.powi(3))).powf(0.25), 0.0);
    for i in 0..3 {
        let beta = Complex64::new(0.25 * pair.a[i], 0.25 * t_over_m);
        out *= gaussian_integral(beta, Complex64::new(0.0, big_r[i]), 0.0);
    }
    out
}

/// Freely propagating relative amplitude at the Cartesian point `r`.
pub fn free_relative_amplitude_at(pair: &PacketPair, r: Vec3, t_over_m: f64) -> Complex64 {
    let mut out = Complex64::new(INV_TWO_PI_32 * (8.0 * pair.det() / PI.powi(3)).powf(0.25), 0.0);
    for i in 0..3 {
        let (c, x) = if i == 2 { (pair.p0, r[2] + pair.q0) } else { (0.0, r[i]) };
        let a = pair.a[i];
        let alpha = Complex64::new(a, t_over_m);
        out *= gaussian_integral(alpha, Complex64::new(2.0 * a * c, x), a * c * c);
    }
    out
}

/// Free relative amplitude at radius `r` and polar cosine `cos_theta`.
///
/// The azimuth is irrelevant for `a_x = a_y`; otherwise the point is taken at azimuth zero.
pub fn free_relative_amplitude(pair: &PacketPair, r: f64, cos_theta: f64, t_over_m: f64) -> Result<Complex64> {
    if !(cos_theta.abs() <= 1.0) {
        return Err(Error::Domain(format!("|cos theta| must be <= 1, got {cos_theta}")));
    }
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    Ok(free_relative_amplitude_at(pair, [r * sin_theta, 0.0, r * cos_theta], t_over_m))
}

/// Freely propagating single-particle amplitude.
pub fn single_particle_amplitude(pair: &PacketPair, which: Particle, x: Vec3, t_over_m: f64) -> Complex64 {
    let (sign, shift) = match which {
        Particle::First => (1.0, 0.5 * pair.q0),
        Particle::Second => (-1.0, -0.5 * pair.q0),
    };
    let mut out = Complex64::new(INV_TWO_PI_32 * (pair.det() / PI.powi(3)).powf(0.25), 0.0);
    for i in 0..3 {
        let (c, y) = if i == 2 { (sign * pair.p0, x[2] + shift) } else { (0.0, x[i]) };
        let a = pair.a[i];
        let alpha = Complex64::new(0.5 * a, 0.5 * t_over_m);
        out *= gaussian_integral(alpha, Complex64::new(a * c, y), 0.5 * a * c * c);
    }
    out
}
