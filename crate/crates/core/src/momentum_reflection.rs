//! Momentum-space states after the collision.
//!
//! Long after the collision the relative amplitude is `(S g)(p)`; on the energy
//! shell and for an axially symmetric packet
//! `(S g)(p) = g(p) + sum_l h_l(|p|) P_l(cos theta_p)` with
//! `h_l = (2l+1)/(4 pi) (e^{2i delta_l} - 1) c_l` and `c_l(p) = 2 pi int P_l(x) g(p, x) dx`.
//! The on-shell "reflection" approximation keeps only the delta-function part of
//! the scattering kernel, `(e^{2i delta} + 1)/2`, which gives `(g + S g)/2`: it is
//! not normalised, and its purity cannot depend on time because free evolution
//! is a product of one-particle phases.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{meridian_nodes, saturation_time, streamed_blocks, Azimuth, BlockKernel, BlockSummary, EntanglementPoint, QuadSpec};
use crate::error::{Error, Result};
use crate::field::{angular_order, momentum_rule, momentum_window};
use crate::quadmath::{gauss_legendre, legendre_table, SplineSet};
use crate::scattering::{solve_partial_waves, PotentialWell};
use crate::wavepacket::{cm_momentum_amplitude, relative_momentum_amplitude, PacketPair, Vec3};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which outgoing state is built from the S-matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outgoing {
    /// `S g`: the exact state after the collision.
    Exact,
    /// `(g + S g) / 2`.
    Reflection,
}

impl Outgoing {
    fn weight(self) -> f64 {
        match self {
            Outgoing::Exact => 1.0,
            Outgoing::Reflection => 0.5,
        }
    }
}

/// `h_l(p)` splined on a uniform momentum grid.
#[derive(Debug, Clone)]
pub struct ScatteringCorrection {
    pub l_max: usize,
    spline: SplineSet,
}

impl ScatteringCorrection {
    pub fn new(pair: &PacketPair, well: &PotentialWell, l_max: usize, p_top: f64) -> Result<Self> {
        pair.require_axial()?;
        let sigma = 1.0 / (2.0 * pair.a.iter().cloned().fold(0.0, f64::max)).sqrt();
        let step = 0.005f64.min(0.1 / (1.0 + pair.q0)).min(0.05 * sigma);
        let n = ((p_top / step).ceil() as usize + 1).clamp(16, 200_000);
        let knots: Vec<f64> = (0..n).map(|i| p_top * i as f64 / (n - 1) as f64).collect();
        let angles = gauss_legendre(angular_order(pair, l_max, p_top), -1.0, 1.0)?;
        let mut legendre = vec![0.0; l_max + 1];
        let table: Vec<Vec<f64>> = angles
            .nodes
            .iter()
            .map(|&c| {
                legendre_table(c, &mut legendre);
                legendre.clone()
            })
            .collect();
        let mut profiles = vec![vec![ZERO; n]; l_max + 1];
        for (j, &p) in knots.iter().enumerate() {
            let waves = solve_partial_waves(well, l_max, p.max(1e-9))?;
            let mut c = vec![ZERO; l_max + 1];
            for (k, (x, w)) in angles.iter().enumerate() {
                let s = (1.0 - x * x).max(0.0).sqrt();
                let g = relative_momentum_amplitude(pair, [p * s, 0.0, p * x]);
                for l in 0..=l_max {
                    c[l] += 2.0 * PI * w * table[k][l] * g;
                }
            }
            for l in 0..=l_max {
                let factor = (2 * l + 1) as f64 / (4.0 * PI);
                profiles[l][j] = factor * (waves[l].s_matrix() - 1.0) * c[l];
            }
        }
        Ok(Self { l_max, spline: SplineSet::new(knots, profiles) })
    }

    pub fn p_top(&self) -> f64 {
        self.spline.range().1
    }

    /// `sum_l h_l(p) P_l(cos)`.
    pub fn eval(&self, p: f64, cos_theta: f64, h: &mut [Complex64], pl: &mut [f64]) -> Complex64 {
        self.spline.eval_into(p, h);
        legendre_table(cos_theta, pl);
        h.iter().zip(pl.iter()).map(|(h, p)| h * p).sum()
    }
}

/// Outgoing relative amplitude at `p` from a correction table.
fn outgoing_relative(pair: &PacketPair, corr: &ScatteringCorrection, kind: Outgoing, p: Vec3, h: &mut [Complex64], pl: &mut [f64]) -> Complex64 {
    let q = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let cos = if q > 0.0 { p[2] / q } else { 1.0 };
    relative_momentum_amplitude(pair, p) + kind.weight() * corr.eval(q, cos, h, pl)
}

/// Angular orders `(n_cos, n_phi)` for integrating the relative packet over a momentum shell.
pub fn shell_orders(pair: &PacketPair, l_max: usize, p: f64) -> (usize, usize) {
    let n = angular_order(pair, l_max, p);
    (n, n.max(32))
}

/// `Psi_refl(p1, p2) = G_CM(p1 + p2) int dOmega g(|p12| u) sum_l (2l+1)/(8 pi) P_l(u . u12) (e^{2i delta_l} + 1)`.
///
/// Evaluated for any packet shape by direct quadrature over the shell (Gauss-Legendre
/// in `cos` times trapezoid in `phi`). Only the truncated `l <= L` part of the
/// kernel scatters; the remainder is the identity and contributes `g(p12)` exactly.
pub fn reflected_amplitude(pair: &PacketPair, well: &PotentialWell, l_max: usize, p1: Vec3, p2: Vec3) -> Result<Complex64> {
    reflected_amplitude_with_orders(pair, well, l_max, p1, p2, None)
}

pub fn reflected_amplitude_with_orders(
    pair: &PacketPair,
    well: &PotentialWell,
    l_max: usize,
    p1: Vec3,
    p2: Vec3,
    orders: Option<(usize, usize)>,
) -> Result<Complex64> {
    let p12 = [0.5 * (p1[0] - p2[0]), 0.5 * (p1[1] - p2[1]), 0.5 * (p1[2] - p2[2])];
    let q = (p12[0] * p12[0] + p12[1] * p12[1] + p12[2] * p12[2]).sqrt();
    if !(q > 0.0) {
        return Err(Error::Domain("relative momentum must be nonzero".into()));
    }
    let u12 = p12.map(|c| c / q);
    let (n_cos, n_phi) = orders.unwrap_or_else(|| shell_orders(pair, l_max, q));
    let waves = solve_partial_waves(well, l_max, q)?;
    let kernel: Vec<Complex64> =
        waves.iter().enumerate().map(|(l, w)| (2 * l + 1) as f64 / (8.0 * PI) * (w.s_matrix() - 1.0)).collect();
    let cosines = gauss_legendre(n_cos, -1.0, 1.0)?;
    let mut pl = vec![0.0; l_max + 1];
    let mut shell = ZERO;
    for (c, wc) in cosines.iter() {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let u = [s * phi.cos(), s * phi.sin(), c];
            legendre_table(u[0] * u12[0] + u[1] * u12[1] + u[2] * u12[2], &mut pl);
            let sum: Complex64 = kernel.iter().zip(&pl).map(|(k, p)| k * p).sum();
            shell += wc * (2.0 * PI / n_phi as f64) * relative_momentum_amplitude(pair, u.map(|x| q * x)) * sum;
        }
    }
    let big_p = [p1[0] + p2[0], p1[1] + p2[1], p1[2] + p2[2]];
    Ok(cm_momentum_amplitude(pair, big_p) * (relative_momentum_amplitude(pair, p12) + shell))
}

/// Two-particle momentum amplitude `G_CM(P) psi(p) e^{-i (p1^2 + p2^2) t / 2}` on the meridian grid.
struct MomentumKernel<'a> {
    pair: &'a PacketPair,
    corr: &'a ScatteringCorrection,
    kind: Outgoing,
    t_over_m: f64,
}

impl BlockKernel for MomentumKernel<'_> {
    type Scratch = (Vec<Complex64>, Vec<f64>, Vec<Complex64>);

    fn scratch(&self) -> Self::Scratch {
        (vec![ZERO; self.corr.l_max + 1], vec![0.0; self.corr.l_max + 1], Vec::new())
    }

    fn harmonics(
        &self,
        (_, n1): (usize, [f64; 3]),
        (_, n2): (usize, [f64; 3]),
        azimuth: &Azimuth,
        (h, pl, values): &mut Self::Scratch,
        psi: &mut [Complex64],
    ) -> Result<()> {
        let (rho1, z1, rho2, z2) = (n1[0], n1[1], n2[0], n2[1]);
        let a = self.pair.a;
        if 0.25 * (a[0] * (rho1 - rho2).powi(2) + a[2] * (z1 + z2).powi(2)) > 36.0 {
            return Ok(());
        }
        let energy = 0.5 * (rho1 * rho1 + z1 * z1 + rho2 * rho2 + z2 * z2);
        let phase = Complex64::from_polar(1.0, -energy * self.t_over_m);
        values.resize(azimuth.cosines.len(), ZERO);
        for (v, &c) in values.iter_mut().zip(&azimuth.cosines) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            let big_p = [rho1 + rho2 * c, rho2 * s, z1 + z2];
            let p = [0.5 * (rho1 - rho2 * c), -0.5 * rho2 * s, 0.5 * (z1 - z2)];
            *v = phase * cm_momentum_amplitude(self.pair, big_p) * outgoing_relative(self.pair, self.corr, self.kind, p, h, pl);
        }
        azimuth.project(values, psi);
        Ok(())
    }
}

/// Half-width of the single-particle momentum box: `p0` plus eight momentum widths.
pub fn momentum_box(pair: &PacketPair, quad: &QuadSpec) -> f64 {
    let a_min = pair.a.iter().cloned().fold(f64::INFINITY, f64::min);
    quad.box_scale * (pair.p0 + 8.0 / (2.0 * a_min).sqrt())
}

/// Norm and purity of an outgoing momentum-space state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentumPurity {
    pub norm: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub blocks: Vec<BlockSummary>,
}

fn purity_with(pair: &PacketPair, corr: &ScatteringCorrection, kind: Outgoing, quad: &QuadSpec, t_over_m: f64) -> Result<MomentumPurity> {
    let half = momentum_box(pair, quad);
    let nodes = meridian_nodes(quad.orders, half, -half, half)?;
    let kernel = MomentumKernel { pair, corr, kind, t_over_m };
    let (norm, gram, blocks) = streamed_blocks(&kernel, &nodes, quad.orders[2], quad.memory_mb)?;
    let p = gram / (norm * norm);
    Ok(MomentumPurity { norm, k: 1.0 / p, p, blocks })
}

fn correction_for(pair: &PacketPair, well: &PotentialWell, quad: &QuadSpec) -> Result<ScatteringCorrection> {
    pair.require_axial()?;
    if quad.orders[2] % 2 != 0 || quad.orders.iter().any(|&n| n == 0) {
        return Err(Error::Config("momentum grid needs nonzero orders and an even azimuthal order".into()));
    }
    // |p1 - p2| / 2 <= sqrt(2) * box half-width
    ScatteringCorrection::new(pair, well, quad.l_max, 2f64.sqrt() * momentum_box(pair, quad) * 1.001)
}

/// Purity of `S g` or `(g + S g)/2` on the cylindrical momentum grid of `quad` (orders read as `(n_rho, n_z, n_phi)`).
pub fn momentum_purity(pair: &PacketPair, well: &PotentialWell, quad: &QuadSpec, kind: Outgoing, t_over_m: f64) -> Result<MomentumPurity> {
    let corr = correction_for(pair, well, quad)?;
    purity_with(pair, &corr, kind, quad, t_over_m)
}

/// `<g|S g> = 1 + sum_l (2l+1)/(4 pi) int p^2 dp (e^{2i delta_l} - 1) |c_l|^2`.
pub fn asymptotic_overlap_amplitude(pair: &PacketPair, well: &PotentialWell, l_max: usize) -> Result<Complex64> {
    pair.require_axial()?;
    let (lo, hi) = momentum_window(pair);
    let momenta = momentum_rule(512, lo, hi)?;
    let angles = gauss_legendre(angular_order(pair, l_max, hi), -1.0, 1.0)?;
    let mut pl = vec![0.0; l_max + 1];
    let mut total = Complex64::new(1.0, 0.0);
    for (p, wp) in momenta.iter() {
        if p <= 0.0 {
            continue;
        }
        let waves = solve_partial_waves(well, l_max, p)?;
        let mut c = vec![ZERO; l_max + 1];
        for (x, wx) in angles.iter() {
            let s = (1.0 - x * x).max(0.0).sqrt();
            let g = relative_momentum_amplitude(pair, [p * s, 0.0, p * x]);
            legendre_table(x, &mut pl);
            for l in 0..=l_max {
                c[l] += 2.0 * PI * wx * pl[l] * g;
            }
        }
        for l in 0..=l_max {
            total += wp * p * p * (2 * l + 1) as f64 / (4.0 * PI) * (waves[l].s_matrix() - 1.0) * c[l].norm_sqr();
        }
    }
    Ok(total)
}

/// Entanglement and overlap of the state long after the collision (`t -> infinity`).
pub fn asymptotic_point(pair: &PacketPair, well: &PotentialWell, quad: &QuadSpec) -> Result<EntanglementPoint> {
    let m = momentum_purity(pair, well, quad, Outgoing::Exact, 0.0)?;
    let f = asymptotic_overlap_amplitude(pair, well, quad.l_max)?.norm_sqr();
    Ok(EntanglementPoint { t_over_m: f64::INFINITY, k: m.k, p: m.p, norm: m.norm, f })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionResult {
    pub norm: f64,
    #[serde(rename = "K_refl")]
    pub k_refl: f64,
    /// `max |K(t) - K(t')|` over the probed times.
    pub time_independence_span: f64,
    pub times: Vec<f64>,
}

impl ReflectionResult {
    /// Norm violation beyond the accuracy the full calculation is held to.
    pub fn violates_norm(&self) -> bool {
        (self.norm - 1.0).abs() > 1e-2
    }
}

/// Purity of the reflection approximation, probed at `t = 0` and at the saturation time.
pub fn reflection_purity(pair: &PacketPair, well: &PotentialWell, quad: &QuadSpec) -> Result<ReflectionResult> {
    let corr = correction_for(pair, well, quad)?;
    let times = vec![0.0, saturation_time(pair)];
    let runs: Vec<MomentumPurity> =
        times.iter().map(|&t| purity_with(pair, &corr, Outgoing::Reflection, quad, t)).collect::<Result<_>>()?;
    let ks: Vec<f64> = runs.iter().map(|r| r.k).collect();
    let span = ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ks.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ReflectionResult { norm: runs[0].norm, k_refl: ks[0], time_independence_span: span, times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepacket::single_momentum_amplitude;
    use crate::wavepacket::Particle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair() -> PacketPair {
        PacketPair::new([4.0, 4.0, 6.0], 0.8, 2.0).unwrap()
    }

    fn random_momenta(rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
        let mut v = || [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-1.2..1.2)];
        (v(), v())
    }

    #[test]
    fn free_reflection_is_the_free_packet() {
        let pair = PacketPair::new([3.0, 1.5, 5.0], 0.8, 1.0).unwrap();
        let well = PotentialWell::unit(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (p1, p2) = random_momenta(&mut rng);
            let direct = single_momentum_amplitude(&pair, Particle::First, p1) * single_momentum_amplitude(&pair, Particle::Second, p2);
            let refl = reflected_amplitude(&pair, &well, 6, p1, p2).unwrap();
            assert!((refl - direct).norm() < 1e-8 * (1.0 + direct.norm()), "{refl} vs {direct}");
        }
    }

    #[test]
    fn angular_order_doubling_is_converged() {
        let pair = pair();
        let well = PotentialWell::unit(8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let (p1, p2) = random_momenta(&mut rng);
            let p12 = 0.5 * ((p1[0] - p2[0]).powi(2) + (p1[1] - p2[1]).powi(2) + (p1[2] - p2[2]).powi(2)).sqrt();
            let (n, m) = shell_orders(&pair, 6, p12);
            let a = reflected_amplitude_with_orders(&pair, &well, 6, p1, p2, Some((n, m))).unwrap();
            let b = reflected_amplitude_with_orders(&pair, &well, 6, p1, p2, Some((2 * n, 2 * m))).unwrap();
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_relative_momentum_is_rejected() {
        let well = PotentialWell::unit(8.0).unwrap();
        assert!(reflected_amplitude(&pair(), &well, 6, [0.1, 0.0, 0.3], [0.1, 0.0, 0.3]).is_err());
    }

    #[test]
    fn s_wave_reflection_is_isotropic() {
        // p0 = 0 and q0 = 0: only the Gaussian anisotropy survives, and below p ~ 0.05 only l = 0 scatters
        let pair = PacketPair::new([2.0, 2.0, 2.0], 0.0, 0.0).unwrap();
        let well = PotentialWell::unit(1.0).unwrap();
        let q = 0.01;
        let values: Vec<Complex64> = (0..6)
            .map(|k| {
                let th = k as f64 * 0.5;
                let p12 = [q * th.sin(), 0.0, q * th.cos()];
                reflected_amplitude(&pair, &well, 6, p12, p12.map(|x| -x)).unwrap()
            })
            .collect();
        for v in &values {
            assert!((v - values[0]).norm() < 1e-6 * values[0].norm());
        }
    }

    #[test]
    fn grid_state_matches_direct_quadrature() {
        let pair = pair();
        let well = PotentialWell::unit(8.0).unwrap();
        let corr = ScatteringCorrection::new(&pair, &well, 6, 3.0).unwrap();
        let (mut h, mut pl) = (vec![ZERO; 7], vec![0.0; 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (p1, p2) = random_momenta(&mut rng);
            let big_p = [p1[0] + p2[0], p1[1] + p2[1], p1[2] + p2[2]];
            let p = [0.5 * (p1[0] - p2[0]), 0.5 * (p1[1] - p2[1]), 0.5 * (p1[2] - p2[2])];
            let grid = cm_momentum_amplitude(&pair, big_p) * outgoing_relative(&pair, &corr, Outgoing::Reflection, p, &mut h, &mut pl);
            let direct = reflected_amplitude(&pair, &well, 6, p1, p2).unwrap();
            assert!((grid - direct).norm() < 1e-7 * (1.0 + direct.norm()), "{grid} vs {direct}");
        }
    }

    #[test]
    fn free_and_exact_states_are_normalised() {
        let pair = pair();
        let quad = QuadSpec { orders: [24, 48, 16], ..QuadSpec::default() };
        let free = reflection_purity(&pair, &PotentialWell::unit(0.0).unwrap(), &quad).unwrap();
        assert!((free.norm - 1.0).abs() < 1e-3 && (free.k_refl - 1.0).abs() < 1e-3, "{free:?}");
        let well = PotentialWell::unit(8.0).unwrap();
        let exact = momentum_purity(&pair, &well, &quad, Outgoing::Exact, 0.0).unwrap();
        assert!((exact.norm - 1.0).abs() < 1e-4, "{}", exact.norm);
        let refl = reflection_purity(&pair, &well, &quad).unwrap();
        assert!(refl.violates_norm());
        assert!(refl.time_independence_span < 1e-3);
        // norm of (g + S g)/2 is (1 + Re<g|S g>)/2
        let overlap = asymptotic_overlap_amplitude(&pair, &well, 6).unwrap();
        assert!((refl.norm - 0.5 * (1.0 + overlap.re)).abs() < 1e-4, "{} vs {}", refl.norm, overlap);
    }
}
