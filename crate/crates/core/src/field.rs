//! Two-particle wavefunction after (or during) the collision.
//!
//! The relative state is expanded as
//! `phi(r, cos) = sum_l (2l+1) i^l P_l(cos) A_l(r)` with
//! `A_l(r) = (2 pi)^{-3/2} int p^2 dp c_l(p) e^{-i p^2 t} psi_l(p, r)`.
//! Only the partial waves that actually scatter need the expansion: the free
//! Gaussian is known in closed form, so the scattered state is evaluated as the
//! free packet plus `sum_{l <= L} (2l+1) i^l P_l dA_l`, where `dA_l` uses
//! `psi_l - j_l`. Truncating at `L` then only drops `delta_l` for `l > L`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadmath::{gauss_legendre, gauss_legendre_panels, legendre_table, QuadratureRule, SplineSet};
use crate::scattering::{solve_partial_waves, PartialWave, PotentialWell, RadialScratch, DEFAULT_L_MAX};
use crate::wavepacket::{cm_amplitude, free_relative_amplitude_at, relative_momentum_amplitude, PacketPair, Vec3};

const INV_TWO_PI_32: f64 = 0.063_493_635_934_240_97;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Momentum interval `[max(0, p0 - 8 dp), p0 + 8 dp]` holding the relative packet.
pub fn momentum_window(pair: &PacketPair) -> (f64, f64) {
    let dp = pair.relative_width_max();
    ((pair.p0 - 8.0 * dp).max(0.0), pair.p0 + 8.0 * dp)
}

/// Gauss-Legendre rule of the given order on `[lo, hi]`; large orders use 64-point panels.
pub fn momentum_rule(order: usize, lo: f64, hi: f64) -> Result<QuadratureRule> {
    if order <= 256 {
        gauss_legendre(order, lo, hi)
    } else {
        gauss_legendre_panels(64, order.div_ceil(64), lo, hi)
    }
}

/// Angular projections `c_l(p) = 2 pi int dcos g(p, cos) P_l(cos)` of the relative packet.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    pub l_max: usize,
    pub momenta: QuadratureRule,
    /// `coeffs[l][j]` at momentum node `j`.
    pub coeffs: Vec<Vec<Complex64>>,
    pub angular_order: usize,
    /// Packet probability captured by the momentum rule.
    pub captured: f64,
}

pub(crate) fn angular_order(pair: &PacketPair, l_max: usize, p_hi: f64) -> usize {
    let a_max = pair.a.iter().cloned().fold(0.0, f64::max);
    let extra = 48 + 2 * (p_hi * pair.q0 + 2.0 * a_max.sqrt() * p_hi).ceil() as usize;
    (2 * l_max + 16).max(extra).min(512)
}

pub fn build_spectral(pair: &PacketPair, l_max: usize, momenta: QuadratureRule) -> Result<SpectralCoefficients> {
    pair.require_axial()?;
    let (lo, hi) = momentum_window(pair);
    let (rule_lo, rule_hi) = momenta.interval;
    if rule_lo > lo + 1e-12 || rule_hi < hi - 1e-12 {
        return Err(Error::Coverage { lo: rule_lo, hi: rule_hi, outside: f64::NAN });
    }
    let n_ang = angular_order(pair, l_max, rule_hi);
    let angles = gauss_legendre(n_ang, -1.0, 1.0)?;
    let legendre: Vec<Vec<f64>> = angles
        .nodes
        .iter()
        .map(|&c| {
            let mut row = vec![0.0; l_max + 1];
            legendre_table(c, &mut row);
            row
        })
        .collect();
    let mut coeffs = vec![vec![ZERO; momenta.len()]; l_max + 1];
    let mut captured = 0.0;
    for (j, (p, wp)) in momenta.iter().enumerate() {
        let mut shell = 0.0;
        for (k, (c, wc)) in angles.iter().enumerate() {
            let s = (1.0 - c * c).max(0.0).sqrt();
            let g = relative_momentum_amplitude(pair, [p * s, 0.0, p * c]);
            shell += wc * g.norm_sqr();
            for l in 0..=l_max {
                coeffs[l][j] += 2.0 * PI * wc * legendre[k][l] * g;
            }
        }
        captured += wp * p * p * 2.0 * PI * shell;
    }
    if 1.0 - captured > 1e-8 {
        return Err(Error::Coverage { lo: rule_lo, hi: rule_hi, outside: 1.0 - captured });
    }
    Ok(SpectralCoefficients { l_max, momenta, coeffs, angular_order: n_ang, captured })
}

impl SpectralCoefficients {
    /// `g(p, cos) ~ sum_l (2l+1)/(4 pi) c_l(p) P_l(cos)` at momentum node `j`.
    pub fn reconstruct(&self, j: usize, cos_theta: f64) -> Complex64 {
        let mut pl = vec![0.0; self.l_max + 1];
        legendre_table(cos_theta, &mut pl);
        (0..=self.l_max).map(|l| (2 * l + 1) as f64 / (4.0 * PI) * pl[l] * self.coeffs[l][j]).sum()
    }
}

/// Default momentum order: enough nodes for the `e^{-i p^2 t} j_l(p r)` oscillation.
pub fn default_momentum_order(pair: &PacketPair, t_over_m: f64, r_max: f64) -> usize {
    let (lo, hi) = momentum_window(pair);
    let phase_rate = 2.0 * hi * t_over_m + r_max;
    let n = (1.2 * (hi - lo) * phase_rate / PI + 20.0).ceil() as usize;
    n.max(200)
}

/// Radial extent `q0 + 2 p0 t + 10 max_i sqrt(a_i/2 + 2 t^2 / a_i)` of the relative packet.
pub fn default_r_max(pair: &PacketPair, t_over_m: f64) -> f64 {
    let spread = pair
        .a
        .iter()
        .map(|&a| (0.5 * a + 2.0 * t_over_m * t_over_m / a).sqrt())
        .fold(0.0, f64::max);
    pair.q0 + 2.0 * pair.p0 * t_over_m + 10.0 * spread
}

/// Radial knots: log-dense near the origin, uniform fill inside the well and uniform outside.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
}

impl RadialGrid {
    /// `k_max` is the largest exterior wavenumber to resolve; `per_wavelength` knots per `2 pi / k`.
    pub fn new(well: &PotentialWell, r_max: f64, k_max: f64, per_wavelength: f64) -> Result<Self> {
        let w = well.width();
        if !(r_max > w) {
            return Err(Error::Domain(format!("r_max = {r_max} must exceed the well width {w}")));
        }
        let k_in = (k_max * k_max + well.depth()).sqrt();
        let h_in = 2.0 * PI / (k_in * per_wavelength);
        let h_out = 2.0 * PI / (k_max * per_wavelength);
        let mut inner: Vec<f64> = (0..48).map(|i| 1e-3 * (w / 1e-3).powf(i as f64 / 47.0)).collect();
        let n_in = (w / h_in).ceil() as usize;
        inner.extend((0..=n_in).map(|i| w * i as f64 / n_in as f64));
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|b, a| (*b - *a).abs() < 0.25 * (w / n_in as f64).min(1e-3));
        *inner.last_mut().unwrap() = w;
        let n_out = ((r_max - w) / h_out).ceil().max(4.0) as usize;
        let outer = (0..=n_out).map(|i| w + (r_max - w) * i as f64 / n_out as f64).collect();
        Ok(Self { inner, outer })
    }

    pub fn r_max(&self) -> f64 {
        *self.outer.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.inner.len() + self.outer.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        self.inner.iter().chain(self.outer.iter()).copied()
    }
}

/// Tabulated radial profiles of the relative state at one time.
#[derive(Debug, Clone)]
pub struct PartialAmplitudeTable {
    pub t_over_m: f64,
    pub l_max: usize,
    pub scattered: bool,
    pub pair: PacketPair,
    width: f64,
    r_max: f64,
    /// Profiles `0..=L` hold the free `A_l`, `L+1..` hold `dA_l` (zero when not scattered).
    inner: SplineSet,
    outer: SplineSet,
    /// Largest relative change of any profile under momentum-order doubling, when checked.
    pub convergence: Option<f64>,
}

/// Tabulates `A_l` (free) and `dA_l` (scattered minus free) on `grid`.
pub fn tabulate(
    pair: &PacketPair,
    well: &PotentialWell,
    spectral: &SpectralCoefficients,
    t_over_m: f64,
    scattered: bool,
    grid: &RadialGrid,
) -> Result<PartialAmplitudeTable> {
    if !(t_over_m >= 0.0) {
        return Err(Error::Domain(format!("t/m must be >= 0, got {t_over_m}")));
    }
    let l_max = spectral.l_max;
    let n_l = l_max + 1;
    let waves: Vec<Vec<PartialWave>> = spectral
        .momenta
        .nodes
        .par_iter()
        .map(|&p| solve_partial_waves(well, l_max, p))
        .collect::<Result<_>>()?;
    // weight_l(p) = (2 pi)^{-3/2} w p^2 c_l e^{-i p^2 t}
    let weights: Vec<Vec<Complex64>> = (0..spectral.momenta.len())
        .map(|j| {
            let p = spectral.momenta.nodes[j];
            let base = INV_TWO_PI_32 * spectral.momenta.weights[j] * p * p;
            let phase = Complex64::from_polar(base, -p * p * t_over_m);
            (0..n_l).map(|l| phase * spectral.coeffs[l][j]).collect()
        })
        .collect();
    let knots: Vec<f64> = grid.knots().collect();
    let columns: Vec<Vec<Complex64>> = knots
        .par_iter()
        .map_init(
            || (RadialScratch::new(l_max), vec![ZERO; n_l], vec![ZERO; n_l]),
            |(scratch, free, delta), &r| {
                let mut acc = vec![ZERO; 2 * n_l];
                for (j, wave) in waves.iter().enumerate() {
                    scratch.free(wave[0].p, r, free);
                    if scattered {
                        scratch.scattered(wave, r, delta);
                    }
                    for l in 0..n_l {
                        acc[l] += weights[j][l] * free[l];
                        if scattered {
                            acc[n_l + l] += weights[j][l] * delta[l];
                        }
                    }
                }
                acc
            },
        )
        .collect();
    let split = grid.inner.len();
    let profiles = |range: std::ops::Range<usize>| -> Vec<Vec<Complex64>> {
        (0..2 * n_l).map(|q| columns[range.clone()].iter().map(|c| c[q]).collect()).collect()
    };
    Ok(PartialAmplitudeTable {
        t_over_m,
        l_max,
        scattered,
        pair: *pair,
        width: well.width(),
        r_max: grid.r_max(),
        inner: SplineSet::new(grid.inner.clone(), profiles(0..split)),
        outer: SplineSet::new(grid.outer.clone(), profiles(split..knots.len())),
        convergence: None,
    })
}

/// Knobs for building a relative-state table.
#[derive(Debug, Clone, Copy)]
pub struct FieldOptions {
    pub l_max: usize,
    /// Momentum order; `None` picks [`default_momentum_order`].
    pub p_order: Option<usize>,
    pub per_wavelength: f64,
    /// Tabulate at least up to this relative distance.
    pub r_cover: f64,
    pub check_convergence: bool,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { l_max: DEFAULT_L_MAX, p_order: None, per_wavelength: 80.0, r_cover: 0.0, check_convergence: false }
    }
}

/// Builds the spectral coefficients, grid and table for one time in a single call.
pub fn relative_table(
    pair: &PacketPair,
    well: &PotentialWell,
    t_over_m: f64,
    scattered: bool,
    opts: &FieldOptions,
) -> Result<PartialAmplitudeTable> {
    let r_max = default_r_max(pair, t_over_m).max(opts.r_cover * 1.0001).max(2.0 * well.width());
    let (lo, hi) = momentum_window(pair);
    let grid = RadialGrid::new(well, r_max, hi, opts.per_wavelength)?;
    let order = opts.p_order.unwrap_or_else(|| default_momentum_order(pair, t_over_m, r_max));
    let spectral = build_spectral(pair, opts.l_max, momentum_rule(order, lo, hi)?)?;
    let mut table = tabulate(pair, well, &spectral, t_over_m, scattered, &grid)?;
    if opts.check_convergence {
        let fine = build_spectral(pair, opts.l_max, momentum_rule(2 * order, lo, hi)?)?;
        let doubled = tabulate(pair, well, &fine, t_over_m, scattered, &grid)?;
        let shift = table.max_relative_difference(&doubled);
        if shift > 1e-5 {
            log::warn!("momentum-order doubling shifts the radial profiles by {shift:.2e} (t/m = {t_over_m})");
        }
        table.convergence = Some(shift);
    }
    Ok(table)
}

impl PartialAmplitudeTable {
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn knot_count(&self) -> usize {
        self.inner.knots().len() + self.outer.knots().len()
    }

    fn spline_for(&self, r: f64) -> Result<&SplineSet> {
        if !(r >= 0.0) || r > self.r_max {
            return Err(Error::OutOfGrid { r, r_max: self.r_max });
        }
        Ok(if r < self.width { &self.inner } else { &self.outer })
    }

    /// Free profiles `A_l(r)` into `free` and scattered corrections `dA_l(r)` into `delta`.
    pub fn profiles(&self, r: f64, free: &mut [Complex64], delta: &mut [Complex64]) -> Result<()> {
        let n = self.l_max + 1;
        let mut buf = vec![ZERO; 2 * n];
        self.spline_for(r)?.eval_into(r, &mut buf);
        free[..n].copy_from_slice(&buf[..n]);
        delta[..n].copy_from_slice(&buf[n..]);
        Ok(())
    }

    /// `sum_l (2l+1) i^l P_l(cos) dA_l(r)`: the scattered wave in the relative coordinate.
    pub fn scattered_wave(&self, r: f64, cos_theta: f64, scratch: &mut FieldScratch) -> Result<Complex64> {
        let n = self.l_max + 1;
        self.spline_for(r)?.eval_into(r, &mut scratch.buf);
        legendre_table(cos_theta.clamp(-1.0, 1.0), &mut scratch.pl);
        let mut sum = ZERO;
        let mut phase = Complex64::new(1.0, 0.0);
        for l in 0..n {
            sum += phase * ((2 * l + 1) as f64 * scratch.pl[l]) * scratch.buf[n + l];
            phase *= Complex64::i();
        }
        Ok(sum)
    }

    /// Truncated partial-wave sum of the tabulated profiles (free plus correction).
    pub fn reconstruct(&self, r: f64, cos_theta: f64) -> Result<Complex64> {
        let n = self.l_max + 1;
        let mut buf = vec![ZERO; 2 * n];
        self.spline_for(r)?.eval_into(r, &mut buf);
        let mut pl = vec![0.0; n];
        legendre_table(cos_theta.clamp(-1.0, 1.0), &mut pl);
        let mut sum = ZERO;
        let mut phase = Complex64::new(1.0, 0.0);
        for l in 0..n {
            sum += phase * ((2 * l + 1) as f64 * pl[l]) * (buf[l] + buf[n + l]);
            phase *= Complex64::i();
        }
        Ok(sum)
    }

    /// Relative amplitude at the Cartesian point `r`: closed-form free packet plus the scattered wave.
    pub fn relative_amplitude(&self, r: Vec3, scratch: &mut FieldScratch) -> Result<Complex64> {
        let free = free_relative_amplitude_at(&self.pair, r, self.t_over_m);
        if !self.scattered {
            return Ok(free);
        }
        let radius = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let cos = if radius > 0.0 { r[2] / radius } else { 1.0 };
        Ok(free + self.scattered_wave(radius, cos, scratch)?)
    }

    /// `sum_l 4 pi (2l+1) int r^2 f(l, profiles) dr` over both radial regions.
    fn radial_integral(&self, f: impl Fn(usize, &[Complex64]) -> Complex64) -> Complex64 {
        let n = self.l_max + 1;
        let mut buf = vec![ZERO; 2 * n];
        let mut total = ZERO;
        for spline in [&self.inner, &self.outer] {
            let knots = spline.knots();
            for pair in knots.windows(2) {
                let rule = gauss_legendre(4, pair[0], pair[1]).expect("valid panel");
                for (r, w) in rule.iter() {
                    spline.eval_into(r, &mut buf);
                    for l in 0..n {
                        total += 4.0 * PI * (2 * l + 1) as f64 * w * r * r * f(l, &buf);
                    }
                }
            }
        }
        total
    }

    /// `<free | scattered - free>` of the relative states.
    pub fn overlap_correction(&self) -> Complex64 {
        let n = self.l_max + 1;
        self.radial_integral(|l, b| b[l].conj() * b[n + l])
    }

    /// `||scattered - free||^2`.
    pub fn correction_norm(&self) -> f64 {
        let n = self.l_max + 1;
        self.radial_integral(|l, b| b[n + l].norm_sqr().into()).re
    }

    /// Norm of the relative state, `1 + 2 Re<free|d> + ||d||^2`.
    pub fn norm(&self) -> f64 {
        1.0 + 2.0 * self.overlap_correction().re + self.correction_norm()
    }

    /// Norm carried by each corrected partial wave `4 pi (2l+1) int r^2 |dA_l|^2`.
    pub fn shell_norms(&self) -> Vec<f64> {
        let n = self.l_max + 1;
        (0..n)
            .map(|l| {
                let q = l;
                self.radial_integral(move |ll, b| if ll == q { b[n + ll].norm_sqr().into() } else { ZERO }).re
            })
            .collect()
    }

    /// Free-profile norm `sum_l 4 pi (2l+1) int r^2 |A_l|^2` (tends to 1 as `L` grows).
    pub fn free_profile_norm(&self) -> f64 {
        self.radial_integral(|l, b| b[l].norm_sqr().into()).re
    }

    fn max_relative_difference(&self, other: &Self) -> f64 {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in [(&self.inner, &other.inner), (&self.outer, &other.outer)] {
            for (pa, pb) in a.profiles().iter().zip(b.profiles()) {
                for (x, y) in pa.iter().zip(pb) {
                    diff = diff.max((x - y).norm());
                    scale = scale.max(x.norm());
                }
            }
        }
        if scale > 0.0 { diff / scale } else { 0.0 }
    }
}

/// Reusable buffers for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct FieldScratch {
    buf: Vec<Complex64>,
    pl: Vec<f64>,
}

impl FieldScratch {
    pub fn new(table: &PartialAmplitudeTable) -> Self {
        Self { buf: vec![ZERO; 2 * (table.l_max + 1)], pl: vec![0.0; table.l_max + 1] }
    }
}

/// Two-particle amplitude `Phi_CM((r1+r2)/2) phi((r1-r2))`.
pub fn eval_state(pair: &PacketPair, table: &PartialAmplitudeTable, r1: Vec3, r2: Vec3) -> Result<Complex64> {
    let big_r = std::array::from_fn(|i| 0.5 * (r1[i] + r2[i]));
    let r = std::array::from_fn(|i| r1[i] - r2[i]);
    let mut scratch = FieldScratch::new(table);
    Ok(cm_amplitude(pair, big_r, table.t_over_m) * table.relative_amplitude(r, &mut scratch)?)
}

/// `F = |<free|scattered>|^2 / <scattered|scattered>` for the relative motion.
pub fn overlap_from_table(table: &PartialAmplitudeTable) -> f64 {
    let overlap = Complex64::new(1.0, 0.0) + table.overlap_correction();
    (overlap.norm_sqr() / table.norm()).min(1.0)
}

/// Overlap of the free and scattered states at `t_over_m`.
pub fn overlap_f(pair: &PacketPair, well: &PotentialWell, t_over_m: f64, opts: &FieldOptions) -> Result<f64> {
    Ok(overlap_from_table(&relative_table(pair, well, t_over_m, true, opts)?))
}
