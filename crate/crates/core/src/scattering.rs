//! Single-channel scattering by an attractive spherical square well.
//!
//! Units: `hbar = 1`, lengths in well widths, relative energy `E = p^2` (the
//! reduced mass is `m / 2` with `m = 1`). Inside the well the radial wavenumber
//! is `k' = sqrt(p^2 + V0)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadmath::{sph_bessel_derivatives, sph_bessel_j_table, sph_bessel_y_table, MAX_DEGREE};

/// Partial-wave cutoff used throughout the pipelines.
pub const DEFAULT_L_MAX: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialWell {
    depth: f64,
    width: f64,
}

impl PotentialWell {
    pub fn new(depth: f64, width: f64) -> Result<Self> {
        if !(depth >= 0.0) || !depth.is_finite() {
            return Err(Error::Domain(format!("well depth must be finite and >= 0, got {depth}")));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Domain(format!("well width must be finite and > 0, got {width}")));
        }
        Ok(Self { depth, width })
    }

    /// Well of unit width.
    pub fn unit(depth: f64) -> Result<Self> {
        Self::new(depth, 1.0)
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn interior_wavenumber(&self, p: f64) -> f64 {
        (p * p + self.depth).sqrt()
    }
}

/// Matched solution of one partial wave at one momentum.
#[derive(Debug, Clone, Copy)]
pub struct PartialWave {
    pub l: usize,
    pub p: f64,
    /// Principal-branch phase shift in `(-pi/2, pi/2]`.
    pub delta: f64,
    /// `B_l` multiplying `j_l(k' r)` inside the well.
    pub interior: Complex64,
    pub k_inside: f64,
    width: f64,
}

impl PartialWave {
    /// `e^{i delta} sin delta`, the partial-wave amplitude `p f_l`.
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.delta.sin(), self.delta)
    }

    /// `e^{2 i delta}`.
    pub fn s_matrix(&self) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * self.delta)
    }
}

/// Solves every partial wave `0..=l_max` at momentum `p`, sharing the Bessel tables.
pub fn solve_partial_waves(well: &PotentialWell, l_max: usize, p: f64) -> Result<Vec<PartialWave>> {
    if l_max > MAX_DEGREE {
        return Err(Error::Domain(format!("partial wave {l_max} exceeds {MAX_DEGREE}")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("momentum must be positive, got {p}")));
    }
    let w = well.width;
    let k = well.interior_wavenumber(p);
    let (x, y) = (p * w, k * w);
    let n = l_max + 2;
    let mut jo = vec![0.0; n];
    let mut yo = vec![0.0; n];
    let mut ji = vec![0.0; n];
    sph_bessel_j_table(x, &mut jo);
    sph_bessel_y_table(x, &mut yo);
    sph_bessel_j_table(y, &mut ji);
    let mut djo = vec![0.0; n - 1];
    let mut dyo = vec![0.0; n - 1];
    let mut dji = vec![0.0; n - 1];
    sph_bessel_derivatives(x, &jo, &mut djo);
    sph_bessel_derivatives(x, &yo, &mut dyo);
    sph_bessel_derivatives(y, &ji, &mut dji);

    (0..=l_max)
        .map(|l| {
            let (big_j, big_dj) = (ji[l], dji[l]);
            let num = k * big_dj * jo[l] - p * big_j * djo[l];
            let den = k * big_dj * yo[l] - p * big_j * dyo[l];
            let scale = (k * big_dj).abs() * (jo[l].abs() + yo[l].abs())
                + (p * big_j).abs() * (djo[l].abs() + dyo[l].abs());
            if num.abs() <= 1e-14 * scale && den.abs() <= 1e-14 * scale {
                return Err(Error::SingularMatching { l, p });
            }
            let delta = if den == 0.0 { PI / 2.0 } else { (num / den).atan() };
            let (s, c) = delta.sin_cos();
            let phase = Complex64::from_polar(1.0, delta);
            let interior = if big_j.abs() >= big_dj.abs() {
                phase * (c * jo[l] - s * yo[l]) / big_j
            } else {
                phase * p * (c * djo[l] - s * dyo[l]) / (k * big_dj)
            };
            Ok(PartialWave { l, p, delta, interior, k_inside: k, width: w })
        })
        .collect()
}

/// Phase shift `delta_l(p)` on the principal branch `(-pi/2, pi/2]`.
///
/// Use [`PhaseShiftFn`] when a continuous branch is needed.
pub fn phase_shift(well: &PotentialWell, l: usize, p: f64) -> Result<f64> {
    Ok(solve_partial_waves(well, l, p)?[l].delta)
}

/// Regular radial solution normalised to `e^{i delta}[cos delta j_l(pr) - sin delta y_l(pr)]` outside.
pub fn radial_wave(well: &PotentialWell, l: usize, p: f64, r: f64) -> Result<Complex64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let wave = solve_partial_waves(well, l, p)?[l];
    let mut values = vec![0.0; l + 1];
    Ok(if r < well.width {
        sph_bessel_j_table(wave.k_inside * r, &mut values);
        wave.interior * values[l]
    } else {
        let mut second = vec![0.0; l + 1];
        sph_bessel_j_table(p * r, &mut values);
        sph_bessel_y_table(p * r, &mut second);
        let (s, c) = wave.delta.sin_cos();
        Complex64::from_polar(1.0, wave.delta) * (c * values[l] - s * second[l])
    })
}

/// Buffers for evaluating `psi_l(p, r) - j_l(p r)` at many radii for one momentum.
pub(crate) struct RadialScratch {
    j: Vec<f64>,
    y: Vec<f64>,
    inner: Vec<f64>,
}

impl RadialScratch {
    pub(crate) fn new(l_max: usize) -> Self {
        Self { j: vec![0.0; l_max + 1], y: vec![0.0; l_max + 1], inner: vec![0.0; l_max + 1] }
    }

    /// Writes `psi_l(p, r) - j_l(p r)` for every solved wave; `r >= 0`.
    ///
    /// Outside the well this is the outgoing wave `i e^{i delta} sin delta h_l^{(1)}(p r)`.
    pub(crate) fn scattered(&mut self, waves: &[PartialWave], r: f64, out: &mut [Complex64]) {
        let n = waves.len();
        let p = waves[0].p;
        if r <= 0.0 {
            // only l = 0 survives at the origin
            for (l, (o, wave)) in out.iter_mut().zip(waves).enumerate() {
                *o = if l == 0 { wave.interior - 1.0 } else { Complex64::new(0.0, 0.0) };
            }
            return;
        }
        let (j, inner) = (&mut self.j[..n], &mut self.inner[..n]);
        sph_bessel_j_table(p * r, j);
        if r < waves[0].width {
            sph_bessel_j_table(waves[0].k_inside * r, inner);
            for l in 0..n {
                out[l] = waves[l].interior * inner[l] - j[l];
            }
        } else {
            let y = &mut self.y[..n];
            sph_bessel_y_table(p * r, y);
            for l in 0..n {
                out[l] = Complex64::i() * waves[l].amplitude() * Complex64::new(j[l], y[l]);
            }
        }
    }

    /// Writes the free radial functions `j_l(p r)`.
    pub(crate) fn free(&mut self, p: f64, r: f64, out: &mut [Complex64]) {
        let n = out.len();
        if r <= 0.0 {
            for (l, o) in out.iter_mut().enumerate() {
                *o = Complex64::new(if l == 0 { 1.0 } else { 0.0 }, 0.0);
            }
            return;
        }
        let j = &mut self.j[..n];
        sph_bessel_j_table(p * r, j);
        for (o, v) in out.iter_mut().zip(j.iter()) {
            *o = Complex64::new(*v, 0.0);
        }
    }
}

/// Total elastic cross section `4 pi / p^2 sum_{l <= l_max} (2l+1) sin^2 delta_l`.
pub fn cross_section(well: &PotentialWell, p: f64, l_max: usize) -> Result<f64> {
    let waves = solve_partial_waves(well, l_max, p)?;
    let sum: f64 = waves.iter().map(|w| (2 * w.l + 1) as f64 * w.delta.sin().powi(2)).sum();
    Ok(4.0 * PI / (p * p) * sum)
}

/// Forward scattering amplitude `f(0) = sum (2l+1)(e^{2i delta_l} - 1) / (2ip)`.
pub fn forward_amplitude(well: &PotentialWell, p: f64, l_max: usize) -> Result<Complex64> {
    let waves = solve_partial_waves(well, l_max, p)?;
    let sum: Complex64 =
        waves.iter().map(|w| (2 * w.l + 1) as f64 * (w.s_matrix() - 1.0)).sum();
    Ok(sum / Complex64::new(0.0, 2.0 * p))
}

/// Folds an angle difference into `(-pi/2, pi/2]`.
fn wrap_half_turn(x: f64) -> f64 {
    let mut d = x - PI * (x / PI).round();
    if d <= -PI / 2.0 {
        d += PI;
    }
    d
}

/// Phase shift of one partial wave followed along a continuous branch.
///
/// The branch is anchored at high momentum, where `delta_l -> 0`, and traced
/// down to the query points with steps small enough that consecutive values
/// differ by less than `pi / 4`.
#[derive(Debug, Clone, Copy)]
pub struct PhaseShiftFn {
    pub well: PotentialWell,
    pub l: usize,
}

impl PhaseShiftFn {
    pub fn new(well: PotentialWell, l: usize) -> Self {
        Self { well, l }
    }

    fn principal(&self, p: f64) -> Result<f64> {
        phase_shift(&self.well, self.l, p)
    }

    /// Unwrapped `delta_l` at strictly increasing momenta `ps`.
    pub fn unwrapped(&self, ps: &[f64]) -> Result<Vec<f64>> {
        if ps.is_empty() {
            return Ok(Vec::new());
        }
        if ps.windows(2).any(|w| !(w[0] < w[1])) || !(ps[0] > 0.0) {
            return Err(Error::Domain("momenta must be positive and strictly increasing".into()));
        }
        let w = self.well.width();
        let anchor = ps[ps.len() - 1].max(2.0 * self.well.depth() * w + (5.0 + self.l as f64) / w);
        let max_step = 0.01 / w;
        let mut p = anchor;
        let mut delta = self.principal(p)?;
        let mut out = vec![0.0; ps.len()];
        for (slot, &target) in out.iter_mut().zip(ps).rev() {
            while p > target {
                let mut step = (p - target).min(max_step);
                loop {
                    let trial = if step >= p - target { target } else { p - step };
                    let d = wrap_half_turn(self.principal(trial)? - delta);
                    if d.abs() < PI / 4.0 || step < 1e-12 {
                        delta += d;
                        p = trial;
                        break;
                    }
                    step *= 0.5;
                }
            }
            *slot = delta;
        }
        Ok(out)
    }

    pub fn at(&self, p: f64) -> Result<f64> {
        Ok(self.unwrapped(&[p])?[0])
    }
}

/// Wigner time delay `d delta_l / dE` with `E = p^2`.
///
/// Richardson-extrapolated central differences of the locally unwrapped phase.
pub fn time_delay(well: &PotentialWell, l: usize, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("momentum must be positive, got {p}")));
    }
    let mut h = 1e-3 * p.max(1.0);
    if p - 2.0 * h <= 0.0 {
        h = 0.25 * p;
    }
    let slope = |h: f64| -> Result<f64> {
        let up = phase_shift(well, l, p + h)?;
        let down = phase_shift(well, l, p - h)?;
        Ok(wrap_half_turn(up - down) / (2.0 * h))
    };
    let coarse = slope(h)?;
    let fine = slope(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0 / (2.0 * p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceCriterion {
    /// Position of the cross-section maximum.
    #[default]
    CrossSectionPeak,
    /// Position of the time-delay maximum.
    TimeDelayPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceInfo {
    pub depth: f64,
    pub l: usize,
    pub p_res: f64,
    /// Full width at half maximum of `tau(p)`, momentum units.
    pub fwhm: f64,
    /// The same width expressed in energy, `p_hi^2 - p_lo^2`.
    pub fwhm_energy: f64,
    pub sigma_max: f64,
    pub p_tau_peak: f64,
    pub tau_max: f64,
}

/// Sampling and selection knobs for [`find_resonance`].
#[derive(Debug, Clone, Copy)]
pub struct ResonanceSearch {
    pub samples: usize,
    pub l_max: usize,
    pub criterion: ResonanceCriterion,
}

impl Default for ResonanceSearch {
    fn default() -> Self {
        Self { samples: 200, l_max: DEFAULT_L_MAX, criterion: ResonanceCriterion::CrossSectionPeak }
    }
}

/// Locates the resonance of partial wave `l` in `[p_lo, p_hi]` with default settings.
pub fn find_resonance(well: &PotentialWell, l: usize, p_lo: f64, p_hi: f64) -> Result<ResonanceInfo> {
    ResonanceSearch::default().find(well, l, p_lo, p_hi)
}

impl ResonanceSearch {
    pub fn find(&self, well: &PotentialWell, l: usize, p_lo: f64, p_hi: f64) -> Result<ResonanceInfo> {
        if !(0.0 < p_lo && p_lo < p_hi) {
            return Err(Error::Domain(format!("invalid bracket [{p_lo}, {p_hi}]")));
        }
        let n = self.samples.max(8);
        let no_peak = || Error::NoPeak { l, lo: p_lo, hi: p_hi };
        let grid: Vec<f64> =
            (0..n).map(|i| p_lo + (p_hi - p_lo) * i as f64 / (n - 1) as f64).collect();
        let tau = |p: f64| time_delay(well, l, p);
        let taus = grid.iter().map(|&p| tau(p)).collect::<Result<Vec<_>>>()?;
        let i_tau = argmax(&taus);
        if i_tau == 0 || i_tau == n - 1 {
            return Err(no_peak());
        }
        let p_tau_peak = golden_max(&tau, grid[i_tau - 1], grid[i_tau + 1])?;
        let tau_max = tau(p_tau_peak)?;
        if !(tau_max > 0.0) {
            return Err(no_peak());
        }
        let half = 0.5 * tau_max;
        let step = (p_hi - p_lo) / (n - 1) as f64;

        // walk outwards until tau drops below half, then bisect the crossing
        let mut left = p_tau_peak;
        loop {
            let next = left - step;
            if next <= 1e-6 {
                return Err(no_peak());
            }
            if tau(next)? < half {
                left = bisect(&|p| Ok(tau(p)? - half), next, left)?;
                break;
            }
            left = next;
        }
        let mut right = p_tau_peak;
        loop {
            let next = right + step;
            if next > 10.0 * p_hi {
                return Err(no_peak());
            }
            if tau(next)? < half {
                right = bisect(&|p| Ok(tau(p)? - half), right, next)?;
                break;
            }
            right = next;
        }

        let sigma = |p: f64| cross_section(well, p, self.l_max);
        let p_res = match self.criterion {
            ResonanceCriterion::TimeDelayPeak => p_tau_peak,
            ResonanceCriterion::CrossSectionPeak => {
                let sigmas = grid.iter().map(|&p| sigma(p)).collect::<Result<Vec<_>>>()?;
                let i = argmax(&sigmas);
                if i == 0 || i == n - 1 {
                    return Err(no_peak());
                }
                golden_max(&sigma, grid[i - 1], grid[i + 1])?
            }
        };
        Ok(ResonanceInfo {
            depth: well.depth(),
            l,
            p_res,
            fwhm: right - left,
            fwhm_energy: right * right - left * left,
            sigma_max: sigma(p_res)?,
            p_tau_peak,
            tau_max,
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64) -> Result<f64> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < 1e-12 {
            return Ok(m);
        }
        let fm = f(m)?;
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Number of s-wave bound states: odd multiples of `pi/2` below `sqrt(V0) w`.
pub fn bound_state_count(well: &PotentialWell, l: usize) -> Result<usize> {
    if l != 0 {
        return Err(Error::Unsupported(format!(
            "bound-state counting is only implemented for l = 0 (got l = {l})"
        )));
    }
    let z = well.depth().sqrt() * well.width();
    Ok((1..).take_while(|&n| (2 * n - 1) as f64 * PI / 2.0 < z).count())
}
