//! Fast invariant checks that need no reference data.

use qcollide::analysis::linear_fit;
use qcollide::entanglement::{matrix_purity, saturated_k};
use qcollide::field::{relative_table, FieldOptions};
use qcollide::momentum_reflection::reflection_purity;
use qcollide::scattering::{bound_state_count, cross_section, forward_amplitude, phase_shift};
use qcollide::{PacketPair, PotentialWell, QuadSpec, Result};

type Check = fn() -> Result<(bool, String)>;

fn free_phase_shifts() -> Result<(bool, String)> {
    let well = PotentialWell::unit(0.0)?;
    let worst = (0..=6).flat_map(|l| [0.1, 0.8, 2.0].map(move |p| (l, p))).try_fold(0.0f64, |m, (l, p)| {
        Ok::<_, qcollide::Error>(m.max(phase_shift(&well, l, p)?.abs()))
    })?;
    Ok((worst < 1e-12, format!("max |delta| = {worst:.1e}")))
}

fn optical_theorem() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for v in [1.0, 5.0, 8.0, 12.0] {
        let well = PotentialWell::unit(v)?;
        for p in [0.3, 0.87, 1.5] {
            let sigma = cross_section(&well, p, 6)?;
            let f = forward_amplitude(&well, p, 6)?;
            worst = worst.max((4.0 * std::f64::consts::PI / p * f.im / sigma - 1.0).abs());
        }
    }
    Ok((worst < 1e-10, format!("max relative deviation {worst:.1e}")))
}

fn bound_state_threshold() -> Result<(bool, String)> {
    let below = bound_state_count(&PotentialWell::unit(2.46)?, 0)?;
    let above = bound_state_count(&PotentialWell::unit(2.48)?, 0)?;
    Ok((below == 0 && above == 1, format!("count {below} -> {above} across V0 = pi^2/4")))
}

fn free_state_norm() -> Result<(bool, String)> {
    let pair = PacketPair::new([1.0, 1.0, 2.0], 0.8, 1.0)?;
    let well = PotentialWell::unit(0.0)?;
    let mut worst = 0.0f64;
    for t in [0.0, 5.0, 20.0] {
        let table = relative_table(&pair, &well, t, true, &FieldOptions::default())?;
        worst = worst.max((table.norm() - 1.0).abs());
    }
    Ok((worst < 1e-6, format!("max |norm - 1| = {worst:.1e}")))
}

fn product_purity() -> Result<(bool, String)> {
    let t = faer::Mat::from_fn(6, 5, |i, j| num_complex::Complex64::new(1.0 + i as f64, 0.5) * (j as f64 - 2.0));
    let p = matrix_purity(t.as_ref());
    Ok(((p - 1.0).abs() < 1e-12, format!("P = {p}")))
}

fn separable_without_interaction() -> Result<(bool, String)> {
    let pair = PacketPair::new([4.0, 4.0, 6.0], 0.8, 1.0)?;
    let quad = QuadSpec { orders: [16, 32, 8], ..QuadSpec::default() };
    let k = saturated_k(&pair, &PotentialWell::unit(0.0)?, &quad)?.k;
    Ok(((k - 1.0).abs() < 0.02, format!("K = {k}")))
}

fn free_reflection() -> Result<(bool, String)> {
    let pair = PacketPair::new([4.0, 4.0, 6.0], 0.8, 1.0)?;
    let quad = QuadSpec { orders: [16, 32, 8], ..QuadSpec::default() };
    let r = reflection_purity(&pair, &PotentialWell::unit(0.0)?, &quad)?;
    Ok(((r.norm - 1.0).abs() < 1e-3 && (r.k_refl - 1.0).abs() < 1e-3, format!("norm = {}, K = {}", r.norm, r.k_refl)))
}

fn exact_line_fit() -> Result<(bool, String)> {
    let xs = [0.0, 1.0, 2.0, 3.5];
    let ys = xs.map(|x| 2.0 * x + 1.0);
    let fit = linear_fit(&xs, &ys)?;
    Ok(((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12, format!("{fit:?}")))
}

/// Runs every check, printing one line each; returns the number of failures.
pub fn run() -> usize {
    let checks: [(&str, Check); 8] = [
        ("free-phase-shifts", free_phase_shifts),
        ("optical-theorem", optical_theorem),
        ("bound-state-threshold", bound_state_threshold),
        ("free-state-norm", free_state_norm),
        ("product-purity", product_purity),
        ("no-interaction-separable", separable_without_interaction),
        ("no-interaction-reflection", free_reflection),
        ("exact-line-fit", exact_line_fit),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    failed
}
