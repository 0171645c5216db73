//! Sweeps, fits and tables built on the physics modules.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{saturated_k, EntanglementPoint, QuadSpec};
use crate::error::{Error, Result};
use crate::momentum_reflection::asymptotic_point;
use crate::scattering::{cross_section, PotentialWell, ResonanceInfo, ResonanceSearch, DEFAULT_L_MAX};
use crate::wavepacket::PacketPair;

/// Depths of the tabulated p-wave shape resonances.
pub const RESONANCE_DEPTHS: [f64; 8] = [8.8, 8.6, 8.4, 8.2, 8.0, 7.8, 7.6, 7.2];

/// Momentum bracket that holds the p-wave resonance for depths 7 to 9.
pub const RESONANCE_BRACKET: (f64, f64) = (0.4, 1.4);

/// Ordinary least squares `y = slope x + intercept`, also written `y = gamma (x - beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub gamma: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn residuals(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        xs.iter().zip(ys).map(|(x, y)| y - self.predict(*x)).collect()
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::Degenerate(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate("a fit needs at least 3 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite data".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 || xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, gamma: slope, beta: -intercept / slope, r_squared, points: xs.len() })
}

/// `|residual at the smallest x| > |median residual|`: the low-energy end departs from the line.
pub fn low_end_departs(fit: &LinearFit, xs: &[f64], ys: &[f64]) -> bool {
    let res = fit.residuals(xs, ys);
    let first = xs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| res[i]).unwrap_or(0.0);
    let mut abs: Vec<f64> = res.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = if abs.is_empty() {
        0.0
    } else if abs.len() % 2 == 1 {
        abs[abs.len() / 2]
    } else {
        0.5 * (abs[abs.len() / 2 - 1] + abs[abs.len() / 2])
    };
    first.abs() > median
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "p0")]
    P0,
    #[serde(rename = "V0")]
    V0,
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p0" => Ok(Self::P0),
            "V0" | "v0" => Ok(Self::V0),
            _ => Err(Error::Config(format!("unknown sweep variable `{s}` (expected p0 or V0)"))),
        }
    }
}

/// How the post-collision Schmidt number is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationMethod {
    /// Position-space state at the saturation time.
    #[default]
    Position,
    /// Momentum-space state `S g` after the collision (`t -> infinity`).
    Asymptotic,
}

/// One swept point, self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub variable: SweepVariable,
    pub value: f64,
    pub p0: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub q0: f64,
    pub t_over_m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub norm: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub sigma: f64,
    pub quad_hash: String,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub pair: PacketPair,
    pub well: PotentialWell,
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub quad: QuadSpec,
    pub method: SaturationMethod,
    /// Points evaluated concurrently.
    pub width: usize,
}

impl SweepPlan {
    fn instance(&self, value: f64) -> Result<(PacketPair, PotentialWell)> {
        match self.variable {
            SweepVariable::P0 => Ok((PacketPair::new(self.pair.a, value, self.pair.q0)?, self.well)),
            SweepVariable::V0 => Ok((self.pair, PotentialWell::new(value, self.well.width())?)),
        }
    }

    /// True when `rec` was produced by this plan's physics and settings.
    pub fn owns(&self, rec: &SweepRecord) -> bool {
        let fixed = match self.variable {
            SweepVariable::P0 => rec.v0 == self.well.depth(),
            SweepVariable::V0 => rec.p0 == self.pair.p0,
        };
        fixed
            && rec.variable == self.variable
            && rec.quad_hash == self.tag()
            && [rec.ax, rec.ay, rec.az] == self.pair.a
            && rec.q0 == self.pair.q0
    }

    /// Hash tag of the numerical settings, including the saturation method.
    pub fn tag(&self) -> String {
        match self.method {
            SaturationMethod::Position => self.quad.hash(),
            SaturationMethod::Asymptotic => format!("{}-inf", self.quad.hash()),
        }
    }

    pub fn evaluate(&self, value: f64) -> Result<SweepRecord> {
        let (pair, well) = self.instance(value)?;
        let point: EntanglementPoint = match self.method {
            SaturationMethod::Position => saturated_k(&pair, &well, &self.quad)?,
            SaturationMethod::Asymptotic => asymptotic_point(&pair, &well, &self.quad)?,
        };
        Ok(SweepRecord {
            variable: self.variable,
            value,
            p0: pair.p0,
            v0: well.depth(),
            ax: pair.a[0],
            ay: pair.a[1],
            az: pair.a[2],
            q0: pair.q0,
            t_over_m: point.t_over_m,
            k: point.k,
            p: point.p,
            norm: point.norm,
            f: point.f,
            sigma: cross_section(&well, pair.p0, DEFAULT_L_MAX)?,
            quad_hash: self.tag(),
        })
    }
}

/// Where sweep rows go: a CSV file, started with `preamble` (comment lines) when new.
#[derive(Debug, Clone, Copy)]
pub struct SweepSink<'a> {
    pub path: &'a Path,
    pub preamble: &'a str,
}

/// Outcome of a sweep: finished records in value order and the failures.
#[derive(Debug)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<(f64, Error)>,
}

/// Runs the sweep; with a sink, rows are appended as they finish and values the file
/// already holds for the same physics and settings are not recomputed. Failed points
/// are logged and skipped.
pub fn sweep(plan: &SweepPlan, sink: Option<SweepSink<'_>>) -> Result<SweepOutcome> {
    if plan.values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("sweep values must be strictly increasing".into()));
    }
    let mut done: BTreeMap<u64, SweepRecord> = BTreeMap::new();
    if let Some(sink) = sink.filter(|s| s.path.exists()) {
        for rec in read_records(sink.path)? {
            if plan.owns(&rec) {
                done.insert(rec.value.to_bits(), rec);
            }
        }
    }
    let mut writer = match sink {
        Some(s) => Some(RecordWriter::append(s.path, s.preamble)?),
        None => None,
    };
    let mut failures = Vec::new();
    let pending: Vec<f64> = plan.values.iter().cloned().filter(|v| !done.contains_key(&v.to_bits())).collect();
    for chunk in pending.chunks(plan.width.max(1)) {
        let results: Vec<(f64, Result<SweepRecord>)> = chunk.par_iter().map(|&v| (v, plan.evaluate(v))).collect();
        for (v, r) in results {
            match r {
                Ok(rec) => {
                    if let Some(w) = writer.as_mut() {
                        w.write(&rec)?;
                    }
                    done.insert(v.to_bits(), rec);
                }
                Err(e) => {
                    log::warn!("{:?} = {v}: {e}", plan.variable);
                    failures.push((v, e));
                }
            }
        }
    }
    let records = plan.values.iter().filter_map(|v| done.get(&v.to_bits()).cloned()).collect();
    Ok(SweepOutcome { records, failures })
}

/// Fits `sigma = gamma (K - beta)` to sweep records.
pub fn fit_sigma_on_k(records: &[SweepRecord]) -> Result<LinearFit> {
    let ks: Vec<f64> = records.iter().map(|r| r.k).collect();
    let sigmas: Vec<f64> = records.iter().map(|r| r.sigma).collect();
    linear_fit(&ks, &sigmas)
}

/// Fits `K = slope F + intercept` over a time series.
pub fn fit_k_on_f(points: &[EntanglementPoint]) -> Result<LinearFit> {
    let fs: Vec<f64> = points.iter().map(|p| p.f).collect();
    let ks: Vec<f64> = points.iter().map(|p| p.k).collect();
    linear_fit(&fs, &ks)
}

/// Resonance parameters of partial wave `l` for each depth.
pub fn resonance_table(depths: &[f64], l: usize, search: &ResonanceSearch) -> Result<Vec<ResonanceInfo>> {
    depths
        .iter()
        .map(|&v| search.find(&PotentialWell::unit(v)?, l, RESONANCE_BRACKET.0, RESONANCE_BRACKET.1))
        .collect()
}

/// Incremental CSV writer: preamble and header once, one flushed row per record.
pub struct RecordWriter {
    inner: csv::Writer<File>,
}

impl RecordWriter {
    pub fn append(path: &Path, preamble: &str) -> Result<Self> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            file.write_all(preamble.as_bytes())?;
        }
        let inner = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        Ok(Self { inner })
    }

    pub fn write(&mut self, rec: &SweepRecord) -> Result<()> {
        self.inner.serialize(rec)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads sweep records, skipping `#` comment lines.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_records_json(records: &[SweepRecord], out: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, records)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.5, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && (fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
        assert!((fit.beta + 0.5).abs() < 1e-14 && fit.gamma == fit.slope);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..7.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -1.3 * x + 0.4 + rng.gen_range(-1.0..1.0)).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        // [n sx; sx sxx] [b; m] = [sy; sxy] solved by Cramer's rule
        let n = xs.len() as f64;
        let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        let m = (n * sxy - sx * sy) / det;
        let b = (sxx * sy - sx * sxy) / det;
        assert!((fit.slope - m).abs() < 1e-10 && (fit.intercept - b).abs() < 1e-10);
        let res = fit.residuals(&xs, &ys);
        assert!(res.iter().sum::<f64>().abs() < 1e-10);
        assert!(res.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
        assert!(matches!(linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn table_rows_and_ordering() {
        let rows = resonance_table(&RESONANCE_DEPTHS, 1, &ResonanceSearch::default()).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].sigma_max > w[1].sigma_max);
        }
        let at = |v: f64| rows.iter().find(|r| r.depth == v).unwrap();
        for (v, p, fw, s) in [(8.0, 0.87, 0.43, 53.81), (8.6, 0.70, 0.29, 83.29), (7.8, 0.93, 0.47, 47.66)] {
            let r = at(v);
            assert!((r.p_res - p).abs() <= 0.01 && (r.fwhm - fw).abs() <= 0.02 && (r.sigma_max / s - 1.0).abs() < 0.01, "{r:?}");
        }
    }

    fn free_plan(values: Vec<f64>) -> SweepPlan {
        SweepPlan {
            pair: PacketPair::new([4.0, 4.0, 6.0], 0.8, 1.0).unwrap(),
            well: PotentialWell::unit(0.0).unwrap(),
            variable: SweepVariable::P0,
            values,
            quad: QuadSpec { orders: [12, 24, 8], ..QuadSpec::default() },
            method: SaturationMethod::Asymptotic,
            width: 1,
        }
    }

    #[test]
    fn sweep_resumes_from_partial_file() {
        let dir = std::env::temp_dir().join(format!("qcollide-sweep-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sweep.csv");
        let _ = std::fs::remove_file(&path);
        let sink = SweepSink { path: &path, preamble: "# test\n" };
        let first = sweep(&free_plan(vec![0.6, 0.9]), Some(sink)).unwrap().records;
        let all = sweep(&free_plan(vec![0.6, 0.9, 1.2]), Some(sink)).unwrap().records;
        assert_eq!(&all[..2], &first[..]);
        let other = SweepPlan { pair: PacketPair::new([4.0, 4.0, 6.0], 0.8, 2.0).unwrap(), ..free_plan(vec![0.6]) };
        assert!(all.iter().all(|r| !other.owns(r)));
        assert_eq!(read_records(&path).unwrap().len(), 3);
        for r in &all {
            assert!((r.k - 1.0).abs() < 0.02 && r.sigma.abs() < 1e-12, "{r:?}");
        }
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("# test\nvariable,value,p0,V0,ax,ay,az,q0,t_over_m,K,P,norm,F,sigma,quad_hash\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_rejects_unordered_values() {
        assert!(sweep(&free_plan(vec![0.9, 0.6]), None).is_err());
    }
}
