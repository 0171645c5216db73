mod config;
mod output;
mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcollide::analysis::{self, SaturationMethod, SweepPlan, SweepSink, SweepVariable, RESONANCE_BRACKET, RESONANCE_DEPTHS};
use qcollide::entanglement::{entanglement_at, saturated_k, EntanglementPoint};
use qcollide::momentum_reflection::{asymptotic_point, reflection_purity};
use qcollide::scattering::{cross_section, PhaseShiftFn};
use qcollide::{Error, GridKind, ResonanceCriterion, ResonanceSearch, Result};
use serde::Serialize;

use config::{Format, RunConfig};
use output::{emit, Header};

#[derive(Parser, Debug)]
#[command(name = "qcollide", version, about = "Entanglement generated when two Gaussian wave packets collide through a spherical well")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Repeat with all quadrature orders doubled and append the change in K.
    #[arg(long, global = true)]
    check_convergence: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Well depth V0.
    #[arg(long = "v0", global = true)]
    v0: Option<f64>,
    /// Well radius.
    #[arg(long, global = true)]
    width: Option<f64>,
    /// Packet dispersion `ax,ay,az`.
    #[arg(long, global = true, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long, global = true)]
    p0: Option<f64>,
    #[arg(long, global = true)]
    q0: Option<f64>,
    /// Per-particle orders `n_rho,n_z,n_phi` (cylindrical) or `n_x,n_y,n_z` (cartesian).
    #[arg(long, global = true, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    grid: Option<GridArg>,
    #[arg(long, global = true)]
    box_scale: Option<f64>,
    #[arg(long, global = true)]
    l_max: Option<usize>,
    #[arg(long, global = true)]
    p_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridArg {
    Cylindrical,
    Cartesian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Position,
    Asymptotic,
}

impl From<MethodArg> for SaturationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Position => SaturationMethod::Position,
            MethodArg::Asymptotic => SaturationMethod::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CriterionArg {
    CrossSection,
    TimeDelay,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Phase shifts delta_l(p), continuous in p.
    PhaseShifts(MomentumGrid),
    /// Total cross section sigma(p).
    CrossSection(MomentumGrid),
    /// Position, width and peak cross section of shape resonances.
    Resonances(ResonanceArgs),
    /// K, purity, norm and overlap F at a list of times.
    Evolve(EvolveArgs),
    /// K after the collision.
    Saturate(SaturateArgs),
    /// Saturated K and sigma over a list of p0 or V0 values.
    Sweep(SweepArgs),
    /// Least-squares line through two columns of a CSV file.
    Fit(FitArgs),
    /// On-shell reflection approximation: norm deficit and K.
    Reflection(ReflectionArgs),
    /// Fast invariant checks; exits nonzero if any fails.
    Selftest,
}

#[derive(Args, Debug)]
struct MomentumGrid {
    #[arg(long, default_value_t = 0.05)]
    p_min: f64,
    #[arg(long, default_value_t = 2.0)]
    p_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
}

impl MomentumGrid {
    fn momenta(&self) -> Result<Vec<f64>> {
        if !(0.0 < self.p_min && self.p_min < self.p_max) || self.points < 2 {
            return Err(Error::Config("need 0 < p-min < p-max and at least 2 points".into()));
        }
        Ok(linspace(self.p_min, self.p_max, self.points))
    }
}

#[derive(Args, Debug)]
struct ResonanceArgs {
    /// Depths to scan (default: the tabulated set; `--v0` selects one).
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::CrossSection)]
    criterion: CriterionArg,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = RESONANCE_BRACKET.0)]
    p_lo: f64,
    #[arg(long, default_value_t = RESONANCE_BRACKET.1)]
    p_hi: f64,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    /// Times t/m (default: from the config).
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SaturateArgs {
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// `p0` or `V0`.
    #[arg(long)]
    variable: Option<String>,
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Evenly spaced values `from,to,count` instead of `--values`.
    #[arg(long, value_delimiter = ',', conflicts_with = "values")]
    range: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Points evaluated concurrently.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "K")]
    x: String,
    #[arg(long, default_value = "sigma")]
    y: String,
}

#[derive(Args, Debug)]
struct ReflectionArgs {
    /// Also compute the full K at the saturation time.
    #[arg(long)]
    compare: bool,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Norm { .. } | Error::Coverage { .. } | Error::OutOfGrid { .. } => 3,
        Error::NoPeak { .. } | Error::Degenerate(_) | Error::SingularMatching { .. } => 4,
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.v0 {
        cfg.potential.depth = v;
    }
    if let Some(v) = o.width {
        cfg.potential.width = v;
    }
    if let Some(a) = &o.a {
        cfg.packet.a = a.as_slice().try_into().map_err(|_| Error::Config("--a takes three values".into()))?;
    }
    if let Some(v) = o.p0 {
        cfg.packet.p0 = v;
    }
    if let Some(v) = o.q0 {
        cfg.packet.q0 = v;
    }
    if let Some(orders) = &o.orders {
        cfg.quadrature.orders = orders.as_slice().try_into().map_err(|_| Error::Config("--orders takes three values".into()))?;
    }
    if let Some(g) = o.grid {
        cfg.quadrature.grid = match g {
            GridArg::Cylindrical => GridKind::Cylindrical,
            GridArg::Cartesian => GridKind::Cartesian,
        };
    }
    if let Some(v) = o.box_scale {
        cfg.quadrature.box_scale = v;
    }
    if let Some(v) = o.l_max {
        cfg.quadrature.l_max = v;
    }
    if o.p_order.is_some() {
        cfg.quadrature.p_order = o.p_order;
    }
    if let Some(p) = &cli.output {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct CrossRow {
    p: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct ResonanceRow {
    #[serde(rename = "V0")]
    v0: f64,
    l: usize,
    p_res: f64,
    fwhm: f64,
    fwhm_energy: f64,
    sigma_max: f64,
    p_tau_peak: f64,
    tau_max: f64,
}

#[derive(Serialize)]
struct ReflectionRow {
    norm: f64,
    #[serde(rename = "K_refl")]
    k_refl: f64,
    time_independence_span: f64,
    #[serde(rename = "K_full")]
    k_full: Option<f64>,
}

/// Runs one command; `Ok(Some(e))` means output was written but some points failed.
fn run(cli: &Cli) -> Result<Option<Error>> {
    let cfg = effective_config(cli)?;
    let name = match &cli.command {
        Command::PhaseShifts(_) => "phase-shifts",
        Command::CrossSection(_) => "cross-section",
        Command::Resonances(_) => "resonances",
        Command::Evolve(_) => "evolve",
        Command::Saturate(_) => "saturate",
        Command::Sweep(_) => "sweep",
        Command::Fit(_) => "fit",
        Command::Reflection(_) => "reflection",
        Command::Selftest => "selftest",
    };
    let header = Header { command: name, config: &cfg };
    let path = cfg.output.path.as_deref();
    let format = cfg.output.format;
    let mut notes = Vec::new();
    let mut deferred = None;
    match &cli.command {
        Command::PhaseShifts(grid) => {
            let ps = grid.momenta()?;
            let well = cfg.well()?;
            let l_max = cfg.quadrature.l_max;
            let deltas: Vec<Vec<f64>> = (0..=l_max).map(|l| PhaseShiftFn::new(well, l).unwrapped(&ps)).collect::<Result<_>>()?;
            let mut columns = vec!["p".to_string()];
            columns.extend((0..=l_max).map(|l| format!("delta_{l}")));
            let rows: Vec<Vec<f64>> =
                ps.iter().enumerate().map(|(i, &p)| std::iter::once(p).chain(deltas.iter().map(|d| d[i])).collect()).collect();
            emit_table(&header, &columns, &rows, format, path)?;
        }
        Command::CrossSection(grid) => {
            let well = cfg.well()?;
            let rows: Vec<CrossRow> = grid
                .momenta()?
                .into_iter()
                .map(|p| Ok(CrossRow { p, sigma: cross_section(&well, p, cfg.quadrature.l_max)? }))
                .collect::<Result<_>>()?;
            emit(&header, &rows, &notes, format, path)?;
        }
        Command::Resonances(args) => {
            let depths = match (&args.depths, cli.overrides.v0) {
                (Some(d), _) => d.clone(),
                (None, Some(v)) => vec![v],
                (None, None) => RESONANCE_DEPTHS.to_vec(),
            };
            let search = ResonanceSearch {
                samples: args.samples,
                l_max: cfg.quadrature.l_max,
                criterion: match args.criterion {
                    CriterionArg::CrossSection => ResonanceCriterion::CrossSectionPeak,
                    CriterionArg::TimeDelay => ResonanceCriterion::TimeDelayPeak,
                },
            };
            let rows: Vec<ResonanceRow> = depths
                .iter()
                .map(|&v| {
                    let well = qcollide::PotentialWell::new(v, cfg.potential.width)?;
                    let r = search.find(&well, args.l, args.p_lo, args.p_hi)?;
                    Ok(ResonanceRow {
                        v0: v,
                        l: r.l,
                        p_res: r.p_res,
                        fwhm: r.fwhm,
                        fwhm_energy: r.fwhm_energy,
                        sigma_max: r.sigma_max,
                        p_tau_peak: r.p_tau_peak,
                        tau_max: r.tau_max,
                    })
                })
                .collect::<Result<_>>()?;
            emit(&header, &rows, &notes, format, path)?;
        }
        Command::Evolve(args) => {
            let (pair, well) = (cfg.pair()?, cfg.well()?);
            let times = match &args.times {
                Some(t) => t.clone(),
                None if cfg.times.saturate => vec![qcollide::saturation_time(&pair)],
                None => cfg.times.values.clone(),
            };
            let results = qcollide::entanglement_curve(&pair, &well, &times, &cfg.quadrature)?;
            let mut rows: Vec<EntanglementPoint> = Vec::new();
            for (t, r) in times.iter().zip(results) {
                match r {
                    Ok(p) => rows.push(p),
                    Err(e) => {
                        notes.push(format!("failed t_over_m={t}: {e}"));
                        deferred.get_or_insert(e);
                    }
                }
            }
            if cli.check_convergence {
                for p in &rows {
                    notes.push(convergence_note(p, entanglement_at(&pair, &well, p.t_over_m, &cfg.quadrature.doubled())));
                }
            }
            if rows.len() >= 3 {
                if let Ok(fit) = analysis::fit_k_on_f(&rows) {
                    notes.push(format!("fit K = {} F + {} (r2 = {})", fit.slope, fit.intercept, fit.r_squared));
                }
            }
            emit(&header, &rows, &notes, format, path)?;
        }
        Command::Saturate(args) => {
            let (pair, well) = (cfg.pair()?, cfg.well()?);
            let method = args.method.map(SaturationMethod::from).unwrap_or(cfg.sweep.method);
            let eval = |quad: &qcollide::QuadSpec| match method {
                SaturationMethod::Position => saturated_k(&pair, &well, quad),
                SaturationMethod::Asymptotic => asymptotic_point(&pair, &well, quad),
            };
            let point = eval(&cfg.quadrature)?;
            if cli.check_convergence {
                notes.push(convergence_note(&point, eval(&cfg.quadrature.doubled())));
            }
            emit(&header, &[point], &notes, format, path)?;
        }
        Command::Sweep(args) => {
            let variable: SweepVariable = match &args.variable {
                Some(v) => v.parse()?,
                None => cfg.sweep.variable,
            };
            let values = match (&args.values, &args.range) {
                (Some(v), _) => v.clone(),
                (None, Some(r)) if r.len() == 3 && r[2] >= 2.0 => linspace(r[0], r[1], r[2] as usize),
                (None, Some(_)) => return Err(Error::Config("--range takes from,to,count with count >= 2".into())),
                (None, None) => cfg.sweep.values.clone(),
            };
            let plan = SweepPlan {
                pair: cfg.pair()?,
                well: cfg.well()?,
                variable,
                values,
                quad: cfg.quadrature,
                method: args.method.map(SaturationMethod::from).unwrap_or(cfg.sweep.method),
                width: args.parallel.unwrap_or(cfg.sweep.width),
            };
            let preamble = header.preamble();
            let incremental = path.filter(|_| format == Format::Csv);
            let outcome = analysis::sweep(&plan, incremental.map(|p| SweepSink { path: p, preamble: &preamble }))?;
            if incremental.is_none() {
                emit(&header, &outcome.records, &notes, format, path)?;
            }
            deferred = outcome.failures.into_iter().next().map(|(_, e)| e);
        }
        Command::Fit(args) => {
            let (xs, ys) = read_columns(&args.input, &args.x, &args.y)?;
            let fit = analysis::linear_fit(&xs, &ys)?;
            notes.push(format!("x = {}, y = {}, input = {}", args.x, args.y, args.input.display()));
            emit(&header, &[fit], &notes, format, path)?;
        }
        Command::Reflection(args) => {
            let (pair, well) = (cfg.pair()?, cfg.well()?);
            let refl = reflection_purity(&pair, &well, &cfg.quadrature)?;
            let k_full = if args.compare { Some(saturated_k(&pair, &well, &cfg.quadrature)?.k) } else { None };
            if refl.violates_norm() {
                notes.push(format!("norm deficit {:.3e} exceeds 1e-2", 1.0 - refl.norm));
            }
            let row = ReflectionRow { norm: refl.norm, k_refl: refl.k_refl, time_independence_span: refl.time_independence_span, k_full };
            emit(&header, &[row], &notes, format, path)?;
        }
        Command::Selftest => {
            let failed = selftest::run();
            if failed > 0 {
                return Err(Error::Degenerate(format!("{failed} self-test check(s) failed")));
            }
        }
    }
    Ok(deferred)
}

fn convergence_note(base: &EntanglementPoint, doubled: Result<EntanglementPoint>) -> String {
    match doubled {
        Ok(d) => format!(
            "convergence t_over_m={} K={} K_doubled={} rel_change={:.3e} norm_doubled={}",
            base.t_over_m,
            base.k,
            d.k,
            (d.k - base.k).abs() / base.k,
            d.norm
        ),
        Err(e) => format!("convergence t_over_m={} doubled run failed: {e}", base.t_over_m),
    }
}

fn emit_table(header: &Header<'_>, columns: &[String], rows: &[Vec<f64>], format: Format, path: Option<&Path>) -> Result<()> {
    match format {
        Format::Csv => {
            let mut text = header.preamble();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(columns)?;
            for row in rows {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            text.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"));
            match path {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Format::Json => {
            let records: Vec<serde_json::Map<String, serde_json::Value>> =
                rows.iter().map(|r| columns.iter().cloned().zip(r.iter().map(|v| serde_json::json!(v))).collect()).collect();
            emit(header, &records, &[], format, path)
        }
    }
}

fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = reader.headers()?.clone();
    let index = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("column `{name}` not found in {}", path.display())))
    };
    let (ix, iy) = (index(x)?, index(y)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::Config(format!("bad number `{}`: {e}", &rec[i])));
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(e)) | Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        super::Cli::command().debug_assert();
    }
}
