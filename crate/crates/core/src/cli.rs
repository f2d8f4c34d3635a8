//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{self, Ell, QuadratureOptions, VarianceTable};
use crate::baselines::{self, BaselineResult};
use crate::error::Error;
use crate::estimator::{self, interval_from_variance, EstimateResult, ScaleRange};
use crate::io;
use crate::synthesis::{ProcessModel, ShortMemory, Simulator};
use crate::wavelet::{
    dwt, dwt_into, make_wavelet, max_scale, FourierWavelet, Pyramid, WaveletSpec,
};

/// Version of the JSON documents written by every command.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LONGMEM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "longmem",
    version,
    about = "Wavelet local Whittle estimation of long memory"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the memory parameter of a single-column CSV series.
    Estimate(EstimateArgs),
    /// Simulate a Gaussian long-memory series.
    Simulate(SimulateArgs),
    /// Monte Carlo study of the estimator on simulated series.
    Mc(McArgs),
    /// Tabulate the asymptotic variance over memory parameters and scale counts.
    Vartable(VartableArgs),
    /// Compare the wavelet estimate with the Fourier and log-scale baselines.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    /// Wavelet family: haar or db1..db10.
    #[arg(long, default_value = "db4")]
    pub wavelet: String,
    /// Finest scale used; chosen from --beta when absent.
    #[arg(long = "L")]
    pub lower: Option<usize>,
    /// Coarsest scale used; defaults to the coarsest available.
    #[arg(long = "U")]
    pub upper: Option<usize>,
    /// Smoothness of the short-memory spectrum driving the choice of L.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Memory parameter of the simulated process.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub d0: f64,
    /// Short-memory factor: constant[:LEVEL], ar1:RHO, or grid:PATH (CSV of
    /// lambda,value pairs spanning [0, pi]).
    #[arg(long, default_value = "constant")]
    pub model: String,
    /// Series length.
    #[arg(long, default_value_t = 8192)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV, or - for standard input.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub scales: ScaleArgs,
    /// Confidence level of the interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Scale count for the asymptotic variance (integer or inf); defaults to U - L.
    #[arg(long)]
    pub ell: Option<Ell>,
    /// Skip the asymptotic variance and confidence interval.
    #[arg(long)]
    pub no_ci: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Seed of the random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when absent.
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scales: ScaleArgs,
    /// Number of replications.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Seed of the random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nominal coverage of the intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Scale count for the asymptotic variance; defaults to U - L.
    #[arg(long)]
    pub ell: Option<Ell>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VartableArgs {
    /// Wavelet family, or shannon.
    #[arg(long, default_value = "db4")]
    pub wavelet: String,
    /// Smallest memory parameter of the grid.
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub d_min: f64,
    /// Largest memory parameter of the grid.
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub d_max: f64,
    /// Grid step.
    #[arg(long, default_value_t = 0.25)]
    pub d_step: f64,
    /// Comma-separated scale counts (integers or inf).
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,inf")]
    pub ell: Vec<Ell>,
    /// Faster, less accurate quadrature.
    #[arg(long)]
    pub coarse: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Input CSV, or - for standard input.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub scales: ScaleArgs,
    /// Fourier bandwidth; defaults to floor(n^0.65).
    #[arg(long)]
    pub m: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Parses a short-memory specification and builds the process model.
pub fn parse_model(spec: &str, d0: f64) -> anyhow::Result<ProcessModel> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let number = |a: Option<&str>, what: &str| -> anyhow::Result<f64> {
        let a = a.with_context(|| format!("model `{kind}` needs a {what}, e.g. {kind}:0.5"))?;
        a.parse()
            .with_context(|| format!("model {what} `{a}` is not a number"))
    };
    let (short, beta) = match kind {
        "constant" => {
            let level = match arg {
                Some(_) => number(arg, "level")?,
                None => 1.0,
            };
            (ShortMemory::Constant { level }, 2.0)
        }
        "ar1" => (
            ShortMemory::Ar1 {
                rho: number(arg, "coefficient")?,
            },
            2.0,
        ),
        "grid" => {
            let path = arg.context("model `grid` needs a path, e.g. grid:spectrum.csv")?;
            let (lambdas, values) = read_grid(Path::new(path))?;
            (ShortMemory::Grid { lambdas, values }, 1.0)
        }
        other => bail!("unknown model `{other}` (expected constant, ar1 or grid)"),
    };
    Ok(ProcessModel::new(d0, short, beta)?)
}

fn read_grid(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open spectral grid {}", path.display()))?;
    let (mut lambdas, mut values) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Option<(f64, f64)> = match (record.get(0), record.get(1)) {
            (Some(a), Some(b)) => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((l, v)) => {
                lambdas.push(l);
                values.push(v);
            }
            None if i == 0 => {}
            None => bail!(
                "{}: line {}: expected `lambda,value`",
                path.display(),
                i + 1
            ),
        }
    }
    Ok((lambdas, values))
}

/// Scale range from explicit overrides, falling back to the automatic choice
/// for `L` and the coarsest available scale for `U`.
pub fn resolve_scales(
    n: usize,
    spec: &WaveletSpec,
    args: &ScaleArgs,
) -> anyhow::Result<ScaleRange> {
    let top = max_scale(n, spec.support)?;
    let lower = match args.lower {
        Some(l) => l,
        None => estimator::select_scales(n, spec.support, args.beta)?.lower,
    };
    let upper = args.upper.unwrap_or(top);
    if upper > top {
        return Err(Error::ScaleOutOfRange {
            requested: upper,
            max: top,
        }
        .into());
    }
    if lower == 0 {
        bail!("--L must be at least 1");
    }
    Ok(ScaleRange::new(lower, upper)?)
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    schema_version: u32,
    wavelet: String,
    n: usize,
    d_hat: f64,
    sigma2_hat: f64,
    #[serde(rename = "L")]
    lower: usize,
    #[serde(rename = "U")]
    upper: usize,
    ell: Ell,
    mean_scale: f64,
    n_eff: usize,
    iterations: usize,
    asymp_var: Option<f64>,
    ci: Option<[f64; 2]>,
    level: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EstimateRow {
    wavelet: String,
    n: usize,
    d_hat: f64,
    sigma2_hat: f64,
    #[serde(rename = "L")]
    lower: usize,
    #[serde(rename = "U")]
    upper: usize,
    ell: String,
    mean_scale: f64,
    n_eff: usize,
    asymp_var: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    level: Option<f64>,
}

fn estimate_report(spec: &WaveletSpec, r: &EstimateResult) -> EstimateReport {
    EstimateReport {
        schema_version: SCHEMA_VERSION,
        wavelet: spec.name.clone(),
        n: r.n,
        d_hat: r.d_hat,
        sigma2_hat: r.sigma2_hat,
        lower: r.range.lower,
        upper: r.range.upper,
        ell: r.variance_ell.unwrap_or(Ell::Finite(r.range.ell())),
        mean_scale: r.mean_scale,
        n_eff: r.n_eff,
        iterations: r.iterations,
        asymp_var: r.asymp_var,
        ci: r.ci.map(|c| [c.low, c.high]),
        level: r.ci.map(|c| c.level),
    }
}

fn run_estimate(args: &EstimateArgs) -> anyhow::Result<()> {
    let x = io::read_series(&args.input)?;
    let spec = make_wavelet(&args.scales.wavelet)?;
    let range = resolve_scales(x.len(), &spec, &args.scales)?;
    let pyramid = dwt(&x, &spec, Some(range.upper))?;
    let mut result = estimator::estimate(&pyramid, &range)?;
    if !args.no_ci {
        result = estimator::confidence_interval(&result, &spec, args.level, args.ell)
            .context("asymptotic variance at the estimate (pass --no-ci to skip)")?;
    }
    let report = estimate_report(&spec, &result);
    match args.format {
        Format::Json => emit_json(&report, args.output.as_deref()),
        Format::Csv => emit_csv(
            &[EstimateRow {
                wavelet: report.wavelet.clone(),
                n: report.n,
                d_hat: report.d_hat,
                sigma2_hat: report.sigma2_hat,
                lower: report.lower,
                upper: report.upper,
                ell: report.ell.to_string(),
                mean_scale: report.mean_scale,
                n_eff: report.n_eff,
                asymp_var: report.asymp_var,
                ci_low: report.ci.map(|c| c[0]),
                ci_high: report.ci.map(|c| c[1]),
                level: report.level,
            }],
            args.output.as_deref(),
        ),
    }
}

#[derive(Debug, Serialize)]
struct SimulationEcho<'a> {
    schema_version: u32,
    model: &'a ProcessModel,
    n: usize,
    seed: u64,
}

fn run_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let model = parse_model(&args.model.model, args.model.d0)?;
    let x = crate::synthesis::simulate(&model, args.model.n, args.seed)?;
    io::write_series(&x, args.output.as_deref())?;
    let echo = serde_json::to_string_pretty(&SimulationEcho {
        schema_version: SCHEMA_VERSION,
        model: &model,
        n: args.model.n,
        seed: args.seed,
    })?;
    // keep standard output clean when it carries the series
    if args.output.is_some() {
        println!("{echo}");
    } else {
        eprintln!("{echo}");
    }
    Ok(())
}

/// Settings of a Monte Carlo study.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub model: ProcessModel,
    pub n: usize,
    pub wavelet: WaveletSpec,
    pub range: ScaleRange,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub ell: Ell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub schema_version: u32,
    pub wavelet: String,
    pub d0: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub lower: usize,
    #[serde(rename = "U")]
    pub upper: usize,
    pub ell: Ell,
    pub reps: usize,
    /// Replications whose estimate failed; excluded from the statistics.
    pub failures: usize,
    pub mean_d_hat: f64,
    pub bias: f64,
    /// Sample variance of `sqrt(n 2^-L) (d_hat - d0)`.
    pub empirical_var_scaled: f64,
    pub theoretical_var: f64,
    /// Fraction of plug-in intervals covering `d0`.
    pub coverage: f64,
    pub level: f64,
    pub runtime_s: f64,
    #[serde(skip)]
    pub estimates: Vec<f64>,
}

/// Runs `reps` independent simulate, transform, estimate pipelines.
/// Replication `r` uses stream `r` of the seeded generator, and results are
/// reduced in replication order, so reports do not depend on scheduling.
pub fn monte_carlo(config: &McConfig) -> anyhow::Result<McReport> {
    let start = Instant::now();
    if config.reps < 2 {
        bail!("at least 2 replications are needed, got {}", config.reps);
    }
    let d0 = config.model.d0;
    let wavelet = FourierWavelet::Compact(config.wavelet.clone());
    let theoretical = asymptotics::variance(d0, config.ell, &wavelet)
        .context("asymptotic variance at the true memory parameter")?;
    let plug_in = plug_in_table(d0, config.ell, &wavelet)?;
    let simulator = Simulator::new(&config.model, config.n)?;

    let outcomes: Vec<Option<(f64, bool)>> = (0..config.reps as u64)
        .into_par_iter()
        .map_init(
            || Pyramid::from_coefficients(config.wavelet.clone(), 0, Vec::new()),
            |pyramid, rep| {
                let x = simulator.sample(config.seed, rep);
                dwt_into(&x, &config.wavelet, Some(config.range.upper), pyramid).ok()?;
                let result = estimator::estimate(pyramid, &config.range).ok()?;
                let lo = plug_in.d_grid[0];
                let hi = *plug_in.d_grid.last().expect("nonempty grid");
                let variance = plug_in.interpolate(result.d_hat.clamp(lo, hi), config.ell)?;
                let ci = interval_from_variance(&result, variance, config.level).ok()?;
                Some((result.d_hat, ci.low <= d0 && d0 <= ci.high))
            },
        )
        .collect();

    let kept: Vec<(f64, bool)> = outcomes.iter().flatten().copied().collect();
    if kept.len() < 2 {
        bail!(
            "only {} of {} replications produced an estimate",
            kept.len(),
            config.reps
        );
    }
    let count = kept.len() as f64;
    let estimates: Vec<f64> = kept.iter().map(|k| k.0).collect();
    let mean = estimates.iter().sum::<f64>() / count;
    let scale = (config.n as f64 * 0.5f64.powi(config.range.lower as i32)).sqrt();
    let scaled: Vec<f64> = estimates.iter().map(|d| scale * (d - d0)).collect();
    let scaled_mean = scaled.iter().sum::<f64>() / count;
    let var = scaled
        .iter()
        .map(|s| (s - scaled_mean).powi(2))
        .sum::<f64>()
        / (count - 1.0);
    let covered = kept.iter().filter(|k| k.1).count() as f64;

    Ok(McReport {
        schema_version: SCHEMA_VERSION,
        wavelet: config.wavelet.name.clone(),
        d0,
        n: config.n,
        lower: config.range.lower,
        upper: config.range.upper,
        ell: config.ell,
        reps: config.reps,
        failures: config.reps - kept.len(),
        mean_d_hat: mean,
        bias: mean - d0,
        empirical_var_scaled: var,
        theoretical_var: theoretical,
        coverage: covered / count,
        level: config.level,
        runtime_s: start.elapsed().as_secs_f64(),
        estimates,
    })
}

/// Coarse table of `V` around `d0` used for plug-in intervals.
fn plug_in_table(d0: f64, ell: Ell, wavelet: &FourierWavelet) -> anyhow::Result<VarianceTable> {
    let step = 0.05;
    let lo = (d0 - 0.5).max(wavelet.d_lower() + step);
    let hi = (d0 + 0.5).min(wavelet.d_upper());
    let count = ((hi - lo) / step).floor() as usize;
    let grid: Vec<f64> = (0..=count).map(|i| lo + step * i as f64).collect();
    Ok(asymptotics::variance_table_with(
        wavelet,
        &grid,
        &[ell],
        &QuadratureOptions::coarse(),
    )?)
}

fn run_mc(args: &McArgs) -> anyhow::Result<()> {
    let model = parse_model(&args.model.model, args.model.d0)?;
    let wavelet = make_wavelet(&args.scales.wavelet)?;
    let range = resolve_scales(args.model.n, &wavelet, &args.scales)?;
    let config = McConfig {
        model,
        n: args.model.n,
        wavelet,
        range,
        reps: args.reps,
        seed: args.seed,
        level: args.level,
        ell: args.ell.unwrap_or(Ell::Finite(range.ell())),
    };
    let report = monte_carlo(&config)?;
    match args.format {
        Format::Json => emit_json(&report, args.output.as_deref()),
        Format::Csv => emit_csv(&[report], args.output.as_deref()),
    }
}

#[derive(Debug, Serialize)]
struct VarianceRow {
    family: String,
    d: f64,
    ell: String,
    variance: f64,
    shannon: f64,
}

#[derive(Debug, Serialize)]
struct VarianceDocument<'a> {
    schema_version: u32,
    #[serde(flatten)]
    table: &'a VarianceTable,
}

fn run_vartable(args: &VartableArgs) -> anyhow::Result<()> {
    let wavelet = if args.wavelet.trim().eq_ignore_ascii_case("shannon") {
        FourierWavelet::Shannon
    } else {
        FourierWavelet::Compact(make_wavelet(&args.wavelet)?)
    };
    if !(args.d_step > 0.0) || args.d_max < args.d_min {
        bail!("need --d-step > 0 and --d-max >= --d-min");
    }
    let count = ((args.d_max - args.d_min) / args.d_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=count)
        .map(|i| args.d_min + args.d_step * i as f64)
        .collect();
    let opts = if args.coarse {
        QuadratureOptions::coarse()
    } else {
        QuadratureOptions::default()
    };
    let table = asymptotics::variance_table_with(&wavelet, &grid, &args.ell, &opts)?;
    match args.format {
        Format::Json => emit_json(
            &VarianceDocument {
                schema_version: SCHEMA_VERSION,
                table: &table,
            },
            args.output.as_deref(),
        ),
        Format::Csv => {
            let mut rows = Vec::new();
            for (i, d) in table.d_grid.iter().enumerate() {
                for (k, ell) in table.ells.iter().enumerate() {
                    rows.push(VarianceRow {
                        family: table.family.clone(),
                        d: *d,
                        ell: ell.to_string(),
                        variance: table.values[i][k],
                        shannon: table.shannon[i][k],
                    });
                }
            }
            emit_csv(&rows, args.output.as_deref())
        }
    }
}

#[derive(Debug, Serialize)]
struct CompareRow {
    method: String,
    d_hat: f64,
    std_error: Option<f64>,
    m: usize,
    nominal_var: Option<f64>,
    boundary: bool,
}

impl From<BaselineResult> for CompareRow {
    fn from(b: BaselineResult) -> Self {
        CompareRow {
            method: b.method.to_string(),
            d_hat: b.d_hat,
            std_error: Some(b.std_error),
            m: b.m,
            nominal_var: Some(b.nominal_var),
            boundary: b.boundary,
        }
    }
}

#[derive(Debug, Serialize)]
struct CompareDocument {
    schema_version: u32,
    n: usize,
    rows: Vec<CompareRow>,
}

fn run_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let x = io::read_series(&args.input)?;
    let n = x.len();
    let spec = make_wavelet(&args.scales.wavelet)?;
    let range = resolve_scales(n, &spec, &args.scales)?;
    let pyramid = dwt(&x, &spec, Some(range.upper))?;
    let lwwe = estimator::estimate(&pyramid, &range)?;
    // outside the admissible window the estimate stands without a standard error
    let variance = asymptotics::variance(
        lwwe.d_hat,
        Ell::Finite(range.ell()),
        &FourierWavelet::Compact(spec.clone()),
    )
    .ok();
    let m = args.m.unwrap_or_else(|| baselines::default_bandwidth(n));
    let mut rows = vec![CompareRow {
        method: "lwwe".into(),
        d_hat: lwwe.d_hat,
        std_error: variance.map(|v| (v / lwwe.effective_size()).sqrt()),
        m: range.ell() + 1,
        nominal_var: variance,
        boundary: false,
    }];
    rows.push(baselines::gph(&x, m)?.into());
    rows.push(baselines::lwf(&x, m)?.into());
    rows.push(baselines::logscale_regression(&pyramid, range)?.into());
    match args.format {
        Format::Json => emit_json(
            &CompareDocument {
                schema_version: SCHEMA_VERSION,
                n,
                rows,
            },
            args.output.as_deref(),
        ),
        Format::Csv => emit_csv(&rows, args.output.as_deref()),
    }
}

fn emit(text: &str, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(value: &impl Serialize, output: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text, output)
}

fn emit_csv<T: Serialize>(rows: &[T], output: Option<&Path>) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    emit(&String::from_utf8(bytes)?, output)
}

fn thread_count() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => bail!("{THREADS_ENV} must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(None),
    }
}

/// Executes one command, honouring the thread cap from the environment.
pub fn run(config: &RunConfig) -> anyhow::Result<()> {
    let dispatch = || match &config.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Mc(a) => run_mc(a),
        Command::Vartable(a) => run_vartable(a),
        Command::Compare(a) => run_compare(a),
    };
    match thread_count()? {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()?
            .install(dispatch),
        None => dispatch(),
    }
}
