//! Command-line front end: argument grammar, CSV ingestion and report output.
//!
//! Exit codes are 0 when the requested computation ran (whatever the test
//! decided), 2 for usage errors and 1 for runtime failures.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::bootstrap::{BootstrapConfig, RngStream, TestReport, WeightScheme};
use crate::error::{invalid, Error, Result};
use crate::functional::PointMassFunctional;
use crate::gcm::{self, CondSample, RegressionConfig};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::logrank::{self, CensoredObs, CensoredSample};
use crate::mmd::{self, TwoSample};
use crate::points::Points;
use crate::simlab::{self, ExperimentConfig, ExperimentResult, Generator, TestSpec};
use crate::spectrum::{self, BootstrapSpectrum};

#[derive(Debug, Parser)]
#[command(name = "kbt", version, about = "Kernelised two-sample, log-rank and conditional independence tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for bootstrap and simulation work ("auto" or a count).
    #[arg(long, global = true, default_value = "auto", value_parser = parse_threads)]
    pub threads: Threads,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Count(usize),
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel two-sample (MMD) test on a `value...,group` CSV.
    Mmd {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Kernel log-rank test on a `time,event,group` CSV.
    Logrank {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// Map times through the pooled Kaplan–Meier estimate first.
        #[arg(long)]
        km_transform: bool,
    },
    /// Conditional independence test on an `x,y,z1,...,zd` CSV.
    Gcm {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = StatisticArg::Kgcm)]
        statistic: StatisticArg,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        boot: BootArgs,
        #[command(flatten)]
        regression: RegressionArgs,
    },
    /// Rejection rates over a parameter grid of simulated datasets.
    Simulate {
        #[arg(long, value_enum)]
        test: SimTestArg,
        #[arg(long, value_enum)]
        generator: GeneratorArg,
        /// Comma-separated grid (γ, dimension, shift or group-1 event rate).
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        /// Sample size for data1 and data2.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        n0: usize,
        #[arg(long, default_value_t = 100)]
        n1: usize,
        /// Censoring rates of the survival generator (0 disables censoring).
        #[arg(long, default_value_t = 0.0)]
        cens0: f64,
        #[arg(long, default_value_t = 0.0)]
        cens1: f64,
        #[arg(long)]
        km_transform: bool,
        /// Also write the full result as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        boot: BootArgs,
        #[command(flatten)]
        regression: RegressionArgs,
    },
    /// Bootstrap-covariance eigenvalues and weighted chi-square quantiles.
    Spectrum {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        test: SpectrumTestArg,
        /// Monte-Carlo draws of the weighted chi-square limit.
        #[arg(long, default_value_t = 5000)]
        mc_draws: usize,
        #[arg(long)]
        km_transform: bool,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        boot: BootArgs,
        #[command(flatten)]
        regression: RegressionArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::Se)]
    pub kernel: KernelArg,
    /// Squared length-scale, or "median".
    #[arg(long, default_value = "median", value_parser = parse_lengthscale)]
    pub lengthscale: Lengthscale,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub rq_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lengthscale {
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Se,
    Constant,
    Rq,
}

#[derive(Debug, Clone, Args)]
pub struct BootArgs {
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Bootstrap replicates (default 1000; 300 for simulate, 500 for spectrum).
    #[arg(long = "bootstrap", value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
    #[arg(long, value_enum, default_value_t = WeightArg::Rademacher)]
    pub weights: WeightArg,
    #[arg(long, env = "KBT_SEED")]
    pub seed: Option<u64>,
    /// Include the sorted replicate list in the report.
    #[arg(long)]
    pub emit_replicates: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, Args)]
pub struct RegressionArgs {
    /// Polynomial degree of the residual regressions.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub degree: Option<u32>,
    /// Include cross terms between coordinates of Z.
    #[arg(long)]
    pub interactions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Kgcm,
    Gcm,
    Wgcm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimTestArg {
    Mmd,
    Logrank,
    Kgcm,
    Gcm,
    Wgcm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    Data1,
    Data2,
    TwoSample,
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumTestArg {
    Mmd,
    Logrank,
    Kgcm,
}

fn parse_threads(s: &str) -> std::result::Result<Threads, String> {
    if s == "auto" {
        return Ok(Threads::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(Threads::Count(n)),
        _ => Err(format!("expected \"auto\" or a positive integer, got {s:?}")),
    }
}

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie strictly between 0 and 1, got {a}"))
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

fn parse_lengthscale(s: &str) -> std::result::Result<Lengthscale, String> {
    if s == "median" {
        Ok(Lengthscale::Median)
    } else {
        parse_positive(s).map(Lengthscale::Fixed)
    }
}

impl KernelArgs {
    pub fn spec(&self) -> KernelSpec {
        let family = match self.kernel {
            KernelArg::Se => KernelFamily::SquaredExponential,
            KernelArg::Constant => return KernelSpec::constant(),
            KernelArg::Rq => KernelFamily::RationalQuadratic,
        };
        let mut spec = match self.lengthscale {
            Lengthscale::Median => KernelSpec::median_heuristic(family),
            Lengthscale::Fixed(l2) => KernelSpec::squared_exponential(l2),
        };
        spec.family = family;
        spec.rq_alpha = self.rq_alpha;
        spec
    }
}

impl BootArgs {
    pub fn config(&self, default_m: usize) -> BootstrapConfig {
        let scheme = match self.weights {
            WeightArg::Rademacher => WeightScheme::Rademacher,
            WeightArg::Gaussian => WeightScheme::Gaussian,
        };
        let m = self.m.map_or(default_m, |m| m as usize);
        BootstrapConfig::new(m, self.alpha, self.seed.unwrap_or(0)).with_scheme(scheme)
    }
}

impl RegressionArgs {
    /// `None` leaves the choice to the dimension-based default.
    pub fn config(&self) -> Option<RegressionConfig> {
        match (self.degree, self.interactions) {
            (None, false) => None,
            (Some(d), i) => Some(RegressionConfig::new(d, i)),
            (None, true) => Some(RegressionConfig::new(2, true)),
        }
    }

    pub fn config_for(&self, dim: usize) -> RegressionConfig {
        self.config()
            .unwrap_or_else(|| RegressionConfig::default_for_dim(dim))
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = match cli.threads {
        Threads::Auto => 0,
        Threads::Count(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Mmd { data, kernel, boot } => {
            let s = read_two_sample_csv(data)?;
            let report = mmd::mmd_test(&s, &kernel.spec(), &boot.config(1000))?;
            emit(out, &json_bytes(&report_json(&report, boot.emit_replicates))?)
        }
        Command::Logrank {
            data,
            kernel,
            boot,
            km_transform,
        } => {
            let s = read_survival_csv(data)?;
            let report =
                logrank::logrank_test(&s, &kernel.spec(), &boot.config(1000), *km_transform)?;
            emit(out, &json_bytes(&report_json(&report, boot.emit_replicates))?)
        }
        Command::Gcm {
            data,
            statistic,
            kernel,
            boot,
            regression,
        } => {
            let s = read_cond_csv(data)?;
            let cfg = regression.config_for(s.dim());
            let bc = boot.config(1000);
            let report = match statistic {
                StatisticArg::Kgcm => gcm::kgcm_test(&s, &cfg, &kernel.spec(), &bc)?,
                StatisticArg::Gcm => gcm::gcm_test(&s, &cfg, &bc)?,
                StatisticArg::Wgcm => {
                    gcm::wgcm_test(&s, &cfg, &gcm::default_wgcm_weights(s.dim()), &bc)?
                }
            };
            emit(out, &json_bytes(&report_json(&report, boot.emit_replicates))?)
        }
        Command::Simulate {
            test,
            generator,
            grid,
            reps,
            n,
            n0,
            n1,
            cens0,
            cens1,
            km_transform,
            json,
            kernel,
            boot,
            regression,
        } => {
            let spec = kernel.spec();
            let reg = regression.config();
            let test = match test {
                SimTestArg::Mmd => TestSpec::Mmd { kernel: spec },
                SimTestArg::Logrank => TestSpec::Logrank {
                    kernel: spec,
                    km_transform: *km_transform,
                },
                SimTestArg::Kgcm => TestSpec::Kgcm {
                    kernel: spec,
                    regression: reg,
                },
                SimTestArg::Gcm => TestSpec::Gcm { regression: reg },
                SimTestArg::Wgcm => TestSpec::Wgcm { regression: reg },
            };
            let generator = match generator {
                GeneratorArg::Data1 => Generator::Data1 { n: *n },
                GeneratorArg::Data2 => Generator::Data2 { n: *n },
                GeneratorArg::TwoSample => Generator::TwoSample { n0: *n0, n1: *n1 },
                GeneratorArg::Survival => Generator::Survival {
                    n0: *n0,
                    n1: *n1,
                    cens0: *cens0,
                    cens1: *cens1,
                },
            };
            let cfg = ExperimentConfig {
                test,
                generator,
                grid: grid.clone(),
                reps: *reps as usize,
                bootstrap: boot.config(300),
            };
            let result = simlab::rejection_rate(&cfg)?;
            if let Some(path) = json {
                write_bytes(path, &json_bytes(&result)?)?;
            }
            emit(out, experiment_csv(&result).as_bytes())
        }
        Command::Spectrum {
            data,
            test,
            mc_draws,
            km_transform,
            kernel,
            boot,
            regression,
        } => {
            let bc = boot.config(500);
            let spec = kernel.spec();
            let (n, resolved, sp) = match test {
                SpectrumTestArg::Mmd => {
                    let s = read_two_sample_csv(data)?;
                    let spec = spec.resolve(&s.pooled())?;
                    let sp = run_spectrum(mmd::mmd_wild_builder(&s), s.n(), &spec, &bc)?;
                    (s.n(), spec, sp)
                }
                SpectrumTestArg::Logrank => {
                    let raw = read_survival_csv(data)?;
                    let s = if *km_transform {
                        logrank::km_transform(&raw)
                    } else {
                        raw
                    };
                    let spec = spec.resolve(&s.times())?;
                    let sp = run_spectrum(logrank::logrank_wild_builder(&s), s.n(), &spec, &bc)?;
                    (s.n(), spec, sp)
                }
                SpectrumTestArg::Kgcm => {
                    let s = read_cond_csv(data)?;
                    let spec = spec.resolve(s.z())?;
                    let residuals = gcm::fit_residuals(&s, &regression.config_for(s.dim()))?;
                    let builder = gcm::kgcm_wild_builder(&residuals, s.z())?;
                    let sp = run_spectrum(builder, s.n(), &spec, &bc)?;
                    (s.n(), spec, sp)
                }
            };
            let value = spectrum_json(test_name(*test), n, &resolved, &bc, &sp, *mc_draws, boot.emit_replicates)?;
            emit(out, &json_bytes(&value)?)
        }
    }
}

fn test_name(t: SpectrumTestArg) -> &'static str {
    match t {
        SpectrumTestArg::Mmd => "mmd",
        SpectrumTestArg::Logrank => "logrank",
        SpectrumTestArg::Kgcm => "kgcm",
    }
}

fn run_spectrum<F>(
    builder: F,
    n_weights: usize,
    spec: &KernelSpec,
    boot: &BootstrapConfig,
) -> Result<BootstrapSpectrum>
where
    F: Fn(&[f64]) -> Result<PointMassFunctional> + Sync,
{
    boot.validate()?;
    spectrum::bootstrap_spectrum(builder, boot.scheme, n_weights, boot.m, spec, boot.seed)
}

/// Stream id of the Monte-Carlo limit draws; disjoint from replicate streams.
const MC_STREAM: u64 = 1 << 63;

pub const SPECTRUM_LEVELS: [f64; 5] = [0.5, 0.9, 0.95, 0.99, 0.999];

fn order_quantile(sorted: &[f64], q: f64) -> f64 {
    let k = ((q * sorted.len() as f64 - 1e-9).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

pub fn spectrum_json(
    test: &str,
    n: usize,
    spec: &KernelSpec,
    boot: &BootstrapConfig,
    sp: &BootstrapSpectrum,
    mc_draws: usize,
    emit_replicates: bool,
) -> Result<Value> {
    if mc_draws == 0 {
        return Err(invalid("at least one Monte-Carlo draw is needed"));
    }
    let mut rng = RngStream::new(boot.seed, MC_STREAM).rng();
    let mut draws = spectrum::sample_weighted_chisq(&sp.estimate.eigenvalues, mc_draws, &mut rng);
    draws.sort_by(f64::total_cmp);
    let mut reps = sp.replicates.clone();
    reps.sort_by(f64::total_cmp);
    let quantiles: Vec<Value> = SPECTRUM_LEVELS
        .iter()
        .map(|&q| {
            json!({
                "level": q,
                "limit": order_quantile(&draws, q),
                "bootstrap": order_quantile(&reps, q),
            })
        })
        .collect();
    let mut v = json!({
        "test": test,
        "n": n,
        "B": sp.estimate.b,
        "eigenvalues": sp.estimate.eigenvalues,
        "trace": sp.estimate.trace,
        "clamped": sp.estimate.clamped,
        "min_raw": sp.estimate.min_raw,
        "mc_draws": mc_draws,
        "quantiles": quantiles,
        "ks_limit_vs_bootstrap": spectrum::ks_distance(&draws, &reps)?,
        "kernel": kernel_json(Some(spec)),
        "seed": boot.seed,
        "scheme": boot.scheme,
    });
    if emit_replicates {
        v["replicates"] = json!(reps);
    }
    Ok(v)
}

pub fn kernel_json(spec: Option<&KernelSpec>) -> Value {
    match spec {
        None => Value::Null,
        Some(k) => {
            let mut v = json!({
                "family": k.family,
                "lengthscale_sq": if k.uses_lengthscale() { json!(k.lengthscale_sq) } else { Value::Null },
                "rule": k.lengthscale_rule,
            });
            if k.family == KernelFamily::RationalQuadratic {
                v["rq_alpha"] = json!(k.rq_alpha);
            }
            v
        }
    }
}

pub fn report_json(r: &TestReport, emit_replicates: bool) -> Value {
    let mut v = json!({
        "test": r.test,
        "n": r.n,
        "statistic": r.statistic,
        "critical_value": r.critical_value,
        "p_value": r.p_value,
        "reject": r.reject,
        "alpha": r.alpha,
        "M": r.m,
        "kernel": kernel_json(r.kernel.as_ref()),
        "seed": r.seed,
        "scheme": r.scheme,
        "warnings": r.warnings,
        "config": r.config_echo,
    });
    if emit_replicates {
        v["replicates"] = json!(r.replicates);
    }
    v
}

/// Pretty JSON whose floats carry 17 significant digits.
struct SigDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| invalid(format!("cannot serialize report: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn experiment_csv(r: &ExperimentResult) -> String {
    let mut s = String::from("param,rate,ci_low,ci_high,reps\n");
    for k in 0..r.param_grid.len() {
        let (lo, hi) = r.ci(k);
        s.push_str(&format!("{},{},{},{},{}\n", r.param_grid[k], r.rates[k], lo, hi, r.reps));
    }
    s
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_bytes(p, bytes),
        None => io::stdout().write_all(bytes).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            line: e.position().map_or(1, |p| p.line()),
            message: e.to_string(),
        };
        let headers: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: "missing header row".into(),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Table {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Csv {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn real(&self, line: u64, field: &str, col: &str) -> Result<f64> {
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(line, format!("column {col}: expected a finite number, got {field:?}"))),
        }
    }

    fn flag(&self, line: u64, field: &str, col: &str) -> Result<u8> {
        match field {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(self.err(line, format!("column {col}: expected 0 or 1, got {field:?}"))),
        }
    }

    fn no_rows_error(&self) -> Error {
        self.err(1, "no data rows")
    }
}

/// Two-sample schema: coordinate columns followed by a final `group` column.
pub fn read_two_sample_csv(path: &Path) -> Result<TwoSample> {
    let t = Table::read(path)?;
    let d = t.headers.len().saturating_sub(1);
    if d == 0 || t.headers[d] != "group" {
        return Err(t.err(1, "expected header `value,group` (coordinates then group)"));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (line, row) in &t.rows {
        for k in 0..d {
            let v = t.real(*line, &row[k], &t.headers[k])?;
            if t.flag(*line, &row[d], "group")? == 0 {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    if t.rows.is_empty() {
        return Err(t.no_rows_error());
    }
    if x.is_empty() || y.is_empty() {
        return Err(t.err(1, format!("group {} is empty", if x.is_empty() { 0 } else { 1 })));
    }
    TwoSample::new(Points::new(d, x)?, Points::new(d, y)?)
}

/// Survival schema: `time,event,group`.
pub fn read_survival_csv(path: &Path) -> Result<CensoredSample> {
    let t = Table::read(path)?;
    if t.headers != ["time", "event", "group"] {
        return Err(t.err(1, "expected header `time,event,group`"));
    }
    if t.rows.is_empty() {
        return Err(t.no_rows_error());
    }
    let mut obs = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        let time = t.real(*line, &row[0], "time")?;
        if time < 0.0 {
            return Err(t.err(*line, format!("column time: negative value {time}")));
        }
        obs.push(CensoredObs {
            time,
            event: t.flag(*line, &row[1], "event")? == 1,
            group: t.flag(*line, &row[2], "group")?,
        });
    }
    for g in 0..2u8 {
        if !obs.iter().any(|o| o.group == g) {
            return Err(t.err(1, format!("group {g} is empty")));
        }
    }
    CensoredSample::new(obs)
}

/// Conditional schema: `x,y,z1,...,zd`.
pub fn read_cond_csv(path: &Path) -> Result<CondSample> {
    let t = Table::read(path)?;
    if t.headers.len() < 3 || t.headers[0] != "x" || t.headers[1] != "y" {
        return Err(t.err(1, "expected header `x,y,z1,...,zd`"));
    }
    if t.rows.is_empty() {
        return Err(t.no_rows_error());
    }
    let d = t.headers.len() - 2;
    let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (line, row) in &t.rows {
        x.push(t.real(*line, &row[0], "x")?);
        y.push(t.real(*line, &row[1], "y")?);
        for k in 0..d {
            z.push(t.real(*line, &row[k + 2], &t.headers[k + 2])?);
        }
    }
    CondSample::new(x, y, Points::new(d, z)?)
}

fn csv_file(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_two_sample_csv(s: &TwoSample, path: &Path) -> Result<()> {
    let header = if s.x().dim() == 1 {
        "value,group".to_string()
    } else {
        let cols: Vec<String> = (1..=s.x().dim()).map(|k| format!("value{k}")).collect();
        format!("{},group", cols.join(","))
    };
    let rows = s
        .x()
        .iter()
        .map(|p| format!("{},0", join(p)))
        .chain(s.y().iter().map(|p| format!("{},1", join(p))));
    csv_file(path, &header, rows)
}

pub fn write_survival_csv(s: &CensoredSample, path: &Path) -> Result<()> {
    let rows = s
        .obs()
        .iter()
        .map(|o| format!("{},{},{}", o.time, u8::from(o.event), o.group));
    csv_file(path, "time,event,group", rows)
}

pub fn write_cond_csv(s: &CondSample, path: &Path) -> Result<()> {
    let zs: Vec<String> = (1..=s.dim()).map(|k| format!("z{k}")).collect();
    let header = format!("x,y,{}", zs.join(","));
    let rows = (0..s.n()).map(|i| format!("{},{},{}", s.x()[i], s.y()[i], join(s.z().get(i))));
    csv_file(path, &header, rows)
}
