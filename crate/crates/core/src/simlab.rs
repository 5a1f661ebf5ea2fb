//! Data generators and the rejection-rate experiment runner.
//!
//! Repetition `r` at grid point `g` draws everything from
//! `RngStream(seed, (g << 32) | r)`: first the dataset, then a 64-bit seed
//! for that repetition's bootstrap.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bootstrap::{BootstrapConfig, RngStream, TestReport};
use crate::error::{invalid, Error, Result};
use crate::gcm::{self, CondSample, RegressionConfig};
use crate::kernels::KernelSpec;
use crate::logrank::{self, CensoredObs, CensoredSample};
use crate::mmd::{self, TwoSample};
use crate::points::Points;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `Z ~ N(0,1)`, `X = Z + U₁ sin(5Z)`, `Y = Z² + γU₁ + (1-γ)U₂`.
pub fn gen_data1<R: Rng + ?Sized>(n: usize, gamma: f64, rng: &mut R) -> Result<CondSample> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let (mut x, mut y, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let zi = normal(rng);
        let u1 = normal(rng);
        let u2 = normal(rng);
        x.push(zi + u1 * (5.0 * zi).sin());
        y.push(zi * zi + gamma * u1 + (1.0 - gamma) * u2);
        z.push(zi);
    }
    CondSample::new(x, y, Points::from_scalars(&z))
}

/// `Z, U ~ N(0, I_d)`, `X = Z₁ + Σ UᵢZᵢ/√d`, `Y = Z₂ + Σ Uᵢ/√d`.
pub fn gen_data2<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<CondSample> {
    if d < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {d}")));
    }
    let root_d = (d as f64).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n * d);
    for _ in 0..n {
        let zi: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let ui: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let uz: f64 = ui.iter().zip(&zi).map(|(u, z)| u * z).sum();
        let us: f64 = ui.iter().sum();
        x.push(zi[0] + uz / root_d);
        y.push(zi[1] + us / root_d);
        z.extend_from_slice(&zi);
    }
    CondSample::new(x, y, Points::new(d, z)?)
}

/// `x ~ N(0,1)^{n₀}`, `y ~ N(shift,1)^{n₁}`.
pub fn gen_two_sample<R: Rng + ?Sized>(
    n0: usize,
    n1: usize,
    shift: f64,
    rng: &mut R,
) -> Result<TwoSample> {
    let x: Vec<f64> = (0..n0).map(|_| normal(rng)).collect();
    let y: Vec<f64> = (0..n1).map(|_| normal(rng) + shift).collect();
    TwoSample::new(Points::from_scalars(&x), Points::from_scalars(&y))
}

/// Exponential event times (rate 1 for group 0, `rate1` for group 1) with
/// exponential censoring at rates `cens0`, `cens1`; a zero censoring rate
/// means no censoring.
pub fn gen_survival<R: Rng + ?Sized>(
    n0: usize,
    n1: usize,
    rate1: f64,
    cens0: f64,
    cens1: f64,
    rng: &mut R,
) -> Result<CensoredSample> {
    if !(rate1 > 0.0 && rate1.is_finite()) {
        return Err(invalid(format!("event rate must be positive, got {rate1}")));
    }
    for c in [cens0, cens1] {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid(format!("censoring rate must be non-negative, got {c}")));
        }
    }
    let draw = |rate: f64, rng: &mut R| -> f64 {
        if rate == 0.0 {
            f64::INFINITY
        } else {
            Exp::new(rate).expect("positive rate").sample(rng)
        }
    };
    let mut obs = Vec::with_capacity(n0 + n1);
    for (group, count, rate, cens) in [(0u8, n0, 1.0, cens0), (1u8, n1, rate1, cens1)] {
        for _ in 0..count {
            let event_time = draw(rate, rng);
            let censor_time = draw(cens, rng);
            obs.push(CensoredObs {
                time: event_time.min(censor_time),
                event: event_time <= censor_time,
                group,
            });
        }
    }
    CensoredSample::new(obs)
}

/// Which test each repetition runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "kebab-case")]
pub enum TestSpec {
    Mmd {
        kernel: KernelSpec,
    },
    Logrank {
        kernel: KernelSpec,
        km_transform: bool,
    },
    Kgcm {
        kernel: KernelSpec,
        regression: Option<RegressionConfig>,
    },
    Gcm {
        regression: Option<RegressionConfig>,
    },
    Wgcm {
        regression: Option<RegressionConfig>,
    },
}

/// Data family; the grid value is substituted for its free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Generator {
    /// Grid over γ.
    Data1 { n: usize },
    /// Grid over d.
    Data2 { n: usize },
    /// Grid over the shift of group 1.
    TwoSample { n0: usize, n1: usize },
    /// Grid over the group-1 event rate.
    Survival {
        n0: usize,
        n1: usize,
        cens0: f64,
        cens1: f64,
    },
}

pub enum Dataset {
    Two(TwoSample),
    Censored(CensoredSample),
    Cond(CondSample),
}

impl Generator {
    pub fn generate<R: Rng + ?Sized>(&self, param: f64, rng: &mut R) -> Result<Dataset> {
        Ok(match *self {
            Generator::Data1 { n } => Dataset::Cond(gen_data1(n, param, rng)?),
            Generator::Data2 { n } => {
                if param.fract() != 0.0 || param < 0.0 {
                    return Err(invalid(format!("dimension grid value {param} is not an integer")));
                }
                Dataset::Cond(gen_data2(n, param as usize, rng)?)
            }
            Generator::TwoSample { n0, n1 } => Dataset::Two(gen_two_sample(n0, n1, param, rng)?),
            Generator::Survival {
                n0,
                n1,
                cens0,
                cens1,
            } => Dataset::Censored(gen_survival(n0, n1, param, cens0, cens1, rng)?),
        })
    }
}

impl TestSpec {
    pub fn run(&self, data: &Dataset, boot: &BootstrapConfig) -> Result<TestReport> {
        let reg = |r: &Option<RegressionConfig>, s: &CondSample| {
            r.unwrap_or_else(|| RegressionConfig::default_for_dim(s.dim()))
        };
        match (self, data) {
            (TestSpec::Mmd { kernel }, Dataset::Two(s)) => mmd::mmd_test(s, kernel, boot),
            (
                TestSpec::Logrank {
                    kernel,
                    km_transform,
                },
                Dataset::Censored(s),
            ) => logrank::logrank_test(s, kernel, boot, *km_transform),
            (TestSpec::Kgcm { kernel, regression }, Dataset::Cond(s)) => {
                gcm::kgcm_test(s, &reg(regression, s), kernel, boot)
            }
            (TestSpec::Gcm { regression }, Dataset::Cond(s)) => {
                gcm::gcm_test(s, &reg(regression, s), boot)
            }
            (TestSpec::Wgcm { regression }, Dataset::Cond(s)) => gcm::wgcm_test(
                s,
                &reg(regression, s),
                &gcm::default_wgcm_weights(s.dim()),
                boot,
            ),
            _ => Err(invalid("test does not accept this kind of data")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub test: TestSpec,
    pub generator: Generator,
    pub grid: Vec<f64>,
    pub reps: usize,
    pub bootstrap: BootstrapConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub param_grid: Vec<f64>,
    pub rates: Vec<f64>,
    pub reps: usize,
    /// Normal-approximation 95% binomial half-widths.
    pub ci_half_width: Vec<f64>,
    pub seed: u64,
    pub config_echo: serde_json::Value,
}

impl ExperimentResult {
    pub fn ci(&self, k: usize) -> (f64, f64) {
        let (r, h) = (self.rates[k], self.ci_half_width[k]);
        ((r - h).max(0.0), (r + h).min(1.0))
    }
}

pub fn binomial_half_width(rate: f64, reps: usize) -> f64 {
    1.96 * (rate * (1.0 - rate) / reps as f64).sqrt()
}

pub fn repetition_stream(seed: u64, grid_index: usize, rep: usize) -> RngStream {
    RngStream::new(seed, ((grid_index as u64) << 32) | rep as u64)
}

/// Runs `trial` for every (grid point, repetition) pair in parallel and
/// reduces in grid-then-repetition order. The first failure in that order is
/// returned with its indices; no partial result is produced.
pub fn run_grid<F>(grid: &[f64], reps: usize, seed: u64, trial: F) -> Result<ExperimentResult>
where
    F: Fn(f64, &mut rand_chacha::ChaCha8Rng) -> Result<bool> + Sync,
{
    if reps == 0 {
        return Err(invalid("repetitions must be at least 1"));
    }
    if grid.is_empty() {
        return Err(invalid("parameter grid is empty"));
    }
    let outcomes: Vec<Result<bool>> = (0..grid.len() * reps)
        .into_par_iter()
        .map(|k| {
            let (g, r) = (k / reps, k % reps);
            let mut rng = repetition_stream(seed, g, r).rng();
            trial(grid[g], &mut rng).map_err(|e| Error::Experiment {
                grid: g,
                rep: r,
                source: Box::new(e),
            })
        })
        .collect();
    let mut rates = Vec::with_capacity(grid.len());
    for chunk in outcomes.chunks(reps) {
        let mut hits = 0usize;
        for o in chunk {
            if o.as_ref().map_err(clone_error)? == &true {
                hits += 1;
            }
        }
        rates.push(hits as f64 / reps as f64);
    }
    Ok(ExperimentResult {
        param_grid: grid.to_vec(),
        ci_half_width: rates.iter().map(|&p| binomial_half_width(p, reps)).collect(),
        rates,
        reps,
        seed,
        config_echo: serde_json::Value::Null,
    })
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Experiment { grid, rep, source } => Error::Experiment {
            grid: *grid,
            rep: *rep,
            source: Box::new(Error::InvalidInput(source.to_string())),
        },
        other => Error::InvalidInput(other.to_string()),
    }
}

pub fn rejection_rate(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.bootstrap.validate()?;
    let mut result = run_grid(&cfg.grid, cfg.reps, cfg.bootstrap.seed, |param, rng| {
        let data = cfg.generator.generate(param, rng)?;
        let boot = BootstrapConfig {
            seed: rng.random(),
            ..cfg.bootstrap
        };
        Ok(cfg.test.run(&data, &boot)?.reject)
    })?;
    result.config_echo = json!(cfg);
    Ok(result)
}
