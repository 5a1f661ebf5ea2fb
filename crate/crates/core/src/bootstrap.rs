//! Wild-bootstrap weights, the replicate loop, and calibration of a
//! non-negative statistic against its bootstrap replicates.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functional::PointMassFunctional;
use crate::kernels::{gram, GramMatrix, KernelSpec};
use crate::points::Points;

/// Distribution of the i.i.d. multipliers; both have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    #[default]
    Rademacher,
    Gaussian,
}

/// A reproducible random stream keyed by `(seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

pub fn gen_weights(scheme: WeightScheme, n: usize, stream: &RngStream) -> Vec<f64> {
    gen_weights_with(scheme, n, &mut stream.rng())
}

pub fn gen_weights_with<R: Rng + ?Sized>(scheme: WeightScheme, n: usize, rng: &mut R) -> Vec<f64> {
    match scheme {
        WeightScheme::Rademacher => (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
        WeightScheme::Gaussian => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

/// Resampling parameters shared by every test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub scheme: WeightScheme,
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(m: usize, alpha: f64, seed: u64) -> Self {
        Self {
            scheme: WeightScheme::Rademacher,
            m,
            alpha,
            seed,
        }
    }

    pub fn with_scheme(mut self, scheme: WeightScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("number of bootstrap replicates must be at least 1"));
        }
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `M` evaluations of `stat` on independent weight vectors; replicate `b`
/// draws its weights from `RngStream(seed, b)`, so the output does not
/// depend on how rayon schedules the work.
pub fn bootstrap_statistics<F>(
    stat: F,
    scheme: WeightScheme,
    n_weights: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = (0..m)
        .into_par_iter()
        .map(|b| {
            let w = gen_weights(scheme, n_weights, &RngStream::new(seed, b as u64));
            stat(&w).map_err(|e| Error::Replicate {
                index: b,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Reuses one Gram matrix across functionals sharing a point set.
pub(crate) struct GramCache {
    points: Arc<Points>,
    gram: GramMatrix,
}

impl GramCache {
    pub(crate) fn new(points: Arc<Points>, spec: &KernelSpec) -> Result<Self> {
        let gram = gram(spec, &points)?;
        Ok(Self { points, gram })
    }

    pub(crate) fn norm_sq(&self, f: &PointMassFunctional, spec: &KernelSpec) -> Result<f64> {
        if f.is_empty() {
            return Ok(0.0);
        }
        if Arc::ptr_eq(f.shared_points(), &self.points) || **f.shared_points() == *self.points {
            Ok(f.norm_sq_with_gram(&self.gram).value)
        } else {
            f.norm_sq(spec)
        }
    }
}

/// Wild-bootstrap replicates `Ψᵂ_b = ‖builder(w_b)‖²`, in replicate order.
pub fn wild_replicates<B>(
    builder: B,
    scheme: WeightScheme,
    n_weights: usize,
    m: usize,
    spec: &KernelSpec,
    seed: u64,
) -> Result<Vec<f64>>
where
    B: Fn(&[f64]) -> Result<PointMassFunctional> + Sync,
{
    if m == 0 {
        return Err(invalid("number of bootstrap replicates must be at least 1"));
    }
    // the first replicate fixes the point set the Gram matrix is built on
    let first = builder(&gen_weights(scheme, n_weights, &RngStream::new(seed, 0))).map_err(|e| {
        Error::Replicate {
            index: 0,
            source: Box::new(e),
        }
    })?;
    let cache = if first.is_empty() {
        None
    } else {
        Some(GramCache::new(Arc::clone(first.shared_points()), spec)?)
    };
    bootstrap_statistics(
        |w| {
            let f = builder(w)?;
            match &cache {
                Some(c) => c.norm_sq(&f, spec),
                None => f.norm_sq(spec),
            }
        },
        scheme,
        n_weights,
        m,
        seed,
    )
}

/// Outcome of a calibrated test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub n: usize,
    pub statistic: f64,
    /// Sorted ascending.
    pub replicates: Vec<f64>,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub m: usize,
    pub seed: u64,
    pub scheme: WeightScheme,
    /// Resolved kernel, when the test uses one.
    pub kernel: Option<KernelSpec>,
    pub warnings: Vec<String>,
    pub config_echo: serde_json::Value,
}

/// 1-based position `⌈(1-α)M⌉` of the critical value in the sorted replicates.
pub fn critical_position(alpha: f64, m: usize) -> usize {
    let raw = (1.0 - alpha) * m as f64;
    // (1 - 0.05) * 100 lands just below 95 in binary
    let pos = (raw - 1e-9 * raw.max(1.0)).ceil() as usize;
    pos.clamp(1, m)
}

/// Rejects when `statistic` exceeds the replicate at position `⌈(1-α)M⌉`.
/// The p-value is `(1 + #{b : Ψᵇ ≥ Ψ}) / (M + 1)`.
pub fn calibrate(statistic: f64, replicates: Vec<f64>, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    if replicates.is_empty() {
        return Err(invalid("calibration needs at least one replicate"));
    }
    if statistic.is_nan() || replicates.iter().any(|r| r.is_nan()) {
        return Err(invalid("NaN statistic or replicate"));
    }
    let mut sorted = replicates;
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let critical_value = sorted[critical_position(alpha, m) - 1];
    let exceed = m - sorted.partition_point(|&r| r < statistic);
    let p_value = (1 + exceed) as f64 / (m + 1) as f64;
    Ok(TestReport {
        test: String::new(),
        n: 0,
        statistic,
        replicates: sorted,
        critical_value,
        p_value,
        reject: statistic > critical_value,
        alpha,
        m,
        seed: 0,
        scheme: WeightScheme::default(),
        kernel: None,
        warnings: Vec::new(),
        config_echo: serde_json::Value::Null,
    })
}
