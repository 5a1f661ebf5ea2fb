//! Two-sample maximum mean discrepancy test.
//!
//! `S(ω) = √n (mean ω(X) - mean ω(Y))`, so `Ψ = n·MMD²(F̂₀, F̂₁)`. The wild
//! bootstrap centres the multipliers within each group before weighting.

use std::sync::Arc;

use serde_json::json;

use crate::bootstrap::{calibrate, wild_replicates, BootstrapConfig, TestReport};
use crate::error::{Error, Result};
use crate::functional::PointMassFunctional;
use crate::kernels::KernelSpec;
use crate::points::Points;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSample {
    x: Points,
    y: Points,
}

impl TwoSample {
    pub fn new(x: Points, y: Points) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidInput(format!(
                "both groups need at least one point (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        if !x.all_finite() || !y.all_finite() {
            return Err(Error::InvalidInput("non-finite coordinates".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &Points {
        &self.x
    }

    pub fn y(&self) -> &Points {
        &self.y
    }

    pub fn n0(&self) -> usize {
        self.x.len()
    }

    pub fn n1(&self) -> usize {
        self.y.len()
    }

    pub fn n(&self) -> usize {
        self.n0() + self.n1()
    }

    pub fn pooled(&self) -> Points {
        self.x.concat(&self.y).expect("dimensions checked at construction")
    }

    /// Groups exchanged.
    pub fn swapped(&self) -> TwoSample {
        TwoSample {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

fn group_coefficients(s: &TwoSample, u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = s.n() as f64;
    let a = n.sqrt() / s.n0() as f64;
    let b = n.sqrt() / s.n1() as f64;
    u.iter().map(|w| a * w).chain(v.iter().map(|w| -b * w)).collect()
}

/// Points pooled x then y, coefficients `√n/n₀` and `-√n/n₁`.
pub fn mmd_coefficients(s: &TwoSample) -> PointMassFunctional {
    let ones0 = vec![1.0; s.n0()];
    let ones1 = vec![1.0; s.n1()];
    PointMassFunctional::new(Arc::new(s.pooled()), group_coefficients(s, &ones0, &ones1), "mmd")
        .expect("coefficients are finite and aligned")
}

/// `Ψₙ = n·MMD²` as a quadratic form; `spec` must be resolved.
pub fn mmd_statistic(s: &TwoSample, spec: &KernelSpec) -> Result<f64> {
    mmd_coefficients(s).norm_sq(spec)
}

fn centered(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v - mean).collect()
}

/// Builder of bootstrap functionals. Weights hold the `n₀` multipliers for
/// x followed by the `n₁` multipliers for y.
pub fn mmd_wild_builder(
    s: &TwoSample,
) -> impl Fn(&[f64]) -> Result<PointMassFunctional> + Sync + '_ {
    let pooled = Arc::new(s.pooled());
    move |w: &[f64]| {
        if w.len() != s.n() {
            return Err(Error::LengthMismatch {
                expected: s.n(),
                got: w.len(),
            });
        }
        let (u, v) = w.split_at(s.n0());
        let coeffs = group_coefficients(s, &centered(u), &centered(v));
        PointMassFunctional::new(Arc::clone(&pooled), coeffs, "mmd-wild")
    }
}

pub fn mmd_test(s: &TwoSample, spec: &KernelSpec, boot: &BootstrapConfig) -> Result<TestReport> {
    boot.validate()?;
    let spec = spec.resolve(&s.pooled())?;
    let statistic = mmd_statistic(s, &spec)?;
    let replicates = wild_replicates(
        mmd_wild_builder(s),
        boot.scheme,
        s.n(),
        boot.m,
        &spec,
        boot.seed,
    )?;
    let mut report = calibrate(statistic, replicates, boot.alpha)?;
    report.test = "mmd".into();
    report.n = s.n();
    report.m = boot.m;
    report.seed = boot.seed;
    report.scheme = boot.scheme;
    report.kernel = Some(spec);
    let smallest = s.n0().min(s.n1()) as f64 / s.n() as f64;
    if smallest < 0.05 {
        report.warnings.push(format!(
            "smallest group holds {:.1}% of the sample; the bootstrap may be unreliable",
            100.0 * smallest
        ));
    }
    report.config_echo = json!({
        "n0": s.n0(),
        "n1": s.n1(),
        "dim": s.x().dim(),
        "kernel": spec,
        "bootstrap": boot,
    });
    Ok(report)
}
