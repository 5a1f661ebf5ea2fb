//! Empirical spectrum of the bootstrap covariance operator.
//!
//! For `B` bootstrap representers `ξ_b`, the operator `(1/B) Σ ξ_b ⊗ ξ_b`
//! has the same nonzero eigenvalues as `G/B`, where `G[a][b] = ⟨ξ_a, ξ_b⟩`.
//! Its trace equals the mean of the bootstrap statistics `Ψᵇ = G[b][b]`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::{gen_weights, RngStream, WeightScheme};
use crate::error::{invalid, Error, Result};
use crate::functional::PointMassFunctional;
use crate::kernels::{gram, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    pub b: usize,
    /// Eigenvalues that were negative before clamping.
    pub clamped: usize,
    /// Most negative eigenvalue before clamping (0 if none).
    pub min_raw: f64,
}

/// `G[a][b] = cross_inner(f_a, f_b)`.
pub fn representer_gram(fs: &[PointMassFunctional], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let b = fs.len();
    if b == 0 {
        return Err(invalid("representer Gram needs at least one functional"));
    }
    let shared = fs
        .iter()
        .all(|f| Arc::ptr_eq(f.shared_points(), fs[0].shared_points()));
    if shared && !fs[0].is_empty() {
        // G = C K Cᵀ with C the B×n coefficient matrix
        let k = gram(spec, fs[0].points())?.entries;
        let n = fs[0].len();
        let c = DMatrix::from_fn(b, n, |a, i| fs[a].coeffs()[i]);
        let kc = &k * c.transpose();
        let mut g = &c * kc;
        symmetrize(&mut g);
        return Ok(g);
    }
    let rows: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|a| {
            (a..b)
                .map(|c| fs[a].cross_inner(&fs[c], spec))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut g = DMatrix::zeros(b, b);
    for (a, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            g[(a, a + off)] = v;
            g[(a + off, a)] = v;
        }
    }
    Ok(g)
}

fn symmetrize(g: &mut DMatrix<f64>) {
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
}

/// Eigenvalues of `G / B`.
pub fn estimate_eigenvalues(g: &DMatrix<f64>) -> Result<SpectrumEstimate> {
    let b = g.nrows();
    if b == 0 || g.ncols() != b {
        return Err(invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let asym = (g - g.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if asym > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let mut sym = g / b as f64;
    symmetrize(&mut sym);
    let raw = sym.symmetric_eigenvalues();
    let mut eigenvalues: Vec<f64> = raw.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let min_raw = eigenvalues.last().copied().unwrap_or(0.0).min(0.0);
    let clamped = eigenvalues.iter().filter(|&&v| v < 0.0).count();
    for v in &mut eigenvalues {
        *v = v.max(0.0);
    }
    let trace = eigenvalues.iter().sum();
    Ok(SpectrumEstimate {
        eigenvalues,
        trace,
        b,
        clamped,
        min_raw,
    })
}

/// Draws of `Σᵢ λᵢ Zᵢ²` with fresh standard normals per draw.
pub fn sample_weighted_chisq<R: Rng + ?Sized>(
    lambdas: &[f64],
    draws: usize,
    rng: &mut R,
) -> Vec<f64> {
    (0..draws)
        .map(|_| {
            lambdas
                .iter()
                .map(|l| {
                    let z: f64 = rng.sample(StandardNormal);
                    l * z * z
                })
                .sum()
        })
        .collect()
}

/// Kolmogorov–Smirnov distance between two empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS distance needs two non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Output of [`bootstrap_spectrum`].
#[derive(Debug, Clone)]
pub struct BootstrapSpectrum {
    pub estimate: SpectrumEstimate,
    /// `Ψᵇ = G[b][b]`, in replicate order.
    pub replicates: Vec<f64>,
}

/// Draws `b` bootstrap representers (replicate `k` uses `RngStream(seed, k)`),
/// builds their Gram matrix and estimates its spectrum.
pub fn bootstrap_spectrum<F>(
    builder: F,
    scheme: WeightScheme,
    n_weights: usize,
    b: usize,
    spec: &KernelSpec,
    seed: u64,
) -> Result<BootstrapSpectrum>
where
    F: Fn(&[f64]) -> Result<PointMassFunctional> + Sync,
{
    let fs: Vec<PointMassFunctional> = (0..b)
        .into_par_iter()
        .map(|k| {
            let w = gen_weights(scheme, n_weights, &RngStream::new(seed, k as u64));
            builder(&w).map_err(|e| Error::Replicate {
                index: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let g = representer_gram(&fs, spec)?;
    let replicates = g.diagonal().iter().map(|v| v.max(0.0)).collect();
    let estimate = estimate_eigenvalues(&g)?;
    Ok(BootstrapSpectrum {
        estimate,
        replicates,
    })
}
