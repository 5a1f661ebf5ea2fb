//! Kernel functions, length-scale selection and Gram matrices.
//!
//! The squared-exponential kernel is parameterised as `exp(-‖u-v‖²/ℓ²)`,
//! without the conventional factor of two, so `ℓ² = 0.1` and `ℓ² = 1` mean
//! exactly what they say.

use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::points::{sq_dist, Points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SquaredExponential,
    Constant,
    RationalQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthscaleRule {
    Fixed,
    MedianHeuristic,
}

/// Kernel configuration.
///
/// With [`LengthscaleRule::MedianHeuristic`] the squared length-scale is
/// unknown until [`KernelSpec::resolve`] has seen the data; evaluating an
/// unresolved spec is an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale_sq: f64,
    pub lengthscale_rule: LengthscaleRule,
    pub rq_alpha: f64,
}

impl KernelSpec {
    pub fn squared_exponential(lengthscale_sq: f64) -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            lengthscale_sq,
            lengthscale_rule: LengthscaleRule::Fixed,
            rq_alpha: 1.0,
        }
    }

    pub fn constant() -> Self {
        Self {
            family: KernelFamily::Constant,
            lengthscale_sq: 1.0,
            lengthscale_rule: LengthscaleRule::Fixed,
            rq_alpha: 1.0,
        }
    }

    pub fn rational_quadratic(lengthscale_sq: f64, rq_alpha: f64) -> Self {
        Self {
            family: KernelFamily::RationalQuadratic,
            lengthscale_sq,
            lengthscale_rule: LengthscaleRule::Fixed,
            rq_alpha,
        }
    }

    /// A spec of the given family whose length-scale is picked by the median
    /// heuristic at [`resolve`](Self::resolve) time.
    pub fn median_heuristic(family: KernelFamily) -> Self {
        Self {
            family,
            lengthscale_sq: f64::NAN,
            lengthscale_rule: LengthscaleRule::MedianHeuristic,
            rq_alpha: 1.0,
        }
    }

    pub fn uses_lengthscale(&self) -> bool {
        self.family != KernelFamily::Constant
    }

    pub fn is_resolved(&self) -> bool {
        !self.uses_lengthscale() || (self.lengthscale_sq.is_finite() && self.lengthscale_sq > 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.uses_lengthscale() {
            return Ok(());
        }
        if self.family == KernelFamily::RationalQuadratic
            && !(self.rq_alpha.is_finite() && self.rq_alpha > 0.0)
        {
            return Err(invalid(format!(
                "rational-quadratic alpha must be positive, got {}",
                self.rq_alpha
            )));
        }
        if self.lengthscale_rule == LengthscaleRule::Fixed && !self.is_resolved() {
            return Err(invalid(format!(
                "squared length-scale must be positive, got {}",
                self.lengthscale_sq
            )));
        }
        Ok(())
    }

    /// Fixes the length-scale. Median-heuristic specs compute `ℓ²` on
    /// `points`; fixed and constant specs are returned unchanged.
    pub fn resolve(&self, points: &Points) -> Result<KernelSpec> {
        self.validate()?;
        if !self.uses_lengthscale() || self.lengthscale_rule == LengthscaleRule::Fixed {
            return Ok(*self);
        }
        let lengthscale_sq = median_heuristic(points)?;
        Ok(KernelSpec {
            lengthscale_sq,
            ..*self
        })
    }

    fn ensure_resolved(&self) -> Result<()> {
        if self.is_resolved() {
            Ok(())
        } else {
            Err(invalid(
                "kernel length-scale is unresolved; call KernelSpec::resolve first",
            ))
        }
    }

    /// Kernel value without dimension or resolution checks.
    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Constant => 1.0,
            KernelFamily::SquaredExponential => (-sq_dist(u, v) / self.lengthscale_sq).exp(),
            KernelFamily::RationalQuadratic => {
                let r = sq_dist(u, v) / (self.rq_alpha * self.lengthscale_sq);
                (1.0 + r).powf(-self.rq_alpha)
            }
        }
    }

    /// Upper bound on `|K(u, v)|`; every shipped family is bounded by one.
    pub fn bound(&self) -> f64 {
        1.0
    }
}

pub fn eval_kernel(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    if u.is_empty() {
        return Err(invalid("points must have dimension at least 1"));
    }
    spec.ensure_resolved()?;
    Ok(spec.eval(u, v))
}

/// Median of the squared pairwise distances `‖xᵢ - xⱼ‖²` over `i < j`.
///
/// Even pair counts average the two middle order statistics.
pub fn median_heuristic(points: &Points) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(invalid("median heuristic needs at least two points"));
    }
    let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let pi = points.get(i);
        for j in (i + 1)..n {
            d.push(sq_dist(pi, points.get(j)));
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite coordinates in median heuristic"));
    }
    let m = d.len();
    let mid = m / 2;
    let (_, upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if m % 2 == 1 {
        upper
    } else {
        // lower middle is the max of the left partition
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median <= 0.0 {
        return Err(invalid(
            "median squared pairwise distance is zero (points are degenerate)",
        ));
    }
    Ok(median)
}

/// Symmetric matrix of kernel values over one point set.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub points_hash: u64,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `cᵀ K c`.
    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        let n = self.n();
        debug_assert_eq!(c.len(), n);
        let k = self.entries.as_slice();
        // column-major; symmetric, so column j is row j
        let mut total = 0.0;
        for j in 0..n {
            let cj = c[j];
            if cj == 0.0 {
                continue;
            }
            let col = &k[j * n..(j + 1) * n];
            let s: f64 = col.iter().zip(c).map(|(kij, ci)| kij * ci).sum();
            total += cj * s;
        }
        total
    }
}

pub fn points_fingerprint(points: &Points) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    points.dim().hash(&mut h);
    for v in points.as_flat() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Gram matrix `K[i][j] = K(tᵢ, tⱼ)`. Each unordered pair is evaluated once
/// and mirrored, so the result is exactly symmetric.
pub fn gram(spec: &KernelSpec, points: &Points) -> Result<GramMatrix> {
    spec.ensure_resolved()?;
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.get(i);
            (i..n).map(|j| spec.eval(pi, points.get(j))).collect()
        })
        .collect();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        entries,
        points_hash: points_fingerprint(points),
    })
}

/// `cᵀ K c` without storing `K`. Accumulates in the same order as
/// [`GramMatrix::quadratic_form`], so both give bit-identical results.
pub fn quadratic_form(spec: &KernelSpec, points: &Points, c: &[f64]) -> Result<f64> {
    spec.ensure_resolved()?;
    if c.len() != points.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            got: c.len(),
        });
    }
    let partial: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|j| {
            if c[j] == 0.0 {
                return 0.0;
            }
            let pj = points.get(j);
            let s: f64 = points
                .iter()
                .zip(c)
                .map(|(pi, ci)| spec.eval(pi, pj) * ci)
                .sum();
            c[j] * s
        })
        .collect();
    let mut total = 0.0;
    for (j, v) in partial.into_iter().enumerate() {
        if c[j] != 0.0 {
            total += v;
        }
    }
    Ok(total)
}

/// Rectangular kernel matrix `K[i][j] = K(aᵢ, bⱼ)`.
pub fn cross_gram(spec: &KernelSpec, a: &Points, b: &Points) -> Result<DMatrix<f64>> {
    spec.ensure_resolved()?;
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        spec.eval(a.get(i), b.get(j))
    }))
}
