//! Point-mass functionals `S(ω) = Σᵢ cᵢ ω(tᵢ)` and their RKHS norm.
//!
//! The supremum of `S(ω)²` over the unit ball equals the squared norm of the
//! Riesz representer `ξ = Σᵢ cᵢ K(·, tᵢ)`, i.e. the quadratic form `cᵀ K c`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram, quadratic_form, GramMatrix, KernelSpec};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassFunctional {
    points: Arc<Points>,
    coeffs: Vec<f64>,
    label: &'static str,
}

/// Squared norm before and after clamping round-off negatives to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSq {
    pub value: f64,
    pub pre_clamp: f64,
}

impl PointMassFunctional {
    pub fn new(points: Arc<Points>, coeffs: Vec<f64>, label: &'static str) -> Result<Self> {
        if points.len() != coeffs.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coefficient {i} is not finite ({})",
                coeffs[i]
            )));
        }
        Ok(Self {
            points,
            coeffs,
            label,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            points: Arc::new(Points::empty(dim)),
            coeffs: Vec::new(),
            label: "empty",
        }
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn shared_points(&self) -> &Arc<Points> {
        &self.points
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn label(&self) -> &'static str {
        self.label
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Same point set, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.points), coeffs, self.label)
    }

    /// `Σᵢ cᵢ ω(tᵢ)`.
    pub fn apply(&self, omega: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.coeffs)
            .map(|(t, c)| c * omega(t))
            .sum()
    }

    /// `Ψ = cᵀ K c`, clamped at zero.
    pub fn norm_sq(&self, spec: &KernelSpec) -> Result<f64> {
        Ok(self.norm_sq_detailed(spec)?.value)
    }

    pub fn norm_sq_detailed(&self, spec: &KernelSpec) -> Result<NormSq> {
        if self.is_empty() {
            return Ok(NormSq {
                value: 0.0,
                pre_clamp: 0.0,
            });
        }
        let raw = quadratic_form(spec, &self.points, &self.coeffs)?;
        Ok(NormSq {
            value: raw.max(0.0),
            pre_clamp: raw,
        })
    }

    /// Quadratic form against a Gram matrix already built on this point set.
    pub fn norm_sq_with_gram(&self, g: &GramMatrix) -> NormSq {
        debug_assert_eq!(g.n(), self.len());
        let raw = g.quadratic_form(&self.coeffs);
        NormSq {
            value: raw.max(0.0),
            pre_clamp: raw,
        }
    }

    /// `⟨ξ_f, ξ_g⟩ = Σᵢ Σⱼ cᶠᵢ cᵍⱼ K(tᶠᵢ, tᵍⱼ)`.
    pub fn cross_inner(&self, other: &PointMassFunctional, spec: &KernelSpec) -> Result<f64> {
        if self.is_empty() || other.is_empty() {
            return Ok(0.0);
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if Arc::ptr_eq(&self.points, &other.points) || self.points == other.points {
            let g = gram(spec, &self.points)?;
            let k = &g.entries;
            let n = self.len();
            let mut total = 0.0;
            for j in 0..n {
                let s: f64 = (0..n).map(|i| self.coeffs[i] * k[(i, j)]).sum();
                total += s * other.coeffs[j];
            }
            return Ok(total);
        }
        let k = cross_gram(spec, &self.points, &other.points)?;
        let mut total = 0.0;
        for j in 0..other.len() {
            let s: f64 = (0..self.len()).map(|i| self.coeffs[i] * k[(i, j)]).sum();
            total += s * other.coeffs[j];
        }
        Ok(total)
    }

    /// The representer `ξ(t) = S(K(·, t))` evaluated at `t`.
    pub fn representer_at(&self, spec: &KernelSpec, t: &[f64]) -> f64 {
        self.apply(|x| spec.eval(x, t))
    }

    pub fn scale(&self, a: f64) -> PointMassFunctional {
        PointMassFunctional {
            points: Arc::clone(&self.points),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
            label: self.label,
        }
    }

    /// Concatenation of point masses; `add(f, g)(ω) = f(ω) + g(ω)`.
    pub fn add(&self, other: &PointMassFunctional) -> Result<PointMassFunctional> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        let points = self.points.concat(&other.points)?;
        let mut coeffs = self.coeffs.clone();
        coeffs.extend_from_slice(&other.coeffs);
        Ok(PointMassFunctional {
            points: Arc::new(points),
            coeffs,
            label: self.label,
        })
    }

    /// Merges bitwise-identical points by summing their coefficients.
    /// First-occurrence order is kept.
    pub fn consolidate(&self) -> PointMassFunctional {
        let mut index: std::collections::HashMap<Vec<u64>, usize> = Default::default();
        let mut points = Points::empty(self.dim());
        let mut coeffs: Vec<f64> = Vec::new();
        for (t, &c) in self.points.iter().zip(&self.coeffs) {
            // +0.0 and -0.0 are the same location
            let key: Vec<u64> = t.iter().map(|v| (v + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&k) => coeffs[k] += c,
                None => {
                    index.insert(key, coeffs.len());
                    points.push(t).expect("dimension preserved");
                    coeffs.push(c);
                }
            }
        }
        PointMassFunctional {
            points: Arc::new(points),
            coeffs,
            label: self.label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_double_sum(f: &PointMassFunctional, g: &PointMassFunctional, spec: &KernelSpec) -> f64 {
        let mut s = 0.0;
        for (ti, ci) in f.points().iter().zip(f.coeffs()) {
            for (tj, cj) in g.points().iter().zip(g.coeffs()) {
                s += ci * cj * spec.eval(ti, tj);
            }
        }
        s
    }

    fn random_functional(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointMassFunctional {
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        PointMassFunctional::new(Arc::new(Points::new(d, data).unwrap()), coeffs, "test").unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn apply_cancelling_coefficients() {
        let f = PointMassFunctional::new(
            Arc::new(Points::from_scalars(&[0.3, 1.7])),
            vec![1.0, -1.0],
            "t",
        )
        .unwrap();
        assert_eq!(f.apply(|_| 1.0), 0.0);
    }

    #[test]
    fn apply_single_term() {
        let f = PointMassFunctional::new(Arc::new(Points::from_scalars(&[3.0])), vec![2.0], "t")
            .unwrap();
        assert_eq!(f.apply(|t| t[0]), 6.0);
    }

    #[test]
    fn apply_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_functional(&mut rng, 15, 2);
        let w1 = |t: &[f64]| (t[0] * 1.3).sin() + t[1];
        let w2 = |t: &[f64]| (t[0] * t[1]).exp();
        let (a, b) = (0.7, -2.4);
        let lhs = f.apply(|t| a * w1(t) + b * w2(t));
        let rhs = a * f.apply(w1) + b * f.apply(w2);
        assert!(rel_close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn length_mismatch_and_non_finite() {
        let p = Arc::new(Points::from_scalars(&[1.0, 2.0]));
        assert!(PointMassFunctional::new(p.clone(), vec![1.0], "t").is_err());
        assert!(PointMassFunctional::new(p, vec![1.0, f64::NAN], "t").is_err());
    }

    #[test]
    fn norm_sq_empty_and_single() {
        let spec = KernelSpec::squared_exponential(1.0);
        assert_eq!(PointMassFunctional::empty(1).norm_sq(&spec).unwrap(), 0.0);
        let f = PointMassFunctional::new(Arc::new(Points::from_scalars(&[4.0])), vec![-3.0], "t")
            .unwrap();
        assert_eq!(f.norm_sq(&spec).unwrap(), 9.0);
        let rq = KernelSpec::rational_quadratic(0.5, 2.0);
        assert_eq!(f.norm_sq(&rq).unwrap(), 9.0);
    }

    #[test]
    fn norm_sq_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = KernelSpec::squared_exponential(0.8);
        for _ in 0..10 {
            let f = random_functional(&mut rng, 20, 3);
            let q = f.norm_sq_detailed(&spec).unwrap();
            let oracle = brute_double_sum(&f, &f, &spec);
            assert!(rel_close(q.pre_clamp, oracle, 1e-10));
            let csum: f64 = f.coeffs().iter().map(|c| c.abs()).sum();
            assert!(q.pre_clamp >= -1e-10 * csum * csum);
        }
    }

    #[test]
    fn cross_inner_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = KernelSpec::squared_exponential(1.3);
        let f = random_functional(&mut rng, 7, 2);
        let g = random_functional(&mut rng, 5, 2);
        assert_eq!(f.cross_inner(&PointMassFunctional::empty(2), &spec).unwrap(), 0.0);
        let ff = f.cross_inner(&f, &spec).unwrap();
        assert!(rel_close(ff, f.norm_sq(&spec).unwrap(), 1e-12));
        let fg = f.cross_inner(&g, &spec).unwrap();
        assert!(rel_close(fg, brute_double_sum(&f, &g, &spec), 1e-12));
        assert!(rel_close(fg, g.cross_inner(&f, &spec).unwrap(), 1e-12));
        let bad = random_functional(&mut rng, 3, 1);
        assert!(f.cross_inner(&bad, &spec).is_err());
    }

    #[test]
    fn scale_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = KernelSpec::squared_exponential(0.5);
        let f = random_functional(&mut rng, 9, 1);
        let base = f.norm_sq(&spec).unwrap();
        assert_eq!(f.scale(0.0).norm_sq(&spec).unwrap(), 0.0);
        assert!(rel_close(f.scale(-1.0).norm_sq(&spec).unwrap(), base, 1e-14));
        assert!(rel_close(f.scale(2.5).norm_sq(&spec).unwrap(), 6.25 * base, 1e-12));
    }

    #[test]
    fn add_expands_like_parallelogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = KernelSpec::squared_exponential(0.9);
        let f = random_functional(&mut rng, 6, 2);
        let g = random_functional(&mut rng, 8, 2);
        let sum = f.add(&g).unwrap();
        let lhs = sum.norm_sq(&spec).unwrap();
        let rhs = f.norm_sq(&spec).unwrap()
            + 2.0 * f.cross_inner(&g, &spec).unwrap()
            + g.norm_sq(&spec).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        let w = |t: &[f64]| t[0] - 0.5 * t[1];
        assert!((sum.apply(w) - f.apply(w) - g.apply(w)).abs() < 1e-12);
    }

    #[test]
    fn representer_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = KernelSpec::squared_exponential(0.6);
        let f = random_functional(&mut rng, 12, 2);
        let nested = f.apply(|x| f.representer_at(&spec, x));
        assert!(rel_close(nested, f.norm_sq(&spec).unwrap(), 1e-10));
    }

    #[test]
    fn consolidate_merges_duplicates() {
        let p = Arc::new(Points::from_scalars(&[1.0, 2.0, 1.0, 0.0, -0.0]));
        let f = PointMassFunctional::new(p, vec![0.5, 1.0, 0.25, 2.0, -1.0], "t").unwrap();
        let c = f.consolidate();
        assert_eq!(c.points().as_flat(), &[1.0, 2.0, 0.0]);
        assert_eq!(c.coeffs(), &[0.75, 1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(seed in any::<u64>(), l2 in 0.1f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = KernelSpec::squared_exponential(l2);
            let f = random_functional(&mut rng, 6, 2);
            let g = random_functional(&mut rng, 9, 2);
            let fg = f.cross_inner(&g, &spec).unwrap();
            let bound = f.norm_sq(&spec).unwrap() * g.norm_sq(&spec).unwrap();
            prop_assert!(fg * fg <= bound * (1.0 + 1e-9) + 1e-300);
        }

        #[test]
        fn consolidation_preserves_norm(seed in any::<u64>(), dups in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = KernelSpec::squared_exponential(0.7);
            let base = random_functional(&mut rng, 5, 1);
            // repeat some points with fresh coefficients
            let idx: Vec<usize> = (0..dups).map(|i| i % 5).collect();
            let extra_pts = base.points().select(&idx);
            let extra = PointMassFunctional::new(
                Arc::new(extra_pts),
                (0..dups).map(|_| rng.random_range(-1.0..1.0)).collect(),
                "t",
            ).unwrap();
            let f = base.add(&extra).unwrap();
            let merged = f.consolidate();
            prop_assert_eq!(merged.len(), 5);
            let a = f.norm_sq(&spec).unwrap();
            let b = merged.norm_sq(&spec).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-3));
        }
    }
}
