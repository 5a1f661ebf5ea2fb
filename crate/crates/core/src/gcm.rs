//! Kernelised generalised covariance measure (KGCM) for testing `X ⟂ Y | Z`,
//! with the plain GCM and fixed-weight wGCM baselines.
//!
//! Residuals come from polynomial least squares of `X` and `Y` on `Z`, fitted
//! once on the full sample. The KGCM functional puts mass
//! `ε̂_X ε̂_Y / √n` at each `Zᵢ`; the wild bootstrap multiplies those masses
//! by raw (uncentred) weights.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bootstrap::{
    bootstrap_statistics, calibrate, wild_replicates, BootstrapConfig, TestReport,
};
use crate::error::{invalid, Error, Result};
use crate::functional::PointMassFunctional;
use crate::kernels::KernelSpec;
use crate::points::Points;

#[derive(Debug, Clone, PartialEq)]
pub struct CondSample {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Points,
}

impl CondSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Points) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(invalid("conditional sample is empty"));
        }
        if y.len() != n || z.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: if y.len() != n { y.len() } else { z.len() },
            });
        }
        Ok(Self { x, y, z })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &Points {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }

    /// Same `Z`, `X` multiplied by `a`.
    pub fn scale_x(&self, a: f64) -> CondSample {
        CondSample {
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.clone(),
            z: self.z.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub degree: u32,
    pub interactions: bool,
    pub intercept: bool,
}

impl RegressionConfig {
    pub fn new(degree: u32, interactions: bool) -> Self {
        Self {
            degree,
            interactions,
            intercept: true,
        }
    }

    /// Degree 2 with interactions for scalar `Z`, else degree 1.
    pub fn default_for_dim(d: usize) -> Self {
        if d <= 1 {
            Self::new(2, true)
        } else {
            Self::new(1, false)
        }
    }
}

/// Exponent tuples in column order: by total degree, then lexicographically
/// with higher powers of earlier coordinates first.
fn monomials(d: usize, cfg: &RegressionConfig) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if cfg.intercept {
        out.push(vec![0; d]);
    }
    for total in 1..=cfg.degree {
        if cfg.interactions {
            let mut current = vec![0u32; d];
            push_compositions(total, 0, &mut current, &mut out);
        } else {
            for k in 0..d {
                let mut e = vec![0; d];
                e[k] = total;
                out.push(e);
            }
        }
    }
    out
}

fn push_compositions(rest: u32, k: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let d = current.len();
    if k == d - 1 {
        current[k] = rest;
        out.push(current.clone());
        current[k] = 0;
        return;
    }
    for e in (0..=rest).rev() {
        current[k] = e;
        push_compositions(rest - e, k + 1, current, out);
    }
    current[k] = 0;
}

pub fn poly_design(z: &Points, cfg: &RegressionConfig) -> DMatrix<f64> {
    let terms = monomials(z.dim(), cfg);
    DMatrix::from_fn(z.len(), terms.len(), |i, j| {
        z.get(i)
            .iter()
            .zip(&terms[j])
            .map(|(v, &e)| v.powi(e as i32))
            .product()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub eps_x: Vec<f64>,
    pub eps_y: Vec<f64>,
    /// `(1/n) Σ (f(Zᵢ) - f̂(Zᵢ))²` when the true regression is known.
    pub a_f_hat: Option<f64>,
    pub a_g_hat: Option<f64>,
    pub rank: usize,
    pub columns: usize,
    pub warnings: Vec<String>,
}

impl ResidualSet {
    /// Fills the in-sample fit errors against known regression functions.
    pub fn attach_truth(
        &mut self,
        s: &CondSample,
        f: impl Fn(&[f64]) -> f64,
        g: impl Fn(&[f64]) -> f64,
    ) {
        let n = s.n() as f64;
        let err = |obs: &[f64], eps: &[f64], truth: &dyn Fn(&[f64]) -> f64| {
            s.z.iter()
                .zip(obs.iter().zip(eps))
                .map(|(z, (o, e))| (truth(z) - (o - e)).powi(2))
                .sum::<f64>()
                / n
        };
        self.a_f_hat = Some(err(&s.x, &self.eps_x, &f));
        self.a_g_hat = Some(err(&s.y, &self.eps_y, &g));
    }

    pub fn products(&self) -> Vec<f64> {
        self.eps_x.iter().zip(&self.eps_y).map(|(a, b)| a * b).collect()
    }
}

/// Least-squares residuals of `x` and `y` on the polynomial design of `z`,
/// via SVD with the minimal-norm solution on rank deficiency.
pub fn fit_residuals(s: &CondSample, cfg: &RegressionConfig) -> Result<ResidualSet> {
    if !s.z.all_finite() || s.x.iter().chain(&s.y).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite values in conditional sample"));
    }
    let design = poly_design(&s.z, cfg);
    let (n, p) = design.shape();
    let mut warnings = Vec::new();
    if p == 0 {
        return Ok(ResidualSet {
            eps_x: s.x.clone(),
            eps_y: s.y.clone(),
            a_f_hat: None,
            a_g_hat: None,
            rank: 0,
            columns: 0,
            warnings,
        });
    }
    if p >= n {
        warnings.push(format!(
            "design has {p} columns for {n} observations; the fit interpolates"
        ));
    }
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (n.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&v| v > eps).count();
    if rank < p {
        warnings.push(format!(
            "design matrix is rank deficient ({rank} of {p}); using the minimal-norm fit"
        ));
    }
    let residuals = |obs: &[f64]| -> Result<Vec<f64>> {
        let b = DVector::from_column_slice(obs);
        let beta = svd.solve(&b, eps).map_err(|e| invalid(e.to_string()))?;
        let fitted = &design * beta;
        Ok(obs.iter().zip(fitted.iter()).map(|(o, f)| o - f).collect())
    };
    Ok(ResidualSet {
        eps_x: residuals(&s.x)?,
        eps_y: residuals(&s.y)?,
        a_f_hat: None,
        a_g_hat: None,
        rank,
        columns: p,
        warnings,
    })
}

fn check_len(r: &ResidualSet, z: &Points) -> Result<()> {
    if r.eps_x.len() != z.len() || r.eps_y.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            got: r.eps_x.len().min(r.eps_y.len()),
        });
    }
    Ok(())
}

/// Mass `ε̂_{Xᵢ} ε̂_{Yᵢ} / √n` at each `Zᵢ`.
pub fn kgcm_coefficients(r: &ResidualSet, z: &Points) -> Result<PointMassFunctional> {
    check_len(r, z)?;
    kgcm_on(r, Arc::new(z.clone()))
}

fn kgcm_on(r: &ResidualSet, z: Arc<Points>) -> Result<PointMassFunctional> {
    let root_n = (z.len() as f64).sqrt();
    let coeffs = r.products().into_iter().map(|p| p / root_n).collect();
    PointMassFunctional::new(z, coeffs, "kgcm")
}

/// Builder of bootstrap functionals: coefficient `i` times raw weight `Wᵢ`.
pub fn kgcm_wild_builder(
    r: &ResidualSet,
    z: &Points,
) -> Result<impl Fn(&[f64]) -> Result<PointMassFunctional> + Sync> {
    check_len(r, z)?;
    let base = kgcm_on(r, Arc::new(z.clone()))?;
    Ok(move |w: &[f64]| {
        if w.len() != base.len() {
            return Err(Error::LengthMismatch {
                expected: base.len(),
                got: w.len(),
            });
        }
        let coeffs = base.coeffs().iter().zip(w).map(|(c, w)| c * w).collect();
        base.with_coeffs(coeffs)
    })
}

pub type WeightFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `{sign(z)}` for scalar `Z`; `{1, sign(z₁), …, sign(z_d)}` otherwise.
pub fn default_wgcm_weights(d: usize) -> Vec<WeightFn> {
    if d == 1 {
        return vec![Box::new(|z: &[f64]| sign(z[0]))];
    }
    let mut w: Vec<WeightFn> = vec![Box::new(|_: &[f64]| 1.0)];
    for k in 0..d {
        w.push(Box::new(move |z: &[f64]| sign(z[k])));
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct WgcmStatistic {
    /// `Sₙ(ωⱼ)` per weight function.
    pub per_weight: Vec<f64>,
    /// `maxⱼ |Sₙ(ωⱼ)|`.
    pub max_abs: f64,
}

pub fn wgcm_statistic(
    r: &ResidualSet,
    z: &Points,
    weight_fns: &[WeightFn],
) -> Result<WgcmStatistic> {
    let f = kgcm_coefficients(r, z)?;
    let per_weight: Vec<f64> = weight_fns.iter().map(|w| f.apply(w)).collect();
    let max_abs = per_weight.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(WgcmStatistic {
        per_weight,
        max_abs,
    })
}

fn cond_echo(s: &CondSample, cfg: &RegressionConfig, boot: &BootstrapConfig) -> serde_json::Value {
    json!({
        "dim": s.dim(),
        "regression": cfg,
        "bootstrap": boot,
    })
}

fn finish(
    mut report: TestReport,
    name: &str,
    s: &CondSample,
    boot: &BootstrapConfig,
    residuals: &ResidualSet,
) -> TestReport {
    report.test = name.into();
    report.n = s.n();
    report.seed = boot.seed;
    report.scheme = boot.scheme;
    report.warnings.extend(residuals.warnings.iter().cloned());
    report
}

/// KGCM test; a median-heuristic kernel is resolved on `Z`.
pub fn kgcm_test(
    s: &CondSample,
    cfg: &RegressionConfig,
    spec: &KernelSpec,
    boot: &BootstrapConfig,
) -> Result<TestReport> {
    boot.validate()?;
    let spec = spec.resolve(&s.z)?;
    let residuals = fit_residuals(s, cfg)?;
    let statistic = kgcm_coefficients(&residuals, &s.z)?.norm_sq(&spec)?;
    let replicates = wild_replicates(
        kgcm_wild_builder(&residuals, &s.z)?,
        boot.scheme,
        s.n(),
        boot.m,
        &spec,
        boot.seed,
    )?;
    let report = calibrate(statistic, replicates, boot.alpha)?;
    let mut report = finish(report, "kgcm", s, boot, &residuals);
    report.kernel = Some(spec);
    let mut echo = cond_echo(s, cfg, boot);
    echo["kernel"] = json!(spec);
    report.config_echo = echo;
    Ok(report)
}

/// Plain GCM: the KGCM with the constant kernel, `Ψ = (Σ ε̂_X ε̂_Y / √n)²`.
pub fn gcm_test(
    s: &CondSample,
    cfg: &RegressionConfig,
    boot: &BootstrapConfig,
) -> Result<TestReport> {
    let mut report = kgcm_test(s, cfg, &KernelSpec::constant(), boot)?;
    report.test = "gcm".into();
    Ok(report)
}

/// Fixed-weight wGCM calibrated on `maxⱼ |Sₙᵂ(ωⱼ)|`.
pub fn wgcm_test(
    s: &CondSample,
    cfg: &RegressionConfig,
    weight_fns: &[WeightFn],
    boot: &BootstrapConfig,
) -> Result<TestReport> {
    boot.validate()?;
    if weight_fns.is_empty() {
        return Err(invalid("wGCM needs at least one weight function"));
    }
    let residuals = fit_residuals(s, cfg)?;
    let statistic = wgcm_statistic(&residuals, &s.z, weight_fns)?.max_abs;
    let root_n = (s.n() as f64).sqrt();
    // weighted masses per weight function, precomputed once
    let masses: Vec<Vec<f64>> = weight_fns
        .iter()
        .map(|w| {
            s.z.iter()
                .zip(residuals.products())
                .map(|(z, p)| w(z) * p / root_n)
                .collect()
        })
        .collect();
    let replicates = bootstrap_statistics(
        |w| {
            Ok(masses
                .iter()
                .map(|m| m.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().abs())
                .fold(0.0, f64::max))
        },
        boot.scheme,
        s.n(),
        boot.m,
        boot.seed,
    )?;
    let report = calibrate(statistic, replicates, boot.alpha)?;
    let mut report = finish(report, "wgcm", s, boot, &residuals);
    let mut echo = cond_echo(s, cfg, boot);
    echo["weight_functions"] = json!(weight_fns.len());
    report.config_echo = echo;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{gen_weights, RngStream, WeightScheme};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    fn residual_set(eps_x: Vec<f64>, eps_y: Vec<f64>) -> ResidualSet {
        ResidualSet {
            eps_x,
            eps_y,
            a_f_hat: None,
            a_g_hat: None,
            rank: 0,
            columns: 0,
            warnings: vec![],
        }
    }

    #[test]
    fn design_degree_zero() {
        let z = Points::from_scalars(&[1.0, 2.0, 3.0]);
        let d = poly_design(&z, &RegressionConfig::new(0, false));
        assert_eq!(d, DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn design_scalar_degree_two() {
        let d = poly_design(&Points::from_scalars(&[2.0]), &RegressionConfig::new(2, false));
        assert_eq!(d.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn design_bivariate_with_interactions() {
        let (a, b) = (3.0, -2.0);
        let z = Points::new(2, vec![a, b]).unwrap();
        let d = poly_design(&z, &RegressionConfig::new(2, true));
        assert_eq!(
            d.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, a, b, a * a, a * b, b * b]
        );
        let pure = poly_design(&z, &RegressionConfig::new(2, false));
        assert_eq!(
            pure.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, a, b, a * a, b * b]
        );
        // monomials of total degree ≤ 3 in 3 variables: C(6, 3) = 20
        assert_eq!(monomials(3, &RegressionConfig::new(3, true)).len(), 20);
    }

    #[test]
    fn perfect_polynomial_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z: Vec<f64> = (0..40).map(|_| normal(&mut rng)).collect();
        let x: Vec<f64> = z.iter().map(|v| 1.5 - 2.0 * v + 0.25 * v * v).collect();
        let y: Vec<f64> = z.iter().map(|_| normal(&mut rng)).collect();
        let s = CondSample::new(x, y, Points::from_scalars(&z)).unwrap();
        let r = fit_residuals(&s, &RegressionConfig::new(2, true)).unwrap();
        assert!(r.eps_x.iter().all(|e| e.abs() <= 1e-9));
        assert!(r.warnings.is_empty());
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn saturated_fit_interpolates() {
        let s = CondSample::new(
            vec![1.0, -2.0, 0.5],
            vec![0.3, 0.1, 9.0],
            Points::from_scalars(&[0.0, 1.0, 2.5]),
        )
        .unwrap();
        let r = fit_residuals(&s, &RegressionConfig::new(3, false)).unwrap();
        assert!(r.eps_x.iter().chain(&r.eps_y).all(|e| e.abs() <= 1e-9));
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn rank_deficient_design_warns() {
        let s = CondSample::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 0.0, 1.0],
            Points::from_scalars(&[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        let r = fit_residuals(&s, &RegressionConfig::new(2, false)).unwrap();
        assert_eq!(r.rank, 1);
        assert!(r.warnings.iter().any(|w| w.contains("rank deficient")));
        // minimal-norm fit on a constant column is the mean
        assert!((r.eps_x.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_rejected() {
        let s = CondSample::new(vec![f64::NAN], vec![0.0], Points::from_scalars(&[0.0])).unwrap();
        assert!(fit_residuals(&s, &RegressionConfig::new(1, false)).is_err());
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 300;
        let z = Points::new(2, (0..2 * n).map(|_| normal(&mut rng)).collect()).unwrap();
        let x: Vec<f64> = z.iter().map(|t| t[0].sin() + normal(&mut rng)).collect();
        let y: Vec<f64> = z.iter().map(|t| t[1].powi(3) + normal(&mut rng)).collect();
        let s = CondSample::new(x, y, z).unwrap();
        let cfg = RegressionConfig::new(2, true);
        let r = fit_residuals(&s, &cfg).unwrap();
        let design = poly_design(s.z(), &cfg);
        for eps in [&r.eps_x, &r.eps_y] {
            let scale = eps.iter().map(|e| e.abs()).fold(0.0, f64::max);
            for col in design.column_iter() {
                let colmax = col.iter().map(|c| c.abs()).fold(0.0, f64::max);
                let ip: f64 = col.iter().zip(eps.iter()).map(|(c, e)| c * e).sum();
                assert!(ip.abs() <= 1e-8 * n as f64 * scale * colmax);
            }
        }
    }

    #[test]
    fn zero_residuals_give_zero_statistic() {
        let z = Points::from_scalars(&[0.0, 1.0, 2.0]);
        let r = residual_set(vec![0.0; 3], vec![1.0, 2.0, 3.0]);
        let f = kgcm_coefficients(&r, &z).unwrap();
        assert_eq!(f.norm_sq(&KernelSpec::squared_exponential(1.0)).unwrap(), 0.0);
        assert!(kgcm_coefficients(&residual_set(vec![0.0; 2], vec![0.0; 2]), &z).is_err());
    }

    #[test]
    fn constant_kernel_equals_plain_gcm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = 25;
            let z = Points::from_scalars(&(0..n).map(|_| normal(&mut rng)).collect::<Vec<_>>());
            let ex: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
            let ey: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
            let gcm = ex.iter().zip(&ey).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            let r = residual_set(ex, ey);
            let psi = kgcm_coefficients(&r, &z).unwrap().norm_sq(&KernelSpec::constant()).unwrap();
            let oracle = n as f64 * gcm * gcm;
            assert!((psi - oracle).abs() <= 1e-10 * oracle.max(1e-12));
        }
    }

    #[test]
    fn kgcm_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10;
        let z = Points::new(2, (0..2 * n).map(|_| normal(&mut rng)).collect()).unwrap();
        let ex: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let ey: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let spec = KernelSpec::squared_exponential(0.4);
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                oracle += ex[i] * ey[i] * ex[j] * ey[j] * spec.eval(z.get(i), z.get(j));
            }
        }
        oracle /= n as f64;
        let psi = kgcm_coefficients(&residual_set(ex, ey), &z).unwrap().norm_sq(&spec).unwrap();
        assert!((psi - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn wild_builder_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 60;
        let z = Points::from_scalars(&(0..n).map(|_| normal(&mut rng)).collect::<Vec<_>>());
        let ex: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let ey: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let r = residual_set(ex.clone(), ey.clone());
        let b = kgcm_wild_builder(&r, &z).unwrap();
        assert_eq!(b(&vec![1.0; n]).unwrap(), kgcm_coefficients(&r, &z).unwrap());
        assert!(b(&[1.0]).is_err());

        let spec = KernelSpec::squared_exponential(1.0);
        let z1 = z.get(0).to_vec();
        let omega = |t: &[f64]| spec.eval(t, &z1);
        let draws = 5000;
        let vals: Vec<f64> = (0..draws)
            .map(|k| {
                let w = gen_weights(WeightScheme::Rademacher, n, &RngStream::new(3, k));
                let f = b(&w).unwrap();
                assert_eq!(f.points(), &z);
                f.apply(omega)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let expected: f64 = (0..n)
            .map(|i| omega(z.get(i)).powi(2) * ex[i].powi(2) * ey[i].powi(2))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() <= 3.0 * (expected / draws as f64).sqrt());
        assert!((var - expected).abs() <= 0.05 * expected, "{var} vs {expected}");
    }

    #[test]
    fn wgcm_constant_weight_is_gcm_numerator() {
        let z = Points::from_scalars(&[-1.0, 0.5, 2.0, 3.0]);
        let r = residual_set(vec![1.0, -2.0, 0.5, 1.0], vec![0.5, 0.5, -1.0, 2.0]);
        let w: Vec<WeightFn> = vec![Box::new(|_: &[f64]| 1.0)];
        let st = wgcm_statistic(&r, &z, &w).unwrap();
        let products = [0.5, -1.0, -0.5, 2.0];
        let expected = 2.0 * (products.iter().sum::<f64>() / 4.0);
        assert!((st.per_weight[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn wgcm_sign_weight_on_symmetric_products() {
        let z = Points::from_scalars(&[-2.0, -1.0, 1.0, 2.0]);
        let r = residual_set(vec![1.0, 2.0, 2.0, 1.0], vec![0.5, 1.0, 1.0, 0.5]);
        let st = wgcm_statistic(&r, &z, &default_wgcm_weights(1)).unwrap();
        assert!(st.per_weight[0].abs() < 1e-15);
        assert_eq!(st.max_abs, 0.0);
    }

    #[test]
    fn wgcm_bivariate_hand_triple() {
        let z = Points::new(2, vec![1.0, -1.0, -2.0, 3.0, 0.5, 0.5]).unwrap();
        // products: 2, -1, 0.5
        let r = residual_set(vec![2.0, 1.0, 1.0], vec![1.0, -1.0, 0.5]);
        let st = wgcm_statistic(&r, &z, &default_wgcm_weights(2)).unwrap();
        let k = 1.0 / 3f64.sqrt();
        let expected = [k * 1.5, k * (2.0 + 1.0 + 0.5), k * (-2.0 - 1.0 + 0.5)];
        for (a, b) in st.per_weight.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((st.max_abs - k * 3.5).abs() < 1e-15);
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 80;
        let zs: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let x: Vec<f64> = zs.iter().map(|z| z + normal(&mut rng)).collect();
        let y: Vec<f64> = zs.iter().map(|z| z * z + normal(&mut rng)).collect();
        let s = CondSample::new(x, y, Points::from_scalars(&zs)).unwrap();
        let cfg = RegressionConfig::default_for_dim(1);
        let spec = KernelSpec::squared_exponential(1.0);
        let boot = BootstrapConfig::new(99, 0.05, 5);
        let a = kgcm_test(&s, &cfg, &spec, &boot).unwrap();
        let b = kgcm_test(&s.scale_x(3.0), &cfg, &spec, &boot).unwrap();
        assert!((b.statistic - 9.0 * a.statistic).abs() <= 1e-9 * b.statistic);
        assert_eq!(a.reject, b.reject);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn tests_run_end_to_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 60;
        let z = Points::new(2, (0..2 * n).map(|_| normal(&mut rng)).collect()).unwrap();
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let s = CondSample::new(x, y, z).unwrap();
        let cfg = RegressionConfig::default_for_dim(2);
        let boot = BootstrapConfig::new(50, 0.05, 1);
        let g = gcm_test(&s, &cfg, &boot).unwrap();
        assert_eq!(g.test, "gcm");
        let w = wgcm_test(&s, &cfg, &default_wgcm_weights(2), &boot).unwrap();
        assert_eq!(w.test, "wgcm");
        assert_eq!(w.replicates.len(), 50);
        let k = kgcm_test(
            &s,
            &cfg,
            &KernelSpec::median_heuristic(crate::kernels::KernelFamily::SquaredExponential),
            &boot,
        )
        .unwrap();
        assert!(k.kernel.unwrap().lengthscale_sq > 0.0);
    }
}
