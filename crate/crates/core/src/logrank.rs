//! Kernel log-rank test for right-censored two-group data.
//!
//! With `L(t) = Y₀(t)Y₁(t)/Y(t)` the statistic is
//! `S(ω) = √(n/(n₀n₁)) Σ_events ω(Xᵢ) L(Xᵢ) sᵢ / Y_{gᵢ}(Xᵢ)`, `sᵢ = ±1` by
//! group. At-risk counts use the closed inequality `Xⱼ ≥ t`, so censorings
//! tied with an event time are still at risk at that time.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bootstrap::{calibrate, wild_replicates, BootstrapConfig, TestReport};
use crate::error::{invalid, Error, Result};
use crate::functional::PointMassFunctional;
use crate::kernels::KernelSpec;
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredObs {
    pub time: f64,
    pub event: bool,
    pub group: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    obs: Vec<CensoredObs>,
    n0: usize,
    n1: usize,
}

impl CensoredSample {
    pub fn new(obs: Vec<CensoredObs>) -> Result<Self> {
        for (i, o) in obs.iter().enumerate() {
            if !(o.time.is_finite() && o.time >= 0.0) {
                return Err(invalid(format!(
                    "observation {i}: time must be finite and non-negative, got {}",
                    o.time
                )));
            }
            if o.group > 1 {
                return Err(invalid(format!(
                    "observation {i}: group must be 0 or 1, got {}",
                    o.group
                )));
            }
        }
        let n1 = obs.iter().filter(|o| o.group == 1).count();
        let n0 = obs.len() - n1;
        if n0 == 0 || n1 == 0 {
            return Err(invalid(format!(
                "both groups need at least one subject (got {n0} and {n1})"
            )));
        }
        Ok(Self { obs, n0, n1 })
    }

    pub fn obs(&self) -> &[CensoredObs] {
        &self.obs
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn n_events(&self) -> usize {
        self.obs.iter().filter(|o| o.event).count()
    }

    pub fn times(&self) -> Points {
        Points::from_scalars(&self.obs.iter().map(|o| o.time).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSnapshot {
    pub t: f64,
    pub y0: usize,
    pub y1: usize,
    pub y: usize,
}

pub fn at_risk(s: &CensoredSample, t: f64) -> RiskSnapshot {
    let mut y = [0usize; 2];
    for o in &s.obs {
        if o.time >= t {
            y[o.group as usize] += 1;
        }
    }
    RiskSnapshot {
        t,
        y0: y[0],
        y1: y[1],
        y: y[0] + y[1],
    }
}

/// Sorted per-group times for O(log n) at-risk queries.
struct RiskTable {
    sorted: [Vec<f64>; 2],
}

impl RiskTable {
    fn new(s: &CensoredSample) -> Self {
        let mut sorted = [Vec::new(), Vec::new()];
        for o in &s.obs {
            sorted[o.group as usize].push(o.time);
        }
        for v in &mut sorted {
            v.sort_by(f64::total_cmp);
        }
        Self { sorted }
    }

    fn at(&self, t: f64) -> RiskSnapshot {
        let count = |v: &Vec<f64>| v.len() - v.partition_point(|&x| x < t);
        let (y0, y1) = (count(&self.sorted[0]), count(&self.sorted[1]));
        RiskSnapshot {
            t,
            y0,
            y1,
            y: y0 + y1,
        }
    }
}

/// Event point masses together with the subject each one belongs to.
#[derive(Debug, Clone)]
pub struct LogrankTerms {
    pub functional: PointMassFunctional,
    pub subject: Vec<usize>,
}

pub fn logrank_terms(s: &CensoredSample) -> LogrankTerms {
    let table = RiskTable::new(s);
    let scale = (s.n() as f64 / (s.n0 as f64 * s.n1 as f64)).sqrt();
    let mut times = Vec::new();
    let mut coeffs = Vec::new();
    let mut subject = Vec::new();
    for (i, o) in s.obs.iter().enumerate().filter(|(_, o)| o.event) {
        let r = table.at(o.time);
        // the subject is at risk at its own time, so Y_g ≥ 1 and Y ≥ 1
        let l = (r.y0 * r.y1) as f64 / r.y as f64;
        let (own, sign) = if o.group == 0 { (r.y0, 1.0) } else { (r.y1, -1.0) };
        times.push(o.time);
        coeffs.push(scale * l * sign / own as f64);
        subject.push(i);
    }
    let functional =
        PointMassFunctional::new(Arc::new(Points::from_scalars(&times)), coeffs, "logrank")
            .expect("finite coefficients");
    LogrankTerms {
        functional,
        subject,
    }
}

/// One point per observed event, in observation order.
pub fn logrank_coefficients(s: &CensoredSample) -> PointMassFunctional {
    logrank_terms(s).functional
}

/// Builder of bootstrap functionals, one weight per subject. Each event
/// coefficient is multiplied by its subject's weight; at-risk counts stay fixed.
pub fn logrank_wild_builder(
    s: &CensoredSample,
) -> impl Fn(&[f64]) -> Result<PointMassFunctional> + Sync {
    let terms = logrank_terms(s);
    let n = s.n();
    move |w: &[f64]| {
        if w.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: w.len(),
            });
        }
        let coeffs = terms
            .functional
            .coeffs()
            .iter()
            .zip(&terms.subject)
            .map(|(c, &i)| c * w[i])
            .collect();
        terms.functional.with_coeffs(coeffs)
    }
}

/// Pooled Kaplan–Meier distribution estimate `F̂(t) = 1 - Π_{u ≤ t}(1 - d(u)/Y(u))`
/// evaluated at each event time, ascending.
pub fn kaplan_meier(s: &CensoredSample) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = s.obs.iter().map(|o| o.time).collect();
    times.sort_by(f64::total_cmp);
    let mut events: Vec<f64> = s.obs.iter().filter(|o| o.event).map(|o| o.time).collect();
    events.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut surv = 1.0;
    let mut k = 0;
    while k < events.len() {
        let t = events[k];
        let d = events[k..].iter().take_while(|&&u| u == t).count();
        let y = times.len() - times.partition_point(|&x| x < t);
        surv *= 1.0 - d as f64 / y as f64;
        out.push((t, 1.0 - surv));
        k += d;
    }
    out
}

/// Replaces each time by the pooled Kaplan–Meier estimate `F̂(time) ∈ [0, 1]`.
pub fn km_transform(s: &CensoredSample) -> CensoredSample {
    let steps = kaplan_meier(s);
    let f_hat = |t: f64| {
        let k = steps.partition_point(|&(u, _)| u <= t);
        if k == 0 {
            0.0
        } else {
            steps[k - 1].1
        }
    };
    CensoredSample {
        obs: s
            .obs
            .iter()
            .map(|o| CensoredObs {
                time: f_hat(o.time),
                ..*o
            })
            .collect(),
        n0: s.n0,
        n1: s.n1,
    }
}

/// Kernel log-rank test. The median heuristic, when requested, is taken over
/// all observed (possibly transformed) times.
pub fn logrank_test(
    s: &CensoredSample,
    spec: &KernelSpec,
    boot: &BootstrapConfig,
    use_km_transform: bool,
) -> Result<TestReport> {
    boot.validate()?;
    let transformed;
    let data = if use_km_transform {
        transformed = km_transform(s);
        &transformed
    } else {
        s
    };
    let mut warnings = Vec::new();
    let spec = match spec.resolve(&data.times()) {
        Ok(spec) => spec,
        Err(_) if data.n_events() == 0 => {
            warnings.push("no events observed; the statistic is identically zero".to_string());
            KernelSpec {
                lengthscale_sq: 1.0,
                ..*spec
            }
        }
        Err(e) => return Err(e),
    };
    let statistic = logrank_coefficients(data).norm_sq(&spec)?;
    let replicates = wild_replicates(
        logrank_wild_builder(data),
        boot.scheme,
        data.n(),
        boot.m,
        &spec,
        boot.seed,
    )?;
    let mut report = calibrate(statistic, replicates, boot.alpha)?;
    report.test = "logrank".into();
    report.n = s.n();
    report.seed = boot.seed;
    report.scheme = boot.scheme;
    report.kernel = Some(spec);
    report.warnings = warnings;
    report.config_echo = json!({
        "n0": s.n0(),
        "n1": s.n1(),
        "events": s.n_events(),
        "km_transform": use_km_transform,
        "kernel": spec,
        "bootstrap": boot,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{gen_weights, RngStream, WeightScheme};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(time: f64, event: bool, group: u8) -> CensoredObs {
        CensoredObs { time, event, group }
    }

    fn random_sample(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> CensoredSample {
        let mut o: Vec<CensoredObs> = (0..n)
            .map(|i| {
                let t: f64 = rng.random_range(0.0..3.0);
                obs(
                    if ties { (t * 4.0).round() / 4.0 } else { t },
                    rng.random_bool(0.7),
                    (i % 2) as u8,
                )
            })
            .collect();
        o[0].event = true;
        CensoredSample::new(o).unwrap()
    }

    /// Textbook observed-minus-expected numerator for group 0, accumulated
    /// over distinct event times.
    fn classical_numerator(s: &CensoredSample) -> f64 {
        let mut times: Vec<f64> = s.obs().iter().filter(|o| o.event).map(|o| o.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut total = 0.0;
        for t in times {
            let d0 = s.obs().iter().filter(|o| o.event && o.time == t && o.group == 0).count();
            let d = s.obs().iter().filter(|o| o.event && o.time == t).count();
            let y0 = s.obs().iter().filter(|o| o.time >= t && o.group == 0).count();
            let y = s.obs().iter().filter(|o| o.time >= t).count();
            total += d0 as f64 - d as f64 * y0 as f64 / y as f64;
        }
        total
    }

    #[test]
    fn validation() {
        assert!(CensoredSample::new(vec![obs(1.0, true, 0)]).is_err());
        assert!(CensoredSample::new(vec![obs(-1.0, true, 0), obs(1.0, true, 1)]).is_err());
        assert!(CensoredSample::new(vec![obs(1.0, true, 2), obs(1.0, true, 1)]).is_err());
    }

    #[test]
    fn at_risk_counts() {
        let s = CensoredSample::new(vec![
            obs(1.0, true, 0),
            obs(2.0, false, 0),
            obs(3.0, true, 0),
            obs(0.5, true, 1),
        ])
        .unwrap();
        let r0 = at_risk(&s, 0.0);
        assert_eq!((r0.y0, r0.y1), (3, 1));
        assert_eq!(at_risk(&s, 10.0).y, 0);
        let r2 = at_risk(&s, 2.0);
        assert_eq!((r2.y0, r2.y1), (2, 0));
        let table = RiskTable::new(&s);
        for t in [0.0, 0.5, 0.7, 1.0, 2.0, 2.5, 3.0, 3.1] {
            assert_eq!(table.at(t), at_risk(&s, t));
        }
    }

    #[test]
    fn all_censored_is_empty() {
        let s = CensoredSample::new(vec![obs(1.0, false, 0), obs(2.0, false, 1)]).unwrap();
        let f = logrank_coefficients(&s);
        assert!(f.is_empty());
        assert_eq!(f.norm_sq(&KernelSpec::squared_exponential(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn two_subject_hand_example() {
        let (t0, t1) = (0.8, 1.9);
        let s = CensoredSample::new(vec![obs(t0, true, 0), obs(t1, true, 1)]).unwrap();
        let f = logrank_coefficients(&s);
        assert!((f.coeffs()[0] - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(f.coeffs()[1], 0.0);
        let spec = KernelSpec::squared_exponential(0.3);
        let psi = f.norm_sq(&spec).unwrap();
        assert!((psi - 0.5 * spec.eval(&[t0], &[t0])).abs() < 1e-12);
    }

    #[test]
    fn constant_kernel_reduces_to_classical_logrank() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for ties in [false, true] {
            for _ in 0..5 {
                let s = random_sample(&mut rng, 40, ties);
                let f = logrank_coefficients(&s);
                let scale = (s.n() as f64 / (s.n0() as f64 * s.n1() as f64)).sqrt();
                let oracle = scale * classical_numerator(&s);
                let sum: f64 = f.coeffs().iter().sum();
                assert!((sum - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
                let psi = f.norm_sq(&KernelSpec::constant()).unwrap();
                assert!((psi - oracle * oracle).abs() <= 1e-10 * (oracle * oracle).max(1.0));
            }
        }
    }

    #[test]
    fn tied_events_merge_without_changing_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sample(&mut rng, 60, true);
        let f = logrank_coefficients(&s);
        let merged = f.consolidate();
        assert!(merged.len() < f.len());
        let spec = KernelSpec::squared_exponential(0.5);
        let a = f.norm_sq(&spec).unwrap();
        let b = merged.norm_sq(&spec).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1e-12));
    }

    #[test]
    fn events_after_opposite_group_exhausted_are_zero() {
        let s = CensoredSample::new(vec![
            obs(1.0, true, 0),
            obs(2.0, true, 1),
            obs(5.0, true, 0),
            obs(6.0, true, 0),
        ])
        .unwrap();
        let f = logrank_coefficients(&s);
        assert_eq!(&f.coeffs()[2..], &[0.0, 0.0]);
        assert!(f.coeffs().iter().all(|c| c.is_finite()));
    }

    #[test]
    fn builder_identity_and_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_sample(&mut rng, 25, false);
        let b = logrank_wild_builder(&s);
        assert_eq!(b(&[1.0; 25]).unwrap(), logrank_coefficients(&s));
        let spec = KernelSpec::squared_exponential(1.0);
        assert_eq!(b(&[0.0; 25]).unwrap().norm_sq(&spec).unwrap(), 0.0);
        assert!(matches!(b(&[1.0; 3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn wild_second_moment_matches_event_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s = random_sample(&mut rng, 50, false);
        let omega = |t: &[f64]| (1.7 * t[0]).cos() + 0.3;
        let b = logrank_wild_builder(&s);
        let draws = 5000;
        let second: f64 = (0..draws)
            .map(|k| {
                let w = gen_weights(WeightScheme::Rademacher, s.n(), &RngStream::new(77, k));
                b(&w).unwrap().apply(omega).powi(2)
            })
            .sum::<f64>()
            / draws as f64;
        let scale = s.n() as f64 / (s.n0() as f64 * s.n1() as f64);
        let expected: f64 = s
            .obs()
            .iter()
            .filter(|o| o.event)
            .map(|o| {
                let r = at_risk(&s, o.time);
                let l = (r.y0 * r.y1) as f64 / r.y as f64;
                let own = if o.group == 0 { r.y0 } else { r.y1 } as f64;
                scale * omega(&[o.time]).powi(2) * l * l / (own * own)
            })
            .sum();
        assert!((second - expected).abs() <= 0.05 * expected, "{second} vs {expected}");
    }

    #[test]
    fn km_no_events() {
        let s = CensoredSample::new(vec![obs(1.0, false, 0), obs(2.0, false, 1)]).unwrap();
        assert!(km_transform(&s).obs().iter().all(|o| o.time == 0.0));
    }

    #[test]
    fn km_two_uncensored() {
        let s = CensoredSample::new(vec![obs(2.0, true, 1), obs(1.0, true, 0)]).unwrap();
        let t = km_transform(&s);
        assert_eq!(t.obs()[1].time, 0.5);
        assert_eq!(t.obs()[0].time, 1.0);
        assert_eq!(t.obs()[0].group, 1);
        assert!(t.obs()[0].event);
    }

    #[test]
    fn km_preserves_order_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = random_sample(&mut rng, 80, false);
        let t = km_transform(&s);
        for (a, ta) in s.obs().iter().zip(t.obs()) {
            assert!((0.0..=1.0).contains(&ta.time));
            for (b, tb) in s.obs().iter().zip(t.obs()) {
                if a.time <= b.time {
                    assert!(ta.time <= tb.time);
                }
                if a.event && b.event && a.time < b.time {
                    assert!(ta.time < tb.time);
                }
            }
        }
    }

    #[test]
    fn zero_event_test_does_not_reject() {
        let s = CensoredSample::new(vec![
            obs(1.0, false, 0),
            obs(2.0, false, 1),
            obs(2.0, false, 1),
        ])
        .unwrap();
        let spec = KernelSpec::squared_exponential(1.0);
        let r = logrank_test(&s, &spec, &BootstrapConfig::new(20, 0.05, 1), false).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        let med = KernelSpec::median_heuristic(crate::kernels::KernelFamily::SquaredExponential);
        let r = logrank_test(&s, &med, &BootstrapConfig::new(20, 0.05, 1), true).unwrap();
        assert!(!r.reject);
        assert_eq!(r.warnings.len(), 1);
    }
}
