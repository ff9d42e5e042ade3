//! The collision-based uniformity and closeness testers.
//!
//! Uniformity: with `s` the self-collision count of `m` samples, answer NO iff
//! `s >= C(m,2) (1 + 3 eps^2 / 4) / n`. With `m >= 3200 sqrt(n) / eps^2` this
//! separates `||p - U_n||_2^2 <= eps^2 / (2n)` from `>= eps^2 / n` with
//! probability at least 3/4.
//!
//! Closeness: with `Z = C1 + C2 - (m-1)/m C3`, answer NO iff
//! `Z >= C(m,2) eps^2 / 2`. Under the promise `max(||p||_2^2, ||q||_2^2) <= b`,
//! `m >= c sqrt(b) / eps^2` samples separate `||p - q||_2 <= eps/2` from
//! `>= eps`.
//!
//! Deriving the closeness constant: Chebyshev with the variance bound
//! `116 m^2 b + 16 m^3 ||p-q||_4^2 sqrt(b)` and `||p-q||_4 <= ||p-q||_2`
//! gives an error probability of at most `32768 b / (m^2 eps^4) + 4096 sqrt(b) / (m eps^2)`.
//! At `m = c sqrt(b) / eps^2` that is `32768 / c^2 + 4096 / c`. We default to
//! `c = 32768`, where the two terms total about `0.125`, comfortably inside
//! the 1/4 error budget (the bound reaches 1/4 near `c = 16384`).

use rand::Rng;
use rand_distr::{Distribution as _, Poisson};
use serde::{Deserialize, Serialize};

use crate::dist::{AliasTable, Distribution, Histogram};
use crate::error::{Error, Result};
use crate::moments::{closeness_statistic, self_collisions};
use crate::numeric::{ceil_count, fsum, pairs};

pub const UNIFORMITY_CONSTANT: f64 = 3200.0;
pub const CLOSENESS_CONSTANT: f64 = 32768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    Yes,
    No,
}

/// A tester's answer together with what it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
    pub m: u64,
    pub n: usize,
    pub epsilon: f64,
    pub seed: Option<u64>,
}

impl Verdict {
    fn decide(statistic: f64, threshold: f64, m: u64, n: usize, epsilon: f64) -> Self {
        let decision = if statistic >= threshold {
            Decision::No
        } else {
            Decision::Yes
        };
        Self {
            decision,
            statistic,
            threshold,
            m,
            n,
            epsilon,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Parameters of a test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub epsilon: f64,
    pub n: usize,
    pub b: Option<f64>,
    pub constant_override: Option<f64>,
}

impl TesterConfig {
    pub fn uniformity(n: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            epsilon,
            n,
            b: None,
            constant_override: None,
        })
    }

    pub fn closeness(n: usize, epsilon: f64, b: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_b(b)?;
        Ok(Self {
            epsilon,
            n,
            b: Some(b),
            constant_override: None,
        })
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant_override = Some(c);
        self
    }

    pub fn uniformity_samples(&self) -> Result<u64> {
        uniformity_samples_with(
            self.n,
            self.epsilon,
            self.constant_override.unwrap_or(UNIFORMITY_CONSTANT),
        )
    }

    pub fn closeness_samples(&self) -> Result<u64> {
        let b = self
            .b
            .ok_or_else(|| Error::InvalidParameter("closeness needs the norm promise b".into()))?;
        closeness_samples_with(
            b,
            self.epsilon,
            self.constant_override.unwrap_or(CLOSENESS_CONSTANT),
        )
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1], got {eps}"
        )));
    }
    Ok(())
}

fn check_b(b: f64) -> Result<()> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidParameter(format!("b must lie in (0, 1], got {b}")));
    }
    Ok(())
}

fn check_constant(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample-size constant must be positive, got {c}"
        )));
    }
    Ok(())
}

/// `ceil(3200 sqrt(n) / eps^2)`.
pub fn required_samples_uniformity(n: usize, eps: f64) -> Result<u64> {
    uniformity_samples_with(n, eps, UNIFORMITY_CONSTANT)
}

pub fn uniformity_samples_with(n: usize, eps: f64, constant: f64) -> Result<u64> {
    check_epsilon(eps)?;
    check_constant(constant)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    Ok(ceil_count(constant * (n as f64).sqrt() / (eps * eps)).max(2))
}

/// `ceil(32768 sqrt(b) / eps^2)`.
pub fn required_samples_closeness(b: f64, eps: f64) -> Result<u64> {
    closeness_samples_with(b, eps, CLOSENESS_CONSTANT)
}

pub fn closeness_samples_with(b: f64, eps: f64, constant: f64) -> Result<u64> {
    check_epsilon(eps)?;
    check_b(b)?;
    check_constant(constant)?;
    Ok(ceil_count(constant * b.sqrt() / (eps * eps)).max(2))
}

/// `C(m,2) (1 + 3 eps^2 / 4) / n`.
pub fn uniformity_threshold(m: u64, n: usize, eps: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
    }
    Ok(pairs(m) * (1.0 + 0.75 * eps * eps) / n as f64)
}

/// `C(m,2) eps^2 / 2`.
pub fn closeness_threshold(m: u64, eps: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
    }
    Ok(pairs(m) * eps * eps / 2.0)
}

pub fn test_uniformity(h: &Histogram, n: usize, eps: f64) -> Result<Verdict> {
    check_epsilon(eps)?;
    if h.n() != n {
        return Err(Error::DomainMismatch { left: h.n(), right: n });
    }
    let threshold = uniformity_threshold(h.m(), n, eps)?;
    let s = self_collisions(h)? as f64;
    Ok(Verdict::decide(s, threshold, h.m(), n, eps))
}

pub fn test_closeness(hp: &Histogram, hq: &Histogram, eps: f64) -> Result<Verdict> {
    check_epsilon(eps)?;
    let z = closeness_statistic(hp, hq)?;
    let threshold = closeness_threshold(hp.m(), eps)?;
    Ok(Verdict::decide(z, threshold, hp.m(), hp.n(), eps))
}

/// `2 s / (m (m - 1))`, an unbiased estimate of `||p||_2^2`.
///
/// Plugging this in for `b` is outside the closeness guarantee, which assumes
/// `b` is known in advance.
pub fn estimate_collision_probability(h: &Histogram) -> Result<f64> {
    if h.m() < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {}", h.m())));
    }
    Ok(self_collisions(h)? as f64 / pairs(h.m()))
}

/// `sum_i (X_i - m/n)^2 - X_i`.
///
/// Without Poissonization this equals `2 s - m^2 / n` exactly: expanding,
/// `sum_i X_i^2 - X_i = sum_i X_i (X_i - 1) = 2 s` and the cross terms give
/// `-2 m^2/n + m^2/n`.
pub fn chi_squared_statistic(h: &Histogram, n: usize) -> Result<f64> {
    if h.n() != n {
        return Err(Error::DomainMismatch { left: h.n(), right: n });
    }
    if h.m() < 1 {
        return Err(Error::InvalidParameter("need m >= 1".into()));
    }
    let expected = h.m() as f64 / n as f64;
    Ok(fsum(h.counts().iter().map(|&x| {
        let x = x as f64;
        (x - expected) * (x - expected) - x
    })))
}

/// Draws `M ~ Poisson(rate)`, then `M` samples, and returns their
/// self-collision count.
pub fn poissonized_collision_trial<R: Rng + ?Sized>(
    table: &AliasTable,
    rate: f64,
    rng: &mut R,
) -> Result<u64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Poisson rate must be positive, got {rate}"
        )));
    }
    let poisson =
        Poisson::new(rate).map_err(|e| Error::InvalidParameter(format!("Poisson({rate}): {e}")))?;
    let count = poisson.sample(rng) as u64;
    self_collisions(&table.sample_histogram(count, rng))
}

/// Seeded convenience form of [`poissonized_collision_trial`].
pub fn poissonized_collision_trial_seeded(p: &Distribution, rate: f64, seed: u64) -> Result<u64> {
    let table = AliasTable::new(p);
    poissonized_collision_trial(&table, rate, &mut crate::dist::seeded_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{histogram, make_family, seeded_rng, Family, SampleSet};
    use proptest::prelude::*;

    fn h(counts: &[u64]) -> Histogram {
        Histogram::from_counts(counts.to_vec()).unwrap()
    }

    #[test]
    fn uniformity_sample_sizes() {
        assert_eq!(required_samples_uniformity(100, 0.5).unwrap(), 128_000);
        assert_eq!(required_samples_uniformity(4, 1.0).unwrap(), 6400);
        let raw = |eps: f64| 3200.0 * (37f64).sqrt() / (eps * eps);
        assert!((raw(0.15) / raw(0.3) - 4.0).abs() < 1e-12);
        assert!(required_samples_uniformity(100, 0.0).is_err());
        assert!(required_samples_uniformity(100, 1.5).is_err());
        assert!(required_samples_uniformity(1, 0.5).is_err());
        let cfg = TesterConfig::uniformity(100, 0.5).unwrap().with_constant(6.0);
        assert_eq!(cfg.uniformity_samples().unwrap(), 240);
    }

    #[test]
    fn closeness_sample_sizes() {
        assert_eq!(required_samples_closeness(1.0, 1.0).unwrap(), 32768);
        assert_eq!(required_samples_closeness(0.01, 0.5).unwrap(), 13108);
        let a = closeness_samples_with(0.01, 0.3, 100.0).unwrap();
        let b = closeness_samples_with(0.04, 0.3, 100.0).unwrap();
        assert!(b == 2 * a || b + 1 == 2 * a);
        assert!(required_samples_closeness(0.0, 0.5).is_err());
        assert!(required_samples_closeness(1.2, 0.5).is_err());
        assert!(required_samples_closeness(0.5, 0.0).is_err());
        assert!(TesterConfig::uniformity(10, 0.5).unwrap().closeness_samples().is_err());
    }

    #[test]
    fn derived_closeness_constant_meets_quarter_error() {
        let c = CLOSENESS_CONSTANT;
        let bound = |c: f64| 32768.0 / (c * c) + 4096.0 / c;
        assert!(bound(c) <= 0.25, "bound {}", bound(c));
        assert!(bound(c / 2.0) > 0.25);
    }

    #[test]
    fn uniformity_thresholds() {
        assert!((uniformity_threshold(4, 10, 1.0).unwrap() - 1.05).abs() < 1e-15);
        assert!((uniformity_threshold(2, 2, 1.0).unwrap() - 0.875).abs() < 1e-15);
        let null = pairs(50) / 20.0;
        assert!((uniformity_threshold(50, 20, 1e-9).unwrap() - null).abs() < 1e-12);
        assert!(uniformity_threshold(1, 2, 0.5).is_err());
    }

    #[test]
    fn uniformity_verdicts() {
        let m = required_samples_uniformity(100, 0.5).unwrap();
        let mut counts = vec![0; 100];
        counts[0] = m;
        assert_eq!(test_uniformity(&h(&counts), 100, 0.5).unwrap().decision, Decision::No);
        let distinct = vec![1; 100];
        assert_eq!(test_uniformity(&h(&distinct), 100, 0.5).unwrap().decision, Decision::Yes);
        assert!(test_uniformity(&h(&[1, 0]), 2, 0.5).is_err());
        assert!(test_uniformity(&h(&[1, 1]), 3, 0.5).is_err());
    }

    #[test]
    fn ties_answer_no() {
        // m = 8, n = 7, eps = 1: t = 28 * 1.75 / 7 = 7 exactly; s = 6 + 1.
        let hist = h(&[4, 2, 1, 1, 0, 0, 0]);
        let v = test_uniformity(&hist, 7, 1.0).unwrap();
        assert_eq!((v.statistic, v.threshold), (7.0, 7.0));
        assert_eq!(v.decision, Decision::No);

        // m = 4, eps = 1/2: t = 6/4 * 1/2 = 0.75; Z = 3 + 0 - 3/4 * 3.
        let v = test_closeness(&h(&[3, 1, 0, 0, 0]), &h(&[1, 0, 1, 1, 1]), 0.5).unwrap();
        assert_eq!((v.statistic, v.threshold), (0.75, 0.75));
        assert_eq!(v.decision, Decision::No);
    }

    #[test]
    fn closeness_verdicts() {
        let v = test_closeness(&h(&[1, 1]), &h(&[1, 1]), 0.5).unwrap();
        assert_eq!(v.statistic, -1.0);
        assert_eq!(v.decision, Decision::Yes);
        for m in [2u64, 10, 1000] {
            let v = test_closeness(&h(&[m, 0]), &h(&[0, m]), 1.0).unwrap();
            assert_eq!(v.statistic, 2.0 * pairs(m));
            assert_eq!(v.decision, Decision::No);
        }
        assert!(test_closeness(&h(&[2, 0]), &h(&[1, 0]), 0.5).is_err());
    }

    #[test]
    fn verdict_json_fields() {
        let v = test_uniformity(&h(&[4, 0]), 2, 0.5).unwrap().with_seed(7);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["decision"], "NO");
        for key in ["statistic", "threshold", "m", "n", "epsilon", "seed"] {
            assert!(json.get(key).is_some());
        }
    }

    #[test]
    fn chi_squared_examples() {
        let x = chi_squared_statistic(&h(&[3, 3, 3, 3]), 4).unwrap();
        assert_eq!(x, -12.0);
        assert_eq!(chi_squared_statistic(&h(&[2, 0]), 2).unwrap(), 0.0);
        assert_eq!(chi_squared_statistic(&h(&[1, 1]), 2).unwrap(), -2.0);
    }

    #[test]
    fn poissonized_trial_is_deterministic() {
        let p = make_family(Family::Zipf, 20, 1.0).unwrap();
        let a = poissonized_collision_trial_seeded(&p, 300.0, 5).unwrap();
        assert_eq!(a, poissonized_collision_trial_seeded(&p, 300.0, 5).unwrap());
        assert!(poissonized_collision_trial_seeded(&p, 0.0, 5).is_err());
    }

    #[test]
    fn poissonized_point_mass_matches_direct_poisson() {
        // On a point mass s = C(M, 2) with M ~ Poi(rate); Var = rate^3 + rate^2 / 2.
        let rate = 40.0f64;
        let p = make_family(Family::PointMass, 3, 0.0).unwrap();
        let table = AliasTable::new(&p);
        let trials = 20_000;
        let mut rng = seeded_rng(99, 0);
        let xs: Vec<f64> = (0..trials)
            .map(|_| poissonized_collision_trial(&table, rate, &mut rng).unwrap() as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / trials as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / trials as f64;
        let se = ((m4 - var * var) / trials as f64).sqrt();
        let expected = rate.powi(3) + rate * rate / 2.0;
        assert!((mean - rate * rate / 2.0).abs() < 5.0 * (var / trials as f64).sqrt());
        assert!((var - expected).abs() < 5.0 * se, "var {var} expected {expected} se {se}");
    }

    proptest! {
        #[test]
        fn chi_squared_equals_twice_collisions_minus_m2_over_n(
            counts in prop::collection::vec(0u64..30, 1..40),
        ) {
            let mut counts = counts;
            counts[0] += 1;
            let hist = h(&counts);
            let n = counts.len();
            let m = hist.m() as f64;
            let chi = chi_squared_statistic(&hist, n).unwrap();
            let s = self_collisions(&hist).unwrap() as f64;
            prop_assert!(crate::numeric::close(chi, 2.0 * s - m * m / n as f64, 1e-9));
        }

        #[test]
        fn thresholds_increase_in_eps_and_m(
            m in 2u64..100_000, n in 2usize..10_000, eps in 0.01f64..0.99, d_eps in 0.001f64..0.01,
        ) {
            let t = uniformity_threshold(m, n, eps).unwrap();
            prop_assert!(uniformity_threshold(m, n, eps + d_eps).unwrap() > t);
            prop_assert!(uniformity_threshold(m + 1, n, eps).unwrap() > t);
            let c = closeness_threshold(m, eps).unwrap();
            prop_assert!(closeness_threshold(m, eps + d_eps).unwrap() > c);
            prop_assert!(closeness_threshold(m + 1, eps).unwrap() > c);
        }

        #[test]
        fn verdicts_are_pure(draws in prop::collection::vec(0u32..16, 2..300), eps in 0.05f64..1.0) {
            let hist = histogram(&SampleSet::from_draws(draws), 16).unwrap();
            prop_assert_eq!(test_uniformity(&hist, 16, eps).unwrap(), test_uniformity(&hist, 16, eps).unwrap());
            prop_assert_eq!(test_closeness(&hist, &hist, eps).unwrap(), test_closeness(&hist, &hist, eps).unwrap());
        }

        #[test]
        fn verdict_is_no_iff_statistic_reaches_threshold(draws in prop::collection::vec(0u32..8, 2..100), eps in 0.05f64..1.0) {
            let hist = histogram(&SampleSet::from_draws(draws), 8).unwrap();
            let v = test_uniformity(&hist, 8, eps).unwrap();
            prop_assert_eq!(v.decision == Decision::No, v.statistic >= v.threshold);
        }
    }
}
