//! Discrete distributions over `[n]`, sample sets, histograms, and the
//! instance families used by the experiments.
//!
//! Elements are 0-based everywhere in this crate. The 1-based convention of
//! the external file formats is handled in [`crate::format`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fsum;

/// Absolute tolerance on `sum(p) == 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability vector over `[n]` with cached power sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
    power2: f64,
    power3: f64,
}

impl Distribution {
    /// Normalizes nonnegative weights into a distribution.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "weight {} at element {} is negative or not finite",
                w,
                i + 1
            )));
        }
        let total = fsum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let check = fsum(probs.iter().copied());
        if (check - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "normalized mass is {check}"
            )));
        }
        Ok(Self::from_normalized(probs))
    }

    fn from_normalized(probs: Vec<f64>) -> Self {
        let power2 = fsum(probs.iter().map(|p| p * p));
        let power3 = fsum(probs.iter().map(|p| p * p * p));
        Self {
            probs,
            power2,
            power3,
        }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("domain size must be positive".into()));
        }
        Ok(Self::from_normalized(vec![1.0 / n as f64; n]))
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// `sum_i p_i^r`.
    pub fn power_sum(&self, r: u32) -> f64 {
        match r {
            2 => self.power2,
            3 => self.power3,
            _ => fsum(self.probs.iter().map(|p| p.powi(r as i32))),
        }
    }

    /// `||p||_r`.
    pub fn lr_norm(&self, r: u32) -> Result<f64> {
        if r == 0 {
            return Err(Error::InvalidParameter("norm order must be at least 1".into()));
        }
        Ok(self.power_sum(r).powf(1.0 / r as f64))
    }

    /// Collision probability `||p||_2^2`.
    pub fn collision_probability(&self) -> f64 {
        self.power2
    }

    /// `||p||_3^3 - ||p||_2^4`, evaluated as `sum_i p_i (p_i - ||p||_2^2)^2`,
    /// which is nonnegative term by term and vanishes exactly on uniform `p`.
    pub fn excess_cubic(&self) -> f64 {
        let c = self.power2;
        fsum(self.probs.iter().map(|p| p * (p - c) * (p - c)))
    }

    /// The `alpha` with `||p||_2^2 = (1 + alpha) / n`.
    pub fn alpha(&self) -> f64 {
        self.n() as f64 * self.power2 - 1.0
    }

    /// Returns the distribution with elements relabeled: element `i` of the
    /// result is element `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        Ok(Self::from_normalized(perm.iter().map(|&j| self.probs[j]).collect()))
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::DomainMismatch {
            left: perm.len(),
            right: n,
        });
    }
    for &j in perm {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}

fn check_same_domain(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DomainMismatch {
            left: p.n(),
            right: q.n(),
        });
    }
    Ok(())
}

/// `||p - q||_2^2`.
pub fn l2_distance_squared(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_same_domain(p, q)?;
    Ok(fsum(
        p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b) * (a - b)),
    ))
}

/// `||p - q||_1`.
pub fn l1_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_same_domain(p, q)?;
    Ok(fsum(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs())))
}

/// `||p - q||_4^2`.
pub fn l4_distance_squared(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_same_domain(p, q)?;
    Ok(fsum(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).powi(4))).sqrt())
}

/// Deterministic RNG for a `(seed, stream)` pair. Streams give independent
/// sequences under one seed, which is how per-trial and per-worker seeds are
/// split.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seeded_rng(seed, index.wrapping_add(1 << 63)).next_u64()
}

/// Walker/Vose alias table: O(n) construction, O(1) per draw.
///
/// Each draw consumes one 64-bit word: the high half of `word * n` picks the
/// column and the low half is the uniform position inside it.
#[derive(Debug, Clone)]
pub struct AliasTable {
    threshold: Vec<u64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(d: &Distribution) -> Self {
        let n = d.n();
        assert!(n <= u32::MAX as usize, "domain too large for alias table");
        let mut scaled: Vec<f64> = d.probs.iter().map(|p| p * n as f64).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut full = vec![false; n];
        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &w) in scaled.iter().enumerate() {
            if w < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers sit at 1 up to roundoff.
        for i in large.into_iter().chain(small) {
            if d.probs[i] > 0.0 {
                full[i] = true;
            } else {
                // Unreachable in exact arithmetic; never let a zero-mass
                // element keep its own column.
                scaled[i] = 0.0;
                alias[i] = argmax(&d.probs) as u32;
            }
        }
        let threshold = scaled
            .iter()
            .zip(&full)
            .map(|(&w, &f)| {
                if f {
                    u64::MAX
                } else {
                    // 2^64 * w, saturating; w < 1 here.
                    (w * 18_446_744_073_709_551_616.0) as u64
                }
            })
            .collect();
        Self { threshold, alias }
    }

    pub fn n(&self) -> usize {
        self.threshold.len()
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let word = rng.next_u64();
        let wide = word as u128 * self.threshold.len() as u128;
        let column = (wide >> 64) as usize;
        let position = wide as u64;
        let t = self.threshold[column];
        if t == u64::MAX || position < t {
            column
        } else {
            self.alias[column] as usize
        }
    }

    /// Draws `m` samples and returns only their histogram.
    pub fn sample_histogram<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Histogram {
        let mut counts = vec![0u64; self.n()];
        for _ in 0..m {
            counts[self.draw(rng)] += 1;
        }
        Histogram { counts, m }
    }
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
}

/// `m` iid draws from a distribution together with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    draws: Vec<u32>,
    seed: Option<u64>,
}

impl SampleSet {
    /// Wraps externally supplied 0-based draws.
    pub fn from_draws(draws: Vec<u32>) -> Self {
        Self { draws, seed: None }
    }

    pub fn draws(&self) -> &[u32] {
        &self.draws
    }

    pub fn m(&self) -> u64 {
        self.draws.len() as u64
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn concat(&self, other: &SampleSet) -> SampleSet {
        let mut draws = self.draws.clone();
        draws.extend_from_slice(&other.draws);
        SampleSet { draws, seed: None }
    }
}

/// Draws `m` iid samples from `d`; identical `(d, m, seed)` gives identical output.
pub fn sample(d: &Distribution, m: u64, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let table = AliasTable::new(d);
    let mut rng = seeded_rng(seed, 0);
    let draws = (0..m).map(|_| table.draw(&mut rng) as u32).collect();
    Ok(SampleSet {
        draws,
        seed: Some(seed),
    })
}

/// Occurrence counts of `m` samples over `[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
    m: u64,
}

impl Histogram {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("histogram over an empty domain".into()));
        }
        let m = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or(Error::Overflow)?;
        Ok(Self { counts, m })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Elementwise sum: the histogram of the concatenated sample sets.
    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.n() != other.n() {
            return Err(Error::DomainMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Histogram::from_counts(
            self.counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Histogram> {
        check_permutation(perm, self.n())?;
        Ok(Histogram {
            counts: perm.iter().map(|&j| self.counts[j]).collect(),
            m: self.m,
        })
    }
}

/// Counts the draws of `s` over a domain of size `n`.
pub fn histogram(s: &SampleSet, n: usize) -> Result<Histogram> {
    let mut counts = vec![0u64; n];
    for &x in &s.draws {
        let slot = counts.get_mut(x as usize).ok_or(Error::OutOfRange {
            element: x as u64 + 1,
            n,
        })?;
        *slot += 1;
    }
    Ok(Histogram { counts, m: s.m() })
}

/// Instance families for experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Uniform,
    /// `(1/2 + gamma, 1/2 - gamma)` on two elements.
    TwoPoint,
    /// First half of the domain at `(1 + 2 eps)/n`, second half at `(1 - 2 eps)/n`.
    PmPerturbation,
    /// `p_i` proportional to `i^(-s)`.
    Zipf,
    /// All mass on the first element.
    PointMass,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Uniform,
        Family::TwoPoint,
        Family::PmPerturbation,
        Family::Zipf,
        Family::PointMass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::TwoPoint => "two-point",
            Family::PmPerturbation => "pm-perturbation",
            Family::Zipf => "zipf",
            Family::PointMass => "point-mass",
        }
    }

    /// Whether `param` is consulted by [`make_family`].
    pub fn takes_param(self) -> bool {
        matches!(self, Family::TwoPoint | Family::PmPerturbation | Family::Zipf)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown family '{s}'")))
    }
}

/// Builds a member of `kind` over `[n]`.
pub fn make_family(kind: Family, n: usize, param: f64) -> Result<Distribution> {
    if n == 0 {
        return Err(Error::InvalidParameter("domain size must be positive".into()));
    }
    let in_half_open = |lo: f64, hi: f64| param > lo && param <= hi;
    match kind {
        Family::Uniform => Distribution::uniform(n),
        Family::PointMass => {
            let mut w = vec![0.0; n];
            w[0] = 1.0;
            Distribution::new(&w)
        }
        Family::TwoPoint => {
            if n != 2 {
                return Err(Error::InvalidParameter(format!(
                    "two-point family needs n = 2, got {n}"
                )));
            }
            if !in_half_open(0.0, 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "two-point gamma must lie in (0, 1/2], got {param}"
                )));
            }
            Distribution::new(&[0.5 + param, 0.5 - param])
        }
        Family::PmPerturbation => {
            if !n.is_multiple_of(2) {
                return Err(Error::InvalidParameter(format!(
                    "pm-perturbation needs even n, got {n}"
                )));
            }
            if !in_half_open(0.0, 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "pm-perturbation epsilon must lie in (0, 1/2], got {param}"
                )));
            }
            let nf = n as f64;
            let hi = (1.0 + 2.0 * param) / nf;
            let lo = (1.0 - 2.0 * param) / nf;
            let probs: Vec<f64> = (0..n).map(|i| if i < n / 2 { hi } else { lo }).collect();
            let d = Distribution::from_normalized(probs);
            let u = Distribution::uniform(n)?;
            debug_assert!(
                (l2_distance_squared(&d, &u)? - 4.0 * param * param / nf).abs() <= 1e-12
            );
            debug_assert!((l1_distance(&d, &u)? - 2.0 * param).abs() <= 1e-12);
            Ok(d)
        }
        Family::Zipf => {
            if !(param.is_finite() && param > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "zipf exponent must be positive, got {param}"
                )));
            }
            let w: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-param)).collect();
            Distribution::new(&w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_probs(d: &Distribution, expected: &[f64]) {
        assert_eq!(d.n(), expected.len());
        for (a, b) in d.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{:?} vs {:?}", d.probs(), expected);
        }
    }

    #[test]
    fn normalizes_weights() {
        assert_probs(&Distribution::new(&[2.0, 2.0]).unwrap(), &[0.5, 0.5]);
        assert_probs(&Distribution::new(&[1.0, 0.0, 0.0]).unwrap(), &[1.0, 0.0, 0.0]);
        assert_probs(&Distribution::new(&[1.0, 2.0, 1.0]).unwrap(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Distribution::new(&[1.0, -0.1]).is_err());
        assert!(Distribution::new(&[0.0, 0.0]).is_err());
        assert!(Distribution::new(&[]).is_err());
        assert!(Distribution::new(&[f64::NAN]).is_err());
    }

    #[test]
    fn norms() {
        let u = Distribution::uniform(4).unwrap();
        assert!((u.lr_norm(2).unwrap() - 0.5).abs() < 1e-15);
        assert!((u.power_sum(2) - 0.25).abs() < 1e-15);
        let point = Distribution::new(&[1.0, 0.0]).unwrap();
        assert_eq!(point.lr_norm(3).unwrap(), 1.0);
        let two = make_family(Family::TwoPoint, 2, 0.1).unwrap();
        assert!((two.power_sum(2) - 0.52).abs() < 1e-15);
        assert!(u.lr_norm(0).is_err());
    }

    #[test]
    fn distances() {
        let p = Distribution::new(&[1.0, 0.0]).unwrap();
        let q = Distribution::new(&[0.0, 1.0]).unwrap();
        let u = Distribution::uniform(2).unwrap();
        let r = Distribution::new(&[0.6, 0.4]).unwrap();
        assert_eq!(l2_distance_squared(&p, &p).unwrap(), 0.0);
        assert_eq!(l2_distance_squared(&p, &q).unwrap(), 2.0);
        assert!((l2_distance_squared(&u, &r).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(l1_distance(&r, &r).unwrap(), 0.0);
        assert_eq!(l1_distance(&p, &q).unwrap(), 2.0);
        assert!((l1_distance(&u, &r).unwrap() - 0.2).abs() < 1e-15);
        let w = Distribution::uniform(3).unwrap();
        assert!(matches!(
            l2_distance_squared(&u, &w),
            Err(Error::DomainMismatch { .. })
        ));
        assert!(l1_distance(&u, &w).is_err());
    }

    #[test]
    fn families() {
        assert_probs(&make_family(Family::Uniform, 5, 0.0).unwrap(), &[0.2; 5]);
        let pm = make_family(Family::PmPerturbation, 4, 0.25).unwrap();
        assert_probs(&pm, &[0.375, 0.375, 0.125, 0.125]);
        let u = Distribution::uniform(4).unwrap();
        assert!((l2_distance_squared(&pm, &u).unwrap() - 0.0625).abs() < 1e-12);
        assert_probs(&make_family(Family::TwoPoint, 2, 0.1).unwrap(), &[0.6, 0.4]);
        assert!(make_family(Family::PmPerturbation, 5, 0.25).is_err());
        assert!(make_family(Family::PmPerturbation, 4, 0.6).is_err());
        assert!(make_family(Family::PmPerturbation, 4, 0.0).is_err());
        assert!(make_family(Family::TwoPoint, 3, 0.1).is_err());
        assert!(make_family(Family::Zipf, 3, -1.0).is_err());
        let z = make_family(Family::Zipf, 3, 1.0).unwrap();
        assert_probs(&z, &[6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]);
        assert_eq!("pm-perturbation".parse::<Family>().unwrap(), Family::PmPerturbation);
        assert!("gaussian".parse::<Family>().is_err());
    }

    #[test]
    fn point_mass_sampling() {
        let d = Distribution::new(&[1.0, 0.0, 0.0]).unwrap();
        let s = sample(&d, 1000, 3).unwrap();
        assert!(s.draws().iter().all(|&x| x == 0));
        let pm = make_family(Family::PmPerturbation, 10, 0.5).unwrap();
        let s = sample(&pm, 100_000, 11).unwrap();
        assert!(s.draws().iter().all(|&x| x < 5));
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = make_family(Family::Zipf, 17, 1.1).unwrap();
        assert_eq!(sample(&d, 500, 9).unwrap(), sample(&d, 500, 9).unwrap());
        assert_ne!(sample(&d, 500, 9).unwrap(), sample(&d, 500, 10).unwrap());
        assert!(sample(&d, 0, 1).is_err());
    }

    #[test]
    fn fair_coin_frequency() {
        let d = Distribution::uniform(2).unwrap();
        let h = histogram(&sample(&d, 1_000_000, 2024).unwrap(), 2).unwrap();
        let freq = h.counts()[0] as f64 / 1e6;
        // 5 sigma of Bin(10^6, 1/2)/10^6 is 0.0025; a 0.002 window is 4 sigma.
        assert!((freq - 0.5).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&SampleSet::from_draws(vec![0, 0, 0]), 2).unwrap();
        assert_eq!(h.counts(), &[3, 0]);
        let h = histogram(&SampleSet::from_draws(vec![0, 1, 0]), 3).unwrap();
        assert_eq!(h.counts(), &[2, 1, 0]);
        assert_eq!(h.m(), 3);
        assert!(matches!(
            histogram(&SampleSet::from_draws(vec![0, 3]), 3),
            Err(Error::OutOfRange { element: 4, n: 3 })
        ));
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 1..40)
            .prop_filter("some positive weight", |w| w.iter().any(|&x| x > 1e-6))
    }

    proptest! {
        #[test]
        fn constructed_distributions_are_normalized(w in weights()) {
            let d = Distribution::new(&w).unwrap();
            prop_assert!((fsum(d.probs().iter().copied()) - 1.0).abs() <= NORMALIZATION_TOL);
        }

        #[test]
        fn collision_probability_is_minimized_by_uniform(w in weights()) {
            let d = Distribution::new(&w).unwrap();
            let floor = 1.0 / d.n() as f64;
            prop_assert!(d.power_sum(2) >= floor * (1.0 - 1e-12));
            let u = Distribution::uniform(d.n()).unwrap();
            let gap = l2_distance_squared(&d, &u).unwrap();
            // ||p||^2 - 1/n = ||p - U||^2, zero iff uniform.
            prop_assert!((d.power_sum(2) - floor - gap).abs() < 1e-12);
        }

        #[test]
        fn relabeling_preserves_norms_and_distances(
            w in weights(),
            v in weights(),
            shuffle_seed in any::<u64>(),
        ) {
            let n = w.len().min(v.len());
            let p = Distribution::new(&w[..n]).unwrap_or(Distribution::uniform(n).unwrap());
            let q = Distribution::new(&v[..n]).unwrap_or(Distribution::uniform(n).unwrap());
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = seeded_rng(shuffle_seed, 0);
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let (pp, qq) = (p.permuted(&perm).unwrap(), q.permuted(&perm).unwrap());
            for r in 1..=4 {
                prop_assert!((p.power_sum(r) - pp.power_sum(r)).abs() < 1e-14);
            }
            prop_assert!((l2_distance_squared(&p, &q).unwrap()
                - l2_distance_squared(&pp, &qq).unwrap()).abs() < 1e-14);
            prop_assert!((l1_distance(&p, &q).unwrap() - l1_distance(&pp, &qq).unwrap()).abs() < 1e-13);
        }

        #[test]
        fn pm_perturbation_distance_identity(half in 1usize..200, eps in 0.001f64..=0.5) {
            let n = 2 * half;
            let d = make_family(Family::PmPerturbation, n, eps).unwrap();
            let u = Distribution::uniform(n).unwrap();
            prop_assert!((l2_distance_squared(&d, &u).unwrap() - 4.0 * eps * eps / n as f64).abs() <= 1e-12);
            prop_assert!((l1_distance(&d, &u).unwrap() - 2.0 * eps).abs() <= 1e-12);
        }

        #[test]
        fn histogram_is_additive(a in prop::collection::vec(0u32..7, 0..50), b in prop::collection::vec(0u32..7, 0..50)) {
            let (sa, sb) = (SampleSet::from_draws(a), SampleSet::from_draws(b));
            let joined = histogram(&sa.concat(&sb), 7).unwrap();
            let summed = histogram(&sa, 7).unwrap().merge(&histogram(&sb, 7).unwrap()).unwrap();
            prop_assert_eq!(joined, summed);
        }
    }
}
