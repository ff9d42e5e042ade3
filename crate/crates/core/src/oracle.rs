//! Ground truth for the closed forms in [`crate::moments`] and for the
//! testers' success guarantees.
//!
//! Exact moments come from enumerating the whole outcome space of tiny
//! instances, either sample sequence by sample sequence or histogram by
//! histogram with multinomial weights. Neither path shares code with the
//! closed forms. Error rates come from seeded Monte Carlo trials with Wilson
//! score intervals.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{l2_distance_squared, seeded_rng, AliasTable, Distribution, Histogram};
use crate::error::{Error, Result};
use crate::moments::{self, BinomialMoments};
use crate::numeric::{rel_dev, CompensatedSum};
use crate::testers::{test_closeness, test_uniformity, Decision};

/// Default cap on the number of enumerated outcomes.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Outcome counts above this switch [`Enumeration::Auto`] to histograms.
pub const SEQUENCE_LIMIT: u128 = 100_000;

/// Relative tolerance between closed forms and enumeration.
pub const ORACLE_TOL: f64 = 1e-9;

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
}

impl ExactMoments {
    fn from_sums(mean: f64, second_moment: f64) -> Self {
        let raw = second_moment - mean * mean;
        debug_assert!(
            raw >= -1e-12 * second_moment.abs().max(1.0),
            "negative variance {raw}"
        );
        Self {
            mean,
            variance: raw.max(0.0),
            second_moment,
        }
    }
}

/// How the outcome space is walked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Enumeration {
    /// Every one of the `n^m` sample sequences.
    Sequences,
    /// Every histogram of `m` samples over `[n]`, weighted by its multinomial probability.
    Histograms,
    /// Sequences when there are at most [`SEQUENCE_LIMIT`] of them, histograms otherwise.
    Auto,
}

fn sequence_count(n: usize, m: u64) -> u128 {
    (0..m).fold(1u128, |acc, _| acc.saturating_mul(n as u128))
}

fn histogram_count(n: usize, m: u64) -> u128 {
    // C(m + n - 1, n - 1)
    let k = (n as u128).saturating_sub(1);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c.saturating_mul(m as u128 + i) / i;
    }
    c
}

fn resolve(method: Enumeration, n: usize, m: u64) -> Enumeration {
    match method {
        Enumeration::Auto if sequence_count(n, m) <= SEQUENCE_LIMIT => Enumeration::Sequences,
        Enumeration::Auto => Enumeration::Histograms,
        other => other,
    }
}

fn outcome_count(method: Enumeration, n: usize, m: u64) -> u128 {
    match method {
        Enumeration::Sequences => sequence_count(n, m),
        _ => histogram_count(n, m),
    }
}

fn check_budget(needed: u128, budget: u64) -> Result<()> {
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// Calls `f(counts, probability)` once per outcome.
fn for_each_outcome<F: FnMut(&[u64], f64)>(p: &Distribution, m: u64, method: Enumeration, mut f: F) {
    let n = p.n();
    let probs = p.probs();
    match method {
        Enumeration::Sequences => {
            let m = m as usize;
            let mut seq = vec![0usize; m];
            let mut counts = vec![0u64; n];
            loop {
                counts.iter_mut().for_each(|c| *c = 0);
                let mut prob = 1.0;
                for &x in &seq {
                    counts[x] += 1;
                    prob *= probs[x];
                }
                f(&counts, prob);
                // odometer
                let mut k = 0;
                loop {
                    if k == m {
                        return;
                    }
                    seq[k] += 1;
                    if seq[k] < n {
                        break;
                    }
                    seq[k] = 0;
                    k += 1;
                }
            }
        }
        _ => {
            let log_fact: Vec<f64> = std::iter::once(0.0)
                .chain((1..=m).scan(0.0, |acc, k| {
                    *acc += (k as f64).ln();
                    Some(*acc)
                }))
                .collect();
            let mut counts = vec![0u64; n];
            compositions(&mut counts, 0, m, &mut |c| {
                let mut prob = log_fact[m as usize].exp();
                for (i, &x) in c.iter().enumerate() {
                    if x > 0 {
                        prob *= probs[i].powi(x as i32) / log_fact[x as usize].exp();
                    }
                }
                f(c, prob);
            });
        }
    }
}

fn compositions<F: FnMut(&[u64])>(counts: &mut [u64], at: usize, left: u64, f: &mut F) {
    if at + 1 == counts.len() {
        counts[at] = left;
        f(counts);
        return;
    }
    for x in 0..=left {
        counts[at] = x;
        compositions(counts, at + 1, left - x, f);
    }
}

fn collect_outcomes(p: &Distribution, m: u64, method: Enumeration) -> Vec<(Vec<u64>, f64)> {
    let mut out = Vec::new();
    for_each_outcome(p, m, method, |c, w| {
        if w > 0.0 {
            out.push((c.to_vec(), w));
        }
    });
    out
}

/// Exact mean and variance of the self-collision count `s`.
pub fn enumerate_moments_s(
    p: &Distribution,
    m: u64,
    method: Enumeration,
    budget: u64,
) -> Result<ExactMoments> {
    let method = resolve(method, p.n(), m);
    check_budget(outcome_count(method, p.n(), m), budget)?;
    let (mut total, mut first, mut second) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for_each_outcome(p, m, method, |counts, w| {
        let s: u64 = counts.iter().map(|&x| x * x.saturating_sub(1) / 2).sum();
        let s = s as f64;
        total.add(w);
        first.add(w * s);
        second.add(w * s * s);
    });
    debug_assert!((total.value() - 1.0).abs() < 1e-12);
    Ok(ExactMoments::from_sums(first.value(), second.value()))
}

/// Total probability of the enumerated outcomes; 1 up to roundoff.
pub fn enumerated_mass(p: &Distribution, m: u64, method: Enumeration, budget: u64) -> Result<f64> {
    let method = resolve(method, p.n(), m);
    check_budget(outcome_count(method, p.n(), m), budget)?;
    let mut total = CompensatedSum::new();
    for_each_outcome(p, m, method, |_, w| total.add(w));
    Ok(total.value())
}

/// Exact moments of `Z`, `A`, `B` and `cov(A, B)` for the closeness statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosenessMoments {
    pub z: ExactMoments,
    pub a: ExactMoments,
    pub b: ExactMoments,
    pub cov_ab: f64,
}

fn check_pair(p: &Distribution, q: &Distribution, m: u64) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DomainMismatch {
            left: p.n(),
            right: q.n(),
        });
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
    }
    Ok(())
}

fn pair_budget(p: &Distribution, q: &Distribution, m: u64, method: Enumeration, budget: u64) -> Result<Enumeration> {
    let method = match method {
        Enumeration::Auto if sequence_count(p.n(), m).saturating_mul(sequence_count(q.n(), m)) <= SEQUENCE_LIMIT => {
            Enumeration::Sequences
        }
        Enumeration::Auto => Enumeration::Histograms,
        other => other,
    };
    let one = outcome_count(method, p.n(), m);
    check_budget(one.saturating_mul(one), budget)?;
    Ok(method)
}

pub fn enumerate_moments_closeness(
    p: &Distribution,
    q: &Distribution,
    m: u64,
    method: Enumeration,
    budget: u64,
) -> Result<ClosenessMoments> {
    check_pair(p, q, m)?;
    let method = pair_budget(p, q, m, method, budget)?;
    let q_outcomes = collect_outcomes(q, m, method);
    let mf = m as f64;
    let mut sums = [CompensatedSum::new(); 7];
    for_each_outcome(p, m, method, |x, wx| {
        if wx == 0.0 {
            return;
        }
        for (y, wy) in &q_outcomes {
            let w = wx * wy;
            let (mut a, mut b, mut c1, mut c2, mut c3) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&xi, &yi) in x.iter().zip(y) {
                let (xi, yi) = (xi as f64, yi as f64);
                a += (xi - yi) * (xi - yi) - xi - yi;
                b += xi * (xi - 1.0) + yi * (yi - 1.0);
                c1 += xi * (xi - 1.0) / 2.0;
                c2 += yi * (yi - 1.0) / 2.0;
                c3 += xi * yi;
            }
            // Z straight from the collision counts, not from A and B.
            let z = c1 + c2 - (mf - 1.0) / mf * c3;
            for (acc, v) in sums.iter_mut().zip([z, z * z, a, a * a, b, b * b, a * b]) {
                acc.add(w * v);
            }
        }
    });
    let v = sums.map(|s| s.value());
    Ok(ClosenessMoments {
        z: ExactMoments::from_sums(v[0], v[1]),
        a: ExactMoments::from_sums(v[2], v[3]),
        b: ExactMoments::from_sums(v[4], v[5]),
        cov_ab: v[6] - v[2] * v[4],
    })
}

/// Per-element features tracked by [`JointMoments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    X,
    Y,
    X2,
    Y2,
    XY,
    A,
}

const FEATURES: usize = 6;

impl Feature {
    fn slot(self, element: usize) -> usize {
        element * FEATURES + self as usize
    }
}

/// First and second moments of the per-element features
/// `X_i, Y_i, X_i^2, Y_i^2, X_i Y_i, A_i` over the joint outcome space.
#[derive(Debug, Clone)]
pub struct JointMoments {
    mean: Vec<f64>,
    second: Vec<f64>,
    width: usize,
}

impl JointMoments {
    pub fn enumerate(p: &Distribution, q: &Distribution, m: u64, method: Enumeration, budget: u64) -> Result<Self> {
        check_pair(p, q, m)?;
        let method = pair_budget(p, q, m, method, budget)?;
        let width = FEATURES * p.n();
        let q_outcomes = collect_outcomes(q, m, method);
        let mut mean = vec![CompensatedSum::new(); width];
        let mut second = vec![CompensatedSum::new(); width * width];
        let mut v = vec![0.0; width];
        for_each_outcome(p, m, method, |x, wx| {
            if wx == 0.0 {
                return;
            }
            for (y, wy) in &q_outcomes {
                let w = wx * wy;
                for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
                    let (xi, yi) = (xi as f64, yi as f64);
                    let f = &mut v[i * FEATURES..(i + 1) * FEATURES];
                    f[0] = xi;
                    f[1] = yi;
                    f[2] = xi * xi;
                    f[3] = yi * yi;
                    f[4] = xi * yi;
                    f[5] = (xi - yi) * (xi - yi) - xi - yi;
                }
                for r in 0..width {
                    mean[r].add(w * v[r]);
                    let wr = w * v[r];
                    for c in 0..width {
                        second[r * width + c].add(wr * v[c]);
                    }
                }
            }
        });
        Ok(Self {
            mean: mean.iter().map(|s| s.value()).collect(),
            second: second.iter().map(|s| s.value()).collect(),
            width,
        })
    }

    pub fn mean(&self, f: Feature, i: usize) -> f64 {
        self.mean[f.slot(i)]
    }

    pub fn cov(&self, f: Feature, i: usize, g: Feature, j: usize) -> f64 {
        let (r, c) = (f.slot(i), g.slot(j));
        self.second[r * self.width + c] - self.mean[r] * self.mean[c]
    }

    /// The toolkit moments, read off the enumerated joint distribution.
    pub fn binomial_moments(&self, i: usize, j: usize) -> BinomialMoments {
        use Feature::*;
        BinomialMoments {
            cov_xi_xj: self.cov(X, i, X, j),
            cov_xi2_xj: self.cov(X2, i, X, j),
            cov_xi2_xj2: self.cov(X2, i, X2, j),
            cov_xiyi_xjyj: self.cov(XY, i, XY, j),
            cov_xiyi_xj: self.cov(XY, i, X, j),
            cov_xi2_xi: self.cov(X2, i, X, i),
            var_xi2: self.cov(X2, i, X2, i),
            var_xiyi: self.cov(XY, i, XY, i),
            cov_xi2_xiyi: self.cov(X2, i, XY, i),
            cov_xi_xiyi: self.cov(X, i, XY, i),
            var_ai: self.cov(A, i, A, i),
            cov_ai_aj: self.cov(A, i, A, j),
        }
    }
}

/// The closed forms checked by [`verify_grid`]. Swappable so the harness
/// itself can be tested against a deliberately broken formula.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub expected_s: fn(&Distribution, u64) -> Result<f64>,
    pub exact_var_s: fn(&Distribution, u64) -> Result<f64>,
    pub expected_z: fn(&Distribution, &Distribution, u64) -> Result<f64>,
    pub exact_var_z: fn(&Distribution, &Distribution, u64) -> Result<f64>,
    pub expected_a: fn(&Distribution, &Distribution, u64) -> Result<f64>,
    pub exact_var_a: fn(&Distribution, &Distribution, u64) -> Result<f64>,
    pub exact_var_b: fn(&Distribution, &Distribution, u64) -> Result<f64>,
    pub toolkit: fn(&Distribution, &Distribution, u64, usize, usize) -> Result<BinomialMoments>,
}

fn var_a_closed(p: &Distribution, q: &Distribution, m: u64) -> Result<f64> {
    Ok(moments::exact_var_a_terms(p, q, m)?
        .variance_exact
        .unwrap_or(f64::NAN))
}

impl Default for Formulas {
    fn default() -> Self {
        Self {
            expected_s: moments::expected_s,
            exact_var_s: moments::exact_var_s,
            expected_z: moments::expected_z,
            exact_var_z: moments::exact_var_z,
            expected_a: moments::expected_a,
            exact_var_a: var_a_closed,
            exact_var_b: moments::exact_var_b,
            toolkit: moments::binomial_covariance_toolkit,
        }
    }
}

/// Which instances [`verify_grid`] walks: every `p` with entries in
/// `{k / denominator}` for each `n`, and every pair `(p, q)` of those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ns: Vec<usize>,
    pub ms: Vec<u64>,
    pub denominator: u64,
    pub budget: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            ns: vec![2, 3],
            ms: vec![2, 3, 4],
            denominator: 8,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// All distributions over `[n]` with entries in `{k / denominator}`.
pub fn grid_distributions(n: usize, denominator: u64) -> Vec<Distribution> {
    let mut out = Vec::new();
    let mut counts = vec![0u64; n];
    compositions(&mut counts, 0, denominator, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&k| k as f64 / denominator as f64).collect();
        out.push(Distribution::new(&w).expect("grid weights are valid"));
    });
    out
}

/// Worst deviation seen for one checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaCheck {
    pub name: String,
    pub cases: u64,
    pub worst_rel_dev: f64,
    pub worst_case: String,
}

/// Count of inequality violations for one bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub cases: u64,
    pub violations: u64,
    /// Smallest `bound / exact` seen, over cases with positive exact value.
    pub min_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub tolerance: f64,
    pub formulas: Vec<FormulaCheck>,
    pub bounds: Vec<BoundCheck>,
    pub max_mass_error: f64,
}

impl GridReport {
    pub fn passed(&self) -> bool {
        self.formulas.iter().all(|f| f.worst_rel_dev <= self.tolerance)
            && self.bounds.iter().all(|b| b.violations == 0)
            && self.max_mass_error <= 1e-12
    }

    pub fn max_deviation(&self) -> f64 {
        self.formulas.iter().map(|f| f.worst_rel_dev).fold(0.0, f64::max)
    }
}

impl fmt::Display for GridReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.formulas {
            let flag = if c.worst_rel_dev <= self.tolerance { "ok  " } else { "FAIL" };
            writeln!(
                f,
                "{flag} {:<16} cases={:<6} worst_rel_dev={:.3e} at {}",
                c.name, c.cases, c.worst_rel_dev, c.worst_case
            )?;
        }
        for b in &self.bounds {
            let flag = if b.violations == 0 { "ok  " } else { "FAIL" };
            writeln!(
                f,
                "{flag} {:<16} cases={:<6} violations={} min_bound_ratio={:.4}",
                b.name, b.cases, b.violations, b.min_ratio
            )?;
        }
        write!(f, "probability mass error {:.3e}", self.max_mass_error)
    }
}

#[derive(Default)]
struct Tracker {
    formulas: Vec<FormulaCheck>,
    bounds: Vec<BoundCheck>,
}

impl Tracker {
    fn formula(&mut self, name: &str, closed: f64, exact: f64, case: impl FnOnce() -> String) {
        let dev = if closed.is_finite() { rel_dev(closed, exact) } else { f64::INFINITY };
        let entry = match self.formulas.iter_mut().position(|c| c.name == name) {
            Some(i) => &mut self.formulas[i],
            None => {
                self.formulas.push(FormulaCheck {
                    name: name.to_string(),
                    cases: 0,
                    worst_rel_dev: 0.0,
                    worst_case: String::new(),
                });
                self.formulas.last_mut().unwrap()
            }
        };
        entry.cases += 1;
        if dev > entry.worst_rel_dev || entry.worst_case.is_empty() {
            entry.worst_rel_dev = entry.worst_rel_dev.max(dev);
            entry.worst_case = case();
        }
    }

    fn bound(&mut self, name: &str, bound: f64, exact: f64) {
        let entry = match self.bounds.iter_mut().position(|c| c.name == name) {
            Some(i) => &mut self.bounds[i],
            None => {
                self.bounds.push(BoundCheck {
                    name: name.to_string(),
                    cases: 0,
                    violations: 0,
                    min_ratio: f64::INFINITY,
                });
                self.bounds.last_mut().unwrap()
            }
        };
        entry.cases += 1;
        // Exact values come from enumeration; allow roundoff at the 1e-9 level.
        if bound < exact - ORACLE_TOL * exact.abs().max(1.0) {
            entry.violations += 1;
        }
        if exact > 1e-12 {
            entry.min_ratio = entry.min_ratio.min(bound / exact);
        }
    }
}

fn describe(p: &Distribution, q: Option<&Distribution>, m: u64) -> String {
    match q {
        Some(q) => format!("p={:?} q={:?} m={m}", p.probs(), q.probs()),
        None => format!("p={:?} m={m}", p.probs()),
    }
}

/// Checks every closed form against enumeration over the grid, plus the
/// published variance bounds against the enumerated exact variances.
pub fn verify_grid(spec: &GridSpec, formulas: &Formulas) -> Result<GridReport> {
    if spec.ns.is_empty() || spec.ms.is_empty() {
        return Err(Error::InvalidParameter("empty oracle grid".into()));
    }
    if spec.ms.iter().any(|&m| m < 2) || spec.ns.iter().any(|&n| n < 2) || spec.denominator == 0 {
        return Err(Error::InvalidParameter("oracle grid needs n >= 2, m >= 2".into()));
    }
    for &n in &spec.ns {
        for &m in &spec.ms {
            let one = histogram_count(n, m);
            check_budget(one.saturating_mul(one), spec.budget)?;
        }
    }
    let mut t = Tracker::default();
    let mut max_mass_error: f64 = 0.0;
    for &n in &spec.ns {
        let dists = grid_distributions(n, spec.denominator);
        for &m in &spec.ms {
            for p in &dists {
                let via_hist = enumerate_moments_s(p, m, Enumeration::Histograms, spec.budget)?;
                let s_case = || describe(p, None, m);
                t.formula("E[s]", (formulas.expected_s)(p, m)?, via_hist.mean, s_case);
                t.formula("Var[s]", (formulas.exact_var_s)(p, m)?, via_hist.variance, s_case);
                if sequence_count(n, m) <= spec.budget as u128 {
                    let via_seq = enumerate_moments_s(p, m, Enumeration::Sequences, spec.budget)?;
                    t.formula("enum paths", via_seq.mean, via_hist.mean, s_case);
                    t.formula("enum paths", via_seq.variance, via_hist.variance, s_case);
                    let mass = enumerated_mass(p, m, Enumeration::Sequences, spec.budget)?;
                    max_mass_error = max_mass_error.max((mass - 1.0).abs());
                }
                let mass = enumerated_mass(p, m, Enumeration::Histograms, spec.budget)?;
                max_mass_error = max_mass_error.max((mass - 1.0).abs());
                t.bound("Var[s] bound", moments::var_bound_s(p, m)?, via_hist.variance);
            }
            for p in &dists {
                for q in &dists {
                    let case = || describe(p, Some(q), m);
                    let exact = enumerate_moments_closeness(p, q, m, Enumeration::Histograms, spec.budget)?;
                    t.formula("E[Z]", (formulas.expected_z)(p, q, m)?, exact.z.mean, case);
                    t.formula("Var[Z]", (formulas.exact_var_z)(p, q, m)?, exact.z.variance, case);
                    t.formula("E[A]", (formulas.expected_a)(p, q, m)?, exact.a.mean, case);
                    t.formula("Var[A]", (formulas.exact_var_a)(p, q, m)?, exact.a.variance, case);
                    t.formula("Var[B]", (formulas.exact_var_b)(p, q, m)?, exact.b.variance, case);

                    let joint = JointMoments::enumerate(p, q, m, Enumeration::Histograms, spec.budget)?;
                    for i in 0..n {
                        for j in (0..n).filter(|&j| j != i) {
                            let closed = (formulas.toolkit)(p, q, m, i, j)?;
                            let exact = joint.binomial_moments(i, j);
                            for ((name, c), e) in BinomialMoments::NAMES
                                .iter()
                                .zip(closed.values())
                                .zip(exact.values())
                            {
                                t.formula(name, c, e, || format!("{} i={i} j={j}", case()));
                            }
                        }
                    }

                    let b = p.collision_probability().max(q.collision_probability());
                    t.bound("Var[A] bound", moments::var_bound_a(p, q, m, b)?, exact.a.variance);
                    t.bound("Var[Z] bound", moments::var_bound_z(p, q, m, b)?, exact.z.variance);
                }
            }
        }
    }
    Ok(GridReport {
        tolerance: ORACLE_TOL,
        formulas: t.formulas,
        bounds: t.bounds,
        max_mass_error,
    })
}

/// Checks the three variance bounds on given instances, each with its own `b`.
pub fn check_bounds_on(
    instances: &[(Distribution, Distribution, u64, f64)],
    budget: u64,
) -> Result<Vec<BoundCheck>> {
    let mut t = Tracker::default();
    for (p, q, m, b) in instances {
        let exact = enumerate_moments_closeness(p, q, *m, Enumeration::Histograms, budget)?;
        let s = enumerate_moments_s(p, *m, Enumeration::Histograms, budget)?;
        t.bound("Var[s] bound", moments::var_bound_s(p, *m)?, s.variance);
        t.bound("Var[A] bound", moments::var_bound_a(p, q, *m, *b)?, exact.a.variance);
        t.bound("Var[Z] bound", moments::var_bound_z(p, q, *m, *b)?, exact.z.variance);
    }
    Ok(t.bounds)
}

/// Random small `(p, q, m, b)` instances for bound checks: `n` in 2..=4,
/// `m` in 2..=5, some zero entries, and `b` either tight or drawn from
/// `[max(||p||^2, ||q||^2), 1]`.
pub fn random_bound_instances(count: usize, seed: u64) -> Vec<(Distribution, Distribution, u64, f64)> {
    use rand::Rng;
    let mut rng = seeded_rng(seed, 0);
    let weights = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Distribution {
        loop {
            let w: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
                .collect();
            if let Ok(d) = Distribution::new(&w) {
                return d;
            }
        }
    };
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=4);
            let m = rng.random_range(2..=5);
            let p = weights(&mut rng, n);
            let q = weights(&mut rng, n);
            let tight = p.collision_probability().max(q.collision_probability());
            let b = if rng.random_bool(0.5) {
                tight
            } else {
                rng.random_range(tight..=1.0)
            };
            (p, q, m, b)
        })
        .collect()
}

/// Which side of the promise a scenario's input lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// The property holds; NO is an error.
    Completeness,
    /// The input is far; YES is an error.
    Soundness,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Completeness => "completeness",
            Side::Soundness => "soundness",
        }
    }

    fn failed(self, decision: Decision) -> bool {
        match self {
            Side::Completeness => decision == Decision::No,
            Side::Soundness => decision == Decision::Yes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Input {
    Uniformity { p: Distribution },
    Closeness { p: Distribution, q: Distribution, b: f64 },
}

/// A tester, the data source it is run on, and the side that source is on.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    id: String,
    input: Input,
    side: Side,
    epsilon: f64,
    m: u64,
}

const PROMISE_SLACK: f64 = 1e-12;

impl Scenario {
    /// Uniformity tester on samples from `p`. Completeness requires
    /// `||p - U||_2^2 <= eps^2 / (2n)`, soundness `>= eps^2 / n`.
    pub fn uniformity(id: impl Into<String>, p: Distribution, epsilon: f64, m: u64, side: Side) -> Result<Self> {
        check_run(epsilon, m)?;
        let n = p.n() as f64;
        let gap = l2_distance_squared(&p, &Distribution::uniform(p.n())?)?;
        let ok = match side {
            Side::Completeness => gap <= epsilon * epsilon / (2.0 * n) + PROMISE_SLACK,
            Side::Soundness => gap >= epsilon * epsilon / n - PROMISE_SLACK,
        };
        if !ok {
            return Err(Error::PromiseViolated(format!(
                "||p - U||_2^2 = {gap} is not on the {} side for eps = {epsilon}, n = {n}",
                side.name()
            )));
        }
        Ok(Self {
            id: id.into(),
            input: Input::Uniformity { p },
            side,
            epsilon,
            m,
        })
    }

    /// Closeness tester on samples from `p` and `q` under promise `b`.
    /// Completeness requires `||p - q||_2 <= eps/2`, soundness `>= eps`.
    pub fn closeness(
        id: impl Into<String>,
        p: Distribution,
        q: Distribution,
        b: f64,
        epsilon: f64,
        m: u64,
        side: Side,
    ) -> Result<Self> {
        check_run(epsilon, m)?;
        let norm = p.collision_probability().max(q.collision_probability());
        if !(b > 0.0 && b <= 1.0) || norm > b * (1.0 + PROMISE_SLACK) {
            return Err(Error::PromiseViolated(format!(
                "b = {b} does not bound max(||p||_2^2, ||q||_2^2) = {norm}"
            )));
        }
        let dist2 = l2_distance_squared(&p, &q)?;
        let ok = match side {
            Side::Completeness => dist2 <= epsilon * epsilon / 4.0 + PROMISE_SLACK,
            Side::Soundness => dist2 >= epsilon * epsilon - PROMISE_SLACK,
        };
        if !ok {
            return Err(Error::PromiseViolated(format!(
                "||p - q||_2 = {} is not on the {} side for eps = {epsilon}",
                dist2.sqrt(),
                side.name()
            )));
        }
        Ok(Self {
            id: id.into(),
            input: Input::Closeness { p, q, b },
            side,
            epsilon,
            m,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        match &self.input {
            Input::Uniformity { p } | Input::Closeness { p, .. } => p.n(),
        }
    }

    /// Same scenario at a different sample size.
    pub fn with_m(&self, m: u64) -> Result<Self> {
        check_run(self.epsilon, m)?;
        Ok(Self { m, ..self.clone() })
    }
}

fn check_run(epsilon: f64, m: u64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
    }
    Ok(())
}

/// Empirical failure rate of a scenario with a 99% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateEstimate {
    pub scenario: String,
    pub n: usize,
    pub m: u64,
    pub eps: f64,
    pub trials: u64,
    pub failures: u64,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl ErrorRateEstimate {
    pub const CSV_HEADER: &'static str = "scenario,n,m,eps,trials,failures,lo,hi,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario, self.n, self.m, self.eps, self.trials, self.failures, self.lo, self.hi, self.seed
        )
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(phat), (center + half).min(1.0).max(phat))
}

/// Minimum trials for [`estimate_error_rate`].
pub const MIN_TRIALS: u64 = 100;

/// Runs `trials` independent seeded trials of the scenario. Trial `t` draws
/// from stream `t` of `base_seed`, so the result does not depend on thread
/// scheduling.
pub fn estimate_error_rate(scenario: &Scenario, trials: u64, base_seed: u64) -> Result<ErrorRateEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let failures = match &scenario.input {
        Input::Uniformity { p } => {
            let table = AliasTable::new(p);
            count_failures(trials, |t| {
                let mut rng = seeded_rng(base_seed, t);
                let h = table.sample_histogram(scenario.m, &mut rng);
                Ok(test_uniformity(&h, p.n(), scenario.epsilon)?.decision)
            }, scenario.side)?
        }
        Input::Closeness { p, q, .. } => {
            let (tp, tq) = (AliasTable::new(p), AliasTable::new(q));
            count_failures(trials, |t| {
                let mut rng = seeded_rng(base_seed, t);
                let hp = tp.sample_histogram(scenario.m, &mut rng);
                let hq = tq.sample_histogram(scenario.m, &mut rng);
                Ok(test_closeness(&hp, &hq, scenario.epsilon)?.decision)
            }, scenario.side)?
        }
    };
    let (lo, hi) = wilson_interval(failures, trials, Z_99);
    Ok(ErrorRateEstimate {
        scenario: scenario.id.clone(),
        n: scenario.n(),
        m: scenario.m,
        eps: scenario.epsilon,
        trials,
        failures,
        point: failures as f64 / trials as f64,
        lo,
        hi,
        seed: base_seed,
    })
}

fn count_failures<F>(trials: u64, run: F, side: Side) -> Result<u64>
where
    F: Fn(u64) -> Result<Decision> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| run(t).map(|d| side.failed(d) as u64))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Helper for tests and sweeps: a histogram of `m` draws from stream `stream` of `seed`.
pub fn seeded_histogram(p: &Distribution, m: u64, seed: u64, stream: u64) -> Histogram {
    AliasTable::new(p).sample_histogram(m, &mut seeded_rng(seed, stream))
}
