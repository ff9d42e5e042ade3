//! Collision statistics and their closed-form moments.
//!
//! Notation: `X_i` and `Y_i` are the counts of element `i` among the `m`
//! samples from `p` and from `q`; both are `Bin(m, p_i)` / `Bin(m, q_i)` and
//! the two sample sets are independent. `s` is the self-collision count of
//! one sample set, and
//!
//! ```text
//! Z = C1 + C2 - (m-1)/m * C3
//!   = (m-1)/(2m) * A + 1/(2m) * B
//! A = sum_i (X_i - Y_i)^2 - X_i - Y_i
//! B = sum_i X_i (X_i - 1) + Y_i (Y_i - 1)
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{l2_distance_squared, l4_distance_squared, Distribution, Histogram};
use crate::error::{Error, Result};
use crate::numeric::{fsum, pairs, CompensatedSum};

/// Self- and cross-collision counts of one or two sample sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionCounts {
    pub c1: u64,
    pub c2: Option<u64>,
    pub c3: Option<u64>,
}

impl CollisionCounts {
    pub fn uniformity(h: &Histogram) -> Result<Self> {
        Ok(Self {
            c1: self_collisions(h)?,
            c2: None,
            c3: None,
        })
    }

    pub fn closeness(hp: &Histogram, hq: &Histogram) -> Result<Self> {
        Ok(Self {
            c1: self_collisions(hp)?,
            c2: Some(self_collisions(hq)?),
            c3: Some(cross_collisions(hp, hq)?),
        })
    }
}

/// Closed-form expectation and variance of a statistic, with named sub-terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub expectation: f64,
    pub variance_exact: Option<f64>,
    pub variance_bound: f64,
    pub terms: BTreeMap<String, f64>,
}

impl MomentReport {
    fn term(mut self, name: &str, value: f64) -> Self {
        self.terms.insert(name.to_string(), value);
        self
    }
}

/// `sum_i X_i (X_i - 1) / 2`: unordered equal pairs among the samples.
pub fn self_collisions(h: &Histogram) -> Result<u64> {
    h.counts().iter().try_fold(0u64, |acc, &x| {
        let pairs_here = if x < 2 {
            0
        } else {
            // x(x-1) is even, so halve the even factor first.
            let (a, b) = if x % 2 == 0 { (x / 2, x - 1) } else { (x, (x - 1) / 2) };
            a.checked_mul(b).ok_or(Error::Overflow)?
        };
        acc.checked_add(pairs_here).ok_or(Error::Overflow)
    })
}

/// `sum_i X_i Y_i`: ordered equal pairs across the two sample sets.
pub fn cross_collisions(hp: &Histogram, hq: &Histogram) -> Result<u64> {
    same_n(hp, hq)?;
    hp.counts()
        .iter()
        .zip(hq.counts())
        .try_fold(0u64, |acc, (&x, &y)| {
            acc.checked_add(x.checked_mul(y).ok_or(Error::Overflow)?)
                .ok_or(Error::Overflow)
        })
}

fn same_n(hp: &Histogram, hq: &Histogram) -> Result<()> {
    if hp.n() != hq.n() {
        return Err(Error::DomainMismatch {
            left: hp.n(),
            right: hq.n(),
        });
    }
    Ok(())
}

fn same_shape(hp: &Histogram, hq: &Histogram) -> Result<u64> {
    same_n(hp, hq)?;
    if hp.m() != hq.m() {
        return Err(Error::SampleCountMismatch {
            left: hp.m(),
            right: hq.m(),
        });
    }
    if hp.m() < 2 {
        return Err(Error::InvalidParameter(format!(
            "closeness statistic needs m >= 2, got {}",
            hp.m()
        )));
    }
    Ok(hp.m())
}

fn parts_exact(hp: &Histogram, hq: &Histogram) -> (i128, i128) {
    hp.counts()
        .iter()
        .zip(hq.counts())
        .fold((0i128, 0i128), |(a, b), (&x, &y)| {
            let (x, y) = (x as i128, y as i128);
            (a + (x - y) * (x - y) - x - y, b + x * (x - 1) + y * (y - 1))
        })
}

/// The `A` and `B` parts of the closeness statistic.
pub fn decomposition_parts(hp: &Histogram, hq: &Histogram) -> Result<(f64, f64)> {
    same_n(hp, hq)?;
    let (a, b) = parts_exact(hp, hq);
    Ok((a as f64, b as f64))
}

/// `Z = C1 + C2 - (m-1)/m * C3`, evaluated as the exact integer
/// `C1 + C2 - C3` plus `C3 / m`.
pub fn closeness_statistic(hp: &Histogram, hq: &Histogram) -> Result<f64> {
    let m = same_shape(hp, hq)?;
    let counts = CollisionCounts::closeness(hp, hq)?;
    let (c1, c2, c3) = (
        counts.c1 as i128,
        counts.c2.unwrap_or(0) as i128,
        counts.c3.unwrap_or(0) as i128,
    );
    let z = (c1 + c2 - c3) as f64 + c3 as f64 / m as f64;
    #[cfg(debug_assertions)]
    {
        // 2m Z = (m-1) A + B, exactly.
        let (a, b) = parts_exact(hp, hq);
        let m = m as i128;
        debug_assert_eq!((m - 1) * a + b, 2 * m * (c1 + c2) - 2 * (m - 1) * c3);
    }
    Ok(z)
}

fn require_m(m: u64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
    }
    Ok(m as f64)
}

/// `E[s] = C(m,2) ||p||_2^2`.
pub fn expected_s(p: &Distribution, m: u64) -> Result<f64> {
    require_m(m)?;
    Ok(pairs(m) * p.collision_probability())
}

/// Exact `Var[s] = C(m,2)(||p||_2^2 - ||p||_2^4) + m(m-1)(m-2)(||p||_3^3 - ||p||_2^4)`.
pub fn exact_var_s(p: &Distribution, m: u64) -> Result<f64> {
    let mf = require_m(m)?;
    let c2 = p.collision_probability();
    Ok(pairs(m) * (c2 - c2 * c2) + mf * (mf - 1.0) * (mf - 2.0) * p.excess_cubic())
}

/// `m^2 ||p||_2^2 + m^3 (||p||_3^3 - ||p||_2^4)`, an upper bound on `Var[s]`.
pub fn var_bound_s(p: &Distribution, m: u64) -> Result<f64> {
    let mf = require_m(m)?;
    Ok(mf * mf * p.collision_probability() + mf * mf * mf * p.excess_cubic())
}

/// Moment report for the uniformity statistic `s`.
pub fn moments_s(p: &Distribution, m: u64) -> Result<MomentReport> {
    let mf = require_m(m)?;
    let exact = exact_var_s(p, m)?;
    let c2 = p.collision_probability();
    Ok(MomentReport {
        expectation: expected_s(p, m)?,
        variance_exact: Some(exact),
        variance_bound: var_bound_s(p, m)?,
        terms: BTreeMap::new(),
    }
    .term("alpha", p.alpha())
    .term("sigma_exact", exact.sqrt())
    .term("collision_probability", c2)
    .term("excess_cubic", p.excess_cubic())
    .term("bound_m2_term", mf * mf * c2)
    .term("bound_m3_term", mf * mf * mf * p.excess_cubic()))
}

/// `E[Z] = C(m,2) ||p - q||_2^2`.
pub fn expected_z(p: &Distribution, q: &Distribution, m: u64) -> Result<f64> {
    require_m(m)?;
    Ok(pairs(m) * l2_distance_squared(p, q)?)
}

/// `E[A] = m^2 ||p - q||_2^2 - m (||p||_2^2 + ||q||_2^2)`.
pub fn expected_a(p: &Distribution, q: &Distribution, m: u64) -> Result<f64> {
    let mf = require_m(m)?;
    Ok(mf * mf * l2_distance_squared(p, q)?
        - mf * (p.collision_probability() + q.collision_probability()))
}

/// Coefficients of `m`, `m^2`, `m^3` in `Var(A_i)`.
fn var_a_i_coefficients(p: f64, q: f64) -> [f64; 3] {
    let (p2, q2) = (p * p, q * q);
    let (p3, q3) = (p2 * p, q2 * q);
    let (p4, q4) = (p2 * p2, q2 * q2);
    let c1 = -2.0 * p2 + 8.0 * p3 - 6.0 * p4 - 2.0 * q2 + 8.0 * q3 - 6.0 * q4;
    let c2 = 2.0 * (p + q) * (p + q) - 12.0 * p3 + 10.0 * p4 + 4.0 * p2 * q - 8.0 * p3 * q
        + 4.0 * p * q2
        + 4.0 * p2 * q2
        - 12.0 * q3
        - 8.0 * p * q3
        + 10.0 * q4;
    let c3 = 4.0 * (p - q) * (p - q) * (p * (1.0 - p) + q * (1.0 - q));
    [c1, c2, c3]
}

/// Coefficients of `m`, `m^2`, `m^3` in `cov(A_i, A_j)`, `i != j`.
fn cov_a_coefficients(pi: f64, pj: f64, qi: f64, qj: f64) -> [f64; 3] {
    let pp = pi * pi * pj * pj + qi * qi * qj * qj;
    let pq = pi * pj * qi * qj;
    let c1 = -6.0 * pp;
    let c2 = 2.0
        * (5.0 * pp
            - 6.0 * pq
            - 2.0 * pi * qi * (pj - qj) * (pj - qj)
            - 2.0 * pj * qj * (pi - qi) * (pi - qi));
    let c3 = -4.0 * (pi - qi) * (pj - qj) * (pi * pj + qi * qj);
    [c1, c2, c3]
}

fn poly(coeffs: [f64; 3], m: f64) -> f64 {
    m * coeffs[0] + m * m * coeffs[1] + m * m * m * coeffs[2]
}

/// Exact `Var[A] = sum_i Var(A_i) + sum_{i != j} cov(A_i, A_j)`, evaluated
/// from the per-element polynomials in `m`.
///
/// `variance_bound` is [`var_bound_a`] at the tightest valid promise
/// `b = max(||p||_2^2, ||q||_2^2)`. The terms expose the coefficient sums of
/// each power of `m`, separately for the variance and covariance parts.
pub fn exact_var_a_terms(p: &Distribution, q: &Distribution, m: u64) -> Result<MomentReport> {
    let mf = require_m(m)?;
    check_domains(p, q)?;
    let (ps, qs) = (p.probs(), q.probs());
    let n = ps.len();
    let mut var_sums = [CompensatedSum::new(); 3];
    let mut cov_sums = [CompensatedSum::new(); 3];
    for i in 0..n {
        for (acc, c) in var_sums.iter_mut().zip(var_a_i_coefficients(ps[i], qs[i])) {
            acc.add(c);
        }
        for j in (0..n).filter(|&j| j != i) {
            let coeffs = cov_a_coefficients(ps[i], ps[j], qs[i], qs[j]);
            for (acc, c) in cov_sums.iter_mut().zip(coeffs) {
                acc.add(c);
            }
        }
    }
    let var_c = var_sums.map(|s| s.value());
    let cov_c = cov_sums.map(|s| s.value());
    // Sum per power of m first; the m^3 parts of the variance and covariance
    // cancel heavily when p is close to q.
    let total_c = [var_c[0] + cov_c[0], var_c[1] + cov_c[1], var_c[2] + cov_c[2]];
    let variance = poly(total_c, mf);
    let b = p.collision_probability().max(q.collision_probability());
    Ok(MomentReport {
        expectation: expected_a(p, q, m)?,
        variance_exact: Some(variance.max(0.0)),
        variance_bound: var_bound_a(p, q, m, b)?,
        terms: BTreeMap::new(),
    }
    .term("var_m1", var_c[0])
    .term("var_m2", var_c[1])
    .term("var_m3", var_c[2])
    .term("cov_m1", cov_c[0])
    .term("cov_m2", cov_c[1])
    .term("cov_m3", cov_c[2])
    .term("var_terms_total", poly(var_c, mf))
    .term("cov_terms_total", poly(cov_c, mf))
    .term("b", b))
}

fn check_domains(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DomainMismatch {
            left: p.n(),
            right: q.n(),
        });
    }
    Ok(())
}

fn check_promise(p: &Distribution, q: &Distribution, b: f64) -> Result<()> {
    let norm = p.collision_probability().max(q.collision_probability());
    if !(b.is_finite() && b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidParameter(format!("b must lie in (0, 1], got {b}")));
    }
    if b < norm * (1.0 - 1e-12) {
        return Err(Error::PromiseViolated(format!(
            "b = {b} is below max(||p||_2^2, ||q||_2^2) = {norm}"
        )));
    }
    Ok(())
}

/// `sum_i (p_i - q_i)(p_i^2 - q_i^2)`.
fn cubic_gap(p: &Distribution, q: &Distribution) -> f64 {
    fsum(
        p.probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - b) * (a - b) * (a + b)),
    )
}

/// `100 m^2 b + 8 m^3 sum_i (p_i - q_i)(p_i^2 - q_i^2)`, an upper bound on `Var[A]`.
pub fn var_bound_a(p: &Distribution, q: &Distribution, m: u64, b: f64) -> Result<f64> {
    let mf = require_m(m)?;
    check_domains(p, q)?;
    check_promise(p, q, b)?;
    Ok(100.0 * mf * mf * b + 8.0 * mf * mf * mf * cubic_gap(p, q))
}

/// Exact `Var[B] = 4 (Var[C1] + Var[C2])`.
pub fn exact_var_b(p: &Distribution, q: &Distribution, m: u64) -> Result<f64> {
    check_domains(p, q)?;
    Ok(4.0 * (exact_var_s(p, m)? + exact_var_s(q, m)?))
}

/// `4 m^2 (||p||_2^2 + ||q||_2^2) + 4 m^3 (||p||_3^3 - ||p||_2^4 + ||q||_3^3 - ||q||_2^4)`.
pub fn var_bound_b(p: &Distribution, q: &Distribution, m: u64) -> Result<f64> {
    check_domains(p, q)?;
    Ok(4.0 * (var_bound_s(p, m)? + var_bound_s(q, m)?))
}

/// `116 m^2 b + 16 m^3 ||p - q||_4^2 b^(1/2)`, an upper bound on `Var[Z]`.
pub fn var_bound_z(p: &Distribution, q: &Distribution, m: u64, b: f64) -> Result<f64> {
    let mf = require_m(m)?;
    check_domains(p, q)?;
    check_promise(p, q, b)?;
    Ok(116.0 * mf * mf * b + 16.0 * mf * mf * mf * l4_distance_squared(p, q)? * b.sqrt())
}

/// Exact `Var[Z]`, assembled from the binomial building blocks:
///
/// ```text
/// Var Z = Var C1 + Var C2 + r^2 Var C3 - 2 r (cov(C1, C3) + cov(C2, C3)),  r = (m-1)/m
/// cov(C1, C3) = m^2 (m-1) (sum_j p_j^2 q_j - ||p||_2^2 <p, q>)
/// Var C3 = sum_i Var(X_i Y_i) + (m^2 - 2m^3) sum_{i != j} p_i p_j q_i q_j
/// ```
pub fn exact_var_z(p: &Distribution, q: &Distribution, m: u64) -> Result<f64> {
    let mf = require_m(m)?;
    check_domains(p, q)?;
    let (ps, qs) = (p.probs(), q.probs());
    let inner = fsum(ps.iter().zip(qs).map(|(a, b)| a * b));
    let p2q = fsum(ps.iter().zip(qs).map(|(a, b)| a * a * b));
    let pq2 = fsum(ps.iter().zip(qs).map(|(a, b)| a * b * b));
    let cov_c1_c3 = mf * mf * (mf - 1.0) * (p2q - p.collision_probability() * inner);
    let cov_c2_c3 = mf * mf * (mf - 1.0) * (pq2 - q.collision_probability() * inner);
    let var_diag = fsum(ps.iter().zip(qs).map(|(&a, &b)| var_xy(a, b, mf)));
    // sum_{i != j} p_i p_j q_i q_j = <p,q>^2 - sum_i p_i^2 q_i^2
    let off_diag = inner * inner - fsum(ps.iter().zip(qs).map(|(a, b)| a * a * b * b));
    let var_c3 = var_diag + (mf * mf - 2.0 * mf * mf * mf) * off_diag;
    let r = (mf - 1.0) / mf;
    let v = exact_var_s(p, m)? + exact_var_s(q, m)? + r * r * var_c3
        - 2.0 * r * (cov_c1_c3 + cov_c2_c3);
    Ok(v.max(0.0))
}

/// Moment report for the closeness statistic `Z` under promise `b`.
pub fn moments_z(p: &Distribution, q: &Distribution, m: u64, b: f64) -> Result<MomentReport> {
    let a = exact_var_a_terms(p, q, m)?;
    Ok(MomentReport {
        expectation: expected_z(p, q, m)?,
        variance_exact: Some(exact_var_z(p, q, m)?),
        variance_bound: var_bound_z(p, q, m, b)?,
        terms: BTreeMap::new(),
    }
    .term("b", b)
    .term("l2_distance_squared", l2_distance_squared(p, q)?)
    .term("expected_a", a.expectation)
    .term("var_a_exact", a.variance_exact.unwrap_or(f64::NAN))
    .term("var_a_bound", var_bound_a(p, q, m, b)?)
    .term("var_b_exact", exact_var_b(p, q, m)?)
    .term("var_b_bound", var_bound_b(p, q, m)?))
}

fn var_xy(p: f64, q: f64, m: f64) -> f64 {
    m * m * p * q + m * m * p * p * q * q - m * m * (p * q * q + p * p * q)
        + m * m * m * (p * q * q + p * p * q)
        - 2.0 * m * m * m * p * p * q * q
}

/// Closed-form binomial moments for elements `i` and `j`.
///
/// Single-index entries use `i`; cross entries need `i != j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialMoments {
    pub cov_xi_xj: f64,
    pub cov_xi2_xj: f64,
    pub cov_xi2_xj2: f64,
    pub cov_xiyi_xjyj: f64,
    pub cov_xiyi_xj: f64,
    pub cov_xi2_xi: f64,
    pub var_xi2: f64,
    pub var_xiyi: f64,
    pub cov_xi2_xiyi: f64,
    pub cov_xi_xiyi: f64,
    pub var_ai: f64,
    pub cov_ai_aj: f64,
}

impl BinomialMoments {
    pub const NAMES: [&'static str; 12] = [
        "cov_xi_xj",
        "cov_xi2_xj",
        "cov_xi2_xj2",
        "cov_xiyi_xjyj",
        "cov_xiyi_xj",
        "cov_xi2_xi",
        "var_xi2",
        "var_xiyi",
        "cov_xi2_xiyi",
        "cov_xi_xiyi",
        "var_ai",
        "cov_ai_aj",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.cov_xi_xj,
            self.cov_xi2_xj,
            self.cov_xi2_xj2,
            self.cov_xiyi_xjyj,
            self.cov_xiyi_xj,
            self.cov_xi2_xi,
            self.var_xi2,
            self.var_xiyi,
            self.cov_xi2_xiyi,
            self.cov_xi_xiyi,
            self.var_ai,
            self.cov_ai_aj,
        ]
    }
}

pub fn binomial_covariance_toolkit(
    p: &Distribution,
    q: &Distribution,
    m: u64,
    i: usize,
    j: usize,
) -> Result<BinomialMoments> {
    let m = require_m(m)?;
    check_domains(p, q)?;
    let n = p.n();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!(
            "indices ({i}, {j}) outside a domain of size {n}"
        )));
    }
    if i == j {
        return Err(Error::InvalidParameter(
            "cross moments need distinct indices".into(),
        ));
    }
    let (pi, pj, qi, qj) = (p.prob(i), p.prob(j), q.prob(i), q.prob(j));

    let cov_xi_xj = -m * pi * pj;
    let cov_xi2_xj = -m * pi * pj - 2.0 * m * (m - 1.0) * pi * pi * pj;
    let cov_xi2_xj2 = -m * pi * pj
        - 2.0 * m * (m - 1.0) * (pi * pi * pj + pi * pj * pj)
        - 2.0 * m * (m - 1.0) * (2.0 * m - 3.0) * pi * pi * pj * pj;
    let cov_xiyi_xjyj = (m * m - 2.0 * m * m * m) * pi * pj * qi * qj;
    let cov_xiyi_xj = cov_xi_xj * m * qi;

    let cov_xi2_xi = m * pi * (1.0 - pi) * (1.0 - 2.0 * pi) + 2.0 * m * m * pi * pi * (1.0 - pi);
    let (p2, p3, p4) = (pi * pi, pi * pi * pi, pi * pi * pi * pi);
    let var_xi2 = m * pi - 7.0 * m * p2 + 6.0 * m * m * p2 + 12.0 * m * p3 - 6.0 * m * p4
        - 16.0 * m * m * p3
        + 4.0 * m * m * m * p3
        + 10.0 * m * m * p4
        - 4.0 * m * m * m * p4;
    let var_xiyi = var_xy(pi, qi, m);
    let cov_xi2_xiyi = cov_xi2_xi * m * qi;
    let cov_xi_xiyi = m * m * pi * (1.0 - pi) * qi;

    Ok(BinomialMoments {
        cov_xi_xj,
        cov_xi2_xj,
        cov_xi2_xj2,
        cov_xiyi_xjyj,
        cov_xiyi_xj,
        cov_xi2_xi,
        var_xi2,
        var_xiyi,
        cov_xi2_xiyi,
        cov_xi_xiyi,
        var_ai: poly(var_a_i_coefficients(pi, qi), m),
        cov_ai_aj: poly(cov_a_coefficients(pi, pj, qi, qj), m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{histogram, SampleSet};
    use proptest::prelude::*;

    fn h(counts: &[u64]) -> Histogram {
        Histogram::from_counts(counts.to_vec()).unwrap()
    }

    fn d(w: &[f64]) -> Distribution {
        Distribution::new(w).unwrap()
    }

    fn approx(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} != {b}");
    }

    #[test]
    fn self_collision_examples() {
        assert_eq!(self_collisions(&h(&[3, 0])).unwrap(), 3);
        assert_eq!(self_collisions(&h(&[1, 1, 1])).unwrap(), 0);
        assert_eq!(self_collisions(&h(&[2, 2])).unwrap(), 2);
    }

    #[test]
    fn cross_collision_examples() {
        assert_eq!(cross_collisions(&h(&[2, 1]), &h(&[1, 2])).unwrap(), 4);
        assert_eq!(cross_collisions(&h(&[3, 0]), &h(&[0, 3])).unwrap(), 0);
        assert_eq!(cross_collisions(&h(&[5, 0]), &h(&[5, 0])).unwrap(), 25);
        assert!(cross_collisions(&h(&[1, 0]), &h(&[1, 0, 0])).is_err());
    }

    #[test]
    fn collision_counts_overflow_is_an_error() {
        let big = h(&[u64::MAX / 2]);
        assert!(matches!(self_collisions(&big), Err(Error::Overflow)));
        let big = h(&[1 << 33]);
        assert!(matches!(cross_collisions(&big, &big), Err(Error::Overflow)));
        // m = 2^32 still fits.
        assert_eq!(
            self_collisions(&h(&[1 << 32])).unwrap(),
            (1u64 << 31) * ((1u64 << 32) - 1)
        );
    }

    #[test]
    fn closeness_statistic_examples() {
        let z = closeness_statistic(&h(&[2, 1]), &h(&[1, 2])).unwrap();
        approx(z, -2.0 / 3.0);
        let (a, b) = decomposition_parts(&h(&[2, 1]), &h(&[1, 2])).unwrap();
        approx(2.0 / 6.0 * a + b / 6.0, -2.0 / 3.0);
        for m in [2u64, 5, 17] {
            approx(closeness_statistic(&h(&[m, 0]), &h(&[m, 0])).unwrap(), 0.0);
            approx(
                closeness_statistic(&h(&[m, 0]), &h(&[0, m])).unwrap(),
                2.0 * pairs(m),
            );
        }
        assert!(matches!(
            closeness_statistic(&h(&[2, 1]), &h(&[1, 1])),
            Err(Error::SampleCountMismatch { .. })
        ));
        assert!(closeness_statistic(&h(&[2, 1]), &h(&[1, 1, 1])).is_err());
        assert!(closeness_statistic(&h(&[1, 0]), &h(&[1, 0])).is_err());
    }

    #[test]
    fn expected_s_examples() {
        approx(expected_s(&Distribution::uniform(10).unwrap(), 5).unwrap(), 1.0);
        approx(expected_s(&d(&[0.75, 0.25]), 2).unwrap(), 0.625);
        approx(expected_s(&d(&[1.0, 0.0, 0.0]), 4).unwrap(), 6.0);
        assert!(expected_s(&d(&[1.0]), 1).is_err());
    }

    #[test]
    fn exact_var_s_examples() {
        approx(exact_var_s(&d(&[0.5, 0.5]), 2).unwrap(), 0.25);
        approx(exact_var_s(&d(&[0.75, 0.25]), 2).unwrap(), 15.0 / 64.0);
        for m in 2..10 {
            approx(exact_var_s(&d(&[0.0, 1.0, 0.0]), m).unwrap(), 0.0);
        }
    }

    #[test]
    fn var_bound_s_examples() {
        for n in [2usize, 7, 100] {
            let u = Distribution::uniform(n).unwrap();
            let m = 13;
            approx(var_bound_s(&u, m).unwrap(), 169.0 / n as f64);
        }
        let p = d(&[0.75, 0.25]);
        approx(var_bound_s(&p, 3).unwrap(), 6.890625);
        assert!(var_bound_s(&p, 3).unwrap() >= exact_var_s(&p, 3).unwrap());
    }

    #[test]
    fn expected_z_examples() {
        let p = d(&[0.3, 0.7]);
        approx(expected_z(&p, &p, 9).unwrap(), 0.0);
        approx(expected_z(&d(&[1.0, 0.0]), &d(&[0.0, 1.0]), 2).unwrap(), 2.0);
        approx(expected_z(&d(&[0.6, 0.4]), &d(&[0.5, 0.5]), 4).unwrap(), 0.12);
        assert!(expected_z(&p, &d(&[1.0, 1.0, 1.0]), 3).is_err());
    }

    #[test]
    fn var_a_point_mass_is_zero() {
        let p = d(&[1.0, 0.0]);
        for m in 2..8 {
            let r = exact_var_a_terms(&p, &p, m).unwrap();
            approx(r.variance_exact.unwrap(), 0.0);
            approx(r.expectation, -2.0 * m as f64);
        }
    }

    #[test]
    fn var_bound_a_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        let b = p.collision_probability();
        approx(var_bound_a(&p, &p, 7, b).unwrap(), 100.0 * 49.0 * b);
        approx(
            var_bound_a(&d(&[1.0, 0.0]), &d(&[0.0, 1.0]), 2, 1.0).unwrap(),
            528.0,
        );
        assert!(matches!(
            var_bound_a(&p, &p, 7, b / 2.0),
            Err(Error::PromiseViolated(_))
        ));
        assert!(var_bound_a(&p, &p, 7, 1.5).is_err());
    }

    #[test]
    fn var_bound_z_examples() {
        let u = Distribution::uniform(2).unwrap();
        approx(var_bound_z(&u, &u, 2, 0.5).unwrap(), 232.0);
        assert!(var_bound_z(&u, &u, 2, 0.4).is_err());

        let p = d(&[0.6, 0.3, 0.1]);
        let q = d(&[0.2, 0.2, 0.6]);
        let b = 0.5;
        let cubic = |m: u64| var_bound_z(&p, &q, m, b).unwrap() - 116.0 * (m * m) as f64 * b;
        approx(cubic(10), cubic(5) * 8.0);
    }

    #[test]
    fn toolkit_examples() {
        let u = d(&[0.5, 0.5]);
        let t = binomial_covariance_toolkit(&u, &u, 2, 0, 1).unwrap();
        approx(t.cov_xi_xj, -0.5);
        approx(t.cov_xi2_xj, -1.0);

        let p = d(&[0.0, 0.4, 0.6]);
        let q = d(&[0.0, 0.5, 0.5]);
        let t = binomial_covariance_toolkit(&p, &q, 4, 0, 2).unwrap();
        for v in [
            t.cov_xi_xj,
            t.cov_xi2_xj,
            t.cov_xi2_xj2,
            t.cov_xiyi_xjyj,
            t.cov_xiyi_xj,
            t.cov_xi2_xi,
            t.var_xi2,
            t.var_xiyi,
            t.cov_xi2_xiyi,
            t.cov_xi_xiyi,
            t.var_ai,
            t.cov_ai_aj,
        ] {
            approx(v, 0.0);
        }
        assert!(binomial_covariance_toolkit(&p, &q, 4, 1, 1).is_err());
        assert!(binomial_covariance_toolkit(&p, &q, 4, 0, 3).is_err());
    }

    #[test]
    fn moment_reports_serialize_with_stable_names() {
        let p = d(&[0.5, 0.3, 0.2]);
        let json = serde_json::to_value(moments_s(&p, 6).unwrap()).unwrap();
        for key in ["expectation", "variance_exact", "variance_bound", "terms"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let z = moments_z(&p, &d(&[0.2, 0.3, 0.5]), 6, 0.38).unwrap();
        assert!(z.variance_exact.unwrap() <= z.variance_bound);
        assert!(z.terms.contains_key("var_a_exact"));
    }

    fn pairwise_self(draws: &[u32]) -> u64 {
        let mut c = 0;
        for i in 0..draws.len() {
            for j in i + 1..draws.len() {
                c += (draws[i] == draws[j]) as u64;
            }
        }
        c
    }

    fn pairwise_cross(a: &[u32], b: &[u32]) -> u64 {
        a.iter()
            .map(|x| b.iter().filter(|y| *y == x).count() as u64)
            .sum()
    }

    fn dist_strategy(n: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.0f64..1.0, n)
            .prop_map(|mut w| {
                w[0] += 1e-3;
                Distribution::new(&w).unwrap()
            })
    }

    proptest! {
        #[test]
        fn histogram_counts_match_pairwise_counts(
            a in prop::collection::vec(0u32..12, 0..200),
            b in prop::collection::vec(0u32..12, 0..200),
        ) {
            let ha = histogram(&SampleSet::from_draws(a.clone()), 12).unwrap();
            let hb = histogram(&SampleSet::from_draws(b.clone()), 12).unwrap();
            prop_assert_eq!(self_collisions(&ha).unwrap(), pairwise_self(&a));
            prop_assert_eq!(cross_collisions(&ha, &hb).unwrap(), pairwise_cross(&a, &b));
        }

        #[test]
        fn statistic_matches_its_decomposition(
            pair in (1usize..30).prop_flat_map(|n| (
                prop::collection::vec(0u64..20, n),
                prop::collection::vec(0u64..20, n),
            )),
        ) {
            let (mut x, mut y) = pair;
            let (mx, my): (u64, u64) = (x.iter().sum(), y.iter().sum());
            // Pad the lighter side on element 0 so both have equal m >= 2.
            let m = mx.max(my).max(2);
            x[0] += m - mx;
            y[0] += m - my;
            let (hp, hq) = (h(&x), h(&y));
            let z = closeness_statistic(&hp, &hq).unwrap();
            let (a, b) = decomposition_parts(&hp, &hq).unwrap();
            let mf = m as f64;
            prop_assert!(crate::numeric::close(z, (mf - 1.0) / (2.0 * mf) * a + b / (2.0 * mf), 1e-9));
        }

        #[test]
        fn uniform_minimizes_expected_collisions(p in (2usize..20).prop_flat_map(dist_strategy), m in 2u64..1000) {
            let u = Distribution::uniform(p.n()).unwrap();
            prop_assert!(expected_s(&p, m).unwrap() >= expected_s(&u, m).unwrap() * (1.0 - 1e-12));
        }

        #[test]
        fn closeness_moments_are_symmetric(
            pq in (2usize..12).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n))),
            m in 2u64..500,
        ) {
            let (p, q) = pq;
            let b = p.collision_probability().max(q.collision_probability());
            prop_assert!(crate::numeric::close(expected_z(&p, &q, m).unwrap(), expected_z(&q, &p, m).unwrap(), 1e-12));
            prop_assert!(crate::numeric::close(var_bound_z(&p, &q, m, b).unwrap(), var_bound_z(&q, &p, m, b).unwrap(), 1e-12));
            prop_assert!(crate::numeric::close(
                exact_var_a_terms(&p, &q, m).unwrap().variance_exact.unwrap(),
                exact_var_a_terms(&q, &p, m).unwrap().variance_exact.unwrap(),
                1e-9,
            ));
        }

        #[test]
        fn moments_are_permutation_invariant(
            pq in (2usize..10).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n), Just(n))),
            m in 2u64..300,
            rot in 0usize..10,
        ) {
            let (p, q, n) = pq;
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
            let (pp, qq) = (p.permuted(&perm).unwrap(), q.permuted(&perm).unwrap());
            let b = p.collision_probability().max(q.collision_probability());
            let pairs_of = [
                (exact_var_s(&p, m).unwrap(), exact_var_s(&pp, m).unwrap()),
                (expected_z(&p, &q, m).unwrap(), expected_z(&pp, &qq, m).unwrap()),
                (exact_var_z(&p, &q, m).unwrap(), exact_var_z(&pp, &qq, m).unwrap()),
                (var_bound_z(&p, &q, m, b).unwrap(), var_bound_z(&pp, &qq, m, b).unwrap()),
                (
                    exact_var_a_terms(&p, &q, m).unwrap().variance_exact.unwrap(),
                    exact_var_a_terms(&pp, &qq, m).unwrap().variance_exact.unwrap(),
                ),
            ];
            for (a, b) in pairs_of {
                prop_assert!(crate::numeric::close(a, b, 1e-9), "{} vs {}", a, b);
            }
        }

        #[test]
        fn statistics_are_permutation_invariant(
            x in prop::collection::vec(0u64..9, 6),
            y in prop::collection::vec(0u64..9, 6),
        ) {
            let perm = [3usize, 0, 5, 1, 4, 2];
            let (mut x, mut y) = (x, y);
            let (mx, my): (u64, u64) = (x.iter().sum(), y.iter().sum());
            let m = mx.max(my).max(2);
            x[1] += m - mx;
            y[2] += m - my;
            let (hp, hq) = (h(&x), h(&y));
            let (pp, pq) = (hp.permuted(&perm).unwrap(), hq.permuted(&perm).unwrap());
            prop_assert_eq!(self_collisions(&hp).unwrap(), self_collisions(&pp).unwrap());
            prop_assert_eq!(cross_collisions(&hp, &hq).unwrap(), cross_collisions(&pp, &pq).unwrap());
            prop_assert!(crate::numeric::close(
                closeness_statistic(&hp, &hq).unwrap(),
                closeness_statistic(&pp, &pq).unwrap(),
                1e-12,
            ));
        }

        #[test]
        fn covariance_coefficient_claims(
            pq in (2usize..12).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n))),
        ) {
            let (p, q) = pq;
            let r = exact_var_a_terms(&p, &q, 2).unwrap();
            let gap = cubic_gap(&p, &q);
            let norms = p.collision_probability().powi(2) + q.collision_probability().powi(2);
            prop_assert!(r.terms["cov_m1"] <= 1e-15);
            prop_assert!(r.terms["cov_m2"] <= 10.0 * norms + 1e-12);
            prop_assert!(r.terms["cov_m3"] <= 4.0 * gap + 1e-12);
        }
    }
}
