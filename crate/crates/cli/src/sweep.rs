//! Sample-complexity sweeps.
//!
//! A sweep walks a grid of `(family parameter, n, eps)` cells. Each cell runs
//! the tester on a completeness input and a soundness input at one or more
//! sample sizes and records the empirical error rates.

use colltest::dist::derive_seed;
use colltest::numeric::ceil_count;
use colltest::oracle::{estimate_error_rate, ErrorRateEstimate, Scenario, Side, MIN_TRIALS};
use colltest::testers::{required_samples_closeness, required_samples_uniformity};
use colltest::{make_family, Distribution, Family};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest failure rate counted as a success in the binary search.
pub const TARGET_ERROR: f64 = 0.25;
/// The binary search stops once `hi / lo` is at most this.
pub const BRACKET_RATIO: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Tester {
    Uniformity,
    Closeness,
}

impl Tester {
    pub fn name(self) -> &'static str {
        match self {
            Tester::Uniformity => "uniformity",
            Tester::Closeness => "closeness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MPolicyKind {
    /// The tester's own sample-size formula.
    Formula,
    /// Every value given with `--m`.
    Explicit,
    /// Smallest `m` with both error rates at most 1/4, by geometric bisection.
    BinarySearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MPolicy {
    Formula,
    Explicit(Vec<u64>),
    BinarySearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub tester: Tester,
    /// Family used for the soundness input. Completeness always uses the uniform distribution.
    pub family: Family,
    /// Family parameters. Empty means "derive from eps" (pm-perturbation only),
    /// which puts the soundness input exactly at distance eps.
    pub params: Vec<f64>,
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub m_policy: MPolicy,
    pub trials: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Usage(msg.to_string()));
        if self.ns.is_empty() {
            return bad("empty n grid");
        }
        if self.epsilons.is_empty() {
            return bad("empty eps grid");
        }
        if self.trials < MIN_TRIALS {
            return Err(CliError::Usage(format!("trials must be at least {MIN_TRIALS}")));
        }
        if let MPolicy::Explicit(ms) = &self.m_policy {
            if ms.is_empty() {
                return bad("explicit m policy needs at least one --m");
            }
        }
        if self.params.is_empty() && self.family != Family::PmPerturbation && self.family.takes_param() {
            return bad("--param is required for this family");
        }
        if self.family == Family::Uniform {
            return bad("the soundness family cannot be uniform");
        }
        Ok(())
    }

    fn params(&self) -> Vec<Option<f64>> {
        if self.params.is_empty() {
            vec![None]
        } else {
            self.params.iter().copied().map(Some).collect()
        }
    }

    /// Cells in output order: param, then n, then eps.
    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for param in self.params() {
            for &n in &self.ns {
                for &eps in &self.epsilons {
                    let index = cells.len() as u64;
                    cells.push(Cell {
                        param,
                        n,
                        eps,
                        seed: derive_seed(self.seed, index),
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    param: Option<f64>,
    n: usize,
    eps: f64,
    seed: u64,
}

/// One CSV row: the error rate of one side of one cell at one `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub family: String,
    pub param: f64,
    pub n: usize,
    pub eps: f64,
    pub m: u64,
    pub trials: u64,
    pub failures: u64,
    pub err_lo: f64,
    pub err_hi: f64,
    pub seed: u64,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "scenario", "family", "param", "n", "eps", "m", "trials", "failures", "err_lo", "err_hi", "seed",
];

/// Per-cell outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: String,
    pub param: f64,
    pub n: usize,
    pub eps: f64,
    /// Norm promise used by the closeness tester.
    pub b: Option<f64>,
    pub m_formula: u64,
    /// Smallest passing `m` found (binary search only).
    pub m_star: Option<u64>,
    /// `m_star * eps^2 / sqrt(n)` for uniformity, `m_star * eps^2 / sqrt(b)` for closeness.
    pub implied_constant: Option<f64>,
    /// Whether the upper end of the bracket itself passed.
    pub upper_passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// `"eps"` or `"n"`.
    pub against: String,
    /// The value held fixed (n for an eps fit, eps for an n fit).
    pub fixed: f64,
    pub param: f64,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub tester: Tester,
    pub seed: u64,
    pub trials: u64,
    pub cells: Vec<CellSummary>,
    pub slopes: Vec<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

struct CellSetup {
    yes: Scenario,
    no: Scenario,
    family_param: f64,
    b: Option<f64>,
    m_formula: u64,
    scale: f64,
}

fn setup(spec: &SweepSpec, cell: &Cell) -> Result<CellSetup, CliError> {
    let (n, eps) = (cell.n, cell.eps);
    let u = Distribution::uniform(n)?;
    let param = match (cell.param, spec.tester) {
        (Some(p), _) => p,
        // ||pm(t) - U||_2^2 = 4 t^2 / n
        (None, Tester::Uniformity) => eps / 2.0,
        (None, Tester::Closeness) => eps * (n as f64).sqrt() / 2.0,
    };
    let far = make_family(spec.family, n, param)?;
    let placeholder_m = 2;
    match spec.tester {
        Tester::Uniformity => {
            let m_formula = required_samples_uniformity(n, eps)?;
            Ok(CellSetup {
                yes: Scenario::uniformity("uniformity-completeness", u, eps, placeholder_m, Side::Completeness)?,
                no: Scenario::uniformity("uniformity-soundness", far, eps, placeholder_m, Side::Soundness)?,
                family_param: param,
                b: None,
                m_formula,
                scale: eps * eps / (n as f64).sqrt(),
            })
        }
        Tester::Closeness => {
            let b = u.collision_probability().max(far.collision_probability());
            let m_formula = required_samples_closeness(b, eps)?;
            Ok(CellSetup {
                yes: Scenario::closeness(
                    "closeness-completeness",
                    u.clone(),
                    u.clone(),
                    b,
                    eps,
                    placeholder_m,
                    Side::Completeness,
                )?,
                no: Scenario::closeness("closeness-soundness", u, far, b, eps, placeholder_m, Side::Soundness)?,
                family_param: param,
                b: Some(b),
                m_formula,
                scale: eps * eps / b.sqrt(),
            })
        }
    }
}

fn row(est: &ErrorRateEstimate, family: Family, param: f64) -> SweepRow {
    SweepRow {
        scenario: est.scenario.clone(),
        family: family.name().to_string(),
        param,
        n: est.n,
        eps: est.eps,
        m: est.m,
        trials: est.trials,
        failures: est.failures,
        err_lo: est.lo,
        err_hi: est.hi,
        seed: est.seed,
    }
}

/// Runs both sides at `m`. Both sides reuse the cell's seed streams at every
/// `m`, so probes within a cell see common random numbers.
fn probe(spec: &SweepSpec, cell: &Cell, s: &CellSetup, m: u64) -> Result<(Vec<SweepRow>, bool), CliError> {
    let yes = estimate_error_rate(&s.yes.with_m(m)?, spec.trials, derive_seed(cell.seed, 0))?;
    let no = estimate_error_rate(&s.no.with_m(m)?, spec.trials, derive_seed(cell.seed, 1))?;
    let passed = yes.point <= TARGET_ERROR && no.point <= TARGET_ERROR;
    let rows = vec![
        row(&yes, Family::Uniform, 0.0),
        row(&no, spec.family, s.family_param),
    ];
    Ok((rows, passed))
}

fn run_cell(spec: &SweepSpec, cell: &Cell) -> Result<(Vec<SweepRow>, CellSummary), CliError> {
    let s = setup(spec, cell)?;
    let mut rows = Vec::new();
    let mut summary = CellSummary {
        family: spec.family.name().to_string(),
        param: s.family_param,
        n: cell.n,
        eps: cell.eps,
        b: s.b,
        m_formula: s.m_formula,
        m_star: None,
        implied_constant: None,
        upper_passed: None,
    };
    match &spec.m_policy {
        MPolicy::Formula => rows.extend(probe(spec, cell, &s, s.m_formula)?.0),
        MPolicy::Explicit(ms) => {
            for &m in ms {
                rows.extend(probe(spec, cell, &s, m)?.0);
            }
        }
        MPolicy::BinarySearch => {
            let mut lo = ceil_count((cell.n as f64).sqrt()).max(2);
            let mut hi = match spec.tester {
                Tester::Uniformity => ceil_count(3200.0 * (cell.n as f64).sqrt() / (cell.eps * cell.eps)),
                Tester::Closeness => s.m_formula,
            }
            .max(lo + 1);
            let (top_rows, upper_passed) = probe(spec, cell, &s, hi)?;
            rows.extend(top_rows);
            summary.upper_passed = Some(upper_passed);
            while hi as f64 / lo as f64 > BRACKET_RATIO && hi - lo > 1 {
                let mid = ((lo as f64 * hi as f64).sqrt().round() as u64).clamp(lo + 1, hi - 1);
                let (probe_rows, passed) = probe(spec, cell, &s, mid)?;
                rows.extend(probe_rows);
                if passed {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            summary.m_star = Some(hi);
            summary.implied_constant = Some(hi as f64 * s.scale);
        }
    }
    Ok((rows, summary))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

fn fit_slopes(spec: &SweepSpec, cells: &[CellSummary]) -> Vec<SlopeFit> {
    let mut fits = Vec::new();
    let per_param = spec.ns.len() * spec.epsilons.len();
    for (group, param) in cells.chunks(per_param).zip(spec.params()) {
        let param = param.unwrap_or(0.0);
        let mut fit = |against: &str, fixed: f64, pts: Vec<(f64, f64)>| {
            if let Some(slope) = log_log_slope(&pts) {
                fits.push(SlopeFit {
                    against: against.into(),
                    fixed,
                    param,
                    slope,
                    points: pts.len(),
                });
            }
        };
        for &n in &spec.ns {
            let pts = group
                .iter()
                .filter(|c| c.n == n)
                .filter_map(|c| c.m_star.map(|m| (c.eps, m as f64)))
                .collect();
            fit("eps", n as f64, pts);
        }
        for &eps in &spec.epsilons {
            let pts = group
                .iter()
                .filter(|c| c.eps == eps)
                .filter_map(|c| c.m_star.map(|m| (c.n as f64, m as f64)))
                .collect();
            fit("n", eps, pts);
        }
    }
    fits
}

/// Runs every cell (in parallel) and returns rows in spec order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, CliError> {
    spec.validate()?;
    let cells = spec.cells();
    let results: Vec<(Vec<SweepRow>, CellSummary)> =
        cells.par_iter().map(|c| run_cell(spec, c)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (r, s) in results {
        rows.extend(r);
        summaries.push(s);
    }
    let slopes = fit_slopes(spec, &summaries);
    Ok(SweepResult {
        rows,
        summary: SweepSummary {
            tester: spec.tester,
            seed: spec.seed,
            trials: spec.trials,
            cells: summaries,
            slopes,
        },
    })
}

pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(CliError::Usage(format!("unexpected CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
